#pragma once

#include <string>

#include "json.hpp"
#include "spedge/events.hpp"
#include "spedge/flow.hpp"
#include "spedge/spectra.hpp"
#include "spedge/stability.hpp"

namespace spedge {

using Json = nlohmann::ordered_json;

// Non-finite values serialize as null; JSON has no spelling for them.
Json num(double x);
Json num_array(const Vec& v);

Json to_json(const SpectrumSnapshot& s);
Json to_json(const StabilityReport& r);
Json to_json(const EventLog& log);
Json to_json(const PhaseSegmentation& seg);
Json to_json(const GrokSignature& g);
Json to_json(const Significance& s);
Json to_json(const FlowEvent& e);

std::string format_double(double x);  // shortest round-trip text, "nan"/"inf" spelled out

std::string events_csv(const EventLog& log);
std::string segments_csv(const PhaseSegmentation& seg);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace spedge
