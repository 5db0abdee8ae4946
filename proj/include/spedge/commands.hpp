#pragma once

#include <string>

#include "spedge/report.hpp"
#include "spedge/synth.hpp"
#include "spedge/trajstore.hpp"

namespace spedge {

struct AnalyzeParams {
  std::size_t W = 10;
  std::size_t stride = 1;
  double eps_floor = kEpsFloorDefault;
  double nu = 0;
  double C = 1.0;
  double collapse_tol = kCollapseTolDefault;
  double open_tol = kOpenTolDefault;
  double decline_min = kDeclineMinDefault;
  double slope_tol = 0.01;
  std::size_t min_len = 3;
  std::size_t null_n = 0;
  std::uint64_t seed = 0;
  bool empirical = true;
};

struct AnalyzeResult {
  std::vector<SpectrumSnapshot> snapshots;
  std::vector<StabilityReport> stability;
  std::vector<double> null_p;  // per window, empty unless null_n > 0
  EventLog events;
  std::optional<PhaseSegmentation> phases;
  std::optional<GrokSignature> grok;
};

// Windows start at 0, stride, 2 stride, ...: floor((n - W) / stride) + 1 of them.
std::size_t window_count(std::size_t n, std::size_t W, std::size_t stride);
AnalyzeResult analyze_stream(const UpdateStream& s, const AnalyzeParams& prm);

// Fills defaults and rejects unknown keys (ErrorCode::argument naming the key).
Json resolve_config(const std::string& command, const Json& user);

// Runs analyze | simulate | synth | nulldist on a config object. Files go to
// config["out"] when it is non-empty. The returned report embeds the resolved
// config, seed and version; the wall-clock time sits in "generated_at" only.
Json run_command(const std::string& command, const Json& user_config);

// The report without its timestamp, as compared for reproducibility.
std::string report_fingerprint(const Json& report);

// Synthetic streams from a resolved synth config; exposed for tests.
struct SynthOutput {
  UpdateStream stream;
  Json truth;
};
SynthOutput synth_from_config(const Json& cfg);
NoiseSpec noise_from_json(const Json& j);
Json noise_to_json(const NoiseSpec& n);

}  // namespace spedge
