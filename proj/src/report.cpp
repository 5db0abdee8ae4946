#include "spedge/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace spedge {

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json num_array(const Vec& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Json to_json(const SpectrumSnapshot& s) {
  Json j;
  j["t0"] = s.t0;
  j["W"] = s.W;
  j["sigmas"] = num_array(s.sigmas);
  j["ratios"] = num_array(s.ratios);
  j["kstar_argmax"] = s.kstar_argmax;
  j["kstar_weighted"] = s.kstar_weighted;
  j["kstar_dynamical"] = s.kstar_dynamical;
  j["R"] = num(s.R);
  j["g"] = num(s.g);
  j["k95"] = s.k95;
  j["dcrit"] = num(s.dcrit);
  j["sigmaW_over_dcrit"] = num(s.sigmaW_over_dcrit);
  j["noise_cv"] = num(s.noise_cv);
  j["verdict"] = verdict_name(ratio_test(s.R, s.noise_cv));
  j["rank_deficient"] = s.rank_deficient;
  j["weighted_fallback"] = s.weighted_fallback;
  j["all_zero"] = s.all_zero;
  return j;
}

Json to_json(const StabilityReport& r) {
  Json j;
  j["deltaG_frob"] = num(r.deltaG_frob);
  j["C"] = r.C;
  j["alpha"] = num_array(r.alpha);
  j["alpha_empirical"] = num_array(r.alpha_empirical);
  j["davis_kahan"] = num_array(r.dk);
  j["block_bound"] = num_array(r.block);
  j["block_argmin"] = r.block_argmin;
  j["gap_bound"] = {{"exact", num(r.gap_bound.exact)},
                    {"factored", num(r.gap_bound.factored)},
                    {"diverged", r.gap_bound.diverged}};
  return j;
}

Json to_json(const EventLog& log) {
  Json a = Json::array();
  for (const auto& e : log.events)
    a.push_back({{"t", e.t},
                 {"kind", event_kind_name(e.kind)},
                 {"position", e.position},
                 {"magnitude", num(e.magnitude)},
                 {"context", e.context}});
  return a;
}

Json to_json(const PhaseSegmentation& seg) {
  Json a = Json::array();
  for (const auto& s : seg.segments)
    a.push_back({{"start", s.start}, {"end", s.end}, {"label", phase_label_name(s.label)}});
  return a;
}

Json to_json(const GrokSignature& g) {
  Json j;
  j["detected"] = g.detected;
  j["t_candidate"] = g.t_candidate;
  j["decline_factor"] = num(g.decline_factor);
  j["concentration"] = num(g.concentration);
  j["t_metric_jump"] = g.t_metric_jump ? Json(*g.t_metric_jump) : Json(nullptr);
  return j;
}

Json to_json(const Significance& s) {
  return {{"p_value", num(s.p_value)}, {"q50", num(s.q50)}, {"q95", num(s.q95)},
          {"q99", num(s.q99)}, {"n", s.samples.size()}};
}

Json to_json(const FlowEvent& e) {
  return {{"t", num(e.t)}, {"kind", e.kind}, {"position", e.position}, {"value", num(e.value)}};
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string events_csv(const EventLog& log) {
  std::ostringstream o;
  o << "t,kind,position,magnitude,context\n";
  for (const auto& e : log.events)
    o << e.t << ',' << event_kind_name(e.kind) << ',' << e.position << ','
      << format_double(e.magnitude) << ',' << e.context << '\n';
  return o.str();
}

std::string segments_csv(const PhaseSegmentation& seg) {
  std::ostringstream o;
  o << "start,end,label\n";
  for (const auto& s : seg.segments)
    o << s.start << ',' << s.end << ',' << phase_label_name(s.label) << '\n';
  return o.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::io, "write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream o;
  o << f.rdbuf();
  return o.str();
}

}  // namespace spedge
