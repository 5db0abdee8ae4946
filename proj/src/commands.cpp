#include "spedge/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <map>
#include <sstream>

#include "spedge/parallel.hpp"

namespace spedge {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorCode::argument, msg); }

Json defaults_for(const std::string& cmd, const Json& user) {
  if (cmd == "analyze")
    return {{"input", ""}, {"W", 10}, {"stride", 1}, {"eps_floor", kEpsFloorDefault},
            {"nu", 0.0}, {"C", 1.0}, {"collapse_tol", kCollapseTolDefault},
            {"open_tol", kOpenTolDefault}, {"decline_min", kDeclineMinDefault},
            {"slope_tol", 0.01}, {"min_len", 3}, {"null_n", 0}, {"empirical", true},
            {"seed", 0}, {"out", ""}, {"format", "json"}};
  if (cmd == "nulldist")
    return {{"p", Json::array({1000000})}, {"W", Json::array({10})}, {"n", 1000},
            {"sampler", "wishart"}, {"seed", 0}, {"out", ""}, {"format", "json"}};
  const Json noise = {{"kind", "none"}, {"nu", 0.0}, {"kappa", 0.0}, {"batch_B", 1},
                      {"beta2", -1.0}};
  if (cmd == "synth") {
    const std::string kind = user.value("kind", "quadratic");
    Json d = {{"kind", kind}, {"p", 1000}, {"steps", 100}, {"seed", 0}, {"basis_seed", 1},
              {"noise", noise}, {"out", ""}, {"scalar_width", 8}};
    if (kind == "quadratic") {
      d["eta"] = 1e-3;
      d["h_outliers"] = Json::array({200.0, 150.0});
      d["h_bulk"] = 1e-3;
      d["omega"] = 0.0;
      d["outlier_coords"] = Json::array();
      d["bulk_coord"] = 0.0;
      d["val_shift"] = 0.0;
      d["precond"] = {{"kind", "identity"}, {"values", Json::array()}, {"beta2", 0.999}};
    } else if (kind == "planted") {
      d["W"] = 10;
      d["d_start"] = Json::array({10.0, 5.0});
      d["d_end"] = Json::array({10.0, 5.0});
    } else if (kind != "noise") {
      usage("synth: unknown kind '" + kind + "' (quadratic | planted | noise)");
    }
    return d;
  }
  if (cmd == "simulate") {
    const std::string sys = user.value("system", "flow");
    Json d = {{"system", sys}, {"T", 1000.0}, {"dt", 1.0}, {"seed", 0}, {"out", ""},
              {"format", "json"}};
    if (sys == "flow") {
      d["closure"] = "auto";
      d["modes"] = Json::array();
      d["injection"] = Json::array();
      d["Cdot"] = nullptr;
      d["nu_sq"] = 0.0;
      d["tr_over_p"] = 0.0;
      d["omega"] = 0.0;
      d["eta"] = 1e-3;
      d["W"] = 10.0;
      d["collapse_tol"] = kCollapseTolDefault;
      d["open_tol"] = kOpenTolDefault;
    } else if (sys == "crossing") {
      d["V"] = 0.1;
      d["drift"] = 1.0;
      d["lbar"] = 1.0;
      d["g0"] = 1.0;
    } else if (sys == "kernel") {
      d["lambdas"] = Json::array();
      d["ystar"] = Json::array();
      d["c0"] = Json::array();
      d["Kdot"] = Json::array();
      d["eta"] = 0.01;
    } else if (sys == "gap_ode") {
      d["k"] = 0.01;
      d["c"] = 0.0;
      d["A"] = 0.0;
      d["g0"] = 1.0;
      d["eps"] = -1.0;
    } else if (sys == "scaling") {
      d["p_exp"] = 1.0;
      d["q_exp"] = 2.0;
      d["staircase"] = false;
      d["s_exp"] = 0.0;
      d["tau"] = 1.0;
      d["kernel_activation"] = false;
      d["n_modes"] = 100000;
      d["eta"] = 1.0;
      d["k_lo"] = 10.0;
      d["k_hi"] = 1000.0;
      d["n_T"] = 20;
    } else {
      usage("simulate: unknown system '" + sys + "' (flow | crossing | kernel | gap_ode | scaling)");
    }
    return d;
  }
  usage("unknown command '" + cmd + "'");
}

void merge_checked(Json& base, const Json& user, const std::string& where) {
  if (!user.is_object()) usage(where + ": config must be a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!base.contains(it.key())) usage(where + ": unknown key '" + it.key() + "'");
    Json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object())
      merge_checked(slot, it.value(), where + "." + it.key());
    else
      slot = it.value();
  }
}

template <class T>
T get(const Json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    usage(std::string("key '") + key + "' has the wrong type");
  }
}

Vec get_vec(const Json& cfg, const char* key) {
  const Json& v = cfg.at(key);
  if (!v.is_array()) usage(std::string("key '") + key + "' must be an array");
  Vec out;
  for (const auto& x : v) {
    if (!x.is_number()) usage(std::string("key '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json envelope(const std::string& cmd, const Json& cfg) {
  Json r;
  r["tool"] = "spedge";
  r["version"] = SPEDGE_VERSION;
  r["command"] = cmd;
  r["seed"] = cfg.at("seed");
  r["config"] = cfg;
  r["generated_at"] = timestamp_utc();
  return r;
}

bool wants(const Json& cfg, const char* fmt) {
  const std::string f = cfg.at("format").get<std::string>();
  if (f != "json" && f != "csv" && f != "both") usage("format must be json, csv or both");
  return f == fmt || f == "both";
}

fs::path out_dir(const Json& cfg) {
  const fs::path d = cfg.at("out").get<std::string>();
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory " + d.string());
  return d;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- analyze

AnalyzeParams analyze_params(const Json& c) {
  AnalyzeParams p;
  const auto W = get<long long>(c, "W");
  const auto stride = get<long long>(c, "stride");
  const auto min_len = get<long long>(c, "min_len");
  const auto null_n = get<long long>(c, "null_n");
  if (W < 2) usage("W must be >= 2");
  if (stride < 1) usage("stride must be >= 1");
  if (min_len < 1) usage("min_len must be >= 1");
  if (null_n < 0) usage("null_n must be >= 0");
  p.W = static_cast<std::size_t>(W);
  p.stride = static_cast<std::size_t>(stride);
  p.min_len = static_cast<std::size_t>(min_len);
  p.null_n = static_cast<std::size_t>(null_n);
  p.eps_floor = get<double>(c, "eps_floor");
  p.nu = get<double>(c, "nu");
  p.C = get<double>(c, "C");
  if (!(p.C > 0)) usage("C must be positive");
  p.collapse_tol = get<double>(c, "collapse_tol");
  p.open_tol = get<double>(c, "open_tol");
  p.decline_min = get<double>(c, "decline_min");
  p.slope_tol = get<double>(c, "slope_tol");
  p.empirical = get<bool>(c, "empirical");
  p.seed = get<std::uint64_t>(c, "seed");
  return p;
}

std::string windows_csv(const AnalyzeResult& r, std::size_t W) {
  std::ostringstream o;
  o << "t0";
  for (std::size_t j = 1; j <= W; ++j) o << ",sigma_" << j;
  o << ",kstar_argmax,kstar_weighted,R,g,k95,dcrit,flags,kstar_dynamical,noise_cv,verdict,"
       "deltaG_frob,alpha_kstar";
  if (!r.null_p.empty()) o << ",p_value";
  o << '\n';
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    const auto& s = r.snapshots[i];
    const auto& st = r.stability[i];
    std::string flags;
    auto flag = [&](bool on, const char* name) {
      if (!on) return;
      if (!flags.empty()) flags += '|';
      flags += name;
    };
    flag(s.rank_deficient, "rank_deficient");
    flag(s.weighted_fallback, "weighted_fallback");
    flag(s.all_zero, "all_zero");
    o << s.t0;
    for (double x : s.sigmas) o << ',' << format_double(x);
    o << ',' << s.kstar_argmax << ',' << s.kstar_weighted << ',' << format_double(s.R) << ','
      << format_double(s.g) << ',' << s.k95 << ',' << format_double(s.dcrit) << ',' << flags << ','
      << s.kstar_dynamical << ',' << format_double(s.noise_cv) << ','
      << verdict_name(ratio_test(s.R, s.noise_cv)) << ',' << format_double(st.deltaG_frob) << ','
      << format_double(st.alpha[s.kstar_argmax - 1]);
    if (!r.null_p.empty()) o << ',' << format_double(r.null_p[i]);
    o << '\n';
  }
  return o.str();
}

Json analyze_summary(const AnalyzeResult& r, const AnalyzeParams& prm) {
  Json s;
  std::map<int, std::size_t> hist;
  Vec Rs;
  std::map<std::string, std::size_t> verdicts;
  double bbp_min = std::numeric_limits<double>::infinity();
  for (const auto& sn : r.snapshots) {
    ++hist[sn.kstar_argmax];
    Rs.push_back(sn.R);
    ++verdicts[verdict_name(ratio_test(sn.R, sn.noise_cv))];
    bbp_min = std::min(bbp_min, sn.sigmaW_over_dcrit);
  }
  Json h = Json::object();
  int mode = 1;
  std::size_t best = 0;
  for (const auto& [k, n] : hist) {
    h[std::to_string(k)] = n;
    if (n > best) {
      best = n;
      mode = k;
    }
  }
  s["windows"] = r.snapshots.size();
  s["kstar_histogram"] = h;
  s["kstar_mode"] = mode;
  Vec fin;
  for (double x : Rs)
    if (std::isfinite(x)) fin.push_back(x);
  std::sort(fin.begin(), fin.end());
  if (!fin.empty()) {
    double mean = 0;
    for (double x : fin) mean += x;
    mean /= static_cast<double>(fin.size());
    s["R"] = {{"min", fin.front()}, {"median", fin[(fin.size() - 1) / 2]}, {"max", fin.back()},
              {"mean", mean}, {"infinite", Rs.size() - fin.size()}};
  } else {
    s["R"] = {{"infinite", Rs.size()}};
  }
  Json v = Json::object();
  for (const auto& [k, n] : verdicts) v[k] = n;
  s["verdicts"] = v;
  s["bbp"] = prm.nu > 0 ? Json{{"nu", prm.nu}, {"min_sigmaW_over_dcrit", num(bbp_min)}}
                        : Json(nullptr);
  s["phases"] = r.phases ? to_json(*r.phases) : Json(nullptr);
  s["grok_g23"] = r.grok ? to_json(*r.grok) : Json(nullptr);
  std::size_t counts[5] = {};
  for (const auto& e : r.events.events) ++counts[static_cast<int>(e.kind)];
  s["event_counts"] = {{"collapse", counts[0]}, {"opening", counts[1]}, {"kstar_shift", counts[2]}};
  if (!r.null_p.empty()) s["min_p_value"] = *std::min_element(r.null_p.begin(), r.null_p.end());
  return s;
}

Json cmd_analyze(const Json& cfg) {
  const AnalyzeParams prm = analyze_params(cfg);
  const std::string input = get<std::string>(cfg, "input");
  if (input.empty()) usage("analyze needs an input stream");
  const UpdateStream s = load_any(input);
  const AnalyzeResult r = analyze_stream(s, prm);

  Json rep = envelope("analyze", cfg);
  rep["input"] = {{"p", s.p()}, {"records", s.size()}, {"scalar_width", s.header.scalar_width}};
  Json wins = Json::array();
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    Json w = to_json(r.snapshots[i]);
    w["stability"] = to_json(r.stability[i]);
    if (!r.null_p.empty()) w["p_value"] = r.null_p[i];
    wins.push_back(std::move(w));
  }
  rep["windows"] = std::move(wins);
  rep["events"] = to_json(r.events);
  rep["summary"] = analyze_summary(r, prm);

  if (!cfg.at("out").get<std::string>().empty()) {
    const fs::path d = out_dir(cfg);
    if (wants(cfg, "json")) write_text((d / "report.json").string(), dump(rep));
    if (wants(cfg, "csv")) {
      write_text((d / "windows.csv").string(), windows_csv(r, prm.W));
      write_text((d / "events.csv").string(), events_csv(r.events));
      if (r.phases) write_text((d / "segments.csv").string(), segments_csv(*r.phases));
    }
  }
  return rep;
}

// ---------------------------------------------------------------- simulate

FlowTrajectory integrate_exact_closure(FlowState s, const Mat& Cdot, double T, double dt) {
  const std::size_t n = s.modes();
  auto rhs = [&](const Vec& d) {
    const SourceTerms st = source_terms_exact(d, s.G, Cdot);
    Vec out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = -2.0 * s.eta * (s.h[j] + s.omega) * d[j] + st.S[j];
    return out;
  };
  FlowTrajectory tr;
  Vec d = s.d_sq;
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  auto record = [&](double t) {
    FlowSample fs;
    fs.t = t;
    fs.d_sq = d;
    std::tie(fs.kstar, fs.g) = kstar_and_gap(d);
    tr.samples.push_back(std::move(fs));
  };
  record(s.t);
  for (std::size_t i = 0; i < steps; ++i) {
    const Vec k1 = rhs(d);
    Vec tmp(n);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = d[j] + 0.5 * dt * k1[j];
    const Vec k2 = rhs(tmp);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = d[j] + 0.5 * dt * k2[j];
    const Vec k3 = rhs(tmp);
    for (std::size_t j = 0; j < n; ++j) tmp[j] = d[j] + dt * k3[j];
    const Vec k4 = rhs(tmp);
    for (std::size_t j = 0; j < n; ++j) {
      d[j] += dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
      if (d[j] < 0) {
        tr.events.push_back({s.t + dt * static_cast<double>(i + 1), "clamped", static_cast<int>(j) + 1, d[j]});
        d[j] = 0;
      }
    }
    record(s.t + dt * static_cast<double>(i + 1));
  }
  return tr;
}

RatioSeries flow_ratio_series(const FlowTrajectory& tr) {
  RatioSeries rs;
  for (const auto& smp : tr.samples) {
    Vec d(smp.d_sq.size());
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::sqrt(std::max(0.0, smp.d_sq[j]));
    std::sort(d.begin(), d.end(), std::greater<>());
    Vec r;
    for (std::size_t j = 0; j + 1 < d.size(); ++j)
      r.push_back(d[j + 1] > 0 ? d[j] / d[j + 1] : std::numeric_limits<double>::infinity());
    rs.t.push_back(static_cast<std::int64_t>(rs.t.size()));
    rs.ratios.push_back(r);
    rs.kstar.push_back(kstar_argmax(d).k);
  }
  return rs;
}

Json cmd_simulate(const Json& cfg) {
  const std::string sys = get<std::string>(cfg, "system");
  const double T = get<double>(cfg, "T"), dt = get<double>(cfg, "dt");
  if (!(T > 0) || !(dt > 0)) usage("T and dt must be positive");
  Json rep = envelope("simulate", cfg);
  std::ostringstream csv;
  Json events = Json::array();

  if (sys == "flow") {
    FlowState s;
    const Json& modes = cfg.at("modes");
    if (!modes.is_array() || modes.empty()) usage("flow: key 'modes' needs at least one mode");
    for (const auto& m : modes) {
      if (!m.is_object()) usage("flow: each mode is an object {h, G0, d0}");
      for (auto it = m.begin(); it != m.end(); ++it)
        if (it.key() != "h" && it.key() != "G0" && it.key() != "d0")
          usage("flow: unknown key 'modes[]." + it.key() + "'");
      if (!m.contains("h") || !m.contains("d0")) usage("flow: each mode needs 'h' and 'd0'");
      const double d0 = get<double>(m, "d0");
      s.h.push_back(get<double>(m, "h"));
      s.G.push_back(m.contains("G0") ? get<double>(m, "G0") : 0.0);
      s.d_sq.push_back(d0 * d0);
    }
    s.nu_sq = get<double>(cfg, "nu_sq");
    s.omega = get<double>(cfg, "omega");
    s.eta = get<double>(cfg, "eta");
    s.W = get<double>(cfg, "W");
    s.validate();
    std::string closure = get<std::string>(cfg, "closure");
    if (closure == "auto") closure = cfg.at("Cdot").is_null() ? "phenomenological" : "exact";
    FlowTrajectory tr;
    if (closure == "constant") {
      Vec inj = get_vec(cfg, "injection");
      if (inj.empty()) inj.assign(s.modes(), 0.0);
      tr = integrate_phenomenological(s, inj, T, dt);
    } else if (closure == "phenomenological") {
      tr = integrate_closure(s, T, dt);
    } else if (closure == "coupled") {
      tr = integrate_coupled(s, T, dt);
    } else if (closure == "exact") {
      const Json& c = cfg.at("Cdot");
      if (c.is_null()) usage("flow: closure 'exact' requires key 'Cdot'");
      const std::size_t n = s.modes();
      if (!c.is_array() || c.size() != n) usage("flow: 'Cdot' must be an n x n array");
      Mat Cd(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!c[i].is_array() || c[i].size() != n) usage("flow: 'Cdot' must be an n x n array");
        for (std::size_t j = 0; j < n; ++j) Cd(i, j) = c[i][j].get<double>();
      }
      tr = integrate_exact_closure(s, Cd, T, dt);
    } else {
      usage("flow: unknown closure '" + closure +
            "' (auto | phenomenological | exact | coupled | constant)");
    }
    const EventLog log = tr.samples.size() >= 3
                             ? detect_gap_events(flow_ratio_series(tr), get<double>(cfg, "collapse_tol"),
                                                 get<double>(cfg, "open_tol"))
                             : EventLog{};
    for (const auto& e : log.events)
      events.push_back({{"t", tr.samples[static_cast<std::size_t>(e.t)].t},
                        {"kind", event_kind_name(e.kind)},
                        {"position", e.position},
                        {"magnitude", num(e.magnitude)}});
    for (const auto& e : tr.events) events.push_back(to_json(e));
    const NoiseFlow nf = noise_flow(s, get<double>(cfg, "tr_over_p"), T, dt);
    csv << "t";
    for (std::size_t j = 1; j <= s.modes(); ++j) csv << ",d_" << j;
    csv << ",g,kstar,nu_sq\n";
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
      const auto& smp = tr.samples[i];
      csv << format_double(smp.t);
      for (double x : smp.d_sq) csv << ',' << format_double(std::sqrt(std::max(0.0, x)));
      const double nu = i < nf.nu_sq.size() ? nf.nu_sq[i] : nf.nu_sq.back();
      csv << ',' << format_double(smp.g) << ',' << smp.kstar << ',' << format_double(nu) << '\n';
    }
    rep["summary"] = {{"samples", tr.samples.size()},
                      {"final_d_sq", num_array(tr.samples.back().d_sq)},
                      {"max_residual", num(tr.max_residual)},
                      {"min_pair_gap", num(tr.min_pair_gap)},
                      {"substeps", tr.substeps}};
  } else if (sys == "crossing") {
    const double V = get<double>(cfg, "V"), drift = get<double>(cfg, "drift");
    const double lbar = get<double>(cfg, "lbar"), g0 = get<double>(cfg, "g0");
    csv << "t,lambda_plus,lambda_minus,gap\n";
    double gmin = std::numeric_limits<double>::infinity();
    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    for (std::size_t i = 0; i <= n; ++i) {
      const double t = -0.5 * T + dt * static_cast<double>(i);
      const auto [hi, lo] = lz_levels(lbar, drift, V, t);
      gmin = std::min(gmin, hi - lo);
      csv << format_double(t) << ',' << format_double(hi) << ',' << format_double(lo) << ','
          << format_double(hi - lo) << '\n';
    }
    const CrossingGeometry geo = avoided_crossing(V, drift, g0);
    rep["summary"] = {{"g_min_measured", gmin}, {"g_min", geo.g_min}, {"duration", num(geo.duration)},
                      {"rotation", geo.rotation}};
  } else if (sys == "kernel") {
    const Vec lam = get_vec(cfg, "lambdas"), ys = get_vec(cfg, "ystar");
    Vec c = get_vec(cfg, "c0");
    const std::size_t n = lam.size();
    if (n == 0 || ys.size() != n || c.size() != n)
      usage("kernel: lambdas, ystar and c0 must be non-empty and equal in length");
    const Json& kj = cfg.at("Kdot");
    Mat K(n, n);
    if (!kj.is_array() || kj.size() != n) usage("kernel: 'Kdot' must be an n x n array");
    for (std::size_t i = 0; i < n; ++i) {
      if (!kj[i].is_array() || kj[i].size() != n) usage("kernel: 'Kdot' must be an n x n array");
      for (std::size_t j = 0; j < n; ++j) K(i, j) = kj[i][j].get<double>();
    }
    const double eta = get<double>(cfg, "eta");
    const KernelRun run = evolve_kernel(c, ys, lam, [&](double) { return K; }, eta, T, dt);
    csv << "j,c_final,lambda_final\n";
    for (std::size_t j = 0; j < n; ++j)
      csv << j + 1 << ',' << format_double(run.c_final[j]) << ','
          << format_double(run.lambdas_final[j]) << '\n';
    rep["summary"] = {{"A_max", num(run.A_max)}, {"transfer", num(run.transfer)}};
  } else if (sys == "gap_ode") {
    const GapOdeRun run =
        integrate_gap_ode(get<double>(cfg, "k"), get<double>(cfg, "c"), get<double>(cfg, "A"),
                          get<double>(cfg, "g0"), T, dt, get<double>(cfg, "eps"));
    csv << "t,g\n";
    for (std::size_t i = 0; i < run.t.size(); ++i)
      csv << format_double(run.t[i]) << ',' << format_double(run.g[i]) << '\n';
    if (std::isfinite(run.t_hit))
      events.push_back({{"t", run.t_hit}, {"kind", "collapse"}, {"position", 1}, {"magnitude", 0.0}});
    rep["summary"] = {{"g_min", run.g_min}, {"t_min", run.t_min}, {"t_hit", num(run.t_hit)}};
  } else {
    ScalingSpec sp;
    sp.p_exp = get<double>(cfg, "p_exp");
    sp.q_exp = get<double>(cfg, "q_exp");
    sp.staircase = get<bool>(cfg, "staircase");
    sp.s_exp = get<double>(cfg, "s_exp");
    sp.tau = get<double>(cfg, "tau");
    sp.kernel_activation = get<bool>(cfg, "kernel_activation");
    sp.n_modes = get<std::size_t>(cfg, "n_modes");
    sp.eta = get<double>(cfg, "eta");
    sp.T_grid = scaling_T_grid(sp, get<double>(cfg, "k_lo"), get<double>(cfg, "k_hi"),
                               get<std::size_t>(cfg, "n_T"));
    const ScalingFit fit = scaling_law_sim(sp);
    csv << "T,L\n";
    for (std::size_t i = 0; i < fit.T.size(); ++i)
      csv << format_double(fit.T[i]) << ',' << format_double(fit.L[i]) << '\n';
    rep["summary"] = {{"slope", fit.slope}, {"intercept", fit.intercept},
                      {"predicted", fit.predicted}};
  }
  rep["events"] = events;
  rep["series_csv"] = csv.str();
  if (!cfg.at("out").get<std::string>().empty()) {
    const fs::path d = out_dir(cfg);
    if (wants(cfg, "json")) write_text((d / "report.json").string(), dump(rep));
    write_text((d / "series.csv").string(), csv.str());
    write_text((d / "events.json").string(), dump(events));
  }
  return rep;
}

// ---------------------------------------------------------------- synth

Json cmd_synth(const Json& cfg) {
  SynthOutput so = synth_from_config(cfg);
  const auto width = get<int>(cfg, "scalar_width");
  if (width != 4 && width != 8) usage("scalar_width must be 4 or 8");
  so.stream.header.scalar_width = static_cast<std::uint8_t>(width);
  Json rep = envelope("synth", cfg);
  rep["truth"] = so.truth;
  rep["records"] = so.stream.size();
  const std::string out = get<std::string>(cfg, "out");
  if (!out.empty()) {
    write_stream(out, so.stream);
    Json truth = so.truth;
    truth["config"] = cfg;
    truth["version"] = SPEDGE_VERSION;
    write_text(out + ".truth.json", dump(truth));
  }
  return rep;
}

// ---------------------------------------------------------------- nulldist

Json cmd_nulldist(const Json& cfg) {
  auto as_list = [](const Json& j) {
    std::vector<std::uint64_t> v;
    if (j.is_array())
      for (const auto& x : j) v.push_back(x.get<std::uint64_t>());
    else
      v.push_back(j.get<std::uint64_t>());
    return v;
  };
  std::vector<std::uint64_t> ps, Ws;
  try {
    ps = as_list(cfg.at("p"));
    Ws = as_list(cfg.at("W"));
  } catch (const nlohmann::json::exception&) {
    usage("nulldist: p and W must be positive integers or lists of them");
  }
  const auto n = get<std::size_t>(cfg, "n");
  const auto seed = get<std::uint64_t>(cfg, "seed");
  const std::string sm = get<std::string>(cfg, "sampler");
  if (sm != "wishart" && sm != "materialized") usage("sampler must be wishart or materialized");
  const NullSampler kind = sm == "wishart" ? NullSampler::wishart : NullSampler::materialized;

  Json rep = envelope("nulldist", cfg);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "p,W,q50,q95,q99\n";
  std::uint64_t cell = 0;
  for (auto p : ps)
    for (auto W : Ws) {
      const Significance sig =
          ratio_significance(1.0, static_cast<std::size_t>(W), p, n, derive_seed(seed, cell++), kind);
      rows.push_back({{"p", p}, {"W", W}, {"q50", sig.q50}, {"q95", sig.q95}, {"q99", sig.q99}});
      csv << p << ',' << W << ',' << format_double(sig.q50) << ',' << format_double(sig.q95) << ','
          << format_double(sig.q99) << '\n';
    }
  rep["quantiles"] = rows;
  if (!cfg.at("out").get<std::string>().empty()) {
    const fs::path d = out_dir(cfg);
    if (wants(cfg, "json")) write_text((d / "nulldist.json").string(), dump(rep));
    if (wants(cfg, "csv")) write_text((d / "nulldist.csv").string(), csv.str());
  }
  return rep;
}

}  // namespace

// ---------------------------------------------------------------- public

std::size_t window_count(std::size_t n, std::size_t W, std::size_t stride) {
  if (W < 2) throw Error(ErrorCode::argument, "window size must be >= 2");
  if (stride < 1) throw Error(ErrorCode::argument, "stride must be >= 1");
  if (W > n)
    throw Error(ErrorCode::gap, "window of " + std::to_string(W) + " exceeds the " +
                                    std::to_string(n) + "-record stream");
  return (n - W) / stride + 1;
}

AnalyzeResult analyze_stream(const UpdateStream& s, const AnalyzeParams& prm) {
  const std::size_t nw = window_count(s.size(), prm.W, prm.stride);
  AnalyzeResult r;
  r.snapshots.resize(nw);
  r.stability.resize(nw);
  if (prm.null_n > 0) r.null_p.resize(nw);
  AnalyzeOptions opt;
  opt.eps_floor = prm.eps_floor;
  opt.nu = prm.nu;
  parallel_for(nw, [&](std::size_t i) {
    const auto t0 = static_cast<std::int64_t>(i * prm.stride);
    const TrajectoryWindow w = window_at(s, t0, prm.W);
    r.snapshots[i] = analyze_window(w, opt);
    // The slide to the successor window when one exists, else the slide in.
    const std::size_t first = static_cast<std::size_t>(t0);
    double dG = 0;
    if (first + prm.W < s.size())
      dG = slide_delta_frob(s.records[first + prm.W].delta, s.records[first].delta);
    else if (first > 0)
      dG = slide_delta_frob(s.records[first + prm.W - 1].delta, s.records[first - 1].delta);
    r.stability[i] =
        stability_report(w, r.snapshots[i], dG, prm.C, prm.empirical && prm.W >= 4);
    if (prm.null_n > 0)
      r.null_p[i] = ratio_significance(r.snapshots[i].R, prm.W, s.p(), prm.null_n,
                                       derive_seed(prm.seed, i))
                        .p_value;
  });
  if (nw >= 3) r.events = detect_gap_events(r.snapshots, prm.collapse_tol, prm.open_tol);
  Vec R;
  for (const auto& sn : r.snapshots) R.push_back(std::isfinite(sn.R) ? sn.R : 1e300);
  if (nw >= 3 * prm.min_len && nw >= 2) r.phases = segment_phases(R, prm.slope_tol, prm.min_len);
  if (nw >= 5 && prm.W >= 3) {
    Vec g23;
    for (const auto& sn : r.snapshots) g23.push_back(sn.sigmas[1] - sn.sigmas[2]);
    r.grok = grok_signature(g23, std::nullopt, prm.decline_min);
  }
  return r;
}

Json resolve_config(const std::string& command, const Json& user) {
  const Json u = user.is_null() ? Json::object() : user;
  Json base = defaults_for(command, u);
  merge_checked(base, u, command);
  return base;
}

Json run_command(const std::string& command, const Json& user_config) {
  // A whole report may be passed back in; its embedded config is replayed.
  const Json& src = user_config.contains("config") && user_config.contains("command")
                        ? user_config.at("config")
                        : user_config;
  const Json cfg = resolve_config(command, src);
  if (command == "analyze") return cmd_analyze(cfg);
  if (command == "simulate") return cmd_simulate(cfg);
  if (command == "synth") return cmd_synth(cfg);
  return cmd_nulldist(cfg);
}

std::string report_fingerprint(const Json& report) {
  Json r = report;
  r.erase("generated_at");
  return r.dump();
}

NoiseSpec noise_from_json(const Json& j) {
  NoiseSpec n;
  const std::string kind = j.value("kind", "none");
  if (kind == "none") n.kind = NoiseSpec::Kind::none;
  else if (kind == "isotropic") n.kind = NoiseSpec::Kind::isotropic;
  else if (kind == "colored") n.kind = NoiseSpec::Kind::colored;
  else usage("noise.kind must be none, isotropic or colored");
  n.nu = j.value("nu", 0.0);
  n.kappa = j.value("kappa", 0.0);
  n.batch_B = j.value("batch_B", 1u);
  n.beta2 = j.value("beta2", -1.0);
  return n;
}

Json noise_to_json(const NoiseSpec& n) {
  const char* k = n.kind == NoiseSpec::Kind::none        ? "none"
                  : n.kind == NoiseSpec::Kind::isotropic ? "isotropic"
                                                         : "colored";
  return {{"kind", k}, {"nu", n.nu}, {"kappa", n.kappa}, {"batch_B", n.batch_B}, {"beta2", n.beta2}};
}

SynthOutput synth_from_config(const Json& cfg) {
  const std::string kind = get<std::string>(cfg, "kind");
  const auto p = get<std::size_t>(cfg, "p");
  const auto steps = get<std::size_t>(cfg, "steps");
  const auto seed = get<std::uint64_t>(cfg, "seed");
  const auto basis_seed = get<std::uint64_t>(cfg, "basis_seed");
  const NoiseSpec noise = noise_from_json(cfg.at("noise"));
  if (p < 1 || steps < 1) usage("synth: p and steps must be positive");
  SynthOutput out;
  out.truth["kind"] = kind;
  out.truth["seed"] = seed;
  out.truth["noise_spec"] = noise_to_json(noise);
  out.truth["h_outliers"] = Json::array();
  out.truth["planted_d_schedules"] = Json::array();

  if (kind == "quadratic") {
    QuadraticLandscape L;
    L.p = p;
    L.h_outliers = get_vec(cfg, "h_outliers");
    L.h_bulk = get<double>(cfg, "h_bulk");
    L.omega = get<double>(cfg, "omega");
    L.basis_seed = basis_seed;
    const Json& pc = cfg.at("precond");
    const std::string pk = pc.value("kind", "identity");
    if (pk == "identity") L.precond.kind = Preconditioner::Kind::identity;
    else if (pk == "diagonal") {
      L.precond.kind = Preconditioner::Kind::diagonal;
      L.precond.values = get_vec(pc, "values");
    } else if (pk == "adam_like") {
      L.precond.kind = Preconditioner::Kind::adam_like;
      L.precond.beta2 = pc.value("beta2", 0.999);
    } else usage("precond.kind must be identity, diagonal or adam_like");
    Vec coords = get_vec(cfg, "outlier_coords");
    if (coords.empty()) coords.assign(L.h_outliers.size(), 1.0);
    const double shift = get<double>(cfg, "val_shift");
    Quadratic Q0(L);
    if (shift != 0.0) {
      // Validation minimizer moved along alternating-sign outlier directions.
      Vec sc(L.h_outliers.size());
      for (std::size_t j = 0; j < sc.size(); ++j) sc[j] = (j % 2 ? -shift : shift);
      L.theta_star_val = Q0.compose_theta(sc, 0.0, 0);
    }
    const Quadratic Q(L);
    const Vec theta0 = Q.compose_theta(coords, get<double>(cfg, "bulk_coord"),
                                       derive_seed(basis_seed, 0xb0b));
    QuadraticRun run = run_quadratic(Q, theta0, get<double>(cfg, "eta"), steps, noise, seed);
    out.stream = std::move(run.stream);
    out.truth["h_outliers"] = num_array(L.h_outliers);
    out.truth["h_bulk"] = L.h_bulk;
    out.truth["eta"] = get<double>(cfg, "eta");
    out.truth["diverged"] = run.diverged;
    if (run.diverged) out.truth["diverged_at"] = run.diverged_at;
    out.truth["unstable_by_design"] = run.unstable_by_design;
  } else if (kind == "planted") {
    const Vec a = get_vec(cfg, "d_start"), b = get_vec(cfg, "d_end");
    if (a.size() != b.size()) usage("synth: d_start and d_end differ in length");
    const auto W = get<std::size_t>(cfg, "W");
    const Mat S = linear_schedule(steps, a, b);
    const auto dirs = householder_basis(p, a.size(), basis_seed);
    out.stream = planted_signal_stream(dirs, S, W, noise, p, steps, seed);
    out.truth["planted_d_schedules"] = {{"start", num_array(a)}, {"end", num_array(b)},
                                        {"shape", "linear"}, {"W", W}};
  } else {
    out.stream = pure_noise_stream(p, steps, noise, seed);
  }
  return out;
}

}  // namespace spedge
