#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spedge/spedge.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitUsage = 64;
constexpr int kExitNumerical = 70;

int exit_code(spedge_status s) {
  switch (s) {
    case SPEDGE_OK:
      return kExitOk;
    case SPEDGE_E_IO:
    case SPEDGE_E_FORMAT:
    case SPEDGE_E_CORRUPTION:
    case SPEDGE_E_ORDERING:
    case SPEDGE_E_GAP:
      return kExitIo;
    case SPEDGE_E_ARGUMENT:
    case SPEDGE_E_NOT_APPLICABLE:
      return kExitUsage;
    default:
      return kExitNumerical;
  }
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> out, format;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config (a previous report replays its config)");
  app->add_option("--set", c.sets, "Override a config key: key=value, value parsed as JSON");
  app->add_option("--out", c.out, "Output directory (stream path for synth)");
  app->add_option("--format", c.format, "json | csv | both")->check(CLI::IsMember({"json", "csv", "both"}));
  app->add_option("--seed", c.seed, "Master RNG seed");
}

Json load_config(const Common& c) {
  Json cfg = Json::object();
  if (!c.config_path.empty()) {
    std::ifstream f(c.config_path);
    if (!f) throw std::runtime_error("io:cannot open config " + c.config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    try {
      cfg = Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(std::string("usage:config is not valid JSON: ") + e.what());
    }
    if (cfg.contains("config") && cfg.contains("command")) cfg = cfg["config"];
  }
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("usage:--set expects key=value");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    Json v;
    try {
      v = Json::parse(val);
    } catch (const nlohmann::json::parse_error&) {
      v = val;
    }
    std::string ptr = "/" + key;
    for (char& ch : ptr)
      if (ch == '.') ch = '/';
    cfg[Json::json_pointer(ptr)] = v;
  }
  if (c.out) cfg["out"] = *c.out;
  if (c.format) cfg["format"] = *c.format;
  if (c.seed) cfg["seed"] = *c.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral edge analysis of training trajectories"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spedge_version());
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = SPEDGE_THREADS or hardware)");

  Common ca, cs, cy, cn;

  auto* analyze = app.add_subcommand("analyze", "Per-window spectra, stability and events");
  add_common(analyze, ca);
  std::string input;
  std::optional<long long> W, stride, null_n;
  std::optional<double> eps_floor, collapse_tol, decline_min, C;
  analyze->add_option("--input", input, "Stream file or JSON manifest");
  analyze->add_option("--window,-W", W, "Window size");
  analyze->add_option("--stride", stride, "Window stride");
  analyze->add_option("--eps-floor", eps_floor, "Weighted k* noise floor");
  analyze->add_option("--collapse-tol", collapse_tol, "Collapse threshold above 1");
  analyze->add_option("--decline-min", decline_min, "Minimum g23 decline factor");
  analyze->add_option("--C", C, "Stability constant");
  analyze->add_option("--null-n", null_n, "Monte Carlo draws for per-window p-values (0 = off)");

  auto* simulate = app.add_subcommand("simulate", "Integrate a flow system from a config");
  add_common(simulate, cs);

  auto* synth = app.add_subcommand("synth", "Write a synthetic stream and its ground truth");
  add_common(synth, cy);

  auto* nulldist = app.add_subcommand("nulldist", "Null quantiles of the max consecutive ratio");
  add_common(nulldist, cn);
  std::vector<long long> nd_p, nd_W;
  std::optional<long long> nd_n;
  nulldist->add_option("--p", nd_p, "Dimensions");
  nulldist->add_option("--window,-W", nd_W, "Window sizes");
  nulldist->add_option("--null-n", nd_n, "Monte Carlo draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  spedge_set_threads(threads);

  std::string command;
  Json cfg;
  try {
    if (analyze->parsed()) {
      command = "analyze";
      cfg = load_config(ca);
      if (!input.empty()) cfg["input"] = input;
      if (W) cfg["W"] = *W;
      if (stride) cfg["stride"] = *stride;
      if (eps_floor) cfg["eps_floor"] = *eps_floor;
      if (collapse_tol) cfg["collapse_tol"] = *collapse_tol;
      if (decline_min) cfg["decline_min"] = *decline_min;
      if (C) cfg["C"] = *C;
      if (null_n) cfg["null_n"] = *null_n;
    } else if (simulate->parsed()) {
      command = "simulate";
      cfg = load_config(cs);
    } else if (synth->parsed()) {
      command = "synth";
      cfg = load_config(cy);
    } else {
      command = "nulldist";
      cfg = load_config(cn);
      if (!nd_p.empty()) cfg["p"] = nd_p;
      if (!nd_W.empty()) cfg["W"] = nd_W;
      if (nd_n) cfg["n"] = *nd_n;
    }
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    const bool io = msg.rfind("io:", 0) == 0;
    std::cerr << "spedge: " << msg.substr(msg.find(':') + 1) << '\n';
    return io ? kExitIo : kExitUsage;
  }

  char* report = nullptr;
  const std::string text = cfg.dump();
  const spedge_status st = spedge_run(command.c_str(), text.c_str(), &report);
  if (st != SPEDGE_OK) {
    std::cerr << "spedge " << command << ": " << spedge_status_name(st) << ": "
              << spedge_last_error() << '\n';
    return exit_code(st);
  }
  if (!cfg.contains("out") || cfg["out"].get<std::string>().empty()) std::cout << report << '\n';
  spedge_string_free(report);
  return kExitOk;
}
