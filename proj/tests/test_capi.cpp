// Exercises the shared library through its C header only, and the CLI's exit codes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "spedge/spedge.h"
#include "tmpdir.hpp"

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPEDGE_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string planted_stream() {
  static const std::string path = [] {
    const std::string p = scratch("capi_planted.bin");
    const std::string cfg = R"({"kind": "planted", "p": 300, "steps": 40, "W": 10, "out": ")" + p + "\"}";
    char* rep = nullptr;
    REQUIRE(spedge_run("synth", cfg.c_str(), &rep) == SPEDGE_OK);
    spedge_string_free(rep);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(spedge_status_name(SPEDGE_OK)) == "ok");
  CHECK(std::string(spedge_status_name(SPEDGE_E_GAP)) == "gap");
  CHECK(std::string(spedge_status_name(static_cast<spedge_status>(42))) == "unknown");
  CHECK(std::string(spedge_version()).size() > 0);
}

TEST_CASE("stream handle round trip and window analysis") {
  spedge_stream* s = nullptr;
  REQUIRE(spedge_stream_open(planted_stream().c_str(), &s) == SPEDGE_OK);
  CHECK(spedge_stream_count(s) == 40);
  CHECK(spedge_stream_dim(s) == 300);
  std::vector<double> buf(300);
  CHECK(spedge_stream_delta(s, 0, buf.data(), buf.size()) == SPEDGE_OK);
  CHECK(spedge_stream_delta(s, 0, buf.data(), 10) == SPEDGE_E_ARGUMENT);
  CHECK(spedge_stream_delta(s, 40, buf.data(), buf.size()) == SPEDGE_E_ARGUMENT);

  spedge_snapshot* snap = nullptr;
  REQUIRE(spedge_analyze_window(s, 0, 10, 0.0, &snap) == SPEDGE_OK);
  const size_t n = spedge_snapshot_sigmas(snap, nullptr, 0);
  CHECK(n == 10);
  std::vector<double> sig(n);
  spedge_snapshot_sigmas(snap, sig.data(), sig.size());
  CHECK(sig[0] == doctest::Approx(10.0).epsilon(0.01));
  CHECK(sig[1] == doctest::Approx(5.0).epsilon(0.01));
  CHECK(spedge_snapshot_kstar(snap) == 2);
  CHECK(std::isinf(spedge_snapshot_ratio(snap)));
  CHECK(spedge_snapshot_gap(snap) == doctest::Approx(5.0).epsilon(0.02));  // sigma_2 - sigma_3
  spedge_snapshot_free(snap);

  snap = reinterpret_cast<spedge_snapshot*>(1);
  CHECK(spedge_analyze_window(s, 35, 10, 0.0, &snap) == SPEDGE_E_GAP);
  CHECK(snap == nullptr);
  CHECK(std::string(spedge_last_error()).size() > 0);
  spedge_stream_free(s);
}

TEST_CASE("errors come back as codes") {
  spedge_stream* s = nullptr;
  CHECK(spedge_stream_open("/nonexistent/stream.bin", &s) == SPEDGE_E_IO);
  CHECK(s == nullptr);
  CHECK(spedge_stream_open(nullptr, &s) == SPEDGE_E_ARGUMENT);
  char* rep = nullptr;
  CHECK(spedge_run("analyze", R"({"Window": 3})", &rep) == SPEDGE_E_ARGUMENT);
  CHECK(std::string(spedge_last_error()).find("Window") != std::string::npos);
  CHECK(spedge_run("analyze", "{not json", &rep) == SPEDGE_E_ARGUMENT);
  CHECK(spedge_run("bogus", "{}", &rep) == SPEDGE_E_ARGUMENT);
  CHECK(rep == nullptr);
  double pv = 0, q = 0;
  CHECK(spedge_ratio_significance(1.0, 5, 1000, 10, 0, &pv, &q) == SPEDGE_E_ARGUMENT);
  REQUIRE(spedge_ratio_significance(5.0, 5, 1000, 200, 1, &pv, &q) == SPEDGE_OK);
  CHECK(pv < 0.01);
  CHECK(q > 1.0);
  spedge_stream_free(nullptr);
  spedge_snapshot_free(nullptr);
  spedge_string_free(nullptr);
}

TEST_CASE("spedge_run writes a report with the resolved config") {
  char* rep = nullptr;
  const std::string cfg = "{\"input\": \"" + planted_stream() + "\", \"W\": 10, \"stride\": 10}";
  REQUIRE(spedge_run("analyze", cfg.c_str(), &rep) == SPEDGE_OK);
  const std::string text = rep;
  spedge_string_free(rep);
  CHECK(text.find("\"windows\"") != std::string::npos);
  CHECK(text.find("\"stride\": 10") != std::string::npos);
}

TEST_CASE("CLI exit codes") {
  const std::string in = planted_stream();
  CHECK(run_cli("analyze --input " + in + " -W 10 --stride 10") == 0);
  CHECK(run_cli("analyze --input " + in + " -W 500") == 2);
  CHECK(run_cli("analyze --input /nonexistent/x.bin") == 2);
  CHECK(run_cli("analyze --bogus-flag") == 64);
  CHECK(run_cli("analyze --input " + in + " --set nope=1") == 64);
  CHECK(run_cli("frobnicate") == 64);
  CHECK(run_cli("nulldist --p 1000 --window 5 --null-n 100") == 0);
  const std::string out = scratch("capi_cli_out");
  CHECK(run_cli("analyze --input " + in + " -W 10 --format both --out " + out) == 0);
  CHECK(std::filesystem::exists(out + "/report.json"));
  CHECK(run_cli("analyze --config " + out + "/report.json") == 0);
}
