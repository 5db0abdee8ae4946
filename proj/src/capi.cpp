#include "spedge/spedge.h"

#include <cstring>
#include <new>
#include <string>

#include "spedge/commands.hpp"
#include "spedge/parallel.hpp"

struct spedge_stream {
  spedge::UpdateStream s;
};

struct spedge_snapshot {
  spedge::SpectrumSnapshot s;
};

namespace {

thread_local std::string g_last_error;

spedge_status to_status(spedge::ErrorCode c) {
  return static_cast<spedge_status>(static_cast<int>(c));
}

template <class F>
spedge_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SPEDGE_OK;
  } catch (const spedge::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::parse_error& e) {
    g_last_error = std::string("config is not valid JSON: ") + e.what();
    return SPEDGE_E_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SPEDGE_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPEDGE_E_INTERNAL;
  }
}

spedge_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return SPEDGE_E_ARGUMENT;
}

}  // namespace

extern "C" {

const char* spedge_version(void) { return SPEDGE_VERSION; }

const char* spedge_status_name(spedge_status s) {
  if (s == SPEDGE_E_INTERNAL) return "internal";
  if (s < SPEDGE_OK || s > SPEDGE_E_NOT_APPLICABLE) return "unknown";
  return spedge::error_code_name(static_cast<spedge::ErrorCode>(s));
}

const char* spedge_last_error(void) { return g_last_error.c_str(); }

void spedge_set_threads(int n) { spedge::set_thread_override(n); }

spedge_status spedge_stream_open(const char* path, spedge_stream** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new spedge_stream{spedge::load_any(path)}; });
}

void spedge_stream_free(spedge_stream* s) { delete s; }

size_t spedge_stream_count(const spedge_stream* s) { return s ? s->s.size() : 0; }

uint64_t spedge_stream_dim(const spedge_stream* s) { return s ? s->s.header.p : 0; }

spedge_status spedge_stream_delta(const spedge_stream* s, size_t i, double* buf, size_t len) {
  if (!s) return null_arg("stream");
  if (!buf) return null_arg("buf");
  return guarded([&] {
    if (i >= s->s.size()) throw spedge::Error(spedge::ErrorCode::argument, "record index out of range");
    const auto& d = s->s.records[i].delta;
    if (len < d.size()) throw spedge::Error(spedge::ErrorCode::argument, "buffer too small");
    std::memcpy(buf, d.data(), d.size() * sizeof(double));
  });
}

spedge_status spedge_analyze_window(const spedge_stream* s, int64_t t0, size_t W, double eps_floor,
                                    spedge_snapshot** out) {
  if (!s) return null_arg("stream");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    spedge::AnalyzeOptions opt;
    opt.eps_floor = eps_floor;
    *out = new spedge_snapshot{spedge::analyze_window(spedge::window_at(s->s, t0, W), opt)};
  });
}

void spedge_snapshot_free(spedge_snapshot* s) { delete s; }

int spedge_snapshot_kstar(const spedge_snapshot* s) { return s ? s->s.kstar_argmax : 0; }

double spedge_snapshot_ratio(const spedge_snapshot* s) { return s ? s->s.R : 0.0; }

double spedge_snapshot_gap(const spedge_snapshot* s) { return s ? s->s.g : 0.0; }

size_t spedge_snapshot_sigmas(const spedge_snapshot* s, double* buf, size_t len) {
  if (!s) return 0;
  const auto& v = s->s.sigmas;
  if (buf)
    for (size_t i = 0; i < len && i < v.size(); ++i) buf[i] = v[i];
  return v.size();
}

spedge_status spedge_ratio_significance(double R, size_t W, uint64_t p, size_t n_mc, uint64_t seed,
                                        double* p_value, double* q95) {
  return guarded([&] {
    const auto sig = spedge::ratio_significance(R, W, p, n_mc, seed);
    if (p_value) *p_value = sig.p_value;
    if (q95) *q95 = sig.q95;
  });
}

spedge_status spedge_run(const char* command, const char* config_json, char** report_json) {
  if (!command) return null_arg("command");
  if (report_json) *report_json = nullptr;
  return guarded([&] {
    const std::string cmd = command;
    if (cmd != "analyze" && cmd != "simulate" && cmd != "synth" && cmd != "nulldist")
      throw spedge::Error(spedge::ErrorCode::argument, "unknown command '" + cmd + "'");
    const spedge::Json cfg = config_json && *config_json ? spedge::Json::parse(config_json)
                                                         : spedge::Json::object();
    const spedge::Json rep = spedge::run_command(cmd, cfg);
    if (report_json) {
      const std::string text = rep.dump(2);
      char* buf = static_cast<char*>(std::malloc(text.size() + 1));
      if (!buf) throw std::bad_alloc();
      std::memcpy(buf, text.c_str(), text.size() + 1);
      *report_json = buf;
    }
  });
}

void spedge_string_free(char* s) { std::free(s); }

}  // extern "C"
