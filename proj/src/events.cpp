#include "spedge/events.hpp"

#include <algorithm>
#include <cmath>

namespace spedge {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::collapse: return "collapse";
    case EventKind::opening: return "opening";
    case EventKind::kstar_shift: return "kstar_shift";
    case EventKind::phase_boundary: return "phase_boundary";
    case EventKind::grok_candidate: return "grok_candidate";
  }
  return "unknown";
}

const char* phase_label_name(PhaseLabel l) {
  switch (l) {
    case PhaseLabel::rise: return "rise";
    case PhaseLabel::plateau: return "plateau";
    case PhaseLabel::collapse: return "collapse";
  }
  return "unknown";
}

std::size_t EventLog::count(EventKind k) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [k](const GapEvent& e) { return e.kind == k; }));
}

RatioSeries ratio_series(const std::vector<SpectrumSnapshot>& snaps) {
  RatioSeries s;
  for (const auto& sn : snaps) {
    s.t.push_back(sn.t0);
    s.ratios.push_back(sn.ratios);
    s.kstar.push_back(sn.kstar_argmax);
  }
  return s;
}

EventLog detect_gap_events(const RatioSeries& s, double ct, double ot) {
  const std::size_t n = s.t.size();
  if (s.ratios.size() != n || s.kstar.size() != n)
    throw Error(ErrorCode::argument, "ratio series fields differ in length");
  if (n < 3) throw Error(ErrorCode::argument, "event detection needs >= 3 snapshots");
  if (!(ct >= 0) || !(ot >= 0)) throw Error(ErrorCode::argument, "tolerances must be >= 0");

  std::size_t m = 0;
  for (const Vec& r : s.ratios) m = std::max(m, r.size());
  std::vector<char> armed(m, 0), collapsed(m, 0);
  const double lo = 1.0 + ct, hi = 1.0 + ot;
  auto ratio = [&](std::size_t i, std::size_t j) {
    return j < s.ratios[i].size() ? s.ratios[i][j] : 1.0;
  };
  auto arm = [&](std::size_t i) {
    const int k = s.kstar[i];
    if (k >= 1 && static_cast<std::size_t>(k) <= m && ratio(i, k - 1) >= lo) armed[k - 1] = 1;
  };

  EventLog log;
  arm(0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double a = ratio(i - 1, j), b = ratio(i, j);
      const int pos = static_cast<int>(j) + 1;
      if (armed[j] && a >= lo && b < lo) {
        log.events.push_back({s.t[i], EventKind::collapse, pos, b, ""});
        armed[j] = 0;
        collapsed[j] = 1;
      } else if (a <= hi && b > hi && (collapsed[j] || s.kstar[i] == pos)) {
        log.events.push_back({s.t[i], EventKind::opening, pos, b, ""});
        collapsed[j] = 0;
      }
    }
    if (s.kstar[i] != s.kstar[i - 1]) {
      const int k = s.kstar[i];
      log.events.push_back({s.t[i], EventKind::kstar_shift, k, ratio(i, k - 1),
                            "from " + std::to_string(s.kstar[i - 1])});
    }
    arm(i);
  }
  std::stable_sort(log.events.begin(), log.events.end(),
                   [](const GapEvent& x, const GapEvent& y) { return x.t < y.t; });
  return log;
}

EventLog detect_gap_events(const std::vector<SpectrumSnapshot>& snaps, double ct, double ot) {
  return detect_gap_events(ratio_series(snaps), ct, ot);
}

// ---------------------------------------------------------------- phases

Vec moving_average(const Vec& x, std::size_t width) {
  const std::size_t n = x.size();
  if (width <= 1) return x;
  const std::size_t left = (width - 1) / 2, right = width - 1 - left;
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i >= left ? i - left : 0;
    const std::size_t b = std::min(n - 1, i + right);
    double s = 0;
    for (std::size_t k = a; k <= b; ++k) s += x[k];
    out[i] = s / static_cast<double>(b - a + 1);
  }
  return out;
}

PhaseSegmentation segment_phases(const Vec& R, double slope_tol, std::size_t min_len) {
  const std::size_t n = R.size();
  if (min_len == 0) throw Error(ErrorCode::argument, "min_len must be >= 1");
  if (n < 3 * min_len || n < 2)
    throw Error(ErrorCode::argument, "series shorter than 3 * min_len");
  if (!(slope_tol >= 0)) throw Error(ErrorCode::argument, "slope_tol must be >= 0");

  const Vec sm = moving_average(R, min_len);
  std::vector<PhaseLabel> lab(n);
  for (std::size_t i = 0; i < n; ++i) {
    double slope;
    if (i == 0) slope = sm[1] - sm[0];
    else if (i == n - 1) slope = sm[n - 1] - sm[n - 2];
    else slope = 0.5 * (sm[i + 1] - sm[i - 1]);
    lab[i] = slope > slope_tol ? PhaseLabel::rise
             : slope < -slope_tol ? PhaseLabel::collapse
                                  : PhaseLabel::plateau;
  }

  std::vector<PhaseSegment> runs;
  for (std::size_t i = 0; i < n; ++i) {
    if (runs.empty() || runs.back().label != lab[i]) runs.push_back({i, i, lab[i]});
    else runs.back().end = i;
  }
  // Absorb short runs: into the predecessor when there is one, else forward.
  std::vector<PhaseSegment> merged;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const PhaseSegment& cur = runs[r];
    const std::size_t len = cur.end - cur.start + 1;
    if (len < min_len && !merged.empty()) {
      merged.back().end = cur.end;
    } else if (len < min_len && r + 1 < runs.size()) {
      runs[r + 1].start = cur.start;
    } else if (!merged.empty() && merged.back().label == cur.label) {
      merged.back().end = cur.end;
    } else {
      merged.push_back(cur);
    }
  }
  PhaseSegmentation out;
  for (const auto& seg : merged) {
    if (!out.segments.empty() && out.segments.back().label == seg.label)
      out.segments.back().end = seg.end;
    else
      out.segments.push_back(seg);
  }
  return out;
}

// ---------------------------------------------------------------- grokking

GrokSignature grok_signature(const Vec& g, const std::optional<Vec>& metric, double dmin) {
  const std::size_t n = g.size();
  if (n < 5) throw Error(ErrorCode::argument, "grok signature needs >= 5 points");
  double gmax = 0;
  for (double v : g) {
    if (!(v >= 0) || !std::isfinite(v)) throw Error(ErrorCode::argument, "gaps must be finite and >= 0");
    gmax = std::max(gmax, v);
  }
  GrokSignature out;
  if (!(gmax > 0)) return out;
  const double floor = 1e-300;
  Vec lg(n);
  for (std::size_t i = 0; i < n; ++i) lg[i] = std::log(std::max(g[i], floor));

  Vec pre(n), suf(n);
  for (std::size_t i = 0; i < n; ++i) pre[i] = i ? std::max(pre[i - 1], lg[i]) : lg[i];
  for (std::size_t i = n; i-- > 0;) suf[i] = i + 1 < n ? std::min(suf[i + 1], lg[i]) : lg[i];
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) total = std::max(total, pre[i] - suf[i]);
  out.decline_factor = std::exp(total);

  double step_drop = -1;
  for (std::size_t i = 1; i < n; ++i)
    if (lg[i - 1] - lg[i] > step_drop) {
      step_drop = lg[i - 1] - lg[i];
      out.t_candidate = i;
    }

  const std::size_t L = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kConcentrationWindow * static_cast<double>(n - 1))));
  double best = 0;
  for (std::size_t i = 0; i + L < n; ++i) best = std::max(best, lg[i] - lg[i + L]);
  out.concentration = total > 0 ? std::min(1.0, best / total) : 0.0;
  out.detected = out.decline_factor >= dmin && out.concentration >= kConcentrationMin;

  if (metric) {
    if (metric->size() != n) throw Error(ErrorCode::argument, "companion series length differs");
    double jump = -1;
    for (std::size_t i = 1; i < n; ++i) {
      const double d = std::fabs((*metric)[i] - (*metric)[i - 1]);
      if (d > jump) {
        jump = d;
        out.t_metric_jump = i;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- cross-correlation

namespace {

double pearson(const double* x, const double* y, std::size_t n) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0))
    throw Error(ErrorCode::undefined, "correlation undefined for a zero-variance segment");
  return sxy / std::sqrt(sxx * syy);
}

Vec zscore(const Vec& x) {
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  if (!(sd > 0)) throw Error(ErrorCode::undefined, "correlation undefined for a constant series");
  Vec z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / sd;
  return z;
}

}  // namespace

XCorr gap_loss_xcorr(const Vec& R, const Vec& loss, int max_lag) {
  if (R.size() != loss.size()) throw Error(ErrorCode::argument, "series lengths differ");
  if (max_lag < 0 || R.size() <= 2 * static_cast<std::size_t>(max_lag))
    throw Error(ErrorCode::argument, "series must be longer than 2 * max_lag");
  const Vec zr = zscore(R), zl = zscore(loss);
  const std::size_t n = R.size();
  XCorr out;
  double best = -1;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const std::size_t a = lag >= 0 ? 0 : static_cast<std::size_t>(-lag);
    const std::size_t len = n - static_cast<std::size_t>(std::abs(lag));
    const double r = pearson(zr.data() + a, zl.data() + a + lag, len);
    out.lags.push_back(lag);
    out.r.push_back(r);
    if (std::fabs(r) > best + 1e-15) {
      best = std::fabs(r);
      out.best_lag = lag;
    }
  }
  return out;
}

}  // namespace spedge
