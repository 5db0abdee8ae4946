#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spedge/common.hpp"
#include "spedge/spectra.hpp"

namespace spedge {

inline constexpr double kCollapseTolDefault = 0.05;
inline constexpr double kOpenTolDefault = 0.05;
inline constexpr double kDeclineMinDefault = 4.0;
inline constexpr double kConcentrationMin = 0.5;
inline constexpr double kConcentrationWindow = 0.2;

enum class EventKind { collapse, opening, kstar_shift, phase_boundary, grok_candidate };
const char* event_kind_name(EventKind k);

struct GapEvent {
  std::int64_t t = 0;
  EventKind kind = EventKind::collapse;
  int position = 0;
  double magnitude = 0;
  std::string context;
};

struct EventLog {
  std::vector<GapEvent> events;
  std::size_t count(EventKind k) const;
};

// Ratio tracks per snapshot: ratios[i][j-1] = sigma_j / sigma_{j+1} at t[i].
struct RatioSeries {
  std::vector<std::int64_t> t;
  std::vector<Vec> ratios;
  std::vector<int> kstar;
};
RatioSeries ratio_series(const std::vector<SpectrumSnapshot>& snaps);

// Each position j keeps a small state machine. A position becomes armed while
// it is k* with its ratio above 1 + collapse_tol; an armed position collapses
// when its ratio crosses below that level. A position opens when its ratio
// crosses above 1 + open_tol and it either collapsed earlier or is the
// current k*. k* changes between consecutive snapshots log kstar_shift.
EventLog detect_gap_events(const RatioSeries& s, double collapse_tol = kCollapseTolDefault,
                           double open_tol = kOpenTolDefault);
EventLog detect_gap_events(const std::vector<SpectrumSnapshot>& snaps,
                           double collapse_tol = kCollapseTolDefault,
                           double open_tol = kOpenTolDefault);

enum class PhaseLabel { rise, plateau, collapse };
const char* phase_label_name(PhaseLabel l);

struct PhaseSegment {
  std::size_t start = 0, end = 0;  // inclusive index range
  PhaseLabel label = PhaseLabel::plateau;
};

struct PhaseSegmentation {
  std::vector<PhaseSegment> segments;
};

Vec moving_average(const Vec& x, std::size_t width);

// Labels each point by the slope of the centered moving average of width
// min_len, absorbs runs shorter than min_len into their predecessor, then
// merges equal neighbours.
PhaseSegmentation segment_phases(const Vec& R, double slope_tol, std::size_t min_len);

struct GrokSignature {
  bool detected = false;
  std::size_t t_candidate = 0;  // index of the largest single-step log drop
  double decline_factor = 1.0;  // max_t prefix max / suffix min
  double concentration = 0.0;   // steepest 20%-window log drop / total log drop
  std::optional<std::size_t> t_metric_jump;  // largest single-step change of the companion series
};

GrokSignature grok_signature(const Vec& g23, const std::optional<Vec>& metric = std::nullopt,
                             double decline_factor_min = kDeclineMinDefault);

struct XCorr {
  int best_lag = 0;
  std::vector<int> lags;
  Vec r;
};

// r(lag) = Pearson(R_t, L_{t+lag}) over the overlapping range.
XCorr gap_loss_xcorr(const Vec& R, const Vec& loss, int max_lag);

}  // namespace spedge
