#include "spedge/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spedge/linalg.hpp"

namespace spedge {

Bound davis_kahan_bound(double dG, double sep) {
  if (!(sep > 0)) return {1.0, true};
  return {std::min(1.0, dG / sep), false};
}

GapStability gap_stability_bound(const SpectrumSnapshot& s, double dG) {
  GapStability out;
  const int k = s.kstar_argmax;
  const double dk = s.sigmas[k - 1], dn = s.sigmas[k];
  const double denom = dk * dk - dn * dn;
  const double g = dk - dn;
  if (!(g > 0) || !(denom > 0)) {
    out.diverged = true;
    out.exact = out.factored = std::numeric_limits<double>::infinity();
    return out;
  }
  out.exact = dG / denom;
  out.factored = dG / ((dk + dn) * g);
  return out;
}

Alpha stability_coefficient(double gap, double dG, double C) {
  if (!(C > 0)) throw Error(ErrorCode::argument, "C must be positive");
  if (!(gap > 0)) return {0.0, true};
  return {std::max(0.0, 1.0 - C * dG * dG / (gap * gap)), false};
}

Vec nearest_gaps(const Vec& ev) {
  const std::size_t n = ev.size();
  Vec g(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) g[j] = std::min(g[j], std::fabs(ev[j] - ev[i]));
  return g;
}

HalfWindowAlpha alpha_empirical_halfwindow(const TrajectoryWindow& w) {
  if (w.W < 4) throw Error(ErrorCode::argument, "half-window stability needs W >= 4");
  HalfWindowAlpha out;
  const std::size_t h = w.W / 2;
  out.odd_split = (w.W % 2) == 1;
  std::vector<Vec> r1(w.rows.begin(), w.rows.begin() + static_cast<std::ptrdiff_t>(h));
  std::vector<Vec> r2(w.rows.end() - static_cast<std::ptrdiff_t>(h), w.rows.end());
  const TrajectoryWindow w1 = make_window(r1, w.t0);
  const TrajectoryWindow w2 = make_window(r2, w.t0 + static_cast<std::int64_t>(w.W - h));
  const ModeBasis m1 = mode_basis(w1), m2 = mode_basis(w2);
  const std::size_t shared = std::min(m1.size(), m2.size());
  out.alpha.assign(w.W, 0.0);
  for (std::size_t j = 0; j < w.W; ++j) {
    if (j < shared)
      // |<v1, v2>| already equals the sign-aligned overlap
      out.alpha[j] = std::min(1.0, std::fabs(dot(m1.vecs[j], m2.vecs[j])));
    else
      out.rank_limited.push_back(static_cast<int>(j) + 1);
  }
  return out;
}

Bound block_dk_bound(const SpectrumSnapshot& s, int j, double dG) {
  if (j < 1 || static_cast<std::size_t>(j) >= s.W)
    throw Error(ErrorCode::argument, "block position out of range");
  const double denom = s.eigvals[j - 1] - s.eigvals[j];
  const double r = s.ratios[j - 1];
  if (!(denom > 0) || r <= 1.0) return {std::numeric_limits<double>::infinity(), true};
  return {dG / denom, false};
}

BlockProfile block_dk_profile(const SpectrumSnapshot& s, double dG) {
  BlockProfile out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j < s.W; ++j) {
    const Bound b = block_dk_bound(s, static_cast<int>(j), dG);
    out.bound.push_back(b.value);
    out.diverged.push_back(b.diverged);
    if (b.value < best) {
      best = b.value;
      out.argmin = static_cast<int>(j);
    }
  }
  return out;
}

LossDecomposition loss_decomposition(const ModeBasis& modes, const Vec& gt, const Vec& gv,
                                     const Vec& alpha, double eta) {
  if (alpha.size() < modes.size())
    throw Error(ErrorCode::argument, "need one alpha per mode");
  LossDecomposition out;
  const std::size_t n = modes.size();
  out.G_train.resize(n);
  out.G_val.resize(n);
  out.terms.resize(n);
  double sum = 0;
  for (std::size_t j = 0; j < n; ++j) {
    out.G_train[j] = dot(modes.vecs[j], gt);
    out.G_val[j] = dot(modes.vecs[j], gv);
    out.terms[j] = alpha[j] * out.G_train[j] * out.G_val[j];
    sum += out.terms[j];
  }
  out.predicted_dL = -eta * sum;
  return out;
}

double slide_delta_frob(const Vec& entering, const Vec& exiting) {
  return RankTwoUpdate{entering, exiting}.frobenius();
}

StabilityReport stability_report(const TrajectoryWindow& w, const SpectrumSnapshot& s,
                                 double dG, double C, bool with_empirical) {
  StabilityReport r;
  r.t0 = s.t0;
  r.deltaG_frob = dG;
  r.C = C;
  r.gaps = nearest_gaps(s.eigvals);
  for (std::size_t j = 0; j < s.W; ++j) {
    r.alpha.push_back(stability_coefficient(r.gaps[j], dG, C).value);
    r.dk.push_back(davis_kahan_bound(dG, r.gaps[j]).value);
  }
  const BlockProfile bp = block_dk_profile(s, dG);
  r.block = bp.bound;
  r.block_argmin = bp.argmin;
  r.gap_bound = gap_stability_bound(s, dG);
  if (with_empirical && w.W >= 4) r.alpha_empirical = alpha_empirical_halfwindow(w).alpha;
  return r;
}

}  // namespace spedge
