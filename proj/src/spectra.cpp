#include "spedge/spectra.hpp"

#include <algorithm>
#include <cmath>

#include "spedge/parallel.hpp"
#include "spedge/rng.hpp"

namespace spedge {

namespace {
constexpr std::size_t kGramBlock = 1 << 14;
}

Mat gram(const TrajectoryWindow& w) {
  const std::size_t W = w.W, p = w.p;
  // Fixed coordinate blocks, partial Grams summed in block order: the result
  // does not depend on how many threads ran the blocks.
  const std::size_t nb = std::max<std::size_t>(1, (p + kGramBlock - 1) / kGramBlock);
  std::vector<Mat> partial(nb, Mat(W, W));
  parallel_for(nb, [&](std::size_t b) {
    const std::size_t lo = b * kGramBlock, hi = std::min(p, lo + kGramBlock);
    Mat& P = partial[b];
    for (std::size_t s = 0; s < W; ++s)
      for (std::size_t t = s; t < W; ++t) {
        const double* x = w.rows[s].data();
        const double* y = w.rows[t].data();
        double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
        std::size_t i = lo;
        for (; i + 4 <= hi; i += 4) {
          a0 += x[i] * y[i];
          a1 += x[i + 1] * y[i + 1];
          a2 += x[i + 2] * y[i + 2];
          a3 += x[i + 3] * y[i + 3];
        }
        for (; i < hi; ++i) a0 += x[i] * y[i];
        P(s, t) = (a0 + a1) + (a2 + a3);
      }
  });
  Mat G(W, W);
  for (const Mat& P : partial)
    for (std::size_t s = 0; s < W; ++s)
      for (std::size_t t = s; t < W; ++t) G(s, t) += P(s, t);
  for (std::size_t s = 0; s < W; ++s)
    for (std::size_t t = 0; t < s; ++t) G(s, t) = G(t, s);
  return G;
}

SymEigen decompose(const Mat& G) {
  SymEigen e = jacobi_eigen(G);
  const double l1 = e.values.empty() ? 0.0 : std::max(0.0, e.values[0]);
  for (double& v : e.values) {
    if (v < 0) {
      if (v < -kClampTol * std::max(l1, 1e-300) && l1 > 0)
        throw Error(ErrorCode::numerical, "Gram matrix is not positive semidefinite");
      v = 0.0;
    }
  }
  return e;
}

KstarResult kstar_argmax(const Vec& sigmas) {
  if (sigmas.size() < 2) throw Error(ErrorCode::argument, "need at least two singular values");
  KstarResult r;
  const double s1 = sigmas[0];
  double best = -1.0;
  for (std::size_t j = 0; j + 1 < sigmas.size(); ++j) {
    double ratio;
    if (sigmas[j + 1] < kRankTol * s1 || sigmas[j + 1] <= 0.0) {
      r.rank_deficient = true;
      ratio = std::numeric_limits<double>::infinity();
    } else {
      ratio = sigmas[j] / sigmas[j + 1];
    }
    if (ratio > best) {
      best = ratio;
      r.k = static_cast<int>(j) + 1;
    }
    // the first infinite ratio already wins every later tie
    if (std::isinf(ratio)) break;
  }
  r.R = best;
  if (s1 <= 0.0) {
    // all-zero spectrum: nothing to rank
    r.k = 1;
    r.R = 1.0;
  }
  return r;
}

WeightedKstar kstar_weighted(const Vec& sigmas, double eps_floor) {
  if (sigmas.size() < 2) throw Error(ErrorCode::argument, "need at least two singular values");
  WeightedKstar r;
  double total = 0;
  for (double s : sigmas) total += s;
  const double s1 = sigmas[0];
  double best = -1.0;
  int arg = 0;
  for (std::size_t j = 0; j + 1 < sigmas.size(); ++j) {
    if (!(sigmas[j + 1] >= eps_floor * s1) || sigmas[j + 1] <= 0.0) continue;
    const double score = (sigmas[j] / total) * (sigmas[j] / sigmas[j + 1]);
    if (score > best) {
      best = score;
      arg = static_cast<int>(j) + 1;
    }
  }
  if (arg == 0) {
    r.fallback = true;
    r.k = kstar_argmax(sigmas).k;
  } else {
    r.k = arg;
  }
  return r;
}

int kstar_dynamical(int k, std::size_t W) {
  return std::min(k + 1, static_cast<int>(W) - 1);
}

int k95(const Vec& eigvals) {
  double total = 0;
  for (double l : eigvals) total += l;
  if (!(total > 0)) throw Error(ErrorCode::undefined, "k95 undefined for an all-zero spectrum");
  double acc = 0;
  for (std::size_t j = 0; j < eigvals.size(); ++j) {
    acc += eigvals[j];
    // relative slack absorbs rounding in the running sum (e.g. 19 of 20 equal)
    if (acc / total >= 0.95 - 1e-12) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(eigvals.size());
}

double bbp_threshold(double nu, double p, std::size_t W) {
  return nu * std::pow(p * static_cast<double>(W - 1), 0.25);
}

double noise_nu_estimate(double eta, double B, double p) { return eta / std::sqrt(B * p); }

double noise_concentration(double tr, double frob_sq, std::size_t W) {
  if (!(tr > 0)) throw Error(ErrorCode::argument, "noise covariance trace must be positive");
  const double kappa = frob_sq / (tr * tr);
  return std::sqrt(static_cast<double>(W) * kappa);
}

double row_norm_cv(const TrajectoryWindow& w) {
  Vec n(w.W);
  double mean = 0;
  for (std::size_t i = 0; i < w.W; ++i) {
    n[i] = norm(w.rows[i]);
    mean += n[i];
  }
  mean /= static_cast<double>(w.W);
  if (mean <= 0) return 0.0;
  double var = 0;
  for (double v : n) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.W);
  return std::sqrt(var) / mean;
}

namespace {

// Ratios, k* variants and thresholds from s.eigvals / s.sigmas.
void finish_snapshot(SpectrumSnapshot& s, const AnalyzeOptions& opt) {
  const std::size_t p = s.p;
  s.all_zero = !(s.eigvals[0] > 0);

  s.ratios.assign(s.W - 1, 1.0);
  s.gaps.assign(s.W - 1, 0.0);
  for (std::size_t j = 0; j + 1 < s.W; ++j) {
    s.gaps[j] = s.eigvals[j] - s.eigvals[j + 1];
    if (s.all_zero)
      s.ratios[j] = 1.0;
    else if (s.sigmas[j + 1] < kRankTol * s.sigmas[0] || s.sigmas[j + 1] <= 0)
      s.ratios[j] = std::numeric_limits<double>::infinity();
    else
      s.ratios[j] = s.sigmas[j] / s.sigmas[j + 1];
  }
  const KstarResult ks = kstar_argmax(s.sigmas);
  s.kstar_argmax = ks.k;
  s.R = ks.R;
  s.rank_deficient = ks.rank_deficient;
  if (!s.all_zero) {
    const WeightedKstar kw = kstar_weighted(s.sigmas, opt.eps_floor);
    s.kstar_weighted = kw.k;
    s.weighted_fallback = kw.fallback;
    s.k95 = k95(s.eigvals);
  }
  s.kstar_dynamical = kstar_dynamical(s.kstar_argmax, s.W);
  s.g = s.sigmas[s.kstar_argmax - 1] - s.sigmas[s.kstar_argmax];
  s.nu = opt.nu;
  s.dcrit = bbp_threshold(opt.nu, static_cast<double>(p), s.W);
  if (s.dcrit > 0) s.sigmaW_over_dcrit = s.sigmas.back() / s.dcrit;
}

SpectrumSnapshot snapshot_core(const Mat& G, std::int64_t t0, std::size_t p) {
  SpectrumSnapshot s;
  s.t0 = t0;
  s.W = G.rows;
  s.p = p;
  SymEigen e = decompose(G);
  s.eigvals = e.values;
  s.left_vecs = e.vectors;
  s.sigmas.resize(s.W);
  for (std::size_t k = 0; k < s.W; ++k) s.sigmas[k] = std::sqrt(s.eigvals[k]);
  return s;
}

}  // namespace

SpectrumSnapshot snapshot_from_gram(const Mat& G, std::int64_t t0, std::size_t p,
                                    const AnalyzeOptions& opt) {
  SpectrumSnapshot s = snapshot_core(G, t0, p);
  finish_snapshot(s, opt);
  return s;
}

// Square roots of Gram eigenvalues carry an absolute error near
// sqrt(eps) sigma_1, which would hide rank deficiency. With the rows at hand,
// sigma_k = |X^T u_k| is accurate to about eps sigma_1 instead.
SpectrumSnapshot analyze_window(const TrajectoryWindow& w, const AnalyzeOptions& opt) {
  SpectrumSnapshot s = snapshot_core(gram(w), w.t0, w.p);
  const std::size_t W = s.W;
  Vec refined(W);
  parallel_for(W, [&](std::size_t k) {
    Vec v(w.p, 0.0);
    for (std::size_t r = 0; r < W; ++r) axpy(s.left_vecs(r, k), w.rows[r], v);
    refined[k] = norm(v);
  });
  std::vector<std::size_t> order(W);
  for (std::size_t k = 0; k < W; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return refined[a] > refined[b]; });
  Mat U(W, W);
  for (std::size_t k = 0; k < W; ++k) {
    s.sigmas[k] = refined[order[k]];
    s.eigvals[k] = s.sigmas[k] * s.sigmas[k];
    for (std::size_t r = 0; r < W; ++r) U(r, k) = s.left_vecs(r, order[k]);
  }
  s.left_vecs = std::move(U);
  finish_snapshot(s, opt);
  s.noise_cv = row_norm_cv(w);
  return s;
}

Vec right_singular_vector(const TrajectoryWindow& w, const SpectrumSnapshot& s, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > s.W)
    throw Error(ErrorCode::argument, "mode index out of range");
  const double sk = s.sigmas[k - 1];
  if (!(sk > kRankTol * s.sigmas[0]) || sk <= 0)
    throw Error(ErrorCode::degenerate, "mode " + std::to_string(k) + " has zero singular value");
  Vec v(w.p, 0.0);
  for (std::size_t r = 0; r < w.W; ++r) axpy(s.left_vecs(r, k - 1) / sk, w.rows[r], v);
  return v;
}

// ---------------------------------------------------------------- null model

double null_max_ratio(std::size_t W, std::uint64_t p, std::uint64_t seed, NullSampler kind) {
  Rng rng(seed);
  Mat G(W, W);
  if (kind == NullSampler::wishart) {
    if (p < W) throw Error(ErrorCode::argument, "Wishart sampler needs p >= W");
    // G = L L^T with L lower triangular: L_ii^2 ~ chi2(p - i), L_ij ~ N(0,1).
    Mat L(W, W);
    for (std::size_t i = 0; i < W; ++i) {
      L(i, i) = std::sqrt(rng.chi_squared(static_cast<double>(p - i)));
      for (std::size_t j = 0; j < i; ++j) L(i, j) = rng.normal();
    }
    for (std::size_t i = 0; i < W; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double acc = 0;
        for (std::size_t k = 0; k <= j; ++k) acc += L(i, k) * L(j, k);
        G(i, j) = G(j, i) = acc;
      }
  } else {
    std::vector<Vec> rows(W, Vec(p));
    for (auto& r : rows)
      for (auto& x : r) x = rng.normal();
    G = gram(make_window(rows));
  }
  SymEigen e = decompose(G);
  Vec sig(W);
  for (std::size_t k = 0; k < W; ++k) sig[k] = std::sqrt(e.values[k]);
  return kstar_argmax(sig).R;
}

Significance ratio_significance(double R, std::size_t W, std::uint64_t p, std::size_t n_mc,
                                std::uint64_t seed, NullSampler kind) {
  if (n_mc < 100) throw Error(ErrorCode::argument, "n_mc must be >= 100");
  if (W < 2) throw Error(ErrorCode::argument, "W must be >= 2");
  Significance out;
  out.samples.resize(n_mc);
  parallel_for(n_mc, [&](std::size_t i) {
    out.samples[i] = null_max_ratio(W, p, derive_seed(seed, i), kind);
  });
  std::size_t exceed = 0;
  for (double v : out.samples)
    if (v > R) ++exceed;
  out.p_value = static_cast<double>(exceed) / static_cast<double>(n_mc);
  std::sort(out.samples.begin(), out.samples.end());
  auto q = [&](double a) {
    std::size_t idx = static_cast<std::size_t>(std::ceil(a * static_cast<double>(n_mc)));
    idx = std::clamp<std::size_t>(idx, 1, n_mc);
    return out.samples[idx - 1];
  };
  out.q50 = q(0.50);
  out.q95 = q(0.95);
  out.q99 = q(0.99);
  return out;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::genuine: return "genuine";
    case Verdict::marginal: return "marginal";
    case Verdict::null: return "null";
  }
  return "null";
}

// Threshold bands by noise level: cv < 1% -> 1.05; 1%..20% -> 1.10..1.15;
// above 20% -> 1.20 rising to 1.30 at cv = 50%, flat beyond.
double ratio_threshold(double cv) {
  if (cv < 0.01) return 1.05;
  if (cv <= 0.20) return 1.10 + 0.05 * (cv - 0.01) / 0.19;
  return std::min(1.30, 1.20 + 0.10 * (cv - 0.20) / 0.30);
}

Verdict ratio_test(double R, double cv) {
  const double tau = ratio_threshold(cv);
  if (R > tau) return Verdict::genuine;
  const double band_lo = cv < 0.01 ? tau : (cv <= 0.20 ? 1.10 : 1.20);
  if (R > band_lo) return Verdict::marginal;
  return Verdict::null;
}

}  // namespace spedge
