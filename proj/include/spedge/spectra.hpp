#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "spedge/common.hpp"
#include "spedge/linalg.hpp"
#include "spedge/trajstore.hpp"

namespace spedge {

inline constexpr double kRankTol = 1e-12;    // sigma_{j+1} < kRankTol * sigma_1 counts as zero
inline constexpr double kClampTol = 1e-10;   // eigenvalues above -kClampTol * lambda_1 clamp to 0
inline constexpr double kEpsFloorDefault = 1e-3;

struct SpectrumSnapshot {
  std::int64_t t0 = 0;
  std::size_t W = 0, p = 0;
  Vec eigvals;    // descending, >= 0
  Vec sigmas;     // sqrt(eigvals)
  Mat left_vecs;  // column k is u_k
  Vec ratios;     // sigma_j / sigma_{j+1}, j = 1..W-1 (index j-1)
  Vec gaps;       // lambda_j - lambda_{j+1}
  int kstar_argmax = 1;
  int kstar_weighted = 1;
  int kstar_dynamical = 2;
  double R = 1.0;
  double g = 0.0;  // sigma_{k*} - sigma_{k*+1}
  int k95 = 1;
  double dcrit = 0.0;
  double nu = 0.0;
  double sigmaW_over_dcrit = std::numeric_limits<double>::infinity();
  double noise_cv = 0.0;  // std/mean of row norms
  bool rank_deficient = false;
  bool weighted_fallback = false;
  bool all_zero = false;
};

struct AnalyzeOptions {
  double eps_floor = kEpsFloorDefault;
  double nu = 0.0;  // noise scale used for d_crit; 0 disables the threshold
};

Mat gram(const TrajectoryWindow& w);

// Eigendecomposition of a Gram matrix with clamping of tiny negative
// eigenvalues. Throws ErrorCode::numerical when an eigenvalue is more
// negative than the clamp tolerance allows (input not PSD).
SymEigen decompose(const Mat& G);

struct KstarResult {
  int k = 1;
  double R = 1.0;
  bool rank_deficient = false;
};
KstarResult kstar_argmax(const Vec& sigmas);

struct WeightedKstar {
  int k = 1;
  bool fallback = false;
};
WeightedKstar kstar_weighted(const Vec& sigmas, double eps_floor = kEpsFloorDefault);

int kstar_dynamical(int kstar_argmax, std::size_t W);
int k95(const Vec& eigvals);

double bbp_threshold(double nu, double p, std::size_t W);
double noise_nu_estimate(double eta, double B, double p);
double noise_concentration(double sigma_trace, double sigma_frob_sq, std::size_t W);
double row_norm_cv(const TrajectoryWindow& w);

SpectrumSnapshot snapshot_from_gram(const Mat& G, std::int64_t t0, std::size_t p,
                                    const AnalyzeOptions& opt = {});
SpectrumSnapshot analyze_window(const TrajectoryWindow& w, const AnalyzeOptions& opt = {});

// v_k = X^T u_k / sigma_k with k 1-based.
Vec right_singular_vector(const TrajectoryWindow& w, const SpectrumSnapshot& s, int k);

// ---------------------------------------------------------------- null model

enum class NullSampler {
  wishart,       // exact Gram law via Bartlett decomposition, O(W^2) per trial
  materialized,  // draws the full W x p Gaussian matrix
};

struct Significance {
  double p_value = 1.0;
  double q50 = 1.0, q95 = 1.0, q99 = 1.0;
  Vec samples;  // sorted null max-ratios
};

// Max consecutive singular-value ratio of one null Gram draw.
double null_max_ratio(std::size_t W, std::uint64_t p, std::uint64_t seed, NullSampler kind);

Significance ratio_significance(double R, std::size_t W, std::uint64_t p, std::size_t n_mc,
                                std::uint64_t seed, NullSampler kind = NullSampler::wishart);

enum class Verdict { genuine, marginal, null };
const char* verdict_name(Verdict v);
double ratio_threshold(double noise_cv);
Verdict ratio_test(double R, double noise_cv);

}  // namespace spedge
