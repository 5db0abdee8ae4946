#pragma once

#include "spedge/common.hpp"
#include "spedge/perturb.hpp"
#include "spedge/spectra.hpp"

namespace spedge {

struct Bound {
  double value = 0;
  bool diverged = false;
};

// min(1, ||E||_F / sep); sep <= 0 gives 1 with the diverged flag.
Bound davis_kahan_bound(double deltaG_frob, double sep);

struct GapStability {
  double exact = 0;     // ||dG|| / (sigma_k^2 - sigma_{k+1}^2)
  double factored = 0;  // ||dG|| / ((d_k + d_{k+1}) g)
  bool diverged = false;
};
GapStability gap_stability_bound(const SpectrumSnapshot& s, double deltaG_frob);

struct Alpha {
  double value = 0;
  bool zero_gap = false;
};
// max(0, 1 - C ||dG||^2 / gap^2)
Alpha stability_coefficient(double gap, double deltaG_frob, double C = 1.0);

// Nearest-neighbour gaps min_{i != j} |lambda_j - lambda_i| over the window
// spectrum.
Vec nearest_gaps(const Vec& eigvals);

struct HalfWindowAlpha {
  Vec alpha;              // one entry per mode of the full window
  bool odd_split = false; // middle row dropped
  std::vector<int> rank_limited;  // modes set to 0 for lack of rank (1-based)
};
HalfWindowAlpha alpha_empirical_halfwindow(const TrajectoryWindow& w);

// Profile over positions j = 1..W-1 (index j-1). Diverged positions hold +inf.
struct BlockProfile {
  Vec bound;
  std::vector<bool> diverged;
  int argmin = 1;
};
BlockProfile block_dk_profile(const SpectrumSnapshot& s, double deltaG_frob);
Bound block_dk_bound(const SpectrumSnapshot& s, int j, double deltaG_frob);

struct LossDecomposition {
  Vec G_train, G_val;
  Vec terms;  // alpha_j G_train_j G_val_j
  double predicted_dL = 0;
};
LossDecomposition loss_decomposition(const ModeBasis& modes, const Vec& grad_train,
                                     const Vec& grad_val, const Vec& alpha, double eta);

struct StabilityReport {
  std::int64_t t0 = 0;
  double deltaG_frob = 0;
  double C = 1.0;
  Vec gaps;
  Vec alpha;
  Vec alpha_empirical;
  Vec dk;
  Vec block;
  int block_argmin = 1;
  GapStability gap_bound;
};

// ||dG||_F for the slide from window w to its successor: the Frobenius norm
// of the rank-two covariance change, which is the representation in which
// consecutive windows share coordinates.
double slide_delta_frob(const Vec& entering, const Vec& exiting);

StabilityReport stability_report(const TrajectoryWindow& w, const SpectrumSnapshot& s,
                                 double deltaG_frob, double C = 1.0, bool with_empirical = true);

}  // namespace spedge
