#pragma once

#include <utility>

#include "spedge/common.hpp"
#include "spedge/spectra.hpp"
#include "spedge/trajstore.hpp"

namespace spedge {

inline constexpr double kDegenerateTol = 1e-10;  // relative to lambda_1

// R = entering entering^T - exiting exiting^T, never materialized.
struct RankTwoUpdate {
  Vec entering;
  Vec exiting;

  // max(|entering|^2, |exiting|^2): cheap upper bound on ||R||_op.
  double norm_bound() const;
  // Exact operator norm from the 2x2 problem on span{entering, exiting}.
  double op_norm() const;
  double trace() const;
  double frobenius() const;
};

// Nonzero eigenpairs of the p x p window covariance C = X^T X (equivalently
// of the Gram matrix). When the modes do not span R^p the orthogonal
// complement is an eigenspace with eigenvalue 0 and takes part in the
// perturbation sums through the rank-two structure of R.
struct ModeBasis {
  std::size_t p = 0;
  Vec lambdas;             // descending, > 0
  std::vector<Vec> vecs;   // unit vectors in R^p
  Vec gaps;                // min_{i != j} |lambda_j - lambda_i|, including the null level
  bool has_null = false;   // true when p > number of modes

  std::size_t size() const { return lambdas.size(); }
};

ModeBasis mode_basis(const TrajectoryWindow& w, const SpectrumSnapshot& s);
ModeBasis mode_basis(const TrajectoryWindow& w);
void fill_gaps(ModeBasis& m);

// Ground truth: slide the window and decompose from scratch. Eigenvectors are
// signed to agree with the previous basis where the mode index persists.
ModeBasis apply_rank_two_exact(const ModeBasis& prev, const RankTwoUpdate& upd,
                               const TrajectoryWindow& slid_window);

struct GuardStatus {
  double norm_R = 0;     // exact operator norm
  double delta_k = 0;    // spectral gap of mode k
  bool valid = true;     // norm_R <= delta_k / 4
};

struct EigenIncrement {
  double delta = 0;         // first + second order
  double first_order = 0;
  double second_order = 0;
  double null_term = 0;     // part of second_order coming from the null space
  GuardStatus guard;
  std::vector<std::pair<int, int>> skipped;  // degenerate pairs (1-based)
};

struct TwistResult {
  Vec dv;
  GuardStatus guard;
  std::vector<std::pair<int, int>> skipped;
};

struct GapIncrement {
  double delta = 0;
  double repulsion = 0;   // 2 |v_{k+1}^T R v_k|^2 / gamma_k, always >= 0
  double gamma = 0;
  bool near_crossing = false;
  bool trusted = true;
};

// k is 1-based throughout.
GuardStatus validity_guard(const ModeBasis& m, int k, const RankTwoUpdate& upd);
EigenIncrement eigenvalue_increment_2nd(const ModeBasis& m, int k, const RankTwoUpdate& upd);
TwistResult eigenvector_twist_1st(const ModeBasis& m, int k, const RankTwoUpdate& upd);
GapIncrement gap_increment_singular(const ModeBasis& m, int k, const RankTwoUpdate& upd);

}  // namespace spedge
