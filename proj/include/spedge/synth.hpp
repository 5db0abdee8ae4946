#pragma once

#include <cstdint>
#include <string>

#include "spedge/common.hpp"
#include "spedge/rng.hpp"
#include "spedge/trajstore.hpp"

namespace spedge {

// K orthonormal vectors in R^p: e_1..e_K pushed through a seeded product of
// `reflections` Householder reflections (default 2K + 2).
std::vector<Vec> householder_basis(std::size_t p, std::size_t K, std::uint64_t seed,
                                   std::size_t reflections = 0);

struct Preconditioner {
  enum class Kind { identity, diagonal, adam_like };
  Kind kind = Kind::identity;
  Vec values;          // diagonal entries (diagonal kind), length p
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct QuadraticLandscape {
  std::size_t p = 0;
  Vec h_outliers;       // descending, each >= bulk
  double h_bulk = 0;
  std::uint64_t basis_seed = 1;
  double omega = 0;
  Preconditioner precond;
  Vec theta_star;       // minimizer (empty means 0); b = H theta_star
  Vec theta_star_val;   // optional validation minimizer

  void validate() const;
};

// Landscape with its outlier directions materialized (K x p).
class Quadratic {
 public:
  explicit Quadratic(QuadraticLandscape L);

  const QuadraticLandscape& spec() const { return L_; }
  const std::vector<Vec>& directions() const { return q_; }
  std::size_t p() const { return L_.p; }

  Vec hess_apply(const Vec& x) const;
  Vec grad(const Vec& theta) const;       // H (theta - theta*)
  Vec grad_val(const Vec& theta) const;   // H (theta - theta*_val)
  double loss(const Vec& theta) const;
  double loss_val(const Vec& theta) const;
  bool has_val() const { return !L_.theta_star_val.empty(); }

  // theta with prescribed projections on the outlier directions plus an
  // optional component along a random bulk direction orthogonal to them.
  Vec compose_theta(const Vec& outlier_coords, double bulk_coord, std::uint64_t seed) const;

 private:
  QuadraticLandscape L_;
  std::vector<Vec> q_;
};

struct NoiseSpec {
  enum class Kind { none, isotropic, colored };
  Kind kind = Kind::none;
  double nu = 0;           // per-coordinate std (before batch scaling)
  double kappa = 0;        // colored: target ||Sigma||_F^2 / Tr(Sigma)^2
  std::uint32_t batch_B = 1;
  double beta2 = -1;       // colored: when in [0,1), kappa comes from kappa_from_beta2

  double effective_kappa(std::size_t p) const;
};

// kappa_N(beta2) = 1 / (p (1 - beta2)), capped at 1; isotropic at beta2 = 0.
double kappa_from_beta2(double beta2, std::size_t p);

// Diagonal covariance tau_a proportional to a^-s, with s solved so that
// kappa(tau) hits the target; normalized to mean variance 1.
struct ColoredProfile {
  Vec tau;
  double exponent = 0;
  double kappa = 0;
};
ColoredProfile colored_profile(std::size_t p, double kappa_target);

// Draws noise vectors per NoiseSpec. Colored profiles are computed once.
class NoiseSource {
 public:
  NoiseSource(const NoiseSpec& spec, std::size_t p);
  void sample(Rng& rng, Vec& out) const;  // overwrites out (length p)
  void add(Rng& rng, Vec& out) const;     // adds into out
  double kappa() const { return kappa_; }
  double trace() const { return trace_; }
  double frob_sq() const { return frob_sq_; }

 private:
  NoiseSpec spec_;
  std::size_t p_;
  Vec sd_;  // per-coordinate standard deviation (colored)
  double scale_ = 0;
  double kappa_ = 0, trace_ = 0, frob_sq_ = 0;
};

struct QuadraticRun {
  UpdateStream stream;
  Vec theta_final;
  bool diverged = false;
  std::size_t diverged_at = 0;
  bool unstable_by_design = false;  // eta * max(P h) >= 2
};

QuadraticRun run_quadratic(const Quadratic& Q, const Vec& theta0, double eta, std::size_t steps,
                           const NoiseSpec& noise, std::uint64_t seed);

// strengths(t, j): steps x k schedule of planted singular values. Row t is
// sum_j strengths(t, j) u_j(t mod W) v_j + noise with u_j the j-th Fourier
// phase.
UpdateStream planted_signal_stream(const std::vector<Vec>& directions, const Mat& strengths,
                                   std::size_t W_intended, const NoiseSpec& noise, std::size_t p,
                                   std::size_t steps, std::uint64_t seed);

// Linear ramp of each mode's strength from start[j] to end[j] over `steps`.
Mat linear_schedule(std::size_t steps, const Vec& start, const Vec& end);

UpdateStream pure_noise_stream(std::size_t p, std::size_t steps, const NoiseSpec& noise,
                               std::uint64_t seed);

// Real Fourier basis of R^W (constant, cos/sin pairs, alternating when W is
// even). Any W consecutive steps of a cyclic phase stay orthonormal, so a
// window starting anywhere sees a diagonal Gram.
Mat fourier_phases(std::size_t W);

}  // namespace spedge
