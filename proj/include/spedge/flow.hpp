#pragma once

#include <functional>
#include <limits>
#include <string>

#include "spedge/common.hpp"
#include "spedge/linalg.hpp"

namespace spedge {

inline constexpr double kFlowDegenerateTol = 1e-10;

// ---------------------------------------------------------------- state

struct FlowState {
  Vec d_sq;          // signal strengths d_j^2
  double nu_sq = 0;  // noise variance
  Vec h;             // curvatures
  Vec G;             // effective gradient projections
  double omega = 0;
  double eta = 1e-3;
  double W = 10;
  double t = 0;

  std::size_t modes() const { return d_sq.size(); }
  void validate() const;
};

struct FlowSample {
  double t = 0;
  Vec d_sq;
  int kstar = 1;    // argmax_j d_j / d_{j+1} over the sorted strengths
  double g = 0;     // d_{k*} - d_{k*+1}
  double residual = 0;  // integrator diagnostic (coupled system: dissipation residual)
};

struct FlowEvent {
  double t = 0;
  std::string kind;
  int position = 0;
  double value = 0;
};

struct FlowTrajectory {
  std::vector<FlowSample> samples;
  std::vector<FlowEvent> events;
  double max_residual = 0;
  double min_pair_gap = std::numeric_limits<double>::infinity();
  int substeps = 0;
};

// k* and g from the current strengths (sorted descending, 1-based k*).
std::pair<int, double> kstar_and_gap(const Vec& d_sq);

// ---------------------------------------------------------------- steady state

double phi_factor(double eta, double h_plus_omega, double W);
double steady_state_d(double eta, double G_eff, double h, double omega, double W);

// ---------------------------------------------------------------- integrators

// dd_j^2/dt = -2 eta (h_j + omega) d_j^2 + injection_j, fixed-step RK4.
FlowTrajectory integrate_phenomenological(FlowState s, const Vec& injection, double T,
                                          double dt = 1.0);

// Same ODE with the closure injection eta W |G_j|^2 / d_j. A mode sitting at
// d_j = 0 receives the one-step entering term eta^2 |G_j|^2 instead.
FlowTrajectory integrate_closure(FlowState s, double T, double dt = 1.0);
Vec closure_injection(const FlowState& s);

// Coupled eigenvalue system
//   dd_j^2/dt = -2 eta d_j^2 [a_j + sum_{i!=j} (a_i + a_j) d_i^2 / (d_j^2 - d_i^2)],
// a_j = h_j + omega. RK4 with factor-10 sub-stepping while the smallest
// pairwise gap is below 10 dt |rhs|. Throws ErrorCode::numerical when two
// levels meet (pairwise gap below 1e-9 of the largest level at the finest
// sub-step) instead of stepping through a swap.
Vec coupled_rhs(const FlowState& s, const Vec& d_sq);
FlowTrajectory integrate_coupled(FlowState s, double T, double dt = 1.0, int max_refine = 8);

// ---------------------------------------------------------------- source terms

struct SourceTerms {
  Vec S;         // 2 G_j sum_{i!=j} Cdot_ij / (d_j^2 - d_i^2) G_i
  Vec coupling;  // sum_{i!=j} Cdot_ij / (d_j^2 - d_i^2) G_i
  double sum = 0;
  double abs_sum = 0;
  std::vector<std::pair<int, int>> degenerate;  // skipped pairs (1-based)
};

SourceTerms source_terms_exact(const Vec& d_sq, const Vec& G, const Mat& Cdot);

// N_j = G_dot_j + eta (h_j + omega) G_j - coupling_j
Vec anharmonic_residual(const Vec& G_dot, const Vec& G, const Vec& h, double omega, double eta,
                        const Vec& coupling);

// ---------------------------------------------------------------- gap flow

struct GapFlowTerms {
  int kstar = 1;
  double curvature = 0;  // -eta (h_k - h_{k+1}) d_bar
  double damping = 0;    // -eta (h_bar + omega) g
  double driving = 0;    // eta W (|G_k|^2/d_k - |G_{k+1}|^2/d_{k+1})
  double total = 0;
  bool diverged = false;
};

// Modes are read in their stored order; k* is found on that order, so callers
// keep modes sorted by strength.
GapFlowTerms gap_flow_rhs(const FlowState& s);

// c = eta (h_{k+1} - h_k) d_bar + eta W (|G_k|^2 - |G_{k+1}|^2) / d_bar
double gap_constant_part(double eta, double W, double h_k, double h_k1, double G_k, double G_k1,
                         double d_bar);

enum class GapRegime { viable, collapsing, marginal };
const char* gap_regime_name(GapRegime r);

struct CriticalGap {
  GapRegime regime = GapRegime::marginal;
  double rate = 0;        // eta (h_bar + omega)
  double g_star = 0;      // c / rate when viable
  double t_collapse = std::numeric_limits<double>::quiet_NaN();  // when collapsing
  double eps = 0;
};

// eps <= 0 selects the default resolution 1e-3 * g0.
CriticalGap critical_gap_dynamics(double c, double eta, double h_bar, double omega, double g0,
                                  double eps = -1.0);

// Integrates dg/dt = -k g + c + A / g (A = 0 drops the repulsion term).
struct GapOdeRun {
  Vec t, g;
  double g_min = 0;
  double t_min = 0;
  double t_hit = std::numeric_limits<double>::quiet_NaN();  // first time g <= eps_hit
};
GapOdeRun integrate_gap_ode(double k, double c, double A, double g0, double T, double dt,
                            double eps_hit = -1.0);

// |gamma|^2 / (2 d_bar^2 |c|); c >= 0 throws not_applicable.
double level_repulsion_min_gap(double gamma_coupling, double d_bar, double c);

// ---------------------------------------------------------------- avoided crossing

struct CrossingGeometry {
  double V = 0;
  double g_min = 0;
  double duration = 0;        // 2 g0 / |drift|, or the exact form when g0 <= g_min
  double duration_exact = 0;  // 2 sqrt(g0^2 - g_min^2) / |drift|
  double rotation = 0;        // arctan(g_min / g0)
  double drift_diff = 0;
  bool exact_duration_used = false;
};
CrossingGeometry avoided_crossing(double V, double drift_diff, double g0);

// Eigenvalues of [[lbar + drift t / 2, V], [V, lbar - drift t / 2]].
std::pair<double, double> lz_levels(double lbar, double drift_diff, double V, double t);

// ---------------------------------------------------------------- noise flow

struct NoiseFlow {
  Vec t, nu_sq;
  bool has_equilibrium = false;
  double nu_sq_ss = std::numeric_limits<double>::quiet_NaN();
  double growth_rate = 0;  // d nu^2/dt when omega = 0
};
// d nu^2/dt = eta^2 * tr_over_p - 2 eta omega nu^2, tr_over_p = Tr(P Sigma P)/p.
NoiseFlow noise_flow(const FlowState& s, double tr_over_p, double T, double dt = 1.0);

// ---------------------------------------------------------------- grokking

enum class GrokVerdict { groks, memorizes, suppressed };
const char* grok_verdict_name(GrokVerdict v);
GrokVerdict grokking_condition(double lambda_gen, double lambda_mem, double N, double omega);

// ---------------------------------------------------------------- evolving kernel

struct KernelStep {
  Vec c, lambdas;
  Mat Gamma;  // Gamma_jk = Kdot_kj / (lambda_j - lambda_k)
  double A = 0;
  bool near_crossing = false;
};

// One RK4 step of c_j' = -eta lambda_j (c_j - y_j) + sum_{k!=j} Gamma_jk c_k with
// lambda_j(t) = lambda_j + Kdot_jj t inside the step.
KernelStep evolving_kernel_step(const Vec& c, const Vec& ystar, const Vec& lambdas,
                                const Mat& Kdot, double eta, double dt);

double adiabatic_parameter(const Mat& Kdot, const Vec& lambdas, double eta);

struct KernelRun {
  Vec c_final, lambdas_final;
  double A_max = 0;
  double transfer = 0;  // largest |c_j| reached by modes that started at 0, over |c0|
};
// Integrates with Kdot(t) supplied per step, from t = 0 to T.
KernelRun evolve_kernel(Vec c, const Vec& ystar, Vec lambdas,
                        const std::function<Mat(double)>& Kdot_at, double eta, double T,
                        double dt);

// ---------------------------------------------------------------- scaling

struct ScalingSpec {
  double p_exp = 1, q_exp = 2;
  // staircase: activation times t_k = tau * sum_{i<=k} i^s
  bool staircase = false;
  double s_exp = 0;
  double tau = 1;
  // staircase driven by kernel activation times t_k = 1 / (eta lambda_k)
  bool kernel_activation = false;
  std::size_t n_modes = 100000;
  double eta = 1;
  Vec T_grid;
};

struct ScalingFit {
  Vec T, L;
  double slope = 0, intercept = 0;
  double predicted = 0;
};

double scaling_loss(const ScalingSpec& spec, double T);
Vec scaling_T_grid(const ScalingSpec& spec, double k_lo, double k_hi, std::size_t n);
ScalingFit scaling_law_sim(const ScalingSpec& spec);

// ---------------------------------------------------------------- NTK Gram

// (eta^2 / N^2) r_s^T K r_t
double ntk_gram_entry(const Vec& r_s, const Vec& r_t, const Mat& K, double eta, double N);

// W x W Gram of the constant-kernel trajectory with residuals
// r_t = exp(-eta K t / N) r0, t = t0 .. t0 + W - 1.
Mat ntk_gram(const Mat& K, const Vec& r0, double eta, double N, std::size_t W, double t0 = 0);

// #{k : eta lambda_k W / N >= 1 and c_k != 0}
int count_active_modes(const Vec& lambdas, const Vec& c, double eta, double W, double N);

}  // namespace spedge
