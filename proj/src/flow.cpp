#include "spedge/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spedge {

namespace {

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vec add_scaled(const Vec& x, double a, const Vec& k) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + a * k[i];
  return y;
}

void push_sample(FlowTrajectory& tr, double t, const Vec& d_sq, double residual = 0) {
  FlowSample s;
  s.t = t;
  s.d_sq = d_sq;
  auto [k, g] = kstar_and_gap(d_sq);
  s.kstar = k;
  s.g = g;
  s.residual = residual;
  if (!tr.samples.empty() && tr.samples.back().kstar != k)
    tr.events.push_back({t, "kstar_shift", k, g});
  tr.samples.push_back(std::move(s));
}

}  // namespace

void FlowState::validate() const {
  const std::size_t n = d_sq.size();
  if (n == 0) throw Error(ErrorCode::argument, "flow state has no modes");
  if (h.size() != n) throw Error(ErrorCode::argument, "h must have one entry per mode");
  if (!G.empty() && G.size() != n)
    throw Error(ErrorCode::argument, "G must have one entry per mode");
  if (!all_finite(d_sq) || !all_finite(h) || !all_finite(G) || !std::isfinite(nu_sq) ||
      !std::isfinite(omega) || !std::isfinite(eta) || !std::isfinite(W))
    throw Error(ErrorCode::argument, "flow state holds non-finite values");
  for (double x : d_sq)
    if (x < 0) throw Error(ErrorCode::argument, "d_j^2 must be non-negative");
  if (nu_sq < 0) throw Error(ErrorCode::argument, "nu^2 must be non-negative");
}

std::pair<int, double> kstar_and_gap(const Vec& d_sq) {
  if (d_sq.size() < 2) return {1, 0.0};
  Vec d(d_sq.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::sqrt(std::max(0.0, d_sq[i]));
  std::sort(d.begin(), d.end(), std::greater<>());
  int k = 1;
  double best = -1;
  for (std::size_t j = 0; j + 1 < d.size(); ++j) {
    const double r = d[j + 1] > 0 ? d[j] / d[j + 1]
                                  : (d[j] > 0 ? std::numeric_limits<double>::infinity() : 1.0);
    if (r > best) {
      best = r;
      k = static_cast<int>(j) + 1;
    }
    if (std::isinf(r)) break;
  }
  return {k, d[k - 1] - d[k]};
}

// ---------------------------------------------------------------- steady state

double phi_factor(double eta, double hpo, double W) {
  const double x = eta * hpo;
  if (x < 0) throw Error(ErrorCode::argument, "eta (h + omega) must be non-negative");
  if (x == 0) return W;
  return std::expm1(-2.0 * x * W) / std::expm1(-2.0 * x);
}

double steady_state_d(double eta, double G, double h, double omega, double W) {
  return eta * std::fabs(G) * std::sqrt(phi_factor(eta, h + omega, W));
}

// ---------------------------------------------------------------- phenomenological

namespace {

FlowTrajectory integrate_linear_injection(FlowState s, double T, double dt,
                                          const std::function<Vec(const Vec&)>& inject) {
  s.validate();
  if (!(dt > 0) || !std::isfinite(dt)) throw Error(ErrorCode::argument, "dt must be positive");
  if (!(T >= 0)) throw Error(ErrorCode::argument, "T must be non-negative");
  const std::size_t n = s.modes();
  Vec a(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = s.h[j] + s.omega;
  auto rhs = [&](const Vec& x) {
    Vec inj = inject(x);
    Vec r(n);
    for (std::size_t j = 0; j < n; ++j) r[j] = -2.0 * s.eta * a[j] * x[j] + inj[j];
    return r;
  };
  FlowTrajectory tr;
  push_sample(tr, s.t, s.d_sq);
  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(T / dt - 1e-9)));
  Vec x = s.d_sq;
  double t = s.t;
  for (std::size_t it = 0; it < steps; ++it) {
    const double h = std::min(dt, s.t + T - t);
    const Vec k1 = rhs(x);
    const Vec k2 = rhs(add_scaled(x, 0.5 * h, k1));
    const Vec k3 = rhs(add_scaled(x, 0.5 * h, k2));
    const Vec k4 = rhs(add_scaled(x, h, k3));
    for (std::size_t j = 0; j < n; ++j) {
      x[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
      if (!std::isfinite(x[j])) throw Error(ErrorCode::numerical, "flow state became non-finite");
      if (x[j] < 0) {
        if (x[j] < -1e-12) tr.events.push_back({t + h, "clamped", static_cast<int>(j) + 1, x[j]});
        x[j] = 0;
      }
    }
    t += h;
    push_sample(tr, t, x);
  }
  return tr;
}

}  // namespace

FlowTrajectory integrate_phenomenological(FlowState s, const Vec& injection, double T, double dt) {
  if (injection.size() != s.modes())
    throw Error(ErrorCode::argument, "injection must have one entry per mode");
  if (!all_finite(injection)) throw Error(ErrorCode::argument, "injection is non-finite");
  return integrate_linear_injection(s, T, dt, [&](const Vec&) { return injection; });
}

Vec closure_injection(const FlowState& s) {
  Vec inj(s.modes());
  for (std::size_t j = 0; j < s.modes(); ++j) {
    const double d = std::sqrt(std::max(0.0, s.d_sq[j]));
    inj[j] = d > 0 ? s.eta * s.W * s.G[j] * s.G[j] / d : s.eta * s.eta * s.G[j] * s.G[j];
  }
  return inj;
}

FlowTrajectory integrate_closure(FlowState s, double T, double dt) {
  if (s.G.size() != s.modes()) throw Error(ErrorCode::argument, "closure needs G per mode");
  return integrate_linear_injection(s, T, dt, [&s](const Vec& x) {
    FlowState tmp = s;
    tmp.d_sq = x;
    return closure_injection(tmp);
  });
}

// ---------------------------------------------------------------- coupled system

Vec coupled_rhs(const FlowState& s, const Vec& x) {
  const std::size_t n = x.size();
  Vec r(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double aj = s.h[j] + s.omega;
    double br = aj;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      const double ai = s.h[i] + s.omega;
      br += (ai + aj) * x[i] / (x[j] - x[i]);
    }
    r[j] = -2.0 * s.eta * x[j] * br;
  }
  return r;
}

namespace {

double min_pair_gap(const Vec& x) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) m = std::min(m, std::fabs(x[i] - x[j]));
  return m;
}

double max_abs(const Vec& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

struct CoupledStepper {
  const FlowState& s;
  int max_refine;
  FlowTrajectory& tr;

  double dissipation(const Vec& x) const {
    double d = 0;
    for (std::size_t j = 0; j < x.size(); ++j) d += (s.h[j] + s.omega) * x[j];
    return -2.0 * s.eta * d;
  }

  bool order_kept(const Vec& a, const Vec& b) const {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j)
        if ((a[i] > a[j]) != (b[i] > b[j]) || b[i] == b[j]) return false;
    return true;
  }

  // Advances x by h, refining while levels are close. Returns the largest
  // discrete dissipation residual seen.
  double advance(Vec& x, double t, double h, int depth) {
    const Vec k1 = coupled_rhs(s, x);
    const double scale = *std::max_element(x.begin(), x.end());
    const double gap = min_pair_gap(x);
    if (x.size() > 1 && gap < 10.0 * h * max_abs(k1) && depth < max_refine) {
      ++tr.substeps;
      double worst = 0;
      for (int i = 0; i < 10; ++i) worst = std::max(worst, advance(x, t + i * h / 10, h / 10, depth + 1));
      return worst;
    }
    const Vec x2 = add_scaled(x, 0.5 * h, k1);
    const Vec k2 = coupled_rhs(s, x2);
    const Vec x3 = add_scaled(x, 0.5 * h, k2);
    const Vec k3 = coupled_rhs(s, x3);
    const Vec x4 = add_scaled(x, h, k3);
    const Vec k4 = coupled_rhs(s, x4);
    Vec nx(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      nx[j] = x[j] + h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    if (!all_finite(nx) || !order_kept(x, nx) ||
        (x.size() > 1 && min_pair_gap(nx) < 1e-9 * scale)) {
      if (depth < max_refine) {
        ++tr.substeps;
        double worst = 0;
        for (int i = 0; i < 10; ++i)
          worst = std::max(worst, advance(x, t + i * h / 10, h / 10, depth + 1));
        return worst;
      }
      throw Error(ErrorCode::numerical,
                  "coupled levels meet near t = " + std::to_string(t) +
                      " (pairwise gap " + std::to_string(min_pair_gap(x)) + ", largest level " +
                      std::to_string(scale) + ")");
    }
    // The coupling terms cancel pairwise, so the change in total signal must
    // equal the RK4 quadrature of the dissipation alone.
    const double dsum = std::accumulate(nx.begin(), nx.end(), 0.0) -
                        std::accumulate(x.begin(), x.end(), 0.0);
    const double quad = h / 6.0 *
                        (dissipation(x) + 2 * dissipation(x2) + 2 * dissipation(x3) +
                         dissipation(x4));
    const double res = std::fabs(dsum - quad) / std::max(std::fabs(quad), 1e-300);
    tr.min_pair_gap = std::min(tr.min_pair_gap, min_pair_gap(nx));
    x = nx;
    return res;
  }
};

}  // namespace

FlowTrajectory integrate_coupled(FlowState s, double T, double dt, int max_refine) {
  s.validate();
  if (!(dt > 0)) throw Error(ErrorCode::argument, "dt must be positive");
  for (std::size_t i = 0; i < s.modes(); ++i)
    for (std::size_t j = i + 1; j < s.modes(); ++j)
      if (s.d_sq[i] == s.d_sq[j])
        throw Error(ErrorCode::argument, "coupled system needs distinct initial d_j^2");
  FlowTrajectory tr;
  tr.min_pair_gap = min_pair_gap(s.d_sq);
  push_sample(tr, s.t, s.d_sq);
  CoupledStepper st{s, max_refine, tr};
  Vec x = s.d_sq;
  double t = s.t;
  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(T / dt - 1e-9)));
  for (std::size_t it = 0; it < steps; ++it) {
    const double h = std::min(dt, s.t + T - t);
    const double res = st.advance(x, t, h, 0);
    tr.max_residual = std::max(tr.max_residual, res);
    t += h;
    push_sample(tr, t, x, res);
  }
  return tr;
}

// ---------------------------------------------------------------- source terms

SourceTerms source_terms_exact(const Vec& d_sq, const Vec& G, const Mat& Cdot) {
  const std::size_t n = d_sq.size();
  if (G.size() != n || Cdot.rows != n || Cdot.cols != n)
    throw Error(ErrorCode::argument, "source terms: shape mismatch");
  SourceTerms out;
  out.S.assign(n, 0.0);
  out.coupling.assign(n, 0.0);
  double scale = 0;
  for (double x : d_sq) scale = std::max(scale, std::fabs(x));
  const double tol = kFlowDegenerateTol * scale;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i) {
      const double denom = d_sq[j] - d_sq[i];
      if (std::fabs(denom) <= tol) {
        out.degenerate.emplace_back(static_cast<int>(j) + 1, static_cast<int>(i) + 1);
        continue;
      }
      const double cij = 0.5 * (Cdot(i, j) + Cdot(j, i));
      const double w = cij / denom;
      out.coupling[j] += w * G[i];
      out.coupling[i] -= w * G[j];
      // the (i,j) pair moves signal between the two modes and nowhere else
      const double pair = 2.0 * G[j] * w * G[i];
      out.S[j] += pair;
      out.S[i] -= pair;
    }
  for (double v : out.S) {
    out.sum += v;
    out.abs_sum += std::fabs(v);
  }
  return out;
}

Vec anharmonic_residual(const Vec& G_dot, const Vec& G, const Vec& h, double omega, double eta,
                        const Vec& coupling) {
  const std::size_t n = G.size();
  if (G_dot.size() != n || h.size() != n || coupling.size() != n)
    throw Error(ErrorCode::argument, "anharmonic residual: shape mismatch");
  Vec N(n);
  for (std::size_t j = 0; j < n; ++j)
    N[j] = G_dot[j] + eta * (h[j] + omega) * G[j] - coupling[j];
  return N;
}

// ---------------------------------------------------------------- gap flow

GapFlowTerms gap_flow_rhs(const FlowState& s) {
  if (s.modes() < 2) throw Error(ErrorCode::argument, "gap flow needs two modes");
  if (s.G.size() != s.modes()) throw Error(ErrorCode::argument, "gap flow needs G per mode");
  GapFlowTerms out;
  const std::size_t n = s.modes();
  Vec d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = std::sqrt(std::max(0.0, s.d_sq[j]));
  double best = -1;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double r = d[j + 1] > 0 ? d[j] / d[j + 1] : std::numeric_limits<double>::infinity();
    if (r > best) {
      best = r;
      out.kstar = static_cast<int>(j) + 1;
    }
    if (std::isinf(r)) break;
  }
  const std::size_t k = static_cast<std::size_t>(out.kstar - 1);
  const double dk = d[k], dn = d[k + 1];
  const double dbar = 0.5 * (dk + dn), hbar = 0.5 * (s.h[k] + s.h[k + 1]);
  const double g = dk - dn;
  out.curvature = -s.eta * (s.h[k] - s.h[k + 1]) * dbar;
  out.damping = -s.eta * (hbar + s.omega) * g;
  if (dn <= 0 || dk <= 0) {
    out.diverged = true;
    out.driving = std::numeric_limits<double>::infinity();
  } else {
    out.driving = s.eta * s.W * (s.G[k] * s.G[k] / dk - s.G[k + 1] * s.G[k + 1] / dn);
  }
  out.total = out.curvature + out.damping + out.driving;
  return out;
}

double gap_constant_part(double eta, double W, double h_k, double h_k1, double G_k, double G_k1,
                         double d_bar) {
  return eta * (h_k1 - h_k) * d_bar + eta * W * (G_k * G_k - G_k1 * G_k1) / d_bar;
}

const char* gap_regime_name(GapRegime r) {
  switch (r) {
    case GapRegime::viable: return "viable";
    case GapRegime::collapsing: return "collapsing";
    case GapRegime::marginal: return "marginal";
  }
  return "marginal";
}

CriticalGap critical_gap_dynamics(double c, double eta, double h_bar, double omega, double g0,
                                  double eps) {
  CriticalGap out;
  out.rate = eta * (h_bar + omega);
  if (!(out.rate > 0)) throw Error(ErrorCode::argument, "eta (h_bar + omega) must be positive");
  out.eps = eps > 0 ? eps : 1e-3 * g0;
  if (c > 0) {
    out.regime = GapRegime::viable;
    out.g_star = c / out.rate;
  } else if (c < 0) {
    out.regime = GapRegime::collapsing;
    out.g_star = c / out.rate;
    out.t_collapse = std::log(g0 / out.eps) / (eta * h_bar);
  } else {
    out.regime = GapRegime::marginal;
  }
  return out;
}

GapOdeRun integrate_gap_ode(double k, double c, double A, double g0, double T, double dt,
                            double eps_hit) {
  if (!(dt > 0)) throw Error(ErrorCode::argument, "dt must be positive");
  if (A > 0 && !(g0 > 0)) throw Error(ErrorCode::argument, "repulsive gap ODE needs g0 > 0");
  auto f = [&](double g) { return -k * g + c + (A > 0 ? A / g : 0.0); };
  GapOdeRun run;
  double t = 0, g = g0;
  run.t.push_back(t);
  run.g.push_back(g);
  run.g_min = g;
  while (t < T - 1e-12) {
    double h = std::min(dt, T - t);
    if (A > 0) {
      // the A/g term stiffens as g shrinks; keep the step well inside its scale
      const double stiff = k + A / (g * g);
      h = std::min(h, 0.05 / stiff);
      const double fv = std::fabs(f(g));
      if (fv > 0) h = std::min(h, 0.02 * g / fv);
    }
    const double k1 = f(g);
    const double k2 = f(g + 0.5 * h * k1);
    const double k3 = f(g + 0.5 * h * k2);
    const double k4 = f(g + h * k3);
    const double ng = g + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!std::isfinite(ng)) throw Error(ErrorCode::numerical, "gap ODE became non-finite");
    if (eps_hit > 0 && std::isnan(run.t_hit) && ng <= eps_hit && g > eps_hit)
      run.t_hit = t + h * (g - eps_hit) / (g - ng);
    t += h;
    g = ng;
    run.t.push_back(t);
    run.g.push_back(g);
    if (g < run.g_min) {
      run.g_min = g;
      run.t_min = t;
    }
  }
  return run;
}

double level_repulsion_min_gap(double gamma, double d_bar, double c) {
  if (c >= 0) throw Error(ErrorCode::not_applicable, "minimum gap applies to collapsing gaps (c < 0)");
  if (!(d_bar > 0)) throw Error(ErrorCode::argument, "d_bar must be positive");
  return gamma * gamma / (2.0 * d_bar * d_bar * std::fabs(c));
}

// ---------------------------------------------------------------- avoided crossing

CrossingGeometry avoided_crossing(double V, double drift, double g0) {
  if (drift == 0) throw Error(ErrorCode::argument, "drift difference must be non-zero");
  if (!(g0 > 0)) throw Error(ErrorCode::argument, "g0 must be positive");
  CrossingGeometry out;
  out.V = V;
  out.drift_diff = drift;
  out.g_min = 2.0 * std::fabs(V);
  out.duration_exact = 2.0 * std::sqrt(std::max(0.0, g0 * g0 - out.g_min * out.g_min)) /
                       std::fabs(drift);
  if (g0 <= out.g_min) {
    out.duration = out.duration_exact;
    out.exact_duration_used = true;
  } else {
    out.duration = 2.0 * g0 / std::fabs(drift);
  }
  out.rotation = std::atan(out.g_min / g0);
  return out;
}

std::pair<double, double> lz_levels(double lbar, double drift, double V, double t) {
  Mat H(2, 2);
  H(0, 0) = lbar + 0.5 * drift * t;
  H(1, 1) = lbar - 0.5 * drift * t;
  H(0, 1) = H(1, 0) = V;
  const SymEigen e = jacobi_eigen(H);
  return {e.values[0], e.values[1]};
}

// ---------------------------------------------------------------- noise flow

NoiseFlow noise_flow(const FlowState& s, double tr_over_p, double T, double dt) {
  if (s.omega < 0) throw Error(ErrorCode::argument, "omega must be non-negative");
  if (!(dt > 0)) throw Error(ErrorCode::argument, "dt must be positive");
  NoiseFlow out;
  const double src = s.eta * s.eta * tr_over_p;
  const double k = 2.0 * s.eta * s.omega;
  auto f = [&](double v) { return src - k * v; };
  if (s.omega > 0) {
    out.has_equilibrium = true;
    out.nu_sq_ss = s.eta * tr_over_p / (2.0 * s.omega);
  } else {
    out.growth_rate = src;
  }
  double t = 0, v = s.nu_sq;
  out.t.push_back(t);
  out.nu_sq.push_back(v);
  while (t < T - 1e-12) {
    const double h = std::min(dt, T - t);
    const double k1 = f(v), k2 = f(v + 0.5 * h * k1), k3 = f(v + 0.5 * h * k2),
                 k4 = f(v + h * k3);
    v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
    out.t.push_back(t);
    out.nu_sq.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------- grokking

const char* grok_verdict_name(GrokVerdict v) {
  switch (v) {
    case GrokVerdict::groks: return "groks";
    case GrokVerdict::memorizes: return "memorizes";
    case GrokVerdict::suppressed: return "suppressed";
  }
  return "memorizes";
}

GrokVerdict grokking_condition(double lambda_gen, double lambda_mem, double N, double omega) {
  if (lambda_gen < 0 || lambda_mem < 0) throw Error(ErrorCode::argument, "rates must be >= 0");
  if (!(N > 0)) throw Error(ErrorCode::argument, "N must be positive");
  const double gen = lambda_gen / N, mem = lambda_mem / N;
  if (gen > omega && omega > mem) return GrokVerdict::groks;
  if (omega >= gen) return GrokVerdict::suppressed;
  return GrokVerdict::memorizes;
}

// ---------------------------------------------------------------- evolving kernel

double adiabatic_parameter(const Mat& Kdot, const Vec& lambdas, double eta) {
  Vec l = lambdas;
  std::sort(l.begin(), l.end(), std::greater<>());
  if (l.size() < 2) return 0.0;
  std::size_t k = 0;
  double best = -1;
  for (std::size_t j = 0; j + 1 < l.size(); ++j) {
    const double r = l[j + 1] > 0 ? l[j] / l[j + 1] : std::numeric_limits<double>::infinity();
    if (r > best) {
      best = r;
      k = j;
    }
    if (std::isinf(r)) break;
  }
  const double g = l[k] - l[k + 1];
  const double kn = op_norm_sym(Kdot);
  if (kn == 0) return 0.0;
  if (!(g > 0)) return std::numeric_limits<double>::infinity();
  return kn / (eta * g * g);
}

KernelStep evolving_kernel_step(const Vec& c, const Vec& ystar, const Vec& lambdas,
                                const Mat& Kdot, double eta, double dt) {
  const std::size_t n = c.size();
  if (ystar.size() != n || lambdas.size() != n || Kdot.rows != n || Kdot.cols != n)
    throw Error(ErrorCode::argument, "evolving kernel: shape mismatch");
  KernelStep out;
  double scale = 0;
  for (double l : lambdas) scale = std::max(scale, std::fabs(l));
  const double tol = kFlowDegenerateTol * std::max(scale, 1e-300);

  auto lam_at = [&](double tau) {
    Vec l(n);
    for (std::size_t j = 0; j < n; ++j) l[j] = lambdas[j] + Kdot(j, j) * tau;
    return l;
  };
  bool near = false;
  auto f = [&](double tau, const Vec& x) {
    const Vec l = lam_at(tau);
    Vec r(n);
    for (std::size_t j = 0; j < n; ++j) {
      double v = -eta * l[j] * (x[j] - ystar[j]);
      for (std::size_t k = 0; k < n; ++k) {
        if (k == j) continue;
        const double den = l[j] - l[k];
        if (std::fabs(den) < tol) {
          near = true;
          continue;
        }
        v += Kdot(k, j) / den * x[k];
      }
      r[j] = v;
    }
    return r;
  };
  const Vec k1 = f(0, c);
  const Vec k2 = f(0.5 * dt, add_scaled(c, 0.5 * dt, k1));
  const Vec k3 = f(0.5 * dt, add_scaled(c, 0.5 * dt, k2));
  const Vec k4 = f(dt, add_scaled(c, dt, k3));
  out.c.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    out.c[j] = c[j] + dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  out.lambdas = lam_at(dt);
  out.Gamma = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      const double den = lambdas[j] - lambdas[k];
      out.Gamma(j, k) = std::fabs(den) < tol ? std::numeric_limits<double>::infinity()
                                             : Kdot(k, j) / den;
    }
  out.near_crossing = near;
  out.A = adiabatic_parameter(Kdot, lambdas, eta);
  return out;
}

KernelRun evolve_kernel(Vec c, const Vec& ystar, Vec lambdas,
                        const std::function<Mat(double)>& Kdot_at, double eta, double T,
                        double dt) {
  if (!(dt > 0)) throw Error(ErrorCode::argument, "dt must be positive");
  const Vec c0 = c;
  KernelRun run;
  double t = 0;
  while (t < T - 1e-12) {
    const double h = std::min(dt, T - t);
    const Mat Kd = Kdot_at(t);
    KernelStep st = evolving_kernel_step(c, ystar, lambdas, Kd, eta, h);
    run.A_max = std::max(run.A_max, st.A);
    c = std::move(st.c);
    lambdas = std::move(st.lambdas);
    t += h;
  }
  double moved = 0;
  for (std::size_t j = 0; j < c.size(); ++j)
    if (c0[j] == 0) moved += c[j] * c[j];
  run.transfer = std::sqrt(moved) / std::max(norm(c0), 1e-300);
  run.c_final = c;
  run.lambdas_final = lambdas;
  return run;
}

// ---------------------------------------------------------------- scaling

namespace {

Vec activation_times(const ScalingSpec& spec) {
  Vec t(spec.n_modes);
  double acc = 0;
  for (std::size_t k = 1; k <= spec.n_modes; ++k) {
    const double kd = static_cast<double>(k);
    if (spec.kernel_activation) {
      t[k - 1] = std::pow(kd, spec.p_exp) / spec.eta;
    } else {
      acc += spec.tau * std::pow(kd, spec.s_exp);
      t[k - 1] = acc;
    }
  }
  return t;
}

void check_spec(const ScalingSpec& spec) {
  if (!(spec.q_exp > 1)) throw Error(ErrorCode::argument, "q must exceed 1 for a finite target");
  if (spec.n_modes < 2) throw Error(ErrorCode::argument, "need at least two modes");
  if (!(spec.eta > 0)) throw Error(ErrorCode::argument, "eta must be positive");
}

}  // namespace

double scaling_loss(const ScalingSpec& spec, double T) {
  check_spec(spec);
  double L = 0;
  if (spec.staircase) {
    const Vec t = activation_times(spec);
    for (std::size_t k = 1; k <= spec.n_modes; ++k)
      if (t[k - 1] > T) L += std::pow(static_cast<double>(k), -spec.q_exp);
    return L;
  }
  // sum from the tail upward keeps the small terms from being absorbed
  for (std::size_t k = spec.n_modes; k >= 1; --k) {
    const double kd = static_cast<double>(k);
    L += std::pow(kd, -spec.q_exp) * std::exp(-2.0 * spec.eta * std::pow(kd, -spec.p_exp) * T);
  }
  return L;
}

Vec scaling_T_grid(const ScalingSpec& spec, double k_lo, double k_hi, std::size_t n) {
  check_spec(spec);
  auto T_of = [&](double k) {
    if (spec.staircase) {
      if (spec.kernel_activation) return std::pow(k, spec.p_exp) / spec.eta;
      return spec.tau * std::pow(k, spec.s_exp + 1.0) / (spec.s_exp + 1.0);
    }
    return std::pow(k, spec.p_exp) / (2.0 * spec.eta);
  };
  const double a = std::log(T_of(k_lo)), b = std::log(T_of(k_hi));
  Vec T(n);
  for (std::size_t i = 0; i < n; ++i)
    T[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  return T;
}

ScalingFit scaling_law_sim(const ScalingSpec& spec) {
  check_spec(spec);
  if (spec.T_grid.size() < 3) throw Error(ErrorCode::argument, "need at least 3 grid points");
  ScalingFit fit;
  fit.T = spec.T_grid;
  if (spec.staircase) {
    const Vec t = activation_times(spec);
    // suffix sums of k^-q over modes not yet activated
    Vec suffix(spec.n_modes + 1, 0.0);
    for (std::size_t k = spec.n_modes; k >= 1; --k)
      suffix[k - 1] = suffix[k] + std::pow(static_cast<double>(k), -spec.q_exp);
    for (double T : fit.T) {
      const auto it = std::upper_bound(t.begin(), t.end(), T);
      fit.L.push_back(suffix[static_cast<std::size_t>(it - t.begin())]);
    }
    fit.predicted = spec.kernel_activation ? -(spec.q_exp - 1) / spec.p_exp
                                           : -(spec.q_exp - 1) / (spec.s_exp + 1);
  } else {
    for (double T : fit.T) fit.L.push_back(scaling_loss(spec, T));
    fit.predicted = -(spec.q_exp - 1) / spec.p_exp;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(fit.T.size());
  for (std::size_t i = 0; i < fit.T.size(); ++i) {
    if (!(fit.L[i] > 0)) throw Error(ErrorCode::numerical, "loss reached zero inside the fit range");
    const double x = std::log(fit.T[i]), y = std::log(fit.L[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

// ---------------------------------------------------------------- NTK Gram

double ntk_gram_entry(const Vec& r_s, const Vec& r_t, const Mat& K, double eta, double N) {
  const std::size_t n = K.rows;
  if (r_s.size() != n || r_t.size() != n) throw Error(ErrorCode::argument, "residual size mismatch");
  double acc = 0;
  for (std::size_t a = 0; a < n; ++a) {
    if (r_s[a] == 0) continue;
    double row = 0;
    for (std::size_t b = 0; b < n; ++b) row += K(a, b) * r_t[b];
    acc += r_s[a] * row;
  }
  return eta * eta / (N * N) * acc;
}

Mat ntk_gram(const Mat& K, const Vec& r0, double eta, double N, std::size_t W, double t0) {
  const SymEigen e = jacobi_eigen(K);
  const std::size_t n = K.rows;
  Vec c(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t a = 0; a < n; ++a) c[k] += e.vectors(a, k) * r0[a];
  std::vector<Vec> r(W, Vec(n, 0.0));
  for (std::size_t s = 0; s < W; ++s) {
    const double t = t0 + static_cast<double>(s);
    for (std::size_t k = 0; k < n; ++k) {
      const double coef = c[k] * std::exp(-eta * std::max(0.0, e.values[k]) * t / N);
      for (std::size_t a = 0; a < n; ++a) r[s][a] += coef * e.vectors(a, k);
    }
  }
  Mat G(W, W);
  for (std::size_t s = 0; s < W; ++s)
    for (std::size_t t = s; t < W; ++t) G(s, t) = G(t, s) = ntk_gram_entry(r[s], r[t], K, eta, N);
  return G;
}

int count_active_modes(const Vec& lambdas, const Vec& c, double eta, double W, double N) {
  if (lambdas.size() != c.size()) throw Error(ErrorCode::argument, "shape mismatch");
  int n = 0;
  for (std::size_t k = 0; k < lambdas.size(); ++k)
    if (eta * lambdas[k] * W / N >= 1.0 && c[k] != 0.0) ++n;
  return n;
}

}  // namespace spedge
