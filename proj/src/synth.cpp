#include "spedge/synth.hpp"

#include <algorithm>
#include <cmath>

#include "spedge/linalg.hpp"

namespace spedge {

namespace {

constexpr double kDivergeNorm = 1e12;

double kappa_of(const Vec& tau) {
  double s = 0, s2 = 0;
  for (double t : tau) {
    s += t;
    s2 += t * t;
  }
  return s2 / (s * s);
}

Vec power_law(std::size_t p, double s) {
  Vec tau(p);
  for (std::size_t a = 0; a < p; ++a) tau[a] = std::pow(static_cast<double>(a + 1), -s);
  return tau;
}

}  // namespace

std::vector<Vec> householder_basis(std::size_t p, std::size_t K, std::uint64_t seed,
                                   std::size_t reflections) {
  if (K > p) throw Error(ErrorCode::argument, "more directions than dimensions");
  if (reflections == 0) reflections = 2 * K + 2;
  Rng rng(seed);
  std::vector<Vec> us(reflections, Vec(p));
  for (auto& u : us) {
    for (double& x : u) x = rng.normal();
    const double n = norm(u);
    for (double& x : u) x /= n;
  }
  std::vector<Vec> q(K, Vec(p, 0.0));
  for (std::size_t j = 0; j < K; ++j) {
    q[j][j] = 1.0;
    for (const Vec& u : us) axpy(-2.0 * dot(u, q[j]), u, q[j]);
  }
  return q;
}

void QuadraticLandscape::validate() const {
  if (p == 0) throw Error(ErrorCode::argument, "landscape needs p > 0");
  if (h_outliers.size() > p) throw Error(ErrorCode::argument, "more outliers than dimensions");
  if (!(h_bulk >= 0)) throw Error(ErrorCode::argument, "bulk curvature must be >= 0");
  for (double h : h_outliers)
    if (!(h >= h_bulk)) throw Error(ErrorCode::argument, "outlier curvature below bulk");
  if (!theta_star.empty() && theta_star.size() != p)
    throw Error(ErrorCode::argument, "theta_star has wrong length");
  if (!theta_star_val.empty() && theta_star_val.size() != p)
    throw Error(ErrorCode::argument, "theta_star_val has wrong length");
  if (precond.kind == Preconditioner::Kind::diagonal) {
    if (precond.values.size() != p) throw Error(ErrorCode::argument, "preconditioner length != p");
    for (double v : precond.values)
      if (!(v > 0)) throw Error(ErrorCode::argument, "preconditioner must be positive");
  }
  if (precond.kind == Preconditioner::Kind::adam_like &&
      !(precond.beta2 >= 0 && precond.beta2 < 1))
    throw Error(ErrorCode::argument, "beta2 must lie in [0, 1)");
}

Quadratic::Quadratic(QuadraticLandscape L) : L_(std::move(L)) {
  L_.validate();
  q_ = householder_basis(L_.p, L_.h_outliers.size(), L_.basis_seed);
}

Vec Quadratic::hess_apply(const Vec& x) const {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = L_.h_bulk * x[i];
  for (std::size_t j = 0; j < q_.size(); ++j)
    axpy((L_.h_outliers[j] - L_.h_bulk) * dot(q_[j], x), q_[j], y);
  return y;
}

Vec Quadratic::grad(const Vec& theta) const {
  if (L_.theta_star.empty()) return hess_apply(theta);
  Vec d(theta);
  axpy(-1.0, L_.theta_star, d);
  return hess_apply(d);
}

Vec Quadratic::grad_val(const Vec& theta) const {
  if (L_.theta_star_val.empty()) return grad(theta);
  Vec d(theta);
  axpy(-1.0, L_.theta_star_val, d);
  return hess_apply(d);
}

double Quadratic::loss(const Vec& theta) const {
  Vec d(theta);
  if (!L_.theta_star.empty()) axpy(-1.0, L_.theta_star, d);
  return 0.5 * dot(d, hess_apply(d));
}

double Quadratic::loss_val(const Vec& theta) const {
  if (L_.theta_star_val.empty()) return loss(theta);
  Vec d(theta);
  axpy(-1.0, L_.theta_star_val, d);
  return 0.5 * dot(d, hess_apply(d));
}

Vec Quadratic::compose_theta(const Vec& coords, double bulk_coord, std::uint64_t seed) const {
  if (coords.size() > q_.size()) throw Error(ErrorCode::argument, "too many outlier coordinates");
  Vec theta(L_.p, 0.0);
  for (std::size_t j = 0; j < coords.size(); ++j) axpy(coords[j], q_[j], theta);
  if (bulk_coord != 0.0) {
    Rng rng(seed);
    Vec b(L_.p);
    for (double& x : b) x = rng.normal();
    for (const Vec& q : q_) axpy(-dot(q, b), q, b);
    const double n = norm(b);
    axpy(bulk_coord / n, b, theta);
  }
  return theta;
}

// ---------------------------------------------------------------- noise

double kappa_from_beta2(double beta2, std::size_t p) {
  if (!(beta2 >= 0 && beta2 < 1)) throw Error(ErrorCode::argument, "beta2 must lie in [0, 1)");
  return std::min(1.0, 1.0 / (static_cast<double>(p) * (1.0 - beta2)));
}

double NoiseSpec::effective_kappa(std::size_t p) const {
  switch (kind) {
    case Kind::none:
      return 0.0;
    case Kind::isotropic:
      return 1.0 / static_cast<double>(p);
    case Kind::colored:
      return beta2 >= 0 && beta2 < 1 ? kappa_from_beta2(beta2, p) : kappa;
  }
  return 0.0;
}

ColoredProfile colored_profile(std::size_t p, double kappa_target) {
  const double lo_k = 1.0 / static_cast<double>(p);
  if (p < 2) throw Error(ErrorCode::argument, "colored noise needs p >= 2");
  if (!(kappa_target >= lo_k * (1 - 1e-12) && kappa_target <= 1.0))
    throw Error(ErrorCode::argument, "kappa must lie in [1/p, 1]");
  ColoredProfile out;
  double lo = 0.0, hi = 1.0;
  while (kappa_of(power_law(p, hi)) < kappa_target && hi < 256) hi *= 2;
  for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kappa_of(power_law(p, mid)) < kappa_target ? lo : hi) = mid;
  }
  out.exponent = 0.5 * (lo + hi);
  out.tau = power_law(p, out.exponent);
  double mean = 0;
  for (double t : out.tau) mean += t;
  mean /= static_cast<double>(p);
  for (double& t : out.tau) t /= mean;
  out.kappa = kappa_of(out.tau);
  return out;
}

NoiseSource::NoiseSource(const NoiseSpec& spec, std::size_t p) : spec_(spec), p_(p) {
  if (spec.batch_B == 0) throw Error(ErrorCode::argument, "batch size must be >= 1");
  if (spec.kind != NoiseSpec::Kind::none && !(spec.nu >= 0))
    throw Error(ErrorCode::argument, "noise scale must be >= 0");
  scale_ = spec.nu / std::sqrt(static_cast<double>(spec.batch_B));
  const double var = scale_ * scale_;
  if (spec.kind == NoiseSpec::Kind::colored) {
    const ColoredProfile prof = colored_profile(p, spec.effective_kappa(p));
    sd_.resize(p);
    for (std::size_t a = 0; a < p; ++a) sd_[a] = scale_ * std::sqrt(prof.tau[a]);
    kappa_ = prof.kappa;
    trace_ = var * static_cast<double>(p);
    frob_sq_ = kappa_ * trace_ * trace_;
  } else if (spec.kind == NoiseSpec::Kind::isotropic) {
    kappa_ = 1.0 / static_cast<double>(p);
    trace_ = var * static_cast<double>(p);
    frob_sq_ = var * var * static_cast<double>(p);
  }
}

void NoiseSource::sample(Rng& rng, Vec& out) const {
  out.assign(p_, 0.0);
  add(rng, out);
}

void NoiseSource::add(Rng& rng, Vec& out) const {
  switch (spec_.kind) {
    case NoiseSpec::Kind::none:
      return;
    case NoiseSpec::Kind::isotropic:
      for (double& x : out) x += scale_ * rng.normal();
      return;
    case NoiseSpec::Kind::colored:
      for (std::size_t a = 0; a < p_; ++a) out[a] += sd_[a] * rng.normal();
      return;
  }
}

// ---------------------------------------------------------------- quadratic GD

QuadraticRun run_quadratic(const Quadratic& Q, const Vec& theta0, double eta, std::size_t steps,
                           const NoiseSpec& noise, std::uint64_t seed) {
  const std::size_t p = Q.p();
  if (theta0.size() != p) throw Error(ErrorCode::argument, "theta0 has wrong length");
  if (!(eta > 0)) throw Error(ErrorCode::argument, "eta must be positive");
  const auto& L = Q.spec();
  const Preconditioner& P = L.precond;

  QuadraticRun run;
  double h_max = L.h_bulk;
  for (double h : L.h_outliers) h_max = std::max(h_max, h);
  double p_max = 1.0;
  if (P.kind == Preconditioner::Kind::diagonal)
    p_max = *std::max_element(P.values.begin(), P.values.end());
  run.unstable_by_design =
      P.kind != Preconditioner::Kind::adam_like && eta * p_max * h_max >= 2.0;

  run.stream.header.p = p;
  run.stream.header.scalar_width = 8;
  run.stream.header.has_losses = true;
  run.stream.records.reserve(steps);

  NoiseSource src(noise, p);
  Rng rng(seed);
  Vec theta = theta0, g, v(p, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    g = Q.grad(theta);
    src.add(rng, g);
    UpdateRecord rec;
    rec.step = t;
    rec.train_loss = Q.loss(theta);
    rec.val_loss = Q.loss_val(theta);
    rec.delta.resize(p);
    switch (P.kind) {
      case Preconditioner::Kind::identity:
        for (std::size_t i = 0; i < p; ++i) rec.delta[i] = -eta * (g[i] + L.omega * theta[i]);
        break;
      case Preconditioner::Kind::diagonal:
        for (std::size_t i = 0; i < p; ++i)
          rec.delta[i] = -eta * (P.values[i] * g[i] + L.omega * theta[i]);
        break;
      case Preconditioner::Kind::adam_like: {
        const double bc = 1.0 - std::pow(P.beta2, static_cast<double>(t + 1));
        for (std::size_t i = 0; i < p; ++i) {
          v[i] = P.beta2 * v[i] + (1.0 - P.beta2) * g[i] * g[i];
          const double pre = 1.0 / (std::sqrt(v[i] / bc) + P.eps);
          rec.delta[i] = -eta * (pre * g[i] + L.omega * theta[i]);
        }
        break;
      }
    }
    axpy(1.0, rec.delta, theta);
    run.stream.records.push_back(std::move(rec));
    const double n = norm(theta);
    if (!(n <= kDivergeNorm)) {
      run.diverged = true;
      run.diverged_at = t;
      break;
    }
  }
  run.theta_final = std::move(theta);
  return run;
}

// ---------------------------------------------------------------- planted streams

Mat fourier_phases(std::size_t W) {
  if (W == 0) throw Error(ErrorCode::argument, "W must be positive");
  Mat U(W, W);
  const double Wd = static_cast<double>(W);
  const double pi = std::acos(-1.0);
  std::size_t c = 0;
  for (std::size_t t = 0; t < W; ++t) U(t, c) = 1.0 / std::sqrt(Wd);
  ++c;
  for (std::size_t k = 1; 2 * k < W; ++k) {
    for (std::size_t t = 0; t < W; ++t) {
      const double a = 2.0 * pi * static_cast<double>(k * t) / Wd;
      U(t, c) = std::sqrt(2.0 / Wd) * std::cos(a);
      U(t, c + 1) = std::sqrt(2.0 / Wd) * std::sin(a);
    }
    c += 2;
  }
  if (W % 2 == 0) {
    for (std::size_t t = 0; t < W; ++t) U(t, c) = (t % 2 ? -1.0 : 1.0) / std::sqrt(Wd);
    ++c;
  }
  return U;
}

UpdateStream planted_signal_stream(const std::vector<Vec>& dirs, const Mat& strengths,
                                   std::size_t W, const NoiseSpec& noise, std::size_t p,
                                   std::size_t steps, std::uint64_t seed) {
  const std::size_t k = dirs.size();
  if (k > W || k > p) throw Error(ErrorCode::argument, "need k <= min(W, p)");
  if (strengths.rows != steps || strengths.cols != k)
    throw Error(ErrorCode::argument, "strength schedule must be steps x k");
  for (std::size_t i = 0; i < k; ++i) {
    if (dirs[i].size() != p) throw Error(ErrorCode::argument, "direction has wrong length");
    for (std::size_t j = 0; j <= i; ++j) {
      const double target = i == j ? 1.0 : 0.0;
      if (std::fabs(dot(dirs[i], dirs[j]) - target) > 1e-8)
        throw Error(ErrorCode::argument, "directions are not orthonormal");
    }
  }
  for (double d : strengths.a)
    if (!(d >= 0)) throw Error(ErrorCode::argument, "strengths must be >= 0");

  const Mat U = fourier_phases(W);
  NoiseSource src(noise, p);
  Rng rng(seed);
  UpdateStream s;
  s.header.p = p;
  s.header.scalar_width = 8;
  s.records.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    UpdateRecord rec;
    rec.step = t;
    src.sample(rng, rec.delta);
    for (std::size_t j = 0; j < k; ++j) axpy(strengths(t, j) * U(t % W, j), dirs[j], rec.delta);
    s.records.push_back(std::move(rec));
  }
  return s;
}

Mat linear_schedule(std::size_t steps, const Vec& start, const Vec& end) {
  if (start.size() != end.size()) throw Error(ErrorCode::argument, "schedule endpoints differ");
  Mat S(steps, start.size());
  for (std::size_t t = 0; t < steps; ++t) {
    const double f = steps > 1 ? static_cast<double>(t) / static_cast<double>(steps - 1) : 0.0;
    for (std::size_t j = 0; j < start.size(); ++j) S(t, j) = start[j] + f * (end[j] - start[j]);
  }
  return S;
}

UpdateStream pure_noise_stream(std::size_t p, std::size_t steps, const NoiseSpec& noise,
                               std::uint64_t seed) {
  if (p < 2) throw Error(ErrorCode::argument, "pure noise stream needs p >= 2");
  NoiseSource src(noise, p);
  Rng rng(seed);
  UpdateStream s;
  s.header.p = p;
  s.header.scalar_width = 8;
  s.records.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    UpdateRecord rec;
    rec.step = t;
    src.sample(rng, rec.delta);
    s.records.push_back(std::move(rec));
  }
  return s;
}

}  // namespace spedge
