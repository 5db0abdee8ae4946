#include "spedge/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spedge/linalg.hpp"

namespace spedge {

double RankTwoUpdate::norm_bound() const {
  return std::max(dot(entering, entering), dot(exiting, exiting));
}

double RankTwoUpdate::op_norm() const {
  const double aa = dot(entering, entering), bb = dot(exiting, exiting),
               ab = dot(entering, exiting);
  // nonzero eigenvalues of R are those of [[aa, ab], [-ab, -bb]]
  const double tr = aa - bb;
  const double disc = std::max(0.0, (aa + bb) * (aa + bb) - 4.0 * ab * ab);
  const double r = std::sqrt(disc);
  return std::max(std::fabs(0.5 * (tr + r)), std::fabs(0.5 * (tr - r)));
}

double RankTwoUpdate::trace() const { return dot(entering, entering) - dot(exiting, exiting); }

double RankTwoUpdate::frobenius() const {
  const double aa = dot(entering, entering), bb = dot(exiting, exiting),
               ab = dot(entering, exiting);
  return std::sqrt(std::max(0.0, aa * aa + bb * bb - 2.0 * ab * ab));
}

void fill_gaps(ModeBasis& m) {
  const std::size_t n = m.size();
  m.gaps.assign(n, std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) m.gaps[j] = std::min(m.gaps[j], std::fabs(m.lambdas[j] - m.lambdas[i]));
    if (m.has_null) m.gaps[j] = std::min(m.gaps[j], m.lambdas[j]);
  }
}

ModeBasis mode_basis(const TrajectoryWindow& w, const SpectrumSnapshot& s) {
  ModeBasis m;
  m.p = w.p;
  for (std::size_t k = 0; k < s.W; ++k) {
    if (!(s.sigmas[k] > kRankTol * s.sigmas[0]) || s.sigmas[k] <= 0) break;
    m.lambdas.push_back(s.eigvals[k]);
    m.vecs.push_back(right_singular_vector(w, s, static_cast<int>(k) + 1));
  }
  m.has_null = m.p > m.size();
  fill_gaps(m);
  return m;
}

ModeBasis mode_basis(const TrajectoryWindow& w) { return mode_basis(w, analyze_window(w)); }

ModeBasis apply_rank_two_exact(const ModeBasis& prev, const RankTwoUpdate&,
                               const TrajectoryWindow& slid_window) {
  ModeBasis m = mode_basis(slid_window);
  const std::size_t n = std::min(prev.size(), m.size());
  for (std::size_t k = 0; k < n; ++k)
    if (dot(m.vecs[k], prev.vecs[k]) < 0)
      for (double& x : m.vecs[k]) x = -x;
  return m;
}

namespace {

// Projections of the two update vectors onto the mode basis and onto its
// orthogonal complement.
struct Projections {
  Vec a, b;                  // <v_j, entering>, <v_j, exiting>
  Vec in_perp, out_perp;     // components outside span{v_j}
  double ii = 0, oo = 0, io = 0;  // Gram of the perpendicular parts
};

Projections project(const ModeBasis& m, const RankTwoUpdate& u, bool need_perp) {
  Projections pr;
  const std::size_t n = m.size();
  pr.a.resize(n);
  pr.b.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    pr.a[j] = dot(m.vecs[j], u.entering);
    pr.b[j] = dot(m.vecs[j], u.exiting);
  }
  if (need_perp && m.has_null) {
    pr.in_perp = u.entering;
    pr.out_perp = u.exiting;
    for (std::size_t j = 0; j < n; ++j) {
      axpy(-pr.a[j], m.vecs[j], pr.in_perp);
      axpy(-pr.b[j], m.vecs[j], pr.out_perp);
    }
    pr.ii = dot(pr.in_perp, pr.in_perp);
    pr.oo = dot(pr.out_perp, pr.out_perp);
    pr.io = dot(pr.in_perp, pr.out_perp);
  }
  return pr;
}

void check_k(const ModeBasis& m, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > m.size())
    throw Error(ErrorCode::argument, "mode index " + std::to_string(k) + " out of range");
}

}  // namespace

GuardStatus validity_guard(const ModeBasis& m, int k, const RankTwoUpdate& upd) {
  check_k(m, k);
  GuardStatus g;
  g.norm_R = upd.op_norm();
  g.delta_k = m.gaps.empty() ? std::numeric_limits<double>::infinity() : m.gaps[k - 1];
  g.valid = g.norm_R <= 0.25 * g.delta_k;
  return g;
}

EigenIncrement eigenvalue_increment_2nd(const ModeBasis& m, int k, const RankTwoUpdate& upd) {
  check_k(m, k);
  EigenIncrement out;
  out.guard = validity_guard(m, k, upd);
  const Projections pr = project(m, upd, true);
  const std::size_t kk = static_cast<std::size_t>(k - 1);
  const double lk = m.lambdas[kk];
  const double tol = kDegenerateTol * m.lambdas[0];
  out.first_order = pr.a[kk] * pr.a[kk] - pr.b[kk] * pr.b[kk];
  double second = 0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (j == kk) continue;
    const double denom = lk - m.lambdas[j];
    if (std::fabs(denom) < tol) {
      out.skipped.emplace_back(k, static_cast<int>(j) + 1);
      continue;
    }
    const double cross = pr.a[j] * pr.a[kk] - pr.b[j] * pr.b[kk];
    second += cross * cross / denom;
  }
  if (m.has_null) {
    // |P_null R v_k|^2 / (lambda_k - 0)
    const double ak = pr.a[kk], bk = pr.b[kk];
    const double nsq = std::max(0.0, ak * ak * pr.ii + bk * bk * pr.oo - 2.0 * ak * bk * pr.io);
    out.null_term = nsq / lk;
    second += out.null_term;
  }
  out.second_order = second;
  out.delta = out.first_order + second;
  return out;
}

TwistResult eigenvector_twist_1st(const ModeBasis& m, int k, const RankTwoUpdate& upd) {
  check_k(m, k);
  TwistResult out;
  out.guard = validity_guard(m, k, upd);
  const Projections pr = project(m, upd, true);
  const std::size_t kk = static_cast<std::size_t>(k - 1);
  const double lk = m.lambdas[kk];
  const double tol = kDegenerateTol * m.lambdas[0];
  out.dv.assign(m.p, 0.0);
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (j == kk) continue;
    const double denom = lk - m.lambdas[j];
    if (std::fabs(denom) < tol) {
      out.skipped.emplace_back(k, static_cast<int>(j) + 1);
      continue;
    }
    const double cross = pr.a[j] * pr.a[kk] - pr.b[j] * pr.b[kk];
    axpy(cross / denom, m.vecs[j], out.dv);
  }
  if (m.has_null) {
    axpy(pr.a[kk] / lk, pr.in_perp, out.dv);
    axpy(-pr.b[kk] / lk, pr.out_perp, out.dv);
  }
  return out;
}

GapIncrement gap_increment_singular(const ModeBasis& m, int k, const RankTwoUpdate& upd) {
  check_k(m, k);
  if (static_cast<std::size_t>(k) >= m.size())
    throw Error(ErrorCode::argument, "gap position needs modes k and k+1");
  const Projections pr = project(m, upd, false);
  const std::size_t kk = static_cast<std::size_t>(k - 1);
  GapIncrement out;
  out.gamma = m.lambdas[kk] - m.lambdas[kk + 1];
  const double rkk = pr.a[kk] * pr.a[kk] - pr.b[kk] * pr.b[kk];
  const double rnn = pr.a[kk + 1] * pr.a[kk + 1] - pr.b[kk + 1] * pr.b[kk + 1];
  const double cross = pr.a[kk + 1] * pr.a[kk] - pr.b[kk + 1] * pr.b[kk];
  if (out.gamma < kDegenerateTol * m.lambdas[0]) {
    out.near_crossing = true;
    out.trusted = false;
    out.repulsion = out.gamma > 0 ? 2.0 * cross * cross / out.gamma
                                  : (cross == 0 ? 0.0 : std::numeric_limits<double>::infinity());
  } else {
    out.repulsion = 2.0 * cross * cross / out.gamma;
  }
  out.delta = (rkk - rnn) + out.repulsion;
  return out;
}

}  // namespace spedge
