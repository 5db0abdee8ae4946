#pragma once

// Random mode bases and rank-two updates with dense Eigen references.

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "spedge/perturb.hpp"

namespace fixtures {

using namespace spedge;

// Mode basis with prescribed eigenvalues along random orthonormal directions.
inline ModeBasis random_basis(const Vec& lambdas, std::size_t p, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd A(p, lambdas.size());
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = n(g);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ() *
                            Eigen::MatrixXd::Identity(p, lambdas.size());
  ModeBasis m;
  m.p = p;
  m.lambdas = lambdas;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    Vec v(p);
    for (std::size_t i = 0; i < p; ++i) v[i] = Q(i, k);
    m.vecs.push_back(v);
  }
  m.has_null = p > lambdas.size();
  fill_gaps(m);
  return m;
}

inline Eigen::MatrixXd covariance(const ModeBasis& m) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m.p, m.p);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const Eigen::Map<const Eigen::VectorXd> v(m.vecs[k].data(), m.p);
    C += m.lambdas[k] * v * v.transpose();
  }
  return C;
}

inline Eigen::MatrixXd dense(const RankTwoUpdate& u) {
  const Eigen::Map<const Eigen::VectorXd> a(u.entering.data(), u.entering.size());
  const Eigen::Map<const Eigen::VectorXd> b(u.exiting.data(), u.exiting.size());
  return a * a.transpose() - b * b.transpose();
}

inline RankTwoUpdate random_update(std::size_t p, double target_norm, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  RankTwoUpdate u{Vec(p), Vec(p)};
  for (auto& x : u.entering) x = n(g);
  for (auto& x : u.exiting) x = n(g);
  const double s = std::sqrt(target_norm / u.op_norm());
  for (auto& x : u.entering) x *= s;
  for (auto& x : u.exiting) x *= s;
  return u;
}

inline RankTwoUpdate scaled(RankTwoUpdate u, double s) {
  for (auto& x : u.entering) x *= s;
  for (auto& x : u.exiting) x *= s;
  return u;
}

// Exact k-th eigenvalue (1-based, descending) and eigenvector after the update.
inline std::pair<double, Eigen::VectorXd> exact_mode(const ModeBasis& m, const RankTwoUpdate& u, int k) {
  const auto [vals, vecs] = oracle::sym_eigen(covariance(m) + dense(u));
  Eigen::VectorXd v = vecs.col(k - 1);
  const Eigen::Map<const Eigen::VectorXd> old(m.vecs[k - 1].data(), m.p);
  if (v.dot(old) < 0) v = -v;
  return {vals[k - 1], v};
}

}  // namespace fixtures
