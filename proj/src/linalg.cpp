#include "spedge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spedge {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::argument: return "argument";
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::gap: return "gap";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::undefined: return "undefined";
    case ErrorCode::not_applicable: return "not_applicable";
  }
  return "unknown";
}

double dot(const Vec& x, const Vec& y) {
  // four accumulators keep the dependency chain short without changing
  // results between runs
  const std::size_t n = x.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

double norm(const Vec& x) { return std::sqrt(dot(x, x)); }

double frobenius(const Mat& m) {
  double s = 0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Mat matmul(const Mat& A, const Mat& B) {
  if (A.cols != B.rows) throw Error(ErrorCode::argument, "matmul: shape mismatch");
  Mat C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
    }
  return C;
}

Mat transpose(const Mat& A) {
  Mat T(A.cols, A.rows);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
  return T;
}

SymEigen jacobi_eigen(const Mat& A_in, double tol_rel, int max_sweeps) {
  if (A_in.rows != A_in.cols) throw Error(ErrorCode::argument, "jacobi_eigen: matrix not square");
  const std::size_t n = A_in.rows;
  Mat A = A_in;
  // symmetrize defensively; callers pass matrices symmetric up to rounding
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (A(i, j) + A(j, i));
      A(i, j) = A(j, i) = m;
    }
  Mat V = Mat::identity(n);
  const double fro = frobenius(A);
  SymEigen out;

  auto off = [&]() {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * A(i, j) * A(i, j);
    return std::sqrt(s);
  };

  int sweep = 0;
  if (fro > 0) {
    const double tol = tol_rel * fro;
    while (off() > tol) {
      if (sweep >= max_sweeps)
        throw Error(ErrorCode::numerical, "jacobi_eigen: no convergence after " +
                                              std::to_string(max_sweeps) + " sweeps");
      ++sweep;
      for (std::size_t p = 0; p + 1 < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = A(p, q);
          if (apq == 0.0) continue;
          const double app = A(p, p), aqq = A(q, q);
          const double theta = (aqq - app) / (2.0 * apq);
          const double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          for (std::size_t k = 0; k < n; ++k) {
            const double akp = A(k, p), akq = A(k, q);
            A(k, p) = c * akp - s * akq;
            A(k, q) = s * akp + c * akq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double apk = A(p, k), aqk = A(q, k);
            A(p, k) = c * apk - s * aqk;
            A(q, k) = s * apk + c * aqk;
          }
          A(p, q) = A(q, p) = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = V(k, p), vkq = V(k, q);
            V(k, p) = c * vkp - s * vkq;
            V(k, q) = s * vkp + c * vkq;
          }
        }
    }
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t i, std::size_t j) { return A(i, i) > A(j, j); });
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = A(idx[k], idx[k]);
    double sign = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::fabs(V(i, idx[k])) > 1e-12) {
        sign = V(i, idx[k]) > 0 ? 1.0 : -1.0;
        break;
      }
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * V(i, idx[k]);
  }
  out.sweeps = sweep;
  return out;
}

double op_norm_sym(const Mat& A) {
  auto e = jacobi_eigen(A);
  double m = 0;
  for (double v : e.values) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace spedge
