#pragma once

#include "spedge/common.hpp"

namespace spedge {

double dot(const Vec& x, const Vec& y);
double norm(const Vec& x);
double frobenius(const Mat& m);
// y += a * x
void axpy(double a, const Vec& x, Vec& y);

Mat matmul(const Mat& A, const Mat& B);
Mat transpose(const Mat& A);

struct SymEigen {
  Vec values;   // descending
  Mat vectors;  // column k is the eigenvector for values[k]
  int sweeps = 0;
};

// Cyclic Jacobi for small symmetric matrices. Eigenvalues are returned in
// descending order; each eigenvector is signed so that its first component
// with magnitude above 1e-12 is positive. Throws ErrorCode::numerical if the
// off-diagonal mass does not drop below tol_rel * ||A||_F within max_sweeps.
SymEigen jacobi_eigen(const Mat& A, double tol_rel = 1e-14, int max_sweeps = 100);

// Largest singular value of a small dense matrix.
double op_norm_sym(const Mat& A);

}  // namespace spedge
