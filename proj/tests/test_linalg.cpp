#include "doctest.h"
#include "oracle.hpp"
#include "spedge/linalg.hpp"
#include "spedge/parallel.hpp"

using namespace spedge;

TEST_SUITE("linalg") {
  TEST_CASE("jacobi matches a dense symmetric solver on random matrices") {
    std::mt19937_64 g(7);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t W = 2 + trial % 12;
      Mat A(W, W);
      for (std::size_t i = 0; i < W; ++i)
        for (std::size_t j = 0; j <= i; ++j) A(i, j) = A(j, i) = n(g);
      const SymEigen e = jacobi_eigen(A);
      const Vec ref = oracle::sym_eigenvalues(oracle::to_eigen(A));
      const double scale = frobenius(A);
      for (std::size_t k = 0; k < W; ++k) CHECK(std::fabs(e.values[k] - ref[k]) <= 1e-12 * scale);
      // reconstruction and orthonormality
      for (std::size_t i = 0; i < W; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          double rec = 0, orth = 0;
          for (std::size_t k = 0; k < W; ++k) {
            rec += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
            orth += e.vectors(k, i) * e.vectors(k, j);
          }
          CHECK(std::fabs(rec - A(i, j)) <= 1e-10 * scale);
          CHECK(std::fabs(orth - (i == j ? 1.0 : 0.0)) <= 1e-10);
        }
    }
  }

  TEST_CASE("eigenvalues come out descending with the sign rule applied") {
    Mat A(3, 3);
    A(0, 0) = 1;
    A(1, 1) = 3;
    A(2, 2) = 2;
    const SymEigen e = jacobi_eigen(A);
    CHECK(e.values == Vec{3, 2, 1});
    for (std::size_t k = 0; k < 3; ++k) {
      double first = 0;
      for (std::size_t i = 0; i < 3; ++i)
        if (std::fabs(e.vectors(i, k)) > 1e-12) {
          first = e.vectors(i, k);
          break;
        }
      CHECK(first > 0);
    }
  }

  TEST_CASE("sweep cap raises a numerical error") {
    Mat A(4, 4);
    std::mt19937_64 g(3);
    std::normal_distribution<double> n;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j <= i; ++j) A(i, j) = A(j, i) = n(g);
    try {
      jacobi_eigen(A, 1e-14, 0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::numerical);
    }
  }

  TEST_CASE("operator norm of a symmetric matrix") {
    Mat A(2, 2);
    A(0, 0) = 1;
    A(1, 1) = -3;
    CHECK(op_norm_sym(A) == doctest::Approx(3.0));
  }

  TEST_CASE("parallel_for visits every index once for any thread count") {
    for (int t : {1, 3, 8}) {
      set_thread_override(t);
      std::vector<int> hits(1000, 0);
      parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
    set_thread_override(0);
  }

  TEST_CASE("parallel_for rethrows worker exceptions") {
    set_thread_override(4);
    CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                      if (i == 57) throw Error(ErrorCode::numerical, "boom");
                    }),
                    Error);
    set_thread_override(0);
  }
}
