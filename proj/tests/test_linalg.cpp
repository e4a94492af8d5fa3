#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "lmnet/linalg.hpp"

using lmnet::Matrixd;
using lmnet::NotPositiveDefiniteError;
using lmnet::Vectord;

namespace {

std::mt19937_64 rng(42);

Matrixd random_matrix(int rows, int cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrixd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = nd(rng);
  }
  return m;
}

Matrixd random_spd(int n) {
  const Matrixd m = random_matrix(n, n);
  return m.transpose() * m + n * Matrixd::Identity(n, n);
}

}  // namespace

TEST_CASE("matvec matches a hand computation") {
  Matrixd a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  Vectord x(3);
  x << 1, 0, -1;
  const Vectord y = lmnet::matvec(a, x);
  REQUIRE(y.size() == 2);
  CHECK(y(0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(y(1) == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("matvec rejects mismatched dimensions") {
  const Matrixd a = Matrixd::Zero(2, 3);
  const Vectord x = Vectord::Zero(2);
  CHECK_THROWS_AS((void)lmnet::matvec(a, x), std::invalid_argument);
}

TEST_CASE("matvec is linear") {
  for (int trial = 0; trial < 10; ++trial) {
    const Matrixd a = random_matrix(7, 5);
    const Vectord x = random_matrix(5, 1);
    const Vectord y = random_matrix(5, 1);
    const double alpha = 1.7, beta = -0.3;
    const Vectord lhs = lmnet::matvec(a, Vectord(alpha * x + beta * y));
    const Vectord rhs = alpha * lmnet::matvec(a, x) + beta * lmnet::matvec(a, y);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + rhs.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("matvec works for float as well as double") {
  lmnet::Matrix<float> a(2, 2);
  a << 1.0f, 2.0f, 3.0f, 4.0f;
  lmnet::Vector<float> x(2);
  x << 1.0f, 1.0f;
  const lmnet::Vector<float> y = lmnet::matvec(a, x);
  CHECK(y(0) == 3.0f);
  CHECK(y(1) == 7.0f);
}

TEST_CASE("gramian equals J^T J") {
  for (int trial = 0; trial < 10; ++trial) {
    const Matrixd j = random_matrix(20, 8);
    const Matrixd g = lmnet::gramian(j);
    const Matrixd ref = j.transpose() * j;
    REQUIRE(g.rows() == 8);
    REQUIRE(g.cols() == 8);
    CHECK((g - ref).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + ref.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("gramian is bitwise symmetric") {
  const Matrixd j = random_matrix(50, 17);
  const Matrixd g = lmnet::gramian(j);
  for (int i = 0; i < g.rows(); ++i) {
    for (int k = 0; k < i; ++k) {
      // Exact equality, not approximate: the mirror copy guarantees it.
      CHECK(std::memcmp(&g(i, k), &g(k, i), sizeof(double)) == 0);
    }
  }
}

TEST_CASE("gramian rejects an empty Jacobian") {
  const Matrixd j(0, 4);
  CHECK_THROWS_AS((void)lmnet::gramian(j), std::invalid_argument);
}

TEST_CASE("spd_solve matches a hand-checked 2x2 system") {
  Matrixd a(2, 2);
  a << 4, 2, 2, 3;
  Vectord b(2);
  b << 10, 8;
  const Vectord x = lmnet::spd_solve(a, b);
  CHECK(x(0) == doctest::Approx(1.75).epsilon(1e-14));
  CHECK(x(1) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("spd_solve throws NotPositiveDefiniteError on an indefinite matrix") {
  Matrixd a(2, 2);
  a << 1, 2, 2, 1;  // eigenvalues 3 and -1
  Vectord b(2);
  b << 1, 1;
  CHECK_THROWS_AS((void)lmnet::spd_solve(a, b), NotPositiveDefiniteError);
}

TEST_CASE("NotPositiveDefiniteError is a runtime_error") {
  static_assert(std::is_base_of_v<std::runtime_error, NotPositiveDefiniteError>);
  CHECK(true);
}

TEST_CASE("spd_solve rejects non-square and mismatched inputs") {
  CHECK_THROWS_AS((void)lmnet::spd_solve(Matrixd::Identity(2, 3), Vectord::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)lmnet::spd_solve(Matrixd::Identity(3, 3), Vectord::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("spd_solve backward error stays small on random SPD systems") {
  for (int n : {1, 2, 5, 13, 50}) {
    const Matrixd a = random_spd(n);
    const Vectord b = random_matrix(n, 1);
    const Vectord x = lmnet::spd_solve(a, b);
    const double resid = (a * x - b).lpNorm<Eigen::Infinity>();
    CHECK(resid <= 1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("spd_solve accepts expression arguments") {
  const Matrixd m = random_matrix(6, 4);
  const Vectord b = random_matrix(4, 1);
  // Gramian plus a ridge, passed as expressions without materializing first.
  const Vectord x = lmnet::spd_solve(lmnet::gramian(m) + Matrixd::Identity(4, 4), b);
  const Matrixd a = lmnet::gramian(m) + Matrixd::Identity(4, 4);
  CHECK((a * x - b).lpNorm<Eigen::Infinity>() <= 1e-10);
}
