#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

// Dense linear-algebra core. Thin, expression-friendly wrappers around Eigen:
// row-major dense containers templated on scalar, Gramian formation, and the
// SPD solve backing the Levenberg-Marquardt normal equations. Everything here
// is a pure function; results are bit-reproducible for identical inputs.
namespace lmnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// 64-bit floats are the project-wide default; all training code uses these.
using Matrixd = Matrix<double>;
using Vectord = Vector<double>;

// Thrown when a Cholesky factorization hits a non-positive pivot. The LM
// driver catches this and retries with a larger damping factor.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  explicit NotPositiveDefiniteError(const std::string& msg) : std::runtime_error(msg) {}
};

// y = A·x with an explicit dimension check (Eigen would only assert).
template <typename DerivedA, typename DerivedX>
Vector<typename DerivedA::Scalar> matvec(const Eigen::MatrixBase<DerivedA>& A,
                                         const Eigen::MatrixBase<DerivedX>& x) {
  if (A.cols() != x.size()) {
    throw std::invalid_argument("matvec: A has " + std::to_string(A.cols()) +
                                " columns but x has length " + std::to_string(x.size()));
  }
  return A.derived() * x.derived();
}

// G = JᵀJ. Only the upper triangle is computed; the lower triangle is
// mirrored from it so the result is symmetric bit-for-bit.
template <typename Derived>
Matrix<typename Derived::Scalar> gramian(const Eigen::MatrixBase<Derived>& J) {
  if (J.rows() == 0 || J.cols() == 0) {
    throw std::invalid_argument("gramian: J must be nonempty");
  }
  using S = typename Derived::Scalar;
  const Eigen::Index p = J.cols();
  Matrix<S> G = Matrix<S>::Zero(p, p);
  G.template selfadjointView<Eigen::Upper>().rankUpdate(J.derived().adjoint());
  for (Eigen::Index i = 1; i < p; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      G(i, j) = G(j, i);
    }
  }
  return G;
}

// Solves A·x = b for symmetric positive-definite A via Cholesky.
// Throws NotPositiveDefiniteError when the factorization meets a pivot ≤ 0,
// which is how indefiniteness of a damped Gauss-Newton system surfaces.
template <typename DerivedA, typename DerivedB>
Vector<typename DerivedA::Scalar> spd_solve(const Eigen::MatrixBase<DerivedA>& A,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using S = typename DerivedA::Scalar;
  if (A.rows() != A.cols()) {
    throw std::invalid_argument("spd_solve: A must be square");
  }
  if (A.rows() != b.size()) {
    throw std::invalid_argument("spd_solve: A is " + std::to_string(A.rows()) + "x" +
                                std::to_string(A.cols()) + " but b has length " +
                                std::to_string(b.size()));
  }
  Eigen::LLT<Matrix<S>> llt(A.derived());
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("spd_solve: matrix is not positive definite");
  }
  return llt.solve(b.derived());
}

}  // namespace lmnet
