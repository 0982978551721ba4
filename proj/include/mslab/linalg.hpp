#ifndef MSLAB_LINALG_HPP
#define MSLAB_LINALG_HPP

#include <Eigen/Dense>

namespace mslab {

template <typename Scalar>
using HermitianMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Ascending eigenvalues of a hermitian (or real symmetric) matrix.
template <typename Scalar>
Eigen::VectorXd hermitian_eigenvalues(const HermitianMatrix<Scalar>& a) {
  if (a.rows() == 0) return Eigen::VectorXd();
  Eigen::SelfAdjointEigenSolver<HermitianMatrix<Scalar>> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

template <typename Scalar>
double hermitian_defect(const HermitianMatrix<Scalar>& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

/// PSD test with an absolute eigenvalue floor.
template <typename Scalar>
bool is_psd(const HermitianMatrix<Scalar>& a, double floor = 1e-10) {
  return a.rows() == 0 || hermitian_eigenvalues<Scalar>(a)(0) >= -floor;
}

/// A - B is PSD.
template <typename Scalar>
bool dominates(const HermitianMatrix<Scalar>& a, const HermitianMatrix<Scalar>& b, double floor = 1e-10) {
  return is_psd<Scalar>(a - b, floor);
}

/// Matrix of the dual metric in the dual frame: H^{-T}.
template <typename Scalar>
HermitianMatrix<Scalar> dual_matrix(const HermitianMatrix<Scalar>& h) {
  return h.inverse().transpose();
}

/// det(A) B - det(B) A; PSD whenever A >= B > 0.
template <typename Scalar>
HermitianMatrix<Scalar> reversal_matrix(const HermitianMatrix<Scalar>& a, const HermitianMatrix<Scalar>& b) {
  const Scalar da = a.determinant();
  const Scalar db = b.determinant();
  return da * b - db * a;
}

/// Hermitian square root of a PSD matrix.
template <typename Scalar>
HermitianMatrix<Scalar> psd_sqrt(const HermitianMatrix<Scalar>& a) {
  Eigen::SelfAdjointEigenSolver<HermitianMatrix<Scalar>> es(a);
  return es.operatorSqrt();
}

}  // namespace mslab

#endif  // MSLAB_LINALG_HPP
