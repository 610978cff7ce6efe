#include "icar/dense.hpp"

#include <cmath>

#include "icar/errors.hpp"

namespace icar {

Eigen::MatrixXd dense_h_plus(const Eigen::MatrixXd& H) {
  const int n = static_cast<int>(H.rows());
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd shifted = H;
  shifted.array() += inv_n;  // H + 11'/n, nonsingular for connected graphs
  Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("H + J/n factorization failed (disconnected graph?)");
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  inv.array() -= inv_n;
  // Symmetrize away solve asymmetry.
  return 0.5 * (inv + inv.transpose());
}

DenseOmegaQuantities dense_omega_quantities(const Eigen::MatrixXd& H_plus,
                                            const Eigen::MatrixXd& X_c,
                                            const Eigen::VectorXd& y,
                                            double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("tau must be positive");
  const int n = static_cast<int>(H_plus.rows());

  Eigen::MatrixXd omega = H_plus / tau;
  omega.diagonal().array() += 1.0;

  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success)
    throw NumericalError("dense Omega is not positive definite at tau=" +
                         std::to_string(tau));

  DenseOmegaQuantities out;
  out.log_det_omega = 0.0;
  for (int i = 0; i < n; ++i)
    out.log_det_omega += 2.0 * std::log(llt.matrixL()(i, i));

  const Eigen::MatrixXd omega_inv_x = llt.solve(X_c);
  const Eigen::VectorXd omega_inv_y = llt.solve(y);
  const Eigen::MatrixXd xox = X_c.transpose() * omega_inv_x;

  Eigen::LDLT<Eigen::MatrixXd> xox_ldlt(xox);
  if (xox_ldlt.info() != Eigen::Success ||
      (xox_ldlt.vectorD().array() <= 0.0).any())
    throw NumericalError("dense X'Omega^-1 X is singular");
  out.log_det_xox = xox_ldlt.vectorD().array().log().sum();

  const Eigen::VectorXd v = X_c.transpose() * omega_inv_y;
  out.s2 = y.dot(omega_inv_y) - v.dot(xox_ldlt.solve(v));
  return out;
}

}  // namespace icar
