#pragma once

#include <Eigen/Dense>

namespace icar {

/// Moore-Penrose inverse of the precision structure of a connected graph,
/// via the identity H+ = (H + J/n)^-1 - J/n with J = 11'. One dense solve;
/// no eigendecomposition.
Eigen::MatrixXd dense_h_plus(const Eigen::MatrixXd& H);

/// log|Omega|, log|X'Omega^-1 X| and S^2 for Omega = I + tau^-1 H+ by
/// dense Cholesky factorization. O(n^3) per call.
struct DenseOmegaQuantities {
  double log_det_omega = 0.0;
  double log_det_xox = 0.0;
  double s2 = 0.0;
};
DenseOmegaQuantities dense_omega_quantities(const Eigen::MatrixXd& H_plus,
                                            const Eigen::MatrixXd& X_c,
                                            const Eigen::VectorXd& y,
                                            double tau);

}  // namespace icar
