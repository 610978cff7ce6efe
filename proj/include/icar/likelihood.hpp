#pragma once

#include <Eigen/Dense>

#include "icar/prior.hpp"
#include "icar/quadrature.hpp"
#include "icar/spectral.hpp"

namespace icar {

/// Diagonal of B(tau) = (I + tau^-1 D+)^-1:
///   b_i = tau d_i / (tau d_i + 1) for i < n, b_n = 1.
/// Entries lie in (0, 1], are nondecreasing in tau, and the last is exact 1.
Eigen::VectorXd b_vector(const SpectralBasis& basis, double tau);

/// log|Omega| = sum_{i<n} log(1 + 1/(tau d_i)); O(n).
double log_det_omega(const SpectralBasis& basis, double tau);

/// log|X_c' Omega^-1 X_c| = log|X_t_c' B(tau) X_t_c| via the p_c x p_c
/// Gram matrix of the b-weighted design; O(n p_c^2).
double log_det_xox(const SpectralBasis& basis, const Eigen::MatrixXd& X_t_c,
                   double tau);

/// S_c^2 = y_t' B y_t - v' (X_t'B X_t)^-1 v with v = X_t' B y_t, one
/// symmetric p_c x p_c solve. Small negatives from roundoff (within
/// 1e-10 * ||y||^2) clamp to zero; anything more negative throws.
double s_squared(const SpectralBasis& basis, const Eigen::VectorXd& y_t,
                 const Eigen::MatrixXd& X_t_c, double tau);

struct FractionalLikelihoodResult {
  double log_q = 0.0;
  double log_j1 = 0.0;
  double log_jb = 0.0;
  long evaluations = 0;
  double est_rel_error = 0.0;  // worse of the two integrals
};

/// Fractional integrated likelihood of a spatial model, in logs:
///
///   log q = -(n(1-b)/2) log(2pi) + (p_c/2) log b
///           + lgamma((n-p_c)/2) - lgamma((n b - p_c)/2)
///           + log J(1) - log J(b),
///
///   J(a) = Int exp{ -(a/2) log|Omega| - (1/2) log|X'Omega^-1 X|
///                   - ((n a - p_c)/2) log(a S_c^2 / 2) + log pi_psi(psi) } dpsi.
///
/// The constant prefactor comes from integrating the regression
/// coefficients and the variance against the sigma^-2 prior; the
/// b^(p_c/2) and Gamma factors differ across models and are required for
/// cross-model comparability.
///
/// `shared_log_det_omega`, when non-null, must map the scan-grid psi values
/// to precomputed log|Omega| values (model-independent, computed once
/// before any fan-out across models).
FractionalLikelihoodResult log_fractional_marginal(
    const SpectralBasis& basis, const Eigen::VectorXd& y_t,
    const Eigen::MatrixXd& X_t_c, const TauLogPrior& prior, double b_frac,
    const QuadratureConfig& quad,
    const std::vector<double>* shared_scan_log_det_omega = nullptr);

/// Independence-branch marginal (Omega = I, no tau integral):
///
///   log q = -(n(1-b)/2) log(2pi) + (p_c/2) log b
///           + lgamma((n-p_c)/2) - lgamma((n b - p_c)/2)
///           - ((n-p_c)/2) log(S2_ols/2) + ((n b - p_c)/2) log(b S2_ols/2).
///
/// Throws on rank deficiency or an exactly-zero OLS residual sum of squares.
double log_marginal_independent(const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& X_c, double b_frac);

/// Same fractional-marginal integral but with every Omega-dependent
/// quantity computed by dense O(n^3) linear algebra per quadrature node.
/// Baseline path; also the oracle side of the spectral-vs-dense checks.
FractionalLikelihoodResult log_fractional_marginal_dense(
    const Eigen::MatrixXd& H_plus, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& X_c, const TauLogPrior& prior, double b_frac,
    const QuadratureConfig& quad);

}  // namespace icar
