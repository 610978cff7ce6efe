#pragma once

#include <Eigen/Dense>
#include <memory>

#include "icar/spectral.hpp"

namespace icar {

/// Marginal reference prior for the noise-to-signal ratio tau, up to a
/// normalizing constant. Evaluators are immutable after construction and
/// safe to call concurrently at different tau.
class TauLogPrior {
 public:
  virtual ~TauLogPrior() = default;

  /// log pi(tau), unnormalized. Returns -inf where the prior vanishes;
  /// throws NumericalError on genuine numerical failure.
  virtual double log_unnormalized(double tau) const = 0;
};

/// Trace-form evaluator: O(n p_c^2) per evaluation after an O(n p_c^2)
/// setup, using only the shared eigenvalues d and the transformed design
/// X_t_c. No per-model eigendecomposition.
///
/// The bracket of the trace identity,
///
///   tr((D+ B)^2) + tr((Q01^-1 Q12)^2) - 2 tr(Q01^-1 Q23)
///     - (n-p)^-1 [tr(Q01^-1 Q12) - tr(D+ B)]^2,
///
/// equals tau^4 * Var_j{1/(tau+lambda_j)} exactly, so evaluating it by
/// literal summation of the traces cancels catastrophically for small tau.
/// This evaluator instead computes equal-by-algebra moments of the
/// projected resolvent
///
///   M = Pi (Dbar + R Q01^-1 R') Pi,   Dbar = diag(d_i/(1+tau d_i), 0),
///                                     R    = diag(sqrt(d_i)/(1+tau d_i), 0) X_t,
///
/// where Pi projects onto the orthogonal complement of the tau-independent
/// null space of E (I - X_t(X_t'X_t)^-1 X_t') E, E = (D+)^(1/2). The n-p
/// active eigenvalues of M are exactly 1/(tau+lambda_j); those of
/// Pi - tau M are lambda_j/(tau+lambda_j). The variance is assembled from
/// whichever of the two moment pairs is better conditioned at the given
/// tau, which keeps the relative error near machine precision across
/// tau in [1e-6, 1e6].
class TracePrior : public TauLogPrior {
 public:
  TracePrior(const SpectralBasis& basis, Eigen::MatrixXd X_t_c);

  double log_unnormalized(double tau) const override;

  int n() const { return n_; }
  int p() const { return p_; }

  /// Optional multiplicative perturbation of one trace term (testing hook
  /// for the prior-check fault-injection mode). 0 disables.
  void set_fault_injection(double eps) { fault_eps_ = eps; }

 private:
  int n_ = 0;
  int p_ = 0;
  Eigen::VectorXd d_;       // descending, last entry 0
  Eigen::VectorXd sqrt_d_;  // sqrt(d), last entry 0
  Eigen::MatrixXd Xt_;      // n x p transformed model design
  Eigen::MatrixXd Phi_;     // n x p orthonormal basis of the null space
  Eigen::VectorXd phi_row_sq_;  // squared row norms of Phi
  double fault_eps_ = 0.0;
};

/// Eigenvalue-form evaluator from the projection eigenvalues lambda_j of
/// M*' H+ M* (two dense eigendecompositions per model to obtain them).
/// The bracket is evaluated as the two-pass variance of 1/(tau+lambda_j),
/// which is the same quantity as the classical
///   sum_j (lambda_j/(tau+lambda_j))^2 - (n-p)^-1 [sum_j ...]^2
/// rescaled by tau^-2, with the cancellation removed.
class EigenvaluePrior : public TauLogPrior {
 public:
  EigenvaluePrior(Eigen::VectorXd lambdas, int n);

  double log_unnormalized(double tau) const override;

  const Eigen::VectorXd& lambdas() const { return lambdas_; }

 private:
  Eigen::VectorXd lambdas_;
  int n_ = 0;
};

/// Dense O(n^3) oracle: builds Sigma_tau = I + tau^-1 H+, the oblique
/// projector P = I - X (X' Sigma^-1 X)^-1 X' Sigma^-1, and
/// W = (d Sigma/d tau) Sigma^-1 P, then returns
///   0.5 * log{ tr(W^2) - (n-p)^-1 tr(W)^2 }.
/// Computed in extended precision on the rescaled matrix tau*W so the
/// moment cancellation at small tau stays below 1e-10 relative for
/// tau >= 1e-4 at n <= 60. Test/benchmark use only.
double log_prior_w_oracle(const Eigen::MatrixXd& H_plus,
                          const Eigen::MatrixXd& X_c, double tau);

/// Raw tr(W) and tr(W^2) from the same dense construction.
struct WOracleTraces {
  double tr_w = 0.0;
  double tr_w_sq = 0.0;
};
WOracleTraces w_oracle_traces(const Eigen::MatrixXd& H_plus,
                              const Eigen::MatrixXd& X_c, double tau);

/// Literal ingredients of the trace identity at moderate tau:
/// tr(D+ B), tr((D+ B)^2), tr(Q01^-1 Q12), tr((Q01^-1 Q12)^2),
/// tr(Q01^-1 Q23).
struct PriorTraceTerms {
  double tr_db = 0.0;
  double tr_db_sq = 0.0;
  double tr_k = 0.0;
  double tr_k_sq = 0.0;
  double tr_kq23 = 0.0;
};
PriorTraceTerms prior_trace_terms(const SpectralBasis& basis,
                                  const Eigen::MatrixXd& X_t_c, double tau);

/// T1 = sum_j lambda_j/(tau+lambda_j) and T2 = sum_j (lambda_j/(tau+lambda_j))^2
/// computed two ways: directly from the projection eigenvalues, and from the
/// closed forms
///   T1 = tau^-1 [tr(D+ B) - tr(Q01^-1 Q12)],
///   T2 = tau^-2 {tr((D+ B)^2) + tr((Q01^-1 Q12)^2) - 2 tr(Q01^-1 Q23)}.
/// pass is true when both agree within 1e-9 relative.
struct T1T2Result {
  double t1_direct = 0.0;
  double t2_direct = 0.0;
  double t1_closed = 0.0;
  double t2_closed = 0.0;
  bool pass = false;
};
T1T2Result t1_t2_identities(const SpectralBasis& basis,
                            const Eigen::MatrixXd& X_c, double tau);

/// pi_psi(psi) = e^psi pi(tau) at tau = e^psi, in logs.
double log_prior_psi(const TauLogPrior& prior, double psi);

/// Numerical mass of the unnormalized prior over tau in (0, inf), via the
/// psi parameterization with expanding intervals. converged is true when
/// tail increments fall below 1e-8 of the accumulated mass.
struct PropernessResult {
  double log_mass = 0.0;
  bool converged = false;
};
PropernessResult check_properness(const TauLogPrior& prior);

/// Three-way equivalence sweep over random instances (trace form,
/// eigenvalue form, W oracle). Reports the maximum relative discrepancy
/// between any pair of log-prior evaluations across the tau grid.
struct EquivalenceSweepConfig {
  std::uint64_t seed = 1;
  std::vector<int> sizes = {10, 30, 60};
  int max_regressors = 4;  // p_c ranges over 1..max_regressors+1
  int instances = 50;
  int tau_points = 25;
  double tau_lo = 1e-4;
  double tau_hi = 1e4;
  double fault_eps = 0.0;  // testing hook
  bool include_w_oracle = true;
};
struct EquivalenceSweepResult {
  double max_rel_discrepancy = 0.0;
  int instances = 0;
  int evaluations = 0;
};
EquivalenceSweepResult run_equivalence_sweep(const EquivalenceSweepConfig& cfg);

}  // namespace icar
