#include "icar/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "icar/dense.hpp"
#include "icar/errors.hpp"
#include "icar/quadrature.hpp"
#include "icar/rng.hpp"
#include "icar/simulate.hpp"

namespace icar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

/// Per-tau diagonal weights. Index n-1 is the structural-zero slot: the
/// b entry there is exactly 1 and the others exactly 0.
struct Weights {
  Eigen::VectorXd b;     // tau d_i/(1+tau d_i), last 1
  Eigen::VectorXd abar;  // 1/(1+tau d_i), last 0
  Eigen::VectorXd dbar;  // d_i/(1+tau d_i), last 0
  Eigen::VectorXd fbar;  // sqrt(d_i)/(1+tau d_i), last 0
};

Weights make_weights(const Eigen::VectorXd& d, const Eigen::VectorXd& sqrt_d,
                     double tau, bool need_fbar) {
  const int n = static_cast<int>(d.size());
  Weights w;
  w.b.resize(n);
  w.abar.resize(n);
  w.dbar.resize(n);
  if (need_fbar) w.fbar.resize(n);
  for (int i = 0; i + 1 < n; ++i) {
    const double denom = 1.0 + tau * d(i);
    const double a = 1.0 / denom;
    w.abar(i) = a;
    w.dbar(i) = d(i) * a;
    w.b(i) = tau * d(i) * a;
    if (need_fbar) w.fbar(i) = sqrt_d(i) * a;
  }
  w.b(n - 1) = 1.0;
  w.abar(n - 1) = 0.0;
  w.dbar(n - 1) = 0.0;
  if (need_fbar) w.fbar(n - 1) = 0.0;
  return w;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& A, const Eigen::VectorXd& w) {
  Eigen::MatrixXd scaled = w.asDiagonal() * A;
  return A.transpose() * scaled;
}

double trace_of_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return (A.array() * B.transpose().array()).sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// Trace-form evaluator
// ---------------------------------------------------------------------------

TracePrior::TracePrior(const SpectralBasis& basis, Eigen::MatrixXd X_t_c)
    : n_(basis.n()), p_(static_cast<int>(X_t_c.cols())), d_(basis.d),
      Xt_(std::move(X_t_c)) {
  if (Xt_.rows() != n_)
    throw InvalidInputError("transformed design has wrong row count");
  if (p_ < 1 || p_ >= n_)
    throw InvalidInputError("trace prior needs 1 <= p < n");

  sqrt_d_ = d_.cwiseMax(0.0).cwiseSqrt();
  sqrt_d_(n_ - 1) = 0.0;

  // Null space of E (I - Xt(Xt'Xt)^-1 Xt') E, E = diag(1/sqrt(d_i), 0):
  // spanned by e_n together with D^(1/2) Xt w over w orthogonal to the last
  // row of Xt. This space does not depend on tau, so its orthonormal basis
  // is built once per model.
  const Eigen::VectorXd x_hat = Xt_.row(n_ - 1).transpose();
  const double x_hat_norm = x_hat.norm();
  if (!(x_hat_norm > 1e-10 * std::sqrt(static_cast<double>(n_))))
    throw InvalidInputError(
        "design has no component on the constant vector (missing intercept?)");

  Phi_.resize(n_, p_);
  if (p_ > 1) {
    Eigen::HouseholderQR<Eigen::MatrixXd> hq(x_hat);
    const Eigen::MatrixXd complement =
        Eigen::MatrixXd(hq.householderQ()).rightCols(p_ - 1);
    const Eigen::MatrixXd Z = sqrt_d_.asDiagonal() * (Xt_ * complement);
    Eigen::HouseholderQR<Eigen::MatrixXd> zq(Z);
    const Eigen::MatrixXd Rz =
        zq.matrixQR().topRows(p_ - 1).triangularView<Eigen::Upper>();
    const double r_scale = Rz.diagonal().cwiseAbs().maxCoeff();
    for (int i = 0; i < p_ - 1; ++i)
      if (std::abs(Rz(i, i)) <= 1e-12 * std::max(r_scale, 1e-300))
        throw InvalidInputError("degenerate design in trace-prior setup");
    Phi_.leftCols(p_ - 1) =
        zq.householderQ() * Eigen::MatrixXd::Identity(n_, p_ - 1);
  }
  Phi_.col(p_ - 1) = Eigen::VectorXd::Unit(n_, n_ - 1);
  phi_row_sq_ = Phi_.rowwise().squaredNorm();
}

double TracePrior::log_unnormalized(double tau) const {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw InvalidInputError("tau must be positive and finite");
  const int m = n_ - p_;
  if (m == 1) return kNegInf;  // a single active eigenvalue has zero spread

  const Weights w = make_weights(d_, sqrt_d_, tau, true);

  // Q01 = Xt' B Xt, the only linear system in the evaluation.
  const Eigen::MatrixXd Q01 = weighted_gram(Xt_, w.b);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Q01);
  const bool solvable =
      ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all();
  if (!solvable) {
    // Outside the supported dynamic range the prior mass is negligible and
    // a failed factorization only means underflow of the tau-dependent
    // block; inside the range it is a genuine failure.
    if (tau < 1e-10 || tau > 1e10) return kNegInf;
    throw NumericalError("Q01 is numerically singular at tau=" + std::to_string(tau));
  }

  // Projected resolvent pieces: R = diag(fbar) Xt, Rr = (I - Phi Phi') R.
  Eigen::MatrixXd R = w.fbar.asDiagonal() * Xt_;
  const Eigen::MatrixXd PhiR = Phi_.transpose() * R;
  R.noalias() -= Phi_ * PhiR;

  const Eigen::MatrixXd W = R.transpose() * R;
  const Eigen::MatrixXd Gd = weighted_gram(R, w.dbar);
  const Eigen::MatrixXd Ga = weighted_gram(R, w.abar);

  const Eigen::MatrixXd KW = ldlt.solve(W);
  double tr_kw = KW.trace();
  const double tr_kw_sq = trace_of_product(KW, KW);
  const double tr_kgd = ldlt.solve(Gd).trace();
  const double tr_kga = ldlt.solve(Ga).trace();
  if (fault_eps_ != 0.0) tr_kw *= (1.0 + fault_eps_);

  KahanSum sd1, sd2, sdw, sdw2, sa1, sa2, saw, saw2;
  for (int i = 0; i + 1 < n_; ++i) {
    const double db = w.dbar(i), ab = w.abar(i), f2 = phi_row_sq_(i);
    sd1.add(db);
    sd2.add(db * db);
    sdw.add(db * f2);
    sdw2.add(db * db * f2);
    sa1.add(ab);
    sa2.add(ab * ab);
    saw.add(ab * f2);
    saw2.add(ab * ab * f2);
  }
  const Eigen::MatrixXd Md = Phi_.transpose() * (w.dbar.asDiagonal() * Phi_);
  const Eigen::MatrixXd Ma = Phi_.transpose() * (w.abar.asDiagonal() * Phi_);

  // Moments of M = Pi(Dbar + R Q01^-1 R')Pi, whose n-p active eigenvalues
  // are 1/(tau+lambda_j), and of C = Pi - tau M with eigenvalues
  // lambda_j/(tau+lambda_j). Whichever family is further from clustering
  // gives the variance without cancellation.
  const double t1s = (sd1.sum - sdw.sum) + tr_kw;
  const double t2s =
      (sd2.sum - 2.0 * sdw2.sum + Md.squaredNorm()) + 2.0 * tr_kgd + tr_kw_sq;
  const double t1r = (sa1.sum - saw.sum) - tau * tr_kw;
  const double t2r = (sa2.sum - 2.0 * saw2.sum + Ma.squaredNorm()) -
                     2.0 * tau * tr_kga + tau * tau * tr_kw_sq;

  const double dm = static_cast<double>(m);
  const double var_s = t2s - t1s * t1s / dm;
  const double var_r = t2r - t1r * t1r / dm;
  const double crowd_s =
      t2s > 0.0 ? (t1s * t1s) / (dm * t2s) : std::numeric_limits<double>::infinity();
  const double crowd_r =
      t2r > 0.0 ? (t1r * t1r) / (dm * t2r) : std::numeric_limits<double>::infinity();

  const bool use_s = crowd_s <= crowd_r;
  const double var = use_s ? var_s : var_r;
  const double scale = std::max(1.0, use_s ? t2s : t2r);
  if (!(var > 0.0)) {
    if (var > -1e-12 * scale) return kNegInf;  // vanishing prior, clamp
    throw NumericalError("trace-form bracket negative beyond roundoff at tau=" +
                         std::to_string(tau));
  }
  return use_s ? 0.5 * std::log(var) : 0.5 * std::log(var) - std::log(tau);
}

// ---------------------------------------------------------------------------
// Eigenvalue-form evaluator
// ---------------------------------------------------------------------------

EigenvaluePrior::EigenvaluePrior(Eigen::VectorXd lambdas, int n)
    : lambdas_(std::move(lambdas)), n_(n) {
  if (lambdas_.size() < 1) throw InvalidInputError("no projection eigenvalues");
  if (static_cast<int>(lambdas_.size()) >= n_)
    throw InvalidInputError("more projection eigenvalues than n-1");
}

double EigenvaluePrior::log_unnormalized(double tau) const {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw InvalidInputError("tau must be positive and finite");
  const int m = static_cast<int>(lambdas_.size());
  if (m == 1) return kNegInf;

  // Two-pass variance of s_j = 1/(tau+lambda_j); the classical bracket is
  // tau^2 times this, exactly.
  KahanSum mean_sum;
  for (int j = 0; j < m; ++j) mean_sum.add(1.0 / (tau + lambdas_(j)));
  const double mean = mean_sum.sum / m;
  KahanSum var_sum;
  for (int j = 0; j < m; ++j) {
    const double dev = 1.0 / (tau + lambdas_(j)) - mean;
    var_sum.add(dev * dev);
  }
  const double var = var_sum.sum;
  if (!(var > 0.0)) return kNegInf;  // all lambdas equal: degenerate bracket
  return 0.5 * std::log(var);
}

// ---------------------------------------------------------------------------
// Dense W-matrix oracle (extended precision)
// ---------------------------------------------------------------------------

namespace {

using LongMatrix =
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

/// Solves A X = B by Gauss-Jordan with partial pivoting in long double.
LongMatrix ld_solve(LongMatrix A, LongMatrix B) {
  const int n = static_cast<int>(A.rows());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(static_cast<double>(A(r, col))) >
          std::abs(static_cast<double>(A(pivot, col))))
        pivot = r;
    if (A(pivot, col) == 0.0L) throw NumericalError("singular dense system in W oracle");
    if (pivot != col) {
      A.row(pivot).swap(A.row(col));
      B.row(pivot).swap(B.row(col));
    }
    const long double inv = 1.0L / A(col, col);
    A.row(col) *= inv;
    B.row(col) *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double factor = A(r, col);
      if (factor == 0.0L) continue;
      A.row(r) -= factor * A.row(col);
      B.row(r) -= factor * B.row(col);
    }
  }
  return B;
}

/// tau * W_tau = -tau^-1 H+ Sigma^-1 P, built densely in long double. The
/// tau scaling keeps the active eigenvalues in (-1, 0) so the moment
/// difference below loses at most ~10 digits of the 18 available.
LongMatrix scaled_w_matrix(const Eigen::MatrixXd& H_plus,
                           const Eigen::MatrixXd& X_c, double tau) {
  const int n = static_cast<int>(H_plus.rows());
  const int p = static_cast<int>(X_c.cols());
  const LongMatrix Hp = H_plus.cast<long double>();
  const LongMatrix X = X_c.cast<long double>();
  const long double lt = static_cast<long double>(tau);

  LongMatrix Sigma = LongMatrix::Identity(n, n) + Hp / lt;
  const LongMatrix SigmaInv = ld_solve(Sigma, LongMatrix::Identity(n, n));

  const LongMatrix SiX = SigmaInv * X;                    // n x p
  const LongMatrix mid = X.transpose() * SiX;             // p x p
  const LongMatrix solved = ld_solve(mid, SiX.transpose());  // p x n
  LongMatrix P = LongMatrix::Identity(n, n) - X * solved;

  return -(Hp / lt) * (SigmaInv * P);
}

}  // namespace

WOracleTraces w_oracle_traces(const Eigen::MatrixXd& H_plus,
                              const Eigen::MatrixXd& X_c, double tau) {
  const LongMatrix Ws = scaled_w_matrix(H_plus, X_c, tau);
  const long double lt = static_cast<long double>(tau);
  WOracleTraces out;
  out.tr_w = static_cast<double>(Ws.trace() / lt);
  out.tr_w_sq = static_cast<double>((Ws.array() * Ws.transpose().array()).sum() /
                                    (lt * lt));
  return out;
}

double log_prior_w_oracle(const Eigen::MatrixXd& H_plus,
                          const Eigen::MatrixXd& X_c, double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("tau must be positive");
  const int n = static_cast<int>(H_plus.rows());
  const int p = static_cast<int>(X_c.cols());
  const int m = n - p;
  if (m <= 0) throw InvalidInputError("W oracle needs n > p");
  if (m == 1) return kNegInf;

  const LongMatrix Ws = scaled_w_matrix(H_plus, X_c, tau);
  const long double tr = Ws.trace();
  const long double tr_sq = (Ws.array() * Ws.transpose().array()).sum();
  const long double bracket = tr_sq - tr * tr / static_cast<long double>(m);
  if (!(bracket > 0.0L)) return kNegInf;
  // pi = tau^-1 sqrt(bracket of the scaled matrix).
  return 0.5 * static_cast<double>(std::log(bracket)) - std::log(tau);
}

// ---------------------------------------------------------------------------
// Literal trace ingredients and the T1/T2 identities
// ---------------------------------------------------------------------------

PriorTraceTerms prior_trace_terms(const SpectralBasis& basis,
                                  const Eigen::MatrixXd& X_t_c, double tau) {
  const int n = basis.n();
  const Weights w = make_weights(basis.d, basis.d.cwiseMax(0.0).cwiseSqrt(),
                                 tau, false);

  PriorTraceTerms out;
  KahanSum db, db2;
  for (int i = 0; i + 1 < n; ++i) {
    const double t = tau * w.abar(i);  // (1/d_i) * b_i
    db.add(t);
    db2.add(t * t);
  }
  out.tr_db = db.sum;
  out.tr_db_sq = db2.sum;

  const Eigen::MatrixXd Q01 = weighted_gram(X_t_c, w.b);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Q01);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw NumericalError("Q01 is numerically singular in trace terms");

  Eigen::VectorXd w12(n), w23(n);
  for (int i = 0; i + 1 < n; ++i) {
    w12(i) = tau * tau * w.dbar(i) * w.abar(i);          // (1/d) b^2
    w23(i) = tau * tau * tau * w.dbar(i) * w.abar(i) * w.abar(i);  // (1/d^2) b^3
  }
  w12(n - 1) = 0.0;
  w23(n - 1) = 0.0;

  const Eigen::MatrixXd K12 = ldlt.solve(weighted_gram(X_t_c, w12));
  out.tr_k = K12.trace();
  out.tr_k_sq = trace_of_product(K12, K12);
  out.tr_kq23 = ldlt.solve(weighted_gram(X_t_c, w23)).trace();
  return out;
}

T1T2Result t1_t2_identities(const SpectralBasis& basis,
                            const Eigen::MatrixXd& X_c, double tau) {
  const Eigen::VectorXd lambdas = projection_eigenvalues(basis, X_c);

  T1T2Result r;
  KahanSum t1, t2;
  for (int j = 0; j < lambdas.size(); ++j) {
    const double ratio = lambdas(j) / (tau + lambdas(j));
    t1.add(ratio);
    t2.add(ratio * ratio);
  }
  r.t1_direct = t1.sum;
  r.t2_direct = t2.sum;

  const Eigen::MatrixXd X_t_c = basis.P.transpose() * X_c;
  const PriorTraceTerms terms = prior_trace_terms(basis, X_t_c, tau);
  r.t1_closed = (terms.tr_db - terms.tr_k) / tau;
  r.t2_closed =
      (terms.tr_db_sq + terms.tr_k_sq - 2.0 * terms.tr_kq23) / (tau * tau);

  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
  };
  r.pass = rel(r.t1_closed, r.t1_direct) <= 1e-9 &&
           rel(r.t2_closed, r.t2_direct) <= 1e-9;
  return r;
}

// ---------------------------------------------------------------------------
// psi parameterization and properness
// ---------------------------------------------------------------------------

double log_prior_psi(const TauLogPrior& prior, double psi) {
  if (psi < -700.0 || psi > 700.0) return kNegInf;
  return psi + prior.log_unnormalized(std::exp(psi));
}

PropernessResult check_properness(const TauLogPrior& prior) {
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-9;
  cfg.tail_rel = 1e-8;  // convergence criterion on tail increments
  cfg.max_evals = 60000;
  cfg.scan_lo = -30.0;
  cfg.scan_hi = 30.0;

  const auto integrand = [&prior](double psi) {
    // Deep in the tails a failed factorization only signals underflow.
    try {
      return log_prior_psi(prior, psi);
    } catch (const NumericalError&) {
      if (std::abs(psi) > 20.0) return kNegInf;
      throw;
    }
  };

  PropernessResult out;
  try {
    const QuadratureResult q = adaptive_log_quadrature(integrand, cfg);
    out.log_mass = q.log_integral;
    out.converged = true;
  } catch (const NumericalError&) {
    out.log_mass = std::numeric_limits<double>::quiet_NaN();
    out.converged = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence sweep
// ---------------------------------------------------------------------------

EquivalenceSweepResult run_equivalence_sweep(const EquivalenceSweepConfig& cfg) {
  Rng rng(cfg.seed);
  EquivalenceSweepResult out;

  for (int inst = 0; inst < cfg.instances; ++inst) {
    const int n = cfg.sizes[inst % cfg.sizes.size()];
    const int p = 1 + static_cast<int>(rng.uniform_int(cfg.max_regressors + 1));

    NeighborhoodGraph graph = random_connected_graph(rng, n, 0.15);
    const PrecisionStructure prec = build_precision(graph);
    const SpectralBasis basis = decompose(prec);
    const Eigen::MatrixXd H_plus = dense_h_plus(prec.H);

    Eigen::MatrixXd X(n, p);
    X.col(0).setOnes();
    for (int c = 1; c < p; ++c)
      for (int r = 0; r < n; ++r) X(r, c) = rng.normal();

    const Eigen::MatrixXd X_t = basis.P.transpose() * X;
    TracePrior trace_prior(basis, X_t);
    if (cfg.fault_eps != 0.0) trace_prior.set_fault_injection(cfg.fault_eps);
    const EigenvaluePrior eigen_prior(projection_eigenvalues(basis, X), n);

    for (int g = 0; g < cfg.tau_points; ++g) {
      const double frac = cfg.tau_points == 1
                              ? 0.5
                              : static_cast<double>(g) / (cfg.tau_points - 1);
      const double tau =
          std::exp(std::log(cfg.tau_lo) +
                   frac * (std::log(cfg.tau_hi) - std::log(cfg.tau_lo)));

      const double lt = trace_prior.log_unnormalized(tau);
      const double le = eigen_prior.log_unnormalized(tau);
      double worst = std::abs(lt - le);
      if (cfg.include_w_oracle) {
        const double lw = log_prior_w_oracle(H_plus, X, tau);
        worst = std::max({worst, std::abs(lt - lw), std::abs(le - lw)});
      }
      out.max_rel_discrepancy = std::max(out.max_rel_discrepancy, worst);
      ++out.evaluations;
    }
    ++out.instances;
  }
  return out;
}

}  // namespace icar
