#include "icar/likelihood.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "icar/dense.hpp"
#include "icar/errors.hpp"

namespace icar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

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

/// exp(f(psi)) node values shared between the J(1) and J(b) integrals of
/// one model: everything tau-dependent except the a-dependent exponents.
struct NodeValues {
  double log_det_omega = 0.0;
  double log_det_xox = 0.0;
  double s2 = 0.0;
  double log_prior_psi = 0.0;
  bool degenerate = false;  // integrand is zero here
};

/// S^2 decays linearly in tau toward zero, so deep in the left tail it
/// falls below what the subtraction form can resolve; values under this
/// fraction of ||y||^2 are noise and the node counts as underflowed.
constexpr double kS2NoiseFloor = 1e-11;

struct NodeCache {
  std::unordered_map<std::uint64_t, NodeValues> map;

  static std::uint64_t key(double psi) {
    std::uint64_t k;
    static_assert(sizeof(k) == sizeof(psi));
    std::memcpy(&k, &psi, sizeof(k));
    return k;
  }
};

/// Assembles log of the J(a) integrand from shared node values.
double j_integrand(const NodeValues& v, double a, double n, double p_c) {
  if (v.degenerate) return kNegInf;
  if (!(v.s2 > 0.0)) return kNegInf;
  return -0.5 * a * v.log_det_omega - 0.5 * v.log_det_xox -
         0.5 * (n * a - p_c) * std::log(0.5 * a * v.s2) + v.log_prior_psi;
}

double constant_prefactor(int n, int p_c, double b) {
  return -0.5 * n * (1.0 - b) * kLog2Pi + 0.5 * p_c * std::log(b) +
         std::lgamma(0.5 * (n - p_c)) - std::lgamma(0.5 * (n * b - p_c));
}

}  // namespace

Eigen::VectorXd b_vector(const SpectralBasis& basis, double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("tau must be positive");
  const int n = basis.n();
  Eigen::VectorXd b(n);
  for (int i = 0; i + 1 < n; ++i) {
    const double u = tau * basis.d(i);
    b(i) = u / (u + 1.0);
  }
  b(n - 1) = 1.0;
  return b;
}

double log_det_omega(const SpectralBasis& basis, double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("tau must be positive");
  KahanSum acc;
  for (int i = 0; i + 1 < basis.n(); ++i)
    acc.add(std::log1p(1.0 / (tau * basis.d(i))));
  return acc.sum;
}

double log_det_xox(const SpectralBasis& basis, const Eigen::MatrixXd& X_t_c,
                   double tau) {
  const Eigen::VectorXd b = b_vector(basis, tau);
  const Eigen::MatrixXd q = X_t_c.transpose() * (b.asDiagonal() * X_t_c);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(q);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw NumericalError("X_t' B X_t is numerically singular at tau=" +
                         std::to_string(tau));
  return ldlt.vectorD().array().log().sum();
}

double s_squared(const SpectralBasis& basis, const Eigen::VectorXd& y_t,
                 const Eigen::MatrixXd& X_t_c, double tau) {
  const Eigen::VectorXd b = b_vector(basis, tau);
  const Eigen::MatrixXd q = X_t_c.transpose() * (b.asDiagonal() * X_t_c);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(q);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw NumericalError("X_t' B X_t is numerically singular at tau=" +
                         std::to_string(tau));
  const Eigen::VectorXd by = b.asDiagonal() * y_t;
  const Eigen::VectorXd v = X_t_c.transpose() * by;
  const double total = y_t.dot(by);
  const double s2 = total - v.dot(ldlt.solve(v));
  const double y_norm_sq = y_t.squaredNorm();
  if (s2 < -1e-10 * y_norm_sq)
    throw NumericalError("S^2 negative beyond roundoff at tau=" + std::to_string(tau));
  return std::max(s2, 0.0);
}

FractionalLikelihoodResult log_fractional_marginal(
    const SpectralBasis& basis, const Eigen::VectorXd& y_t,
    const Eigen::MatrixXd& X_t_c, const TauLogPrior& prior, double b_frac,
    const QuadratureConfig& quad,
    const std::vector<double>* shared_scan_log_det_omega) {
  const int n = basis.n();
  const int p_c = static_cast<int>(X_t_c.cols());
  if (!(b_frac > 0.0 && b_frac < 1.0))
    throw InvalidInputError("b fraction must lie in (0, 1)");
  if (!(n * b_frac > p_c))
    throw InvalidInputError("n * b must exceed p_c for the trained marginal");

  // Model-independent pieces on the scan grid may be precomputed by the
  // caller before fanning out across models.
  const double scan_step =
      (quad.scan_hi - quad.scan_lo) / (quad.scan_points - 1);
  auto shared_lookup = [&](double psi) -> const double* {
    if (shared_scan_log_det_omega == nullptr) return nullptr;
    const double idx = (psi - quad.scan_lo) / scan_step;
    const double rounded = std::nearbyint(idx);
    if (std::abs(idx - rounded) > 1e-9) return nullptr;
    const int i = static_cast<int>(rounded);
    if (i < 0 || i >= static_cast<int>(shared_scan_log_det_omega->size()))
      return nullptr;
    return &(*shared_scan_log_det_omega)[static_cast<std::size_t>(i)];
  };

  NodeCache cache;
  auto node_values = [&](double psi) -> const NodeValues& {
    const std::uint64_t key = NodeCache::key(psi);
    auto it = cache.map.find(key);
    if (it != cache.map.end()) return it->second;

    NodeValues v;
    const double tau = std::exp(psi);
    try {
      const double* shared = shared_lookup(psi);
      v.log_det_omega = shared != nullptr ? *shared : log_det_omega(basis, tau);
      v.log_det_xox = log_det_xox(basis, X_t_c, tau);
      v.s2 = s_squared(basis, y_t, X_t_c, tau);
      v.log_prior_psi = log_prior_psi(prior, psi);
      if (!(v.s2 > kS2NoiseFloor * y_t.squaredNorm())) v.degenerate = true;
    } catch (const NumericalError&) {
      // Far tails only: treat as underflow of the integrand.
      if (std::abs(psi) <= 20.0) throw;
      v.degenerate = true;
    }
    return cache.map.emplace(key, v).first->second;
  };

  const double dn = n, dpc = p_c;
  const auto integrand_at = [&](double a) {
    return [&, a](double psi) { return j_integrand(node_values(psi), a, dn, dpc); };
  };

  const QuadratureResult j1 = adaptive_log_quadrature(integrand_at(1.0), quad);
  const QuadratureResult jb = adaptive_log_quadrature(integrand_at(b_frac), quad);

  FractionalLikelihoodResult out;
  out.log_j1 = j1.log_integral;
  out.log_jb = jb.log_integral;
  out.log_q = constant_prefactor(n, p_c, b_frac) + j1.log_integral - jb.log_integral;
  out.evaluations = j1.evaluations + jb.evaluations;
  out.est_rel_error = std::max(j1.est_rel_error, jb.est_rel_error);
  return out;
}

double log_marginal_independent(const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& X_c, double b_frac) {
  const int n = static_cast<int>(y.size());
  const int p_c = static_cast<int>(X_c.cols());
  if (!(b_frac > 0.0 && b_frac < 1.0))
    throw InvalidInputError("b fraction must lie in (0, 1)");
  if (!(n * b_frac > p_c))
    throw InvalidInputError("n * b must exceed p_c for the trained marginal");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X_c);
  if (qr.rank() < p_c)
    throw InvalidInputError("rank-deficient design in independence marginal");
  const double s2 = (y - X_c * qr.solve(y)).squaredNorm();
  if (!(s2 > 1e-12 * y.squaredNorm()))
    throw NumericalError("OLS residual sum of squares is zero: response lies in the design span");

  return constant_prefactor(n, p_c, b_frac) -
         0.5 * (n - p_c) * std::log(0.5 * s2) +
         0.5 * (n * b_frac - p_c) * std::log(0.5 * b_frac * s2);
}

FractionalLikelihoodResult log_fractional_marginal_dense(
    const Eigen::MatrixXd& H_plus, const Eigen::VectorXd& y,
    const Eigen::MatrixXd& X_c, const TauLogPrior& prior, double b_frac,
    const QuadratureConfig& quad) {
  const int n = static_cast<int>(y.size());
  const int p_c = static_cast<int>(X_c.cols());
  if (!(n * b_frac > p_c))
    throw InvalidInputError("n * b must exceed p_c for the trained marginal");

  NodeCache cache;
  auto node_values = [&](double psi) -> const NodeValues& {
    const std::uint64_t key = NodeCache::key(psi);
    auto it = cache.map.find(key);
    if (it != cache.map.end()) return it->second;
    NodeValues v;
    try {
      const DenseOmegaQuantities q =
          dense_omega_quantities(H_plus, X_c, y, std::exp(psi));
      v.log_det_omega = q.log_det_omega;
      v.log_det_xox = q.log_det_xox;
      v.s2 = q.s2;
      v.log_prior_psi = log_prior_psi(prior, psi);
      if (!(v.s2 > kS2NoiseFloor * y.squaredNorm())) v.degenerate = true;
    } catch (const NumericalError&) {
      if (std::abs(psi) <= 20.0) throw;
      v.degenerate = true;
    }
    return cache.map.emplace(key, v).first->second;
  };

  const double dn = n, dpc = p_c;
  const auto integrand_at = [&](double a) {
    return [&, a](double psi) { return j_integrand(node_values(psi), a, dn, dpc); };
  };

  const QuadratureResult j1 = adaptive_log_quadrature(integrand_at(1.0), quad);
  const QuadratureResult jb = adaptive_log_quadrature(integrand_at(b_frac), quad);

  FractionalLikelihoodResult out;
  out.log_j1 = j1.log_integral;
  out.log_jb = jb.log_integral;
  out.log_q = constant_prefactor(n, p_c, b_frac) + j1.log_integral - jb.log_integral;
  out.evaluations = j1.evaluations + jb.evaluations;
  out.est_rel_error = std::max(j1.est_rel_error, jb.est_rel_error);
  return out;
}

}  // namespace icar
