#pragma once

#include <functional>

namespace icar {

/// Settings for the one-dimensional log-space quadrature over psi = log tau.
struct QuadratureConfig {
  double rel_tol = 1e-8;   // target relative error of the integral
  int max_evals = 20000;   // hard budget of integrand evaluations
  double scan_lo = -30.0;  // coarse mode-scan interval in psi
  double scan_hi = 30.0;
  int scan_points = 81;
  double tail_rel = 1e-10;  // stop expanding when a segment adds less than this fraction
};

struct QuadratureResult {
  double log_integral = 0.0;
  int evaluations = 0;
  double est_rel_error = 0.0;
  double mode = 0.0;    // psi of the located maximum
  double f_mode = 0.0;  // log-integrand there
};

/// Integrates exp(log_f(psi)) over the real line.
///
/// The mode is located by a coarse scan (scan_points equispaced values,
/// widened once if the maximum lands on the boundary) followed by
/// golden-section refinement; exp(log_f - f_mode) is then integrated by
/// adaptive Simpson subdivision on segments marching outward from the mode,
/// expanding until tail increments fall below tail_rel of the accumulated
/// integral. Fully deterministic.
///
/// Throws NumericalError when the mode stays on the widened boundary, when
/// the budget is exceeded, or when the integrand is -inf everywhere.
QuadratureResult adaptive_log_quadrature(const std::function<double(double)>& log_f,
                                         const QuadratureConfig& cfg);

}  // namespace icar
