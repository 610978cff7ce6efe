#include "icar/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "icar/errors.hpp"

namespace icar {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.6180339887498948482;  // 1/phi

struct Budget {
  int used = 0;
  int limit = 0;
  void charge(int k = 1) {
    used += k;
    if (used > limit)
      throw NumericalError("quadrature budget exceeded (" + std::to_string(limit) +
                           " evaluations)");
  }
};

struct ScanResult {
  double x = 0.0;
  double f = kNegInf;
  int index = -1;
};

ScanResult scan_for_mode(const std::function<double(double)>& log_f, double lo,
                         double hi, int points, Budget& budget) {
  ScanResult best;
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    budget.charge();
    const double f = log_f(x);
    if (f > best.f) best = {x, f, i};
  }
  return best;
}

/// Golden-section refinement of the maximum inside [lo, hi].
void golden_refine(const std::function<double(double)>& log_f, double lo,
                   double hi, Budget& budget, double& mode, double& f_mode) {
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  budget.charge(2);
  double f1 = log_f(x1);
  double f2 = log_f(x2);
  for (int it = 0; it < 80 && (b - a) > 1e-10 * std::max(1.0, std::abs(a) + std::abs(b));
       ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      budget.charge();
      f2 = log_f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      budget.charge();
      f1 = log_f(x1);
    }
  }
  mode = f1 > f2 ? x1 : x2;
  f_mode = std::max(f1, f2);
}

struct SimpsonAccumulator {
  double integral = 0.0;
  double error = 0.0;
};

/// Recursive adaptive Simpson on g(psi) = exp(log_f(psi) - shift).
void adaptive_simpson(const std::function<double(double)>& g, double a,
                      double fa, double b, double fb, double fm, double whole,
                      double tol, int depth, Budget& budget,
                      SimpsonAccumulator& acc) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  budget.charge(2);
  const double flm = g(lm);
  const double frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    acc.integral += left + right + delta / 15.0;
    acc.error += std::abs(delta) / 15.0;
    return;
  }
  adaptive_simpson(g, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1, budget, acc);
  adaptive_simpson(g, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1, budget, acc);
}

double segment_integral(const std::function<double(double)>& g, double a,
                        double b, double base_tol, double accumulated,
                        Budget& budget, SimpsonAccumulator& acc) {
  budget.charge(3);
  const double fa = g(a);
  const double fb = g(b);
  const double fm = g(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // Tolerance scale: what is known so far, or this segment's own crude
  // estimate when nothing has accumulated yet (g peaks at ~1 by shift).
  const double scale = std::max({accumulated, std::abs(whole), 1e-3});
  const double tol = 0.05 * base_tol * scale;
  SimpsonAccumulator local;
  adaptive_simpson(g, a, fa, b, fb, fm, whole, tol, 24, budget, local);
  acc.integral += local.integral;
  acc.error += local.error;
  return local.integral;
}

}  // namespace

QuadratureResult adaptive_log_quadrature(const std::function<double(double)>& log_f,
                                         const QuadratureConfig& cfg) {
  Budget budget{0, cfg.max_evals};

  double lo = cfg.scan_lo, hi = cfg.scan_hi;
  ScanResult best = scan_for_mode(log_f, lo, hi, cfg.scan_points, budget);
  if (best.index == 0 || best.index == cfg.scan_points - 1) {
    // Widen once about the center, then give up if still on the boundary.
    const double center = 0.5 * (lo + hi);
    const double half = (hi - lo);
    lo = center - half;
    hi = center + half;
    best = scan_for_mode(log_f, lo, hi, cfg.scan_points, budget);
    if (best.index == 0 || best.index == cfg.scan_points - 1)
      throw NumericalError("integrand mode sits on the widened scan boundary near psi=" +
                           std::to_string(best.x));
  }
  if (!std::isfinite(best.f))
    throw NumericalError("integrand is -inf on the entire scan grid");

  const double step = (hi - lo) / (cfg.scan_points - 1);
  double mode = best.x, f_mode = best.f;
  golden_refine(log_f, best.x - step, best.x + step, budget, mode, f_mode);
  if (best.f > f_mode) {
    mode = best.x;
    f_mode = best.f;
  }

  const double shift = f_mode;
  const auto g = [&log_f, shift](double x) {
    const double v = log_f(x) - shift;
    return v < -745.0 ? 0.0 : std::exp(v);
  };

  SimpsonAccumulator acc;
  // Local tolerance per segment, scaled later against the accumulated total.
  const double base_tol = std::max(cfg.rel_tol, 1e-14);

  for (const int direction : {+1, -1}) {
    double edge = mode;
    double width = 0.5 * step;
    for (int seg = 0; seg < 400; ++seg) {
      const double next = edge + direction * width;
      const double a = direction > 0 ? edge : next;
      const double b = direction > 0 ? next : edge;
      const double part = segment_integral(g, a, b, base_tol, acc.integral, budget, acc);
      edge = next;
      if (seg >= 2 && std::abs(part) < cfg.tail_rel * acc.integral) break;
      if (seg == 399)
        throw NumericalError("quadrature tail failed to decay");
      width *= seg < 4 ? 1.0 : 1.6;
    }
  }

  if (!(acc.integral > 0.0))
    throw NumericalError("quadrature accumulated a nonpositive integral");

  QuadratureResult out;
  out.log_integral = shift + std::log(acc.integral);
  out.evaluations = budget.used;
  out.est_rel_error = acc.error / acc.integral;
  out.mode = mode;
  out.f_mode = f_mode;
  return out;
}

}  // namespace icar
