#pragma once

#include <functional>

namespace rankcop {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive 15-point Gauss-Kronrod with interval bisection. `tol` is the
/// target absolute error; the recursion stops at depth `max_depth`.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double tol = 1e-10, unsigned max_depth = 30);

}  // namespace rankcop
