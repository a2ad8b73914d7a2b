#include "rankcop/quadrature.hpp"

#include <array>
#include <cmath>

namespace rankcop {

namespace {

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
constexpr std::array<double, 8> kNodes{0.991455371120812639206854697526329,
                                       0.949107912342758524526189684047851,
                                       0.864864423359769072789712788640926,
                                       0.741531185599394439863864773280788,
                                       0.586087235467691130294144845693013,
                                       0.405845151377397166906606412076961,
                                       0.207784955007898467600689403773245,
                                       0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrod{0.022935322010529224963732008058970,
                                         0.063092092629978553290700663189204,
                                         0.104790010322250183839876322541518,
                                         0.140653259715525918745189590510238,
                                         0.169004726639267902826583426598550,
                                         0.190350578064785409913256402421014,
                                         0.204432940075298892414161999234649,
                                         0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGauss{0.129484966168869693270611432679082,
                                       0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975,
                                       0.417959183673469387755102040816327};

QuadratureResult gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = kKronrod[7] * fc;
  double gauss = kGauss[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kNodes[static_cast<std::size_t>(i)];
    const double sum = f(c - dx) + f(c + dx);
    kron += kKronrod[static_cast<std::size_t>(i)] * sum;
    if (i % 2 == 1) gauss += kGauss[static_cast<std::size_t>(i / 2)] * sum;
  }
  return {kron * h, std::abs((kron - gauss) * h)};
}

QuadratureResult adapt(const std::function<double(double)>& f, double a, double b, double tol,
                       unsigned depth) {
  const QuadratureResult whole = gk15(f, a, b);
  if (whole.error <= tol || depth == 0) return whole;
  const double mid = 0.5 * (a + b);
  const QuadratureResult left = adapt(f, a, mid, 0.5 * tol, depth - 1);
  const QuadratureResult right = adapt(f, mid, b, 0.5 * tol, depth - 1);
  return {left.value + right.value, left.error + right.error};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           double tol, unsigned max_depth) {
  return adapt(f, a, b, tol, max_depth);
}

}  // namespace rankcop
