#include "rankcop/copula.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace rankcop {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  }
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the complementary error function.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double fgm_density(double u, double v, double theta) {
  if (theta < -1.0 || theta > 1.0) {
    throw std::domain_error("fgm_density: theta " + std::to_string(theta) + " outside [-1, 1]");
  }
  return 1.0 + theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v);
}

double gaussian_density(double u, double v, double rho) {
  if (!(rho > -1.0 && rho < 1.0)) {
    throw std::domain_error("gaussian_density: rho must lie in (-1, 1)");
  }
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    throw std::domain_error("gaussian_density: u and v must lie in [0, 1]");
  }
  const CopulaModel model(CopulaFamily::gaussian);
  return model.density_from_scores(model.score(u), model.score(v), rho);
}

CopulaModel CopulaModel::parse(std::string_view tag) {
  if (tag == "fgm") return CopulaModel(CopulaFamily::fgm);
  if (tag == "gaussian") return CopulaModel(CopulaFamily::gaussian);
  throw std::invalid_argument("unknown copula family '" + std::string(tag) +
                              "' (expected fgm or gaussian)");
}

void CopulaModel::check_domain(double theta) const {
  if (!in_domain(theta)) {
    throw std::domain_error("copula parameter " + std::to_string(theta) + " outside the " +
                            tag() + " domain");
  }
}

SymmetryReport check_symmetries(const DensityFn& density, double theta_max, int n_uv,
                                int n_theta) {
  SymmetryReport rep;
  for (int t = 0; t < n_theta; ++t) {
    const double theta =
        n_theta == 1 ? 0.0 : -theta_max + 2.0 * theta_max * t / (n_theta - 1);
    for (int i = 0; i < n_uv; ++i) {
      const double u = (i + 0.5) / n_uv;
      for (int j = 0; j < n_uv; ++j) {
        const double v = (j + 0.5) / n_uv;
        const double c = density(u, v, theta);
        rep.exchange_violation = std::max(rep.exchange_violation, std::abs(c - density(v, u, theta)));
        rep.sign_flip_violation = std::max(rep.sign_flip_violation,
                                           std::abs(density(1.0 - u, v, theta) - density(u, v, -theta)));
        rep.evaluations += 4;
      }
    }
  }
  return rep;
}

SymmetryReport check_symmetries(const CopulaModel& model, int n_uv, int n_theta) {
  const double theta_max = model.family() == CopulaFamily::fgm ? 1.0 : 0.95;
  return check_symmetries(
      [&model](double u, double v, double t) { return model.density(u, v, t); }, theta_max, n_uv,
      n_theta);
}

}  // namespace rankcop
