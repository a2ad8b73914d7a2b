#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rankcop {

enum class CopulaFamily { fgm, gaussian };

/// Standard normal quantile. Acklam's rational approximation refined by one
/// Halley step; absolute error well below 1e-9 on (0, 1).
double normal_quantile(double p);

/// c(u, v) = 1 + theta (1 - 2u)(1 - 2v) on [0,1]^2, theta in [-1, 1].
double fgm_density(double u, double v, double theta);

/// Bivariate Gaussian copula density with correlation rho in (-1, 1).
/// u and v within 1e-15 of {0, 1} are clamped inward before the quantile
/// transform; values outside (0, 1) throw.
double gaussian_density(double u, double v, double rho);

/// A one-parameter copula family. The likelihood code only needs the density;
/// for speed it is evaluated through per-margin "scores" so that a quantile
/// transform is paid once per coordinate rather than once per pair.
class CopulaModel {
 public:
  explicit CopulaModel(CopulaFamily family) : family_(family) {}

  /// "fgm" or "gaussian".
  static CopulaModel parse(std::string_view tag);

  CopulaFamily family() const noexcept { return family_; }
  std::string tag() const { return family_ == CopulaFamily::fgm ? "fgm" : "gaussian"; }

  double lower() const noexcept { return -1.0; }
  double upper() const noexcept { return 1.0; }
  /// FGM accepts the closed interval; the Gaussian family is open.
  bool in_domain(double theta) const noexcept {
    if (family_ == CopulaFamily::fgm) return theta >= -1.0 && theta <= 1.0;
    return theta > -1.0 && theta < 1.0;
  }
  void check_domain(double theta) const;

  /// c(u, v) = c(v, u)
  bool exchangeable() const noexcept { return true; }
  /// c_theta(1 - u, v) = c_{-theta}(u, v)
  bool sign_flip() const noexcept { return true; }

  double density(double u, double v, double theta) const {
    return family_ == CopulaFamily::fgm ? fgm_density(u, v, theta)
                                        : gaussian_density(u, v, theta);
  }

  /// Margin transform: 1 - 2u for FGM, the normal quantile for Gaussian.
  double score(double u) const {
    if (family_ == CopulaFamily::fgm) return 1.0 - 2.0 * u;
    return normal_quantile(clamp_unit(u));
  }

  /// Density as a function of the two scores. No domain checks (hot path).
  double density_from_scores(double x, double y, double theta) const noexcept {
    if (family_ == CopulaFamily::fgm) return 1.0 + theta * x * y;
    const double r2 = theta * theta;
    const double q = 1.0 - r2;
    return std::exp((2.0 * theta * x * y - r2 * (x * x + y * y)) / (2.0 * q)) / std::sqrt(q);
  }

  static double clamp_unit(double u) noexcept {
    constexpr double eps = 1e-15;
    if (u < eps) return eps;
    if (u > 1.0 - eps) return 1.0 - eps;
    return u;
  }

 private:
  CopulaFamily family_;
};

struct SymmetryReport {
  double exchange_violation = 0.0;   // max |c(u,v) - c(v,u)|
  double sign_flip_violation = 0.0;  // max |c_t(1-u,v) - c_{-t}(u,v)|
  int evaluations = 0;
  bool passed(double tol) const {
    return exchange_violation <= tol && sign_flip_violation <= tol;
  }
};

using DensityFn = std::function<double(double u, double v, double theta)>;

/// Checks both declared symmetries on a uniform grid of interior (u, v)
/// points and `n_theta` parameter values spread over [-theta_max, theta_max].
SymmetryReport check_symmetries(const DensityFn& density, double theta_max, int n_uv = 50,
                                int n_theta = 5);
SymmetryReport check_symmetries(const CopulaModel& model, int n_uv = 50, int n_theta = 5);

}  // namespace rankcop
