#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rankcop/rng.hpp"

namespace rankcop {

/// theta = 2T - 1 with T ~ Beta(alpha, beta).
struct TransformedBeta {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Jeffreys prior for the FGM parameter, proportional to sqrt(I(theta)).
struct JeffreysFgm {};

/// Piecewise-linear density through (grid[i], density[i]); normalized on load.
struct Tabulated {
  std::vector<double> grid;
  std::vector<double> density;
};

/// Degenerate prior concentrated at one value. Has moments and samples but no density.
struct PointMass {
  double value = 0.0;
};

using PriorKind = std::variant<TransformedBeta, JeffreysFgm, Tabulated, PointMass>;

struct MomentTable {
  enum class Provenance { closed_form, quadrature };
  std::vector<double> moments;  // m_0 .. m_upto
  Provenance provenance = Provenance::closed_form;
  double operator[](std::size_t j) const { return moments[j]; }
  std::size_t size() const noexcept { return moments.size(); }
};

/// E[(2T - 1)^j] for T ~ Beta(alpha, beta), by the alternating Beta-function sum.
double beta_moment(double alpha, double beta, int j);

/// FGM Fisher information, sum_k theta^{2k} / (2k + 3)^2.
double jeffreys_fisher_info(double theta);

/// A prior on a scalar copula parameter supported on [-1, 1]. Immutable after
/// construction; the normalizer, a moment cache and the inverse-CDF table are
/// built once, so a Prior may be shared across threads.
class Prior {
 public:
  explicit Prior(PriorKind kind);

  static Prior beta(double alpha, double beta) { return Prior(TransformedBeta{alpha, beta}); }
  static Prior jeffreys() { return Prior(JeffreysFgm{}); }
  static Prior tabulated(std::vector<double> grid, std::vector<double> density);
  static Prior point_mass(double value) { return Prior(PointMass{value}); }
  /// Reads a two-column whitespace-separated (grid, density) file.
  static Prior from_table_file(const std::string& path);
  /// "beta:6,2", "jeffreys", "table:<file>" or "point:0".
  static Prior parse(std::string_view spec);

  const PriorKind& kind() const noexcept { return kind_; }
  std::string describe() const;
  double lower() const noexcept { return -1.0; }
  double upper() const noexcept { return 1.0; }
  bool has_density() const noexcept { return !std::holds_alternative<PointMass>(kind_); }
  bool symmetric() const;

  /// Normalized density; throws outside [-1, 1] or for a point mass.
  double density(double theta) const;
  MomentTable moments(int upto) const;
  double sample(Rng& rng) const;

 private:
  double raw_density(double theta) const;
  double quadrature_moment(int j) const;

  PriorKind kind_;
  double normalizer_ = 1.0;
  std::vector<double> cached_moments_;
  // Inverse-CDF table on a uniform theta grid (Jeffreys and Tabulated).
  std::vector<double> cdf_grid_;
  std::vector<double> cdf_;
};

double density(const Prior& prior, double theta);
MomentTable moments(const Prior& prior, int upto);
double sample_prior(const Prior& prior, Rng& rng);

/// Half the L1 distance between two prior densities on [-1, 1].
double tv_distance(const Prior& p, const Prior& q, double tol = 1e-6);

}  // namespace rankcop
