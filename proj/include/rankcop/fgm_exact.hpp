#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rankcop/perm.hpp"
#include "rankcop/prior.hpp"

namespace rankcop {

inline constexpr int kDefaultExactCap = 8;
inline constexpr int kHardExactCap = 9;

/// Integer numerators of the FGM rank-likelihood building blocks
///   d_j(i_1..i_j) = N(i_1..i_j) / (n + j)!
/// for every nonempty proper subset {i_1 < ... < i_j} of {1..n}, indexed by
/// bitmask. d_j is symmetric in its arguments, so one entry per subset suffices.
class DCoefficientTable {
 public:
  /// Builds the table with an OpenMP loop over subsets.
  explicit DCoefficientTable(int n, int cap = kHardExactCap);

  /// Serial reference builder (identical output).
  static DCoefficientTable build_serial(int n, int cap = kHardExactCap);

  int n() const noexcept { return n_; }
  std::int64_t numerator(std::uint32_t mask) const { return numerators_[mask]; }
  /// d_j for the subset `mask` as a double.
  double value(std::uint32_t mask) const { return values_[mask]; }
  /// d_j from explicit 1-based or 0-based indices (any order).
  double value(std::span<const int> zero_based_indices) const;

  /// Shared, lazily built table for size n.
  static const DCoefficientTable& cached(int n);

 private:
  struct Serial {};
  DCoefficientTable(int n, int cap, Serial);
  void finalize();

  int n_ = 0;
  std::vector<std::int64_t> numerators_;
  std::vector<double> values_;
};

/// Exact numerator of d_j for one subset by the (n+1)^j alternating sum.
std::int64_t d_numerator(int n, std::span<const int> zero_based_sorted);
double d_coefficient(int n, std::span<const int> zero_based_indices);

/// P_theta(S = s) = sum_{j < n} coeffs[j] theta^j under the FGM copula.
struct RankLikelihoodPolynomial {
  int n = 0;
  std::vector<double> coeffs;  // c_0 .. c_{n-1}

  double evaluate(double theta) const;
};

RankLikelihoodPolynomial rank_likelihood_poly(const Permutation& s, int cap = kDefaultExactCap);
RankLikelihoodPolynomial rank_likelihood_poly(const Permutation& s, const DCoefficientTable& table);

/// Exact rational coefficients c_j(s), as numerator/denominator decimal strings,
/// computed with arbitrary-precision arithmetic (slow path; n <= 6).
struct RationalCoefficient {
  std::string numerator;
  std::string denominator;
  double to_double() const;
};
std::vector<RationalCoefficient> rank_likelihood_poly_rational(const Permutation& s);
/// sum over all s in S_n of c_j(s), exactly, for j = 0..n (expected: 1, 0, ..., 0).
std::vector<RationalCoefficient> coefficient_sums_rational(int n);

double exact_rank_likelihood(const Permutation& s, double theta, int cap = kDefaultExactCap);

/// P(S = s) integrated against the prior: sum_j c_j(s) m_j.
double exact_marginal(const Permutation& s, const MomentTable& moments, int cap = kDefaultExactCap);
double exact_marginal(const Permutation& s, const Prior& prior, int cap = kDefaultExactCap);

struct ExactPredictive {
  std::vector<Permutation> support;   // lexicographically sorted compatible set
  std::vector<double> probabilities;  // same order
  std::vector<std::size_t> modes;     // indices into support, increasing
  /// The mode preferred by tie_break_less when there are several.
  const Permutation& mode() const;
  /// Probability of s, 0 when s is not in the support.
  double probability(const Permutation& s) const;
};

struct ExactOptions {
  int cap = kDefaultExactCap;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;
  double mode_rel_tol = 1e-10;
  bool parallel = true;
};

ExactPredictive exact_predictive(const IncompleteRanking& inc, const Prior& prior,
                                 const ExactOptions& opts = {});

/// Prediction in the original coordinates: r_y_hat = s_hat o r_x.
Permutation predict_mode_exact(const Permutation& r_x, const Permutation& r_y_star,
                               std::span<const int> observed, const Prior& prior,
                               const ExactOptions& opts = {});

/// P(S = s) for every s in S_n (lexicographic order).
std::vector<double> exact_marginal_all(int n, const MomentTable& moments,
                                       const ExactOptions& opts = {});

}  // namespace rankcop
