#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rankcop/copula.hpp"
#include "rankcop/perm.hpp"
#include "rankcop/prior.hpp"
#include "rankcop/rng.hpp"

namespace rankcop {

/// The n+1 spacings of n sorted uniforms: a Dirichlet(1, ..., 1) point.
class SpacingsVector {
 public:
  SpacingsVector() = default;
  /// Takes all n+1 entries; throws unless they are positive and sum to 1 (1e-12).
  explicit SpacingsVector(std::vector<double> w);

  /// n, the number of free coordinates (size() - 1 entries).
  int n() const noexcept { return static_cast<int>(w_.size()) - 1; }
  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  const std::vector<double>& values() const noexcept { return w_; }

  /// prefix(i) = w_1 + ... + w_i for i = 1..n, returned as a vector of length n.
  std::vector<double> prefix_sums() const;
  void prefix_sums(std::span<double> out) const;

 private:
  friend SpacingsVector sample_spacings(int n, Rng& rng);
  friend class SpacingsAccess;
  std::vector<double> w_;
};

/// Normalized iid exponentials; O(n).
SpacingsVector sample_spacings(int n, Rng& rng);

struct MCEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t draws = 0;
};

struct McOptions {
  std::uint64_t seed = 1;
  /// 0 = OpenMP default. Results do not depend on this value.
  int threads = 0;
  /// Draws per RNG block; each block has its own stream (seed, block index).
  std::uint64_t block = 4096;
};

/// Unbiased estimate of P_theta(S = s) as the mean of
/// (1/n!) prod_i c_theta(U_(i), V_(s(i))) over K independent spacings pairs.
MCEstimate mc_rank_likelihood(const Permutation& s, double theta, const CopulaModel& model,
                              std::uint64_t K, const McOptions& opts = {});
MCEstimate mc_rank_likelihood_serial(const Permutation& s, double theta, const CopulaModel& model,
                                     std::uint64_t K, const McOptions& opts = {});

/// Same with theta ~ prior drawn afresh for each term: estimates P(S = s).
MCEstimate mc_marginal(const Permutation& s, const Prior& prior, const CopulaModel& model,
                       std::uint64_t K, const McOptions& opts = {});
MCEstimate mc_marginal_serial(const Permutation& s, const Prior& prior, const CopulaModel& model,
                              std::uint64_t K, const McOptions& opts = {});

/// Marginal estimates for several permutations. With common_random_numbers the
/// same (spacings, theta) draws are reused for every permutation, which reduces
/// the variance of ratios between them; otherwise each gets its own streams.
std::vector<MCEstimate> mc_marginal_batch(std::span<const Permutation> perms, const Prior& prior,
                                          const CopulaModel& model, std::uint64_t K,
                                          bool common_random_numbers, const McOptions& opts = {});

/// Draw-level kernel shared with the chains: given margin scores of the prefix
/// sums of two spacings samples, returns prod_i c(u_i, v_{s(i)}).
double spacings_product(const Permutation& s, double theta, const CopulaModel& model,
                        std::span<const double> u_scores, std::span<const double> v_scores);

}  // namespace rankcop
