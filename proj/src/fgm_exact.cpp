#include "rankcop/fgm_exact.hpp"

#include <algorithm>
#include <bit>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace rankcop {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

cpp_int big_factorial(int k) {
  cpp_int f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

void check_cap(int n, int cap) {
  if (n < 1) throw std::invalid_argument("exact FGM: n must be >= 1");
  if (n > cap) {
    throw CapExceeded("exact FGM likelihood limited to n <= " + std::to_string(cap) + " (got n = " +
                      std::to_string(n) + ")");
  }
}

// Sum over (k_l) in {1..n+1}^j of (-1)^{#{l : k_l > i_l}} prod_p (count_p)!,
// accumulated level by level: placing another copy of k multiplies the
// factorial product by its new count.
std::int64_t alternating_sum(const int* upper, int level, int depth, int n, int* counts) {
  std::int64_t total = 0;
  const int i = upper[level];
  for (int k = 1; k <= n + 1; ++k) {
    const std::int64_t mult = ++counts[k];
    std::int64_t inner = level + 1 == depth ? 1 : alternating_sum(upper, level + 1, depth, n, counts);
    --counts[k];
    inner *= mult;
    total += (k > i) ? -inner : inner;
  }
  return total;
}

std::uint32_t image_mask(std::uint32_t mask, const Permutation& s) {
  std::uint32_t img = 0;
  while (mask) {
    const int i = std::countr_zero(mask);
    img |= 1u << s[i];
    mask &= mask - 1;
  }
  return img;
}

}  // namespace

std::int64_t d_numerator(int n, std::span<const int> zero_based) {
  const int j = static_cast<int>(zero_based.size());
  if (j < 1 || j > n) throw std::invalid_argument("d_coefficient: need 1 <= j <= n");
  std::vector<int> upper(zero_based.size());
  for (std::size_t l = 0; l < zero_based.size(); ++l) {
    if (zero_based[l] < 0 || zero_based[l] >= n) {
      throw std::out_of_range("d_coefficient: index out of range");
    }
    upper[l] = zero_based[l] + 1;
  }
  std::vector<int> counts(static_cast<std::size_t>(n) + 2, 0);
  return alternating_sum(upper.data(), 0, j, n, counts.data());
}

double d_coefficient(int n, std::span<const int> zero_based_indices) {
  return static_cast<double>(d_numerator(n, zero_based_indices)) /
         factorial(n + static_cast<int>(zero_based_indices.size()));
}

DCoefficientTable::DCoefficientTable(int n, int cap, Serial) : n_(n) {
  check_cap(n, cap);
  numerators_.assign(std::size_t{1} << n, 0);
}

DCoefficientTable::DCoefficientTable(int n, int cap) : DCoefficientTable(n, cap, Serial{}) {
  const std::int64_t full = (std::int64_t{1} << n) - 1;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t mask = 1; mask < full; ++mask) {
    int idx[32];
    int j = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (std::int64_t{1} << i)) idx[j++] = i;
    }
    numerators_[static_cast<std::size_t>(mask)] = d_numerator(n, std::span<const int>(idx, static_cast<std::size_t>(j)));
  }
  finalize();
}

DCoefficientTable DCoefficientTable::build_serial(int n, int cap) {
  DCoefficientTable t(n, cap, Serial{});
  const std::uint32_t full = (1u << n) - 1;
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    t.numerators_[mask] = d_numerator(n, idx);
  }
  t.finalize();
  return t;
}

void DCoefficientTable::finalize() {
  values_.assign(numerators_.size(), 0.0);
  for (std::size_t mask = 1; mask < numerators_.size(); ++mask) {
    const int j = std::popcount(static_cast<std::uint32_t>(mask));
    values_[mask] = static_cast<double>(numerators_[mask]) / factorial(n_ + j);
  }
}

double DCoefficientTable::value(std::span<const int> zero_based_indices) const {
  std::uint32_t mask = 0;
  for (int i : zero_based_indices) {
    if (i < 0 || i >= n_) throw std::out_of_range("DCoefficientTable: index out of range");
    mask |= 1u << i;
  }
  return values_[mask];
}

const DCoefficientTable& DCoefficientTable::cached(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<DCoefficientTable>> tables;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = tables[n];
  if (!slot) slot = std::make_unique<DCoefficientTable>(n);
  return *slot;
}

double RankLikelihoodPolynomial::evaluate(double theta) const {
  if (theta < -1.0 || theta > 1.0) {
    throw std::domain_error("FGM rank likelihood: theta outside [-1, 1]");
  }
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * theta + *it;
  return acc;
}

RankLikelihoodPolynomial rank_likelihood_poly(const Permutation& s, const DCoefficientTable& table) {
  const int n = s.size();
  if (table.n() != n) throw std::invalid_argument("rank_likelihood_poly: table size mismatch");
  RankLikelihoodPolynomial poly;
  poly.n = n;
  poly.coeffs.assign(static_cast<std::size_t>(n), 0.0);
  const double nfact = factorial(n);
  poly.coeffs[0] = 1.0 / nfact;
  const std::uint32_t full = (1u << n) - 1;
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    const int j = std::popcount(mask);
    poly.coeffs[static_cast<std::size_t>(j)] += table.value(mask) * table.value(image_mask(mask, s));
  }
  for (int j = 1; j < n; ++j) poly.coeffs[static_cast<std::size_t>(j)] *= nfact;
  return poly;
}

RankLikelihoodPolynomial rank_likelihood_poly(const Permutation& s, int cap) {
  check_cap(s.size(), cap);
  return rank_likelihood_poly(s, DCoefficientTable::cached(s.size()));
}

double RationalCoefficient::to_double() const {
  return static_cast<double>(cpp_rational(cpp_int(numerator), cpp_int(denominator)));
}

namespace {

std::vector<cpp_rational> rational_coeffs(const Permutation& s, const std::vector<std::int64_t>& nums) {
  const int n = s.size();
  std::vector<cpp_rational> c(static_cast<std::size_t>(n) + 1, cpp_rational(0));
  const cpp_int nfact = big_factorial(n);
  c[0] = cpp_rational(1, nfact);
  const std::uint32_t all = (1u << n);
  for (std::uint32_t mask = 1; mask < all; ++mask) {
    const int j = std::popcount(mask);
    const cpp_int denom = big_factorial(n + j);
    c[static_cast<std::size_t>(j)] +=
        cpp_rational(cpp_int(nums[mask]) * cpp_int(nums[image_mask(mask, s)]), denom * denom);
  }
  for (int j = 1; j <= n; ++j) c[static_cast<std::size_t>(j)] *= nfact;
  return c;
}

std::vector<std::int64_t> all_numerators(int n) {
  std::vector<std::int64_t> nums(std::size_t{1} << n, 0);
  for (std::uint32_t mask = 1; mask < nums.size(); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    nums[mask] = d_numerator(n, idx);
  }
  return nums;
}

RationalCoefficient to_rc(const cpp_rational& r) {
  return {boost::multiprecision::numerator(r).str(), boost::multiprecision::denominator(r).str()};
}

}  // namespace

std::vector<RationalCoefficient> rank_likelihood_poly_rational(const Permutation& s) {
  check_cap(s.size(), 6);
  const auto nums = all_numerators(s.size());
  std::vector<RationalCoefficient> out;
  for (const auto& r : rational_coeffs(s, nums)) out.push_back(to_rc(r));
  return out;
}

std::vector<RationalCoefficient> coefficient_sums_rational(int n) {
  check_cap(n, 6);
  const auto nums = all_numerators(n);
  std::vector<cpp_rational> sums(static_cast<std::size_t>(n) + 1, cpp_rational(0));
  for (const auto& s : all_permutations(n)) {
    const auto c = rational_coeffs(s, nums);
    for (std::size_t j = 0; j < c.size(); ++j) sums[j] += c[j];
  }
  std::vector<RationalCoefficient> out;
  for (const auto& r : sums) out.push_back(to_rc(r));
  return out;
}

double exact_rank_likelihood(const Permutation& s, double theta, int cap) {
  if (theta < -1.0 || theta > 1.0) {
    throw std::domain_error("exact_rank_likelihood: theta outside [-1, 1]");
  }
  return rank_likelihood_poly(s, cap).evaluate(theta);
}

double exact_marginal(const Permutation& s, const MomentTable& moments, int cap) {
  const auto poly = rank_likelihood_poly(s, cap);
  if (moments.size() < poly.coeffs.size()) {
    throw std::invalid_argument("exact_marginal: need prior moments up to order n-1");
  }
  double p = 0.0;
  for (std::size_t j = 0; j < poly.coeffs.size(); ++j) p += poly.coeffs[j] * moments[j];
  return p;
}

double exact_marginal(const Permutation& s, const Prior& prior, int cap) {
  return exact_marginal(s, prior.moments(s.size() - 1), cap);
}

const Permutation& ExactPredictive::mode() const {
  if (modes.empty()) throw std::logic_error("exact predictive has no mode");
  std::size_t pick = modes.front();
  for (std::size_t k : modes)
    if (tie_break_less(support[k], support[pick])) pick = k;
  return support[pick];
}

double ExactPredictive::probability(const Permutation& s) const {
  auto it = std::lower_bound(support.begin(), support.end(), s);
  if (it == support.end() || *it != s) return 0.0;
  return probabilities[static_cast<std::size_t>(it - support.begin())];
}

namespace {

std::vector<double> marginals_of(const std::vector<Permutation>& perms, int n,
                                 const MomentTable& moments, const ExactOptions& opts) {
  check_cap(n, opts.cap);
  const DCoefficientTable& table = DCoefficientTable::cached(n);
  if (moments.size() < static_cast<std::size_t>(n)) {
    throw std::invalid_argument("exact FGM: need prior moments up to order n-1");
  }
  std::vector<double> out(perms.size());
  const auto count = static_cast<std::int64_t>(perms.size());
#pragma omp parallel for schedule(static) if (opts.parallel)
  for (std::int64_t k = 0; k < count; ++k) {
    const auto poly = rank_likelihood_poly(perms[static_cast<std::size_t>(k)], table);
    double p = 0.0;
    for (std::size_t j = 0; j < poly.coeffs.size(); ++j) p += poly.coeffs[j] * moments[j];
    out[static_cast<std::size_t>(k)] = p;
  }
  return out;
}

}  // namespace

ExactPredictive exact_predictive(const IncompleteRanking& inc, const Prior& prior,
                                 const ExactOptions& opts) {
  const int n = inc.n();
  check_cap(n, opts.cap);
  ExactPredictive out;
  out.support = enumerate_compatible(inc, opts.enumeration_cap);
  const MomentTable moments = prior.moments(n - 1);
  out.probabilities = marginals_of(out.support, n, moments, opts);
  double total = 0.0;
  for (double p : out.probabilities) total += p;
  if (!(total > 0.0)) throw std::runtime_error("exact_predictive: compatible set has zero mass");
  double best = 0.0;
  for (double& p : out.probabilities) {
    p /= total;
    best = std::max(best, p);
  }
  for (std::size_t k = 0; k < out.probabilities.size(); ++k) {
    if (out.probabilities[k] >= best * (1.0 - opts.mode_rel_tol)) out.modes.push_back(k);
  }
  return out;
}

Permutation predict_mode_exact(const Permutation& r_x, const Permutation& r_y_star,
                               std::span<const int> observed, const Prior& prior,
                               const ExactOptions& opts) {
  const IncompleteRanking inc = to_star_form(r_x, r_y_star, observed);
  const ExactPredictive pred = exact_predictive(inc, prior, opts);
  return compose(pred.mode(), r_x);
}

std::vector<double> exact_marginal_all(int n, const MomentTable& moments, const ExactOptions& opts) {
  return marginals_of(all_permutations(n, opts.enumeration_cap), n, moments, opts);
}

}  // namespace rankcop
