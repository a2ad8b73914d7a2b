#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "rankcop/perm.hpp"

namespace testing_support {

inline rankcop::Permutation P(std::string_view text) { return rankcop::Permutation::parse(text); }

inline rankcop::IncompleteRanking inc(std::string_view sstar, std::vector<int> mstar_one_based, int n) {
  for (int& i : mstar_one_based) --i;
  return rankcop::IncompleteRanking(P(sstar), std::move(mstar_one_based), n);
}

// Upper tail of the chi-square statistic for counts against equal cells.
inline double chi_square_uniform_p(const std::vector<std::uint64_t>& counts) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// One-sample Kolmogorov-Smirnov statistic against a CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// Asymptotic 0.001 critical value of sqrt(n) D.
inline double ks_critical(std::size_t n) { return 1.9495 / std::sqrt(static_cast<double>(n)); }

}  // namespace testing_support
