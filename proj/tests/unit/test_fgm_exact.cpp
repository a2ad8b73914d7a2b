#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>

#include "rankcop/fgm_exact.hpp"
#include "rankcop/montecarlo.hpp"
#include "rankcop/quadrature.hpp"
#include "support.hpp"

using namespace rankcop;
using testing_support::P;
using testing_support::factorial;
using testing_support::inc;

namespace {

// d_j(I) = E[prod_{i in I} (2 U_(i) - 1)] / n! expanded over subsets T of I,
// with E[U_(t_1) ... U_(t_k)] = prod_r (t_r + r - 1) / (n + r) for the order
// statistics of n uniforms.
double d_by_order_statistics(int n, const std::vector<int>& one_based) {
  const int j = static_cast<int>(one_based.size());
  double total = 0;
  for (unsigned mask = 0; mask < (1u << j); ++mask) {
    double moment = 1;
    int r = 0;
    for (int b = 0; b < j; ++b)
      if (mask & (1u << b)) {
        ++r;
        moment *= static_cast<double>(one_based[b] + r - 1) / (n + r);
      }
    const int k = std::popcount(mask);
    total += std::pow(2.0, k) * ((j - k) % 2 ? -1.0 : 1.0) * moment;
  }
  return total / factorial(n);
}

Permutation apply_group(const Permutation& s, int i, int k, int j) {
  const auto a = Permutation::anti_identity(s.size());
  Permutation out = k ? inverse(s) : s;
  if (i) out = compose(a, out);
  if (j) out = compose(out, a);
  return out;
}

}  // namespace

TEST_SUITE("fgm_exact") {

TEST_CASE("d coefficient for n = 2") {
  const std::vector<int> first{0};
  CHECK(d_coefficient(2, first) == doctest::Approx(-1.0 / 6.0).epsilon(1e-15));
  CHECK(d_numerator(2, first) == -1);
}

TEST_CASE("d coefficients match the order-statistics oracle") {
  for (int n = 1; n <= 7; ++n) {
    const auto& table = DCoefficientTable::cached(n);
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> zero, one;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) zero.push_back(i), one.push_back(i + 1);
      const double oracle = d_by_order_statistics(n, one);
      INFO("n=" << n << " mask=" << mask);
      if (static_cast<int>(zero.size()) < n) CHECK(table.value(mask) == doctest::Approx(oracle).epsilon(1e-12));
      CHECK(d_coefficient(n, zero) == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}

TEST_CASE("d coefficient is symmetric in its arguments") {
  const int n = 6;
  std::vector<int> idx{4, 1, 3};
  const double ref = d_coefficient(n, idx);
  std::sort(idx.begin(), idx.end());
  do {
    CHECK(d_coefficient(n, idx) == ref);
    CHECK(DCoefficientTable::cached(n).value(idx) == ref);
  } while (std::next_permutation(idx.begin(), idx.end()));
}

TEST_CASE("d coefficient bound and errors") {
  for (int n = 2; n <= 6; ++n)
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask)
      CHECK(std::abs(DCoefficientTable::cached(n).value(mask)) <= 1.0 / factorial(n));
  CHECK_THROWS_AS(DCoefficientTable(10), CapExceeded);
  CHECK_THROWS_AS(rank_likelihood_poly(Permutation::identity(9)), CapExceeded);
  CHECK_NOTHROW(rank_likelihood_poly(Permutation::identity(9), kHardExactCap));
  CHECK_THROWS(d_coefficient(3, std::vector<int>{0, 5}));
}

TEST_CASE("serial and parallel tables agree") {
  for (int n = 2; n <= 8; ++n) {
    const DCoefficientTable par(n);
    const auto ser = DCoefficientTable::build_serial(n);
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) REQUIRE(par.numerator(mask) == ser.numerator(mask));
  }
}

TEST_CASE("n = 2 identity polynomial against concordance probability") {
  const auto poly = rank_likelihood_poly(Permutation::identity(2));
  REQUIRE(poly.coeffs.size() == 2);
  CHECK(poly.coeffs[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(poly.coeffs[1] == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  // P(concordant) = (1 + tau) / 2 with tau = 4 E[C(U, V)] - 1
  for (double t : {-1.0, -0.4, 0.3, 1.0}) {
    auto cdf_times_density = [t](double u, double v) {
      return u * v * (1 + t * (1 - u) * (1 - v)) * (1 + t * (1 - 2 * u) * (1 - 2 * v));
    };
    const double ec = integrate(
                          [&](double u) {
                            return integrate([&](double v) { return cdf_times_density(u, v); }, 0, 1, 1e-13).value;
                          },
                          0, 1, 1e-13)
                          .value;
    const double concord = (1 + (4 * ec - 1)) / 2;
    CHECK(poly.evaluate(t) == doctest::Approx(concord).epsilon(1e-12));
  }
}

TEST_CASE("constant coefficient and coefficient sums") {
  for (int n = 1; n <= 6; ++n)
    for (const auto& s : all_permutations(n)) REQUIRE(rank_likelihood_poly(s).coeffs[0] == 1.0 / factorial(n));
  for (int n = 2; n <= 5; ++n) {
    std::vector<double> sums(n, 0.0);
    for (const auto& s : all_permutations(n)) {
      const auto poly = rank_likelihood_poly(s);
      for (int j = 0; j < n; ++j) sums[j] += poly.coeffs[j];
    }
    CHECK(std::abs(sums[0] - 1.0) < 1e-12);
    for (int j = 1; j < n; ++j) CHECK(std::abs(sums[j]) < 1e-12);
    const auto exact = coefficient_sums_rational(n);
    CHECK(exact[0].numerator == "1");
    for (std::size_t j = 1; j < exact.size(); ++j) CHECK(exact[j].numerator == "0");
  }
}

TEST_CASE("rational and floating coefficients agree") {
  for (int n = 2; n <= 5; ++n)
    for (const auto& s : all_permutations(n)) {
      const auto poly = rank_likelihood_poly(s);
      const auto rat = rank_likelihood_poly_rational(s);
      for (int j = 0; j < n; ++j) REQUIRE(std::abs(poly.coeffs[j] - rat[j].to_double()) < 1e-15);
    }
}

TEST_CASE("rank likelihood values") {
  for (int n = 2; n <= 5; ++n) {
    const auto perms = all_permutations(n);
    for (const auto& s : perms) CHECK(exact_rank_likelihood(s, 0.0) == doctest::Approx(1.0 / factorial(n)));
    for (double t : {-1.0, -0.5, 0.5, 1.0}) {
      double total = 0;
      for (const auto& s : perms) total += exact_rank_likelihood(s, t);
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
    for (int it = 0; it <= 20; ++it) {
      const double t = -1.0 + 0.1 * it;
      for (const auto& s : perms) {
        const double p = exact_rank_likelihood(s, t);
        REQUIRE(p >= -1e-15);
        REQUIRE(p <= 1.0);
      }
    }
  }
  CHECK_THROWS(exact_rank_likelihood(Permutation::identity(3), 1.2));
}

TEST_CASE("all eight symmetry images agree on S_4") {
  for (const auto& s : all_permutations(4))
    for (double t : {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double p = exact_rank_likelihood(s, t);
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k)
          for (int j = 0; j < 2; ++j) {
            const double sign = (i + j) % 2 ? -1.0 : 1.0;
            REQUIRE(std::abs(exact_rank_likelihood(apply_group(s, i, k, j), sign * t) - p) < 1e-12);
          }
    }
}

TEST_CASE("marginal symmetries under a symmetric prior") {
  const auto j = Prior::jeffreys();
  for (const auto& s : all_permutations(4)) {
    const double p = exact_marginal(s, j);
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k)
        for (int jj = 0; jj < 2; ++jj) REQUIRE(std::abs(exact_marginal(apply_group(s, i, k, jj), j) - p) < 1e-14);
  }
}

TEST_CASE("marginal modes follow the prior skew") {
  for (int n = 2; n <= 5; ++n) {
    const auto perms = all_permutations(n);
    auto argmax = [&](const Prior& prior) {
      const auto probs = exact_marginal_all(n, prior.moments(n - 1));
      return perms[std::max_element(probs.begin(), probs.end()) - probs.begin()];
    };
    CHECK(argmax(Prior::beta(2, 1)) == Permutation::identity(n));
    CHECK(argmax(Prior::beta(1, 2)) == Permutation::anti_identity(n));
  }
}

TEST_CASE("marginal multiset symmetric about the middle Kendall distance") {
  const int n = 5;
  const int top = n * (n - 1) / 2;
  const auto probs = exact_marginal_all(n, Prior::jeffreys().moments(n - 1));
  const auto perms = all_permutations(n);
  std::map<int, std::vector<double>> by_distance;
  for (std::size_t k = 0; k < perms.size(); ++k)
    by_distance[kendall_distance(perms[k], Permutation::identity(n))].push_back(probs[k]);
  for (auto& [d, v] : by_distance) std::sort(v.begin(), v.end());
  for (int d = 0; d <= top; ++d) {
    const auto& lo = by_distance[d];
    const auto& hi = by_distance[top - d];
    REQUIRE(lo.size() == hi.size());
    for (std::size_t k = 0; k < lo.size(); ++k) CHECK(std::abs(lo[k] - hi[k]) < 1e-14);
  }
}

TEST_CASE("exact_marginal_all matches per-permutation marginals") {
  const auto m = Prior::beta(6, 2).moments(4);
  const auto all = exact_marginal_all(5, m);
  const auto perms = all_permutations(5);
  for (std::size_t k = 0; k < perms.size(); ++k) REQUIRE(all[k] == doctest::Approx(exact_marginal(perms[k], m)));
  CHECK_THROWS(exact_marginal(Permutation::identity(5), Prior::beta(6, 2).moments(2)));
}

TEST_CASE("toy predictive has the two documented modes") {
  const auto pred = exact_predictive(inc("2,1,3", {2, 4, 5}, 7), Prior::jeffreys());
  CHECK(pred.support.size() == 840);
  double total = 0;
  for (double p : pred.probabilities) {
    CHECK(p >= 0.0);
    total += p;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
  REQUIRE(pred.modes.size() == 2);
  CHECK(pred.support[pred.modes[0]] == P("1,3,4,2,5,6,7"));
  CHECK(pred.support[pred.modes[1]] == P("1,4,2,3,5,6,7"));
  CHECK(pred.mode() == P("1,4,2,3,5,6,7"));
  CHECK(pred.probability(P("1,4,2,3,5,6,7")) == doctest::Approx(pred.probability(P("1,3,4,2,5,6,7"))).epsilon(1e-10));
  CHECK(pred.probability(P("1,2,3,4,5,6,7")) == 0.0);

  ExactOptions serial;
  serial.parallel = false;
  const auto again = exact_predictive(inc("2,1,3", {2, 4, 5}, 7), Prior::jeffreys(), serial);
  CHECK(again.probabilities == pred.probabilities);
}

TEST_CASE("predictive with one free position") {
  const auto ir = inc("2,4,1,3", {1, 2, 3, 5}, 5);
  const auto pred = exact_predictive(ir, Prior::beta(6, 2));
  CHECK(pred.support.size() == 5);
  double total = 0;
  for (double p : pred.probabilities) total += p;
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("predictive under a flat prior matches Monte Carlo") {
  const auto ir = inc("2,1", {1, 3}, 4);
  const auto prior = Prior::beta(1, 1);
  const auto pred = exact_predictive(ir, prior);
  const CopulaModel fgm(CopulaFamily::fgm);
  std::vector<MCEstimate> est;
  double mass = 0;
  for (const auto& s : pred.support) {
    McOptions o;
    o.seed = 100 + est.size();
    est.push_back(mc_marginal(s, prior, fgm, 200000, o));
    mass += exact_marginal(s, prior);
  }
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double unnorm = pred.probabilities[k] * mass;
    CHECK(std::abs(est[k].mean - unnorm) < 4 * est[k].standard_error);
  }
}

TEST_CASE("predict_mode_exact") {
  const auto prior = Prior::jeffreys();
  CHECK(predict_mode_exact(Permutation::identity(7), P("2,1,3"), std::vector<int>{1, 3, 4}, prior) ==
        P("1,4,2,3,5,6,7"));
  CHECK(tie_break_less(P("1,4,2,3,5,6,7"), P("1,3,4,2,5,6,7")));
  // r_x = e gives the predictive mode directly
  const auto ir = inc("2,1", {2, 4}, 5);
  CHECK(predict_mode_exact(Permutation::identity(5), P("2,1"), std::vector<int>{1, 3}, Prior::beta(6, 2)) ==
        exact_predictive(ir, Prior::beta(6, 2)).mode());
}

TEST_CASE("predict_mode_exact equals brute-force argmax over full conditionals, n = 4") {
  const int n = 4;
  const auto perms = all_permutations(n);
  const Prior priors[] = {Prior::beta(6, 2), Prior::beta(1, 3), Prior::jeffreys()};
  Rng rng(77);
  for (const auto& prior : priors)
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
      std::vector<int> observed;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) observed.push_back(i);
      const auto& r_x = perms[rng.below(perms.size())];
      const auto r_y_star = induced_subranking(perms[rng.below(perms.size())], observed);
      const IncompleteRanking original(r_y_star, observed, n);
      // argmax_{r_y in C(r_y*, M)} P(S = r_y o r_x^{-1}); ties by the tie-break order
      double best = -1;
      std::vector<Permutation> best_s;
      for (const auto& r_y : perms) {
        if (!is_compatible(r_y, original)) continue;
        const auto s = compose(r_y, inverse(r_x));
        const double p = exact_marginal(s, prior);
        if (p > best * (1 + 1e-10)) {
          best = p;
          best_s = {s};
        } else if (p >= best * (1 - 1e-10)) {
          best_s.push_back(s);
        }
      }
      const auto s_hat = *std::min_element(best_s.begin(), best_s.end(), tie_break_less);
      REQUIRE(predict_mode_exact(r_x, r_y_star, observed, prior) == compose(s_hat, r_x));
    }
}

}  // TEST_SUITE
