#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "rankcop/prior.hpp"
#include "support.hpp"

using namespace rankcop;

namespace {

// E[(2T-1)^j] by tanh-sinh quadrature of the Beta density (handles the
// endpoint singularities when a shape is below one).
double beta_moment_quadrature(double a, double b, int j) {
  // tanh_sinh passes the distance to the nearer endpoint, which keeps the
  // endpoint singularities accurate
  boost::math::quadrature::tanh_sinh<double> ts;
  const double norm = boost::math::beta(a, b);
  auto f = [&](double t, double tc) {
    const double lo = tc < 0 ? -tc : t, hi = tc > 0 ? tc : 1 - t;
    return std::pow(2 * t - 1, j) * std::pow(lo, a - 1) * std::pow(hi, b - 1) / norm;
  };
  return ts.integrate(f, 0.0, 1.0);
}

// Same through raw moments E[T^k] = prod_{r<k} (a + r) / (a + b + r).
double beta_moment_binomial(double a, double b, int j) {
  double total = 0;
  for (int k = 0; k <= j; ++k) {
    double raw = 1;
    for (int r = 0; r < k; ++r) raw *= (a + r) / (a + b + r);
    const double binom = std::tgamma(j + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(j - k + 1.0));
    total += binom * std::pow(2.0, k) * ((j - k) % 2 ? -1.0 : 1.0) * raw;
  }
  return total;
}

double integral_of_density(const Prior& p) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([&](double t) { return p.density(t); }, -1.0, 1.0);
}

double sample_mean(const Prior& p, int draws, std::uint64_t seed, double* se) {
  Rng rng(seed);
  double s = 0, s2 = 0;
  for (int k = 0; k < draws; ++k) {
    const double x = p.sample(rng);
    s += x;
    s2 += x * x;
  }
  const double mean = s / draws;
  *se = std::sqrt((s2 / draws - mean * mean) / draws);
  return mean;
}

}  // namespace

TEST_SUITE("prior") {

TEST_CASE("beta moment special values") {
  for (double a : {0.5, 1.0, 3.0})
    for (double b : {0.7, 2.0}) CHECK(beta_moment(a, b, 0) == 1.0);
  for (double a : {0.5, 1.0, 6.0})
    for (int j : {1, 3, 5, 7}) CHECK(std::abs(beta_moment(a, a, j)) < 1e-14);
  CHECK(beta_moment(6, 2, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS(beta_moment(0.0, 1.0, 1));
  CHECK_THROWS(beta_moment(1.0, -2.0, 1));
}

TEST_CASE("beta(6,2) first moment against sampling") {
  Rng rng(2024);
  const int draws = 10'000'000;
  double s = 0, s2 = 0;
  for (int k = 0; k < draws; ++k) {
    const double x = 2 * rng.beta(6, 2) - 1;
    s += x;
    s2 += x * x;
  }
  const double mean = s / draws;
  const double se = std::sqrt((s2 / draws - mean * mean) / draws);
  CHECK(std::abs(mean - beta_moment(6, 2, 1)) < 4 * se);
}

TEST_CASE("beta moment closed form matches quadrature") {
  const double shapes[] = {0.5, 1.0, 2.0, 6.0};
  for (double a : shapes)
    for (double b : shapes)
      for (int j = 0; j <= 8; ++j) {
        const double closed = beta_moment(a, b, j);
        INFO("a=" << a << " b=" << b << " j=" << j);
        CHECK(std::abs(closed - beta_moment_quadrature(a, b, j)) < 1e-8);
        CHECK(std::abs(closed - beta_moment_binomial(a, b, j)) < 1e-10);
      }
}

TEST_CASE("fisher information") {
  CHECK(jeffreys_fisher_info(0.0) == 1.0 / 9.0);
  // partial sum to N plus the integral tail 1 / (2 (2N + 3))
  long double partial = 0;
  const long N = 2'000'000;
  for (long k = 0; k < N; ++k) partial += 1.0L / ((2.0L * k + 3) * (2.0L * k + 3));
  const double oracle = static_cast<double>(partial + 1.0L / (2.0L * (2.0L * N + 3)));
  CHECK(std::abs(jeffreys_fisher_info(1.0) - oracle) < 1e-12);
  CHECK(std::abs(jeffreys_fisher_info(1.0) - (std::numbers::pi * std::numbers::pi / 8 - 1)) < 1e-14);
  for (double t : {0.1, 0.5, 0.69, 0.71, 0.9, 0.999}) {
    CHECK(jeffreys_fisher_info(t) == jeffreys_fisher_info(-t));
    long double direct = 0;
    long double p = 1;
    for (int k = 0; k < 200000; ++k, p *= static_cast<long double>(t) * t) direct += p / ((2.0L * k + 3) * (2.0L * k + 3));
    if (t < 0.99) CHECK(std::abs(jeffreys_fisher_info(t) - static_cast<double>(direct)) < 1e-13);
  }
  CHECK_THROWS(jeffreys_fisher_info(1.01));
}

TEST_CASE("densities") {
  const auto flat = Prior::beta(1, 1);
  for (double t : {-0.9, 0.0, 0.3, 1.0}) CHECK(flat.density(t) == doctest::Approx(0.5).epsilon(1e-14));
  const auto j = Prior::jeffreys();
  for (double t : {0.1, 0.5, 0.95, 1.0}) CHECK(j.density(t) == j.density(-t));
  CHECK(j.density(0.9) > j.density(0.0));
  CHECK_THROWS(flat.density(1.5));
  CHECK_THROWS(Prior::point_mass(0.0).density(0.0));
  const Prior priors[] = {flat, Prior::beta(6, 2), Prior::beta(0.5, 0.5), Prior::beta(2, 1), j,
                          Prior::tabulated({-1, 0, 1}, {1, 3, 1})};
  for (const auto& p : priors) {
    INFO(p.describe());
    CHECK(std::abs(integral_of_density(p) - 1.0) < 1e-8);
  }
}

TEST_CASE("moment tables") {
  const auto jm = Prior::jeffreys().moments(9);
  CHECK(jm[0] == 1.0);
  CHECK(jm.provenance == MomentTable::Provenance::quadrature);
  for (int k = 1; k <= 9; k += 2) CHECK(jm[k] == 0.0);
  for (int k = 2; k <= 8; k += 2) {
    CHECK(jm[k] > 0.0);
    CHECK(jm[k] < 1.0);
  }
  const auto b21 = Prior::beta(2, 1).moments(3);
  CHECK(b21.provenance == MomentTable::Provenance::closed_form);
  CHECK(b21[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(std::abs(b21[1] - beta_moment_quadrature(2, 1, 1)) < 1e-10);
  CHECK(Prior::beta(1, 1).moments(2)[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  // quadrature moments of the Jeffreys density by an independent integrator
  boost::math::quadrature::tanh_sinh<double> ts;
  const auto jp = Prior::jeffreys();
  for (int k = 2; k <= 6; k += 2) {
    const double q = ts.integrate([&](double t) { return std::pow(t, k) * jp.density(t); }, -1.0, 1.0);
    CHECK(std::abs(jm[k] - q) < 1e-9);
  }
  const auto pm = Prior::point_mass(0.5).moments(3);
  CHECK(pm[3] == doctest::Approx(0.125));
}

TEST_CASE("total variation") {
  const auto j = Prior::jeffreys();
  const auto flat = Prior::beta(1, 1);
  const auto b62 = Prior::beta(6, 2);
  CHECK(tv_distance(j, j) < 1e-12);
  CHECK(tv_distance(flat, flat) < 1e-12);
  const double tv = tv_distance(j, Prior::beta(0.88, 0.88));
  CHECK(std::abs(tv - 0.0082) < 0.0005);
  const double jf = tv_distance(j, flat), fb = tv_distance(flat, b62), jb = tv_distance(j, b62);
  CHECK(jb <= jf + fb + 1e-9);
  CHECK(jf <= jb + fb + 1e-9);
  CHECK(fb <= jf + jb + 1e-9);
  CHECK(tv_distance(flat, b62) == doctest::Approx(tv_distance(b62, flat)).epsilon(1e-9));
  CHECK(fb > 0.0);
  CHECK(fb <= 1.0);
}

TEST_CASE("tv minimum near alpha 0.88 on a coarse grid") {
  const auto j = Prior::jeffreys();
  double best = 1, arg = 0;
  for (int i = 0; i <= 30; ++i) {
    const double a = 0.70 + 0.01 * i;
    const double tv = tv_distance(j, Prior::beta(a, a));
    if (tv < best) best = tv, arg = a;
  }
  CHECK(std::abs(arg - 0.88) <= 0.02);
  CHECK(tv_distance(j, Prior::beta(0.3, 0.3)) > best);
  CHECK(tv_distance(j, Prior::beta(2.0, 2.0)) > best);
}

TEST_CASE("sampling") {
  {
    Rng rng(9);
    std::vector<double> xs(100000);
    const auto flat = Prior::beta(1, 1);
    for (auto& x : xs) x = flat.sample(rng);
    const double d = testing_support::ks_statistic(xs, [](double t) { return (t + 1) / 2; });
    CHECK(d < testing_support::ks_critical(xs.size()));
  }
  double se = 0;
  const double jm = sample_mean(Prior::jeffreys(), 200000, 10, &se);
  CHECK(std::abs(jm) < 4 * se);
  const double bm = sample_mean(Prior::beta(6, 2), 200000, 11, &se);
  CHECK(std::abs(bm - 0.5) < 4 * se);
  Rng rng(1);
  CHECK(Prior::point_mass(0.25).sample(rng) == 0.25);
}

TEST_CASE("jeffreys sampling follows its CDF") {
  const auto j = Prior::jeffreys();
  Rng rng(12);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = j.sample(rng);
  // binned frequencies against integrated bin masses
  boost::math::quadrature::tanh_sinh<double> ts;
  const int bins = 20;
  std::vector<double> mass(bins);
  for (int b = 0; b < bins; ++b)
    mass[b] = ts.integrate([&](double t) { return j.density(t); }, -1.0 + 0.1 * b, -0.9 + 0.1 * b);
  std::vector<double> count(bins);
  for (double x : xs) count[std::min(bins - 1, static_cast<int>((x + 1) / 0.1))] += 1;
  double stat = 0;
  for (int b = 0; b < bins; ++b) {
    const double e = mass[b] * xs.size();
    stat += (count[b] - e) * (count[b] - e) / e;
  }
  boost::math::chi_squared chi(bins - 1);
  CHECK(boost::math::cdf(boost::math::complement(chi, stat)) > 0.001);
}

TEST_CASE("prior syntax") {
  CHECK(std::holds_alternative<JeffreysFgm>(Prior::parse("jeffreys").kind()));
  const auto b = Prior::parse("beta:6,2");
  REQUIRE(std::holds_alternative<TransformedBeta>(b.kind()));
  CHECK(std::get<TransformedBeta>(b.kind()).alpha == 6.0);
  CHECK(std::get<TransformedBeta>(b.kind()).beta == 2.0);
  CHECK(std::holds_alternative<PointMass>(Prior::parse("point:0").kind()));
  CHECK_THROWS(Prior::parse("beta:6"));
  CHECK_THROWS(Prior::parse("beta:-1,2"));
  CHECK_THROWS(Prior::parse("gamma:1,1"));

  const auto path = std::filesystem::temp_directory_path() / "rankcop_prior_table.txt";
  {
    std::ofstream out(path);
    out << "# grid density\n-1 1\n0 1\n1 1\n";
  }
  const auto t = Prior::parse("table:" + path.string());
  CHECK(t.density(0.3) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.moments(2)[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  {
    std::ofstream out(path);
    out << "-1 1\n0 oops\n";
  }
  CHECK_THROWS(Prior::parse("table:" + path.string()));
  std::filesystem::remove(path);
  CHECK_THROWS(Prior::parse("table:/nonexistent/prior.txt"));
  CHECK_THROWS(Prior::tabulated({0, 0.5}, {1, -1}));
}

}  // TEST_SUITE
