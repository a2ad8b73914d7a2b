// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "rankcop/chains.hpp"
#include "rankcop/fgm_exact.hpp"
#include "rankcop/montecarlo.hpp"
#include "rankcop/recommender.hpp"

using namespace rankcop;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Permutation parse_perm(const std::string& s) { return Permutation::parse(s); }

IncompleteRanking toy() {
  const std::vector<int> mstar{1, 3, 4};
  return IncompleteRanking(parse_perm("2,1,3"), mstar, 7);
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

// 1. toy modes
void toy_modes() {
  const auto t0 = Clock::now();
  const auto ex = exact_predictive(toy(), Prior::jeffreys());
  const double secs = seconds_since(t0);
  std::vector<Permutation> modes;
  for (auto k : ex.modes) modes.push_back(ex.support[k]);
  const auto m1 = parse_perm("1,3,4,2,5,6,7"), m2 = parse_perm("1,4,2,3,5,6,7");
  const bool set_ok = modes == std::vector<Permutation>{m1, m2};
  const double rd = rel_diff(ex.probability(m1), ex.probability(m2));
  const int dist = kendall_distance(m1, m2);
  report(1, "toy modes", set_ok && rd < 1e-8 && dist == 2 && secs < 60,
         fmt("%zu modes, rel diff %.2e, kendall %d, %.2f s", modes.size(), rd, dist, secs));
}

// 2. normalization and coefficient sums
void normalization() {
  double worst_norm = 0, worst_sum = 0;
  bool c0_ok = true;
  for (int n = 2; n <= 5; ++n) {
    const auto perms = all_permutations(n);
    double nfact = 1;
    for (int i = 2; i <= n; ++i) nfact *= i;
    std::vector<double> sums(n, 0.0);
    for (const auto& s : perms) {
      const auto poly = rank_likelihood_poly(s);
      c0_ok = c0_ok && poly.coeffs[0] == 1.0 / nfact;
      for (int j = 0; j < n; ++j) sums[j] += poly.coeffs[j];
    }
    for (int j = 1; j < n; ++j) worst_sum = std::max(worst_sum, std::abs(sums[j]));
    for (double theta : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      double total = 0;
      for (const auto& s : perms) total += exact_rank_likelihood(s, theta);
      worst_norm = std::max(worst_norm, std::abs(total - 1));
    }
  }
  report(2, "normalization", worst_norm < 1e-10 && worst_sum < 1e-10 && c0_ok,
         fmt("max |sum p - 1| %.2e, max |sum c_j| %.2e, c_0 = 1/n! %s", worst_norm, worst_sum,
             c0_ok ? "yes" : "no"));
}

// 3. eight-image symmetry over S_4
void symmetry() {
  const auto a = Permutation::anti_identity(4);
  const auto e = Permutation::identity(4);
  double worst = 0;
  std::size_t checks = 0;
  for (const auto& s : all_permutations(4))
    for (int k = 0; k < 9; ++k) {
      const double theta = -1 + 0.25 * k;
      const double p = exact_rank_likelihood(s, theta);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (bool inv : {false, true}) {
            const auto img = compose(compose(i ? a : e, inv ? inverse(s) : s), j ? a : e);
            const double t = (i + j) % 2 ? -theta : theta;
            worst = std::max(worst, std::abs(p - exact_rank_likelihood(img, t)));
            ++checks;
          }
    }
  report(3, "symmetry identities", worst < 1e-10, fmt("%zu identities, max deviation %.2e", checks, worst));
}

// 4. modes under the reference priors
void prior_modes() {
  bool ok = true;
  double worst_tie = 0;
  for (int n = 2; n <= 5; ++n) {
    const auto perms = all_permutations(n);
    const auto e = Permutation::identity(n), a = Permutation::anti_identity(n);
    auto index = [&](const Permutation& p) {
      return static_cast<std::size_t>(std::find(perms.begin(), perms.end(), p) - perms.begin());
    };
    auto argmax_unique = [&](const std::vector<double>& p, const Permutation& want) {
      const double top = p[index(want)];
      for (std::size_t k = 0; k < p.size(); ++k)
        if (k != index(want) && p[k] >= top * (1 - 1e-10)) return false;
      return true;
    };
    const auto pe = exact_marginal_all(n, moments(Prior::beta(2, 1), n));
    const auto pa = exact_marginal_all(n, moments(Prior::beta(1, 2), n));
    const auto pj = exact_marginal_all(n, moments(Prior::jeffreys(), n));
    ok = ok && argmax_unique(pe, e) && argmax_unique(pa, a);
    const double je = pj[index(e)], ja = pj[index(a)];
    const double top = *std::max_element(pj.begin(), pj.end());
    worst_tie = std::max(worst_tie, rel_diff(je, ja));
    ok = ok && rel_diff(je, ja) < 1e-10 && je >= top * (1 - 1e-10);
  }
  report(4, "prior modes", ok, fmt("n = 2..5, Jeffreys e/a rel diff %.2e", worst_tie));
}

// 5. Monte Carlo against the exact likelihood
void mc_vs_exact() {
  const auto t0 = Clock::now();
  const CopulaModel fgm(CopulaFamily::fgm);
  Rng pick(2024);
  const auto perms = all_permutations(5);
  std::vector<std::pair<Permutation, double>> pairs;
  for (int k = 0; k < 20; ++k) pairs.emplace_back(perms[pick.below(perms.size())], pick.uniform(-1, 1));
  std::vector<double> exact;
  for (const auto& [s, t] : pairs) exact.push_back(exact_rank_likelihood(s, t));
  int misses = 0, bad_reps = 0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    int rep_misses = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      McOptions o;
      o.seed = 1 + r * pairs.size() + k;
      const auto est = mc_rank_likelihood(pairs[k].first, pairs[k].second, fgm, 1000000, o);
      rep_misses += std::abs(est.mean - exact[k]) >= 4 * est.standard_error;
    }
    misses += rep_misses;
    bad_reps += rep_misses > 0;
  }
  // H0: failure rate <= 5%; reject when the upper tail at 5% is below 0.001
  const int trials = reps * static_cast<int>(pairs.size());
  boost::math::binomial bin(trials, 0.05);
  const double p_value = misses == 0 ? 1.0 : boost::math::cdf(boost::math::complement(bin, misses - 1));
  report(5, "monte carlo vs exact", p_value > 0.001,
         fmt("%d/%d estimates outside 4 SE (%d/%d repetitions with a miss), binomial p %.3g, %.0f s", misses,
             trials, bad_reps, reps, p_value, seconds_since(t0)));
}

// 6. uniformity of the compatible-set walk
void uniformity() {
  const std::vector<int> mstar{1, 3};
  const IncompleteRanking inc(parse_perm("2,1"), mstar, 5);
  const auto support = enumerate_compatible(inc);
  std::vector<std::uint64_t> counts(support.size());
  Rng rng(6);
  auto s = random_compatible(inc, rng);
  const std::uint64_t steps = 1000000;
  for (std::uint64_t t = 0; t < steps; ++t) {
    s = compat_step(s, inc, rng);
    ++counts[std::lower_bound(support.begin(), support.end(), s) - support.begin()];
  }
  const double expect = static_cast<double>(steps) / support.size();
  double stat = 0;
  for (auto c : counts) stat += (c - expect) * (c - expect) / expect;
  boost::math::chi_squared chi(static_cast<double>(support.size() - 1));
  const double p = boost::math::cdf(boost::math::complement(chi, stat));
  report(6, "compatible walk uniformity", support.size() == 60 && p > 0.001,
         fmt("%zu states, chi-square %.1f, p %.3g", support.size(), stat, p));
}

// 7. Gibbs convergence on the toy problem
void gibbs_convergence() {
  const auto t0 = Clock::now();
  const auto inc = toy();
  const auto prior = Prior::jeffreys();
  const auto exact = exact_predictive(inc, prior);
  const CopulaModel fgm(CopulaFamily::fgm);
  bool ok = true;
  std::string detail;
  for (auto variant : {SimplexMove::mhi, SimplexMove::mhrw}) {
    GibbsConfig cfg;
    cfg.variant = variant;
    cfg.steps = 1000000;
    cfg.checkpoint_every = 10000;
    cfg.record_theta = false;
    std::vector<double> tv;
    Rng rng(7, variant == SimplexMove::mhi ? 0 : 1);
    gibbs_run(inc, fgm, prior, cfg, rng, [&](std::uint64_t step, const OccupancyTable& occ) {
      if (step == 10000 || step == 100000 || step == 1000000) tv.push_back(tv_empirical(occ, exact));
    });
    const bool v_ok = tv.size() == 3 && tv[0] > tv[1] && tv[1] > tv[2] && tv[2] < 0.1;
    ok = ok && v_ok;
    detail += fmt("%s TV %.3f/%.3f/%.3f; ", variant == SimplexMove::mhi ? "mhi" : "mhrw", tv.size() > 0 ? tv[0] : -1.0,
                  tv.size() > 1 ? tv[1] : -1.0, tv.size() > 2 ? tv[2] : -1.0);
  }
  report(7, "gibbs convergence", ok, detail + fmt("%.0f s", seconds_since(t0)));
}

// 8. Jeffreys prior numbers
void jeffreys_numbers() {
  const double i0 = jeffreys_fisher_info(0.0);
  const auto j = Prior::jeffreys();
  double best_alpha = 0, best_tv = 1e9;
  for (int k = 0; k <= 290; ++k) {
    const double alpha = 0.1 + 0.01 * k;
    const double tv = tv_distance(j, Prior::beta(alpha, alpha));
    if (tv < best_tv) best_tv = tv, best_alpha = alpha;
  }
  const bool ok = i0 == 1.0 / 9.0 && std::abs(best_alpha - 0.88) <= 0.02 + 1e-12 && std::abs(best_tv - 0.0082) <= 0.0005;
  report(8, "jeffreys prior", ok, fmt("I(0) = %.17g, argmin alpha %.2f, TV %.5f", i0, best_alpha, best_tv));
}

// 9. annealing with the exact energy
void anneal_exact() {
  Rng pick(9);
  int found = 0;
  const int cases = 50;
  const Prior priors[] = {Prior::jeffreys(), Prior::beta(6, 2), Prior::beta(2, 1), Prior::beta(1, 2)};
  for (int c = 0; c < cases; ++c) {
    const auto truth = random_compatible(IncompleteRanking::unconstrained(4), pick);
    const int m = 1 + static_cast<int>(pick.below(3));
    const auto split = holdout_split(truth, m / 4.0, pick);
    const Prior& prior = priors[c % 4];
    const auto ex = exact_predictive(split.kept, prior);
    AnnealConfig cfg;
    cfg.iters = 10000;
    cfg.record_trace = false;
    Rng rng(900 + c);
    const auto res = anneal(split.kept, exact_energy(prior), cfg, rng);
    bool hit = false;
    for (auto k : ex.modes) hit = hit || ex.support[k] == res.best;
    found += hit;
  }
  report(9, "annealing with exact energy", found == cases, fmt("%d/%d instances", found, cases));
}

// 10. synthetic Gaussian data against the random baseline
void synthetic_gaussian() {
  const auto t0 = Clock::now();
  const CopulaModel gauss(CopulaFamily::gaussian);
  const auto users = synthetic_users(100, 20, gauss, 0.8, 42);
  EngineConfig engine;
  engine.engine = Engine::anneal;
  engine.anneal.K = 100;
  engine.anneal.iters = 2000;
  engine.anneal.common_random_numbers = true;
  engine.anneal.record_trace = false;
  EvalConfig cfg;
  cfg.proportions = {5.0 / 20.0};
  cfg.repetitions = 10;
  cfg.seed = 7;
  const auto bbr = evaluate(users, cfg, engine_predictor(engine, gauss, Prior::beta(6, 2)));
  const auto rnd = evaluate(users, cfg, random_compatible_predictor());
  // paired differences over the (repetition, user) cases, which share splits
  double s = 0, s2 = 0;
  std::size_t count = 0;
  for (int k = 0; k < cfg.repetitions; ++k)
    for (std::size_t u = 0; u < users.size(); ++u) {
      const double d = static_cast<double>(rnd.distances[0][k][u] - bbr.distances[0][k][u]);
      s += d, s2 += d * d, ++count;
    }
  const double mean = s / count;
  const double se = std::sqrt((s2 / count - mean * mean) / (count - 1));
  const double secs = seconds_since(t0);
  report(10, "synthetic gaussian vs random", mean >= 3 * se && secs < 600,
         fmt("BBR %.2f, random %.2f, difference %.2f (SE %.3f, %.1f SE), %.0f s", bbr.dbar[0], rnd.dbar[0], mean, se,
             mean / se, secs));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{toy_modes,       normalization,    symmetry,     prior_modes,
                                                    mc_vs_exact,     uniformity,       gibbs_convergence,
                                                    jeffreys_numbers, anneal_exact,    synthetic_gaussian};
  for (const auto& c : criteria) c();
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
