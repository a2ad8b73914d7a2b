#include "rankcop/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rankcop {

SpacingsVector::SpacingsVector(std::vector<double> w) : w_(std::move(w)) {
  if (w_.size() < 2) throw std::invalid_argument("spacings: need at least two entries");
  double sum = 0.0;
  for (double x : w_) {
    if (!(x > 0.0)) throw std::invalid_argument("spacings: entries must be positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("spacings: entries must sum to 1");
}

std::vector<double> SpacingsVector::prefix_sums() const {
  std::vector<double> out(static_cast<std::size_t>(n()));
  prefix_sums(out);
  return out;
}

void SpacingsVector::prefix_sums(std::span<double> out) const {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < w_.size(); ++i) {
    acc += w_[i];
    out[i] = acc;
  }
}

SpacingsVector sample_spacings(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_spacings: n must be >= 1");
  SpacingsVector sv;
  sv.w_.resize(static_cast<std::size_t>(n) + 1);
  double total = 0.0;
  for (double& x : sv.w_) {
    x = rng.exponential();
    total += x;
  }
  for (double& x : sv.w_) x /= total;
  return sv;
}

double spacings_product(const Permutation& s, double theta, const CopulaModel& model,
                        std::span<const double> u_scores, std::span<const double> v_scores) {
  double prod = 1.0;
  const int n = s.size();
  for (int i = 0; i < n; ++i) {
    prod *= model.density_from_scores(u_scores[static_cast<std::size_t>(i)],
                                      v_scores[static_cast<std::size_t>(s[i])], theta);
  }
  return prod;
}

namespace {

struct RunningStats {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  void merge(const RunningStats& o) {
    if (o.count == 0.0) return;
    const double total = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / total;
    m2 += o.m2 + d * d * count * o.count / total;
    count = total;
  }
};

double inv_factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return 1.0 / f;
}

// Fills `scores` with the margin scores of the prefix sums of one Dirichlet draw.
void draw_scores(int n, const CopulaModel& model, Rng& rng, std::span<double> w,
                 std::span<double> scores) {
  double total = 0.0;
  for (double& x : w) {
    x = rng.exponential();
    total += x;
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += w[static_cast<std::size_t>(i)];
    scores[static_cast<std::size_t>(i)] = model.score(acc / total);
  }
}

double clamp_theta(const CopulaModel& model, double theta) {
  if (model.family() == CopulaFamily::gaussian) {
    return std::clamp(theta, -1.0 + 1e-12, 1.0 - 1e-12);
  }
  return theta;
}

// One RNG block: `count` draws, each shared by all permutations in `perms`.
// theta_fixed is used when prior == nullptr.
void run_block(std::span<const Permutation> perms, const CopulaModel& model, const Prior* prior,
               double theta_fixed, std::uint64_t seed, std::uint64_t block, std::uint64_t count,
               std::span<RunningStats> out) {
  const int n = perms.front().size();
  const double scale = inv_factorial(n);
  Rng rng(seed, block);
  std::vector<double> w(static_cast<std::size_t>(n) + 1);
  std::vector<double> us(static_cast<std::size_t>(n));
  std::vector<double> vs(static_cast<std::size_t>(n));
  for (std::uint64_t d = 0; d < count; ++d) {
    draw_scores(n, model, rng, w, us);
    draw_scores(n, model, rng, w, vs);
    const double theta = prior ? clamp_theta(model, prior->sample(rng)) : theta_fixed;
    for (std::size_t p = 0; p < perms.size(); ++p) {
      out[p].push(scale * spacings_product(perms[p], theta, model, us, vs));
    }
  }
}

std::vector<MCEstimate> estimate(std::span<const Permutation> perms, const CopulaModel& model,
                                 const Prior* prior, double theta, std::uint64_t K,
                                 const McOptions& opts, bool parallel) {
  if (K < 1) throw std::invalid_argument("Monte Carlo estimate: K must be >= 1");
  if (opts.block < 1) throw std::invalid_argument("Monte Carlo estimate: block must be >= 1");
  if (perms.empty()) return {};
  for (const auto& p : perms) {
    if (p.size() != perms.front().size()) throw std::invalid_argument("Monte Carlo estimate: mixed sizes");
  }
  if (!prior) model.check_domain(theta);
  const std::uint64_t blocks = (K + opts.block - 1) / opts.block;
  const std::size_t np = perms.size();
  std::vector<RunningStats> stats(static_cast<std::size_t>(blocks) * np);
  auto do_block = [&](std::uint64_t b) {
    const std::uint64_t count = std::min(opts.block, K - b * opts.block);
    run_block(perms, model, prior, theta, opts.seed, b,
              count, std::span<RunningStats>(stats).subspan(static_cast<std::size_t>(b) * np, np));
  };
  if (parallel) {
    const auto nb = static_cast<std::int64_t>(blocks);
#ifdef _OPENMP
    const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
    for (std::int64_t b = 0; b < nb; ++b) do_block(static_cast<std::uint64_t>(b));
  } else {
    for (std::uint64_t b = 0; b < blocks; ++b) do_block(b);
  }
  std::vector<MCEstimate> out(np);
  for (std::size_t p = 0; p < np; ++p) {
    RunningStats total;
    for (std::uint64_t b = 0; b < blocks; ++b) total.merge(stats[static_cast<std::size_t>(b) * np + p]);
    out[p].mean = total.mean;
    out[p].draws = K;
    out[p].standard_error = K > 1 ? std::sqrt(total.m2 / (total.count - 1.0) / total.count) : 0.0;
  }
  return out;
}

}  // namespace

MCEstimate mc_rank_likelihood(const Permutation& s, double theta, const CopulaModel& model,
                              std::uint64_t K, const McOptions& opts) {
  return estimate(std::span<const Permutation>(&s, 1), model, nullptr, theta, K, opts, true).front();
}

MCEstimate mc_rank_likelihood_serial(const Permutation& s, double theta, const CopulaModel& model,
                                     std::uint64_t K, const McOptions& opts) {
  return estimate(std::span<const Permutation>(&s, 1), model, nullptr, theta, K, opts, false).front();
}

MCEstimate mc_marginal(const Permutation& s, const Prior& prior, const CopulaModel& model,
                       std::uint64_t K, const McOptions& opts) {
  return estimate(std::span<const Permutation>(&s, 1), model, &prior, 0.0, K, opts, true).front();
}

MCEstimate mc_marginal_serial(const Permutation& s, const Prior& prior, const CopulaModel& model,
                              std::uint64_t K, const McOptions& opts) {
  return estimate(std::span<const Permutation>(&s, 1), model, &prior, 0.0, K, opts, false).front();
}

std::vector<MCEstimate> mc_marginal_batch(std::span<const Permutation> perms, const Prior& prior,
                                          const CopulaModel& model, std::uint64_t K,
                                          bool common_random_numbers, const McOptions& opts) {
  if (common_random_numbers) return estimate(perms, model, &prior, 0.0, K, opts, true);
  std::vector<MCEstimate> out;
  out.reserve(perms.size());
  for (std::size_t p = 0; p < perms.size(); ++p) {
    McOptions o = opts;
    o.seed = stream_seed(opts.seed, 0x5eed0000ULL + p);
    out.push_back(mc_marginal(perms[p], prior, model, K, o));
  }
  return out;
}

}  // namespace rankcop
