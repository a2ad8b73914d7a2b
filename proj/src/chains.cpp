#include "rankcop/chains.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rankcop {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

void fill_scores(const SpacingsVector& w, const CopulaModel& model, std::vector<double>& out) {
  const int n = w.n();
  out.resize(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += w[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = model.score(acc);
  }
}

double log_product(const Permutation& s, double theta, const CopulaModel& model,
                   std::span<const double> us, std::span<const double> vs) {
  double acc = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    acc += std::log(model.density_from_scores(us[static_cast<std::size_t>(i)],
                                              vs[static_cast<std::size_t>(s[i])], theta));
  }
  return acc;
}

double log_prior(const Prior& prior, double theta) {
  if (!prior.has_density()) return 0.0;
  if (theta < prior.lower() || theta > prior.upper()) return -std::numeric_limits<double>::infinity();
  return std::log(prior.density(theta));
}

bool accept_log(double log_ratio, Rng& rng) {
  if (log_ratio >= 0.0) return true;
  if (std::isnan(log_ratio)) return false;
  return std::log(rng.uniform()) < log_ratio;
}

SpacingsVector dirichlet(int n, Rng& rng) { return sample_spacings(n, rng); }

}  // namespace

// Gives the chains direct access to spacings storage without revalidation.
class SpacingsAccess {
 public:
  static SpacingsVector adopt(std::vector<double> w) {
    SpacingsVector sv;
    sv.w_ = std::move(w);
    return sv;
  }
};

Permutation compat_step(const Permutation& s, const IncompleteRanking& inc, Rng& rng,
                        CompatMove* used) {
  const auto& free = inc.free_positions();
  const auto& ranked = inc.indices();
  const std::size_t nf = free.size();
  const bool swap_ok = nf >= 2;
  const bool rearrange_ok = !ranked.empty() && nf >= 1;
  CompatMove move = CompatMove::none;
  if (swap_ok && rearrange_ok) {
    move = rng.coin() ? CompatMove::swap : CompatMove::swap_rearrange;
  } else if (swap_ok) {
    move = CompatMove::swap;
  } else if (rearrange_ok) {
    move = CompatMove::swap_rearrange;
  }
  if (used) *used = move;
  std::vector<int> v = s.values();
  if (move == CompatMove::swap) {
    const std::size_t a = rng.below(nf);
    std::size_t b = rng.below(nf - 1);
    if (b >= a) ++b;
    std::swap(v[static_cast<std::size_t>(free[a])], v[static_cast<std::size_t>(free[b])]);
  } else if (move == CompatMove::swap_rearrange) {
    const int l = ranked[rng.below(ranked.size())];
    const int j = free[rng.below(nf)];
    std::swap(v[static_cast<std::size_t>(l)], v[static_cast<std::size_t>(j)]);
    restore_pattern(v, inc);
  }
  return PermutationBuilder::adopt(std::move(v));
}

double log_joint_density(const ChainState& state, const CopulaModel& model, const Prior& prior) {
  const int n = state.S.size();
  if (state.W1.n() != n || state.W2.n() != n) {
    throw std::invalid_argument("joint density: spacings size does not match the permutation");
  }
  std::vector<double> us, vs;
  fill_scores(state.W1, model, us);
  fill_scores(state.W2, model, vs);
  return log_factorial(n) + log_prior(prior, state.theta) +
         log_product(state.S, state.theta, model, us, vs);
}

double joint_density(const ChainState& state, const CopulaModel& model, const Prior& prior) {
  return std::exp(log_joint_density(state, model, prior));
}

double log_permutation_ratio(const Permutation& s, const Permutation& s2,
                             std::span<const double> u_scores, std::span<const double> v_scores,
                             double theta, const CopulaModel& model) {
  double acc = 0.0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] == s2[i]) continue;
    const double x = u_scores[static_cast<std::size_t>(i)];
    acc += std::log(model.density_from_scores(x, v_scores[static_cast<std::size_t>(s2[i])], theta)) -
           std::log(model.density_from_scores(x, v_scores[static_cast<std::size_t>(s[i])], theta));
  }
  return acc;
}

// ---------------------------------------------------------------- annealing

void AnnealConfig::validate() const {
  if (K < 1) throw std::invalid_argument("anneal: K must be >= 1");
  if (iters < 1) throw std::invalid_argument("anneal: iters must be >= 1");
  if (!(scale >= 0.0)) throw std::invalid_argument("anneal: scale must be positive (0 = n!)");
}

double anneal_temperature(std::uint64_t t) {
  return 1.0 / std::log(static_cast<double>(t) + 1.0);
}

AnnealResult anneal(const IncompleteRanking& inc, const EnergyFn& energy, const AnnealConfig& cfg,
                    Rng& rng) {
  cfg.validate();
  const double scale = cfg.scale > 0.0 ? cfg.scale : factorial(inc.n());
  AnnealResult res;
  Permutation current = random_compatible(inc, rng);
  double e_current = energy(current, rng);
  res.best = current;
  res.best_energy = e_current;
  if (cfg.record_trace) res.trace.reserve(static_cast<std::size_t>(cfg.iters));
  for (std::uint64_t t = 1; t <= cfg.iters; ++t) {
    Permutation proposal = compat_step(current, inc, rng);
    const double e_prop = energy(proposal, rng);
    if (cfg.reestimate) e_current = energy(current, rng);
    const double diff = e_prop - e_current;
    bool take = diff >= 0.0;
    if (!take) {
      const double arg = scale * diff / anneal_temperature(t);
      take = std::log(rng.uniform()) < arg;
    }
    if (take) {
      current = std::move(proposal);
      e_current = e_prop;
      ++res.accepted;
    }
    if (e_current > res.best_energy) {
      res.best = current;
      res.best_energy = e_current;
    }
    if (cfg.record_trace) res.trace.push_back({t, current, e_current});
    if (!is_compatible(current, inc)) throw std::logic_error("anneal: left the compatible set");
  }
  return res;
}

EnergyFn mc_energy(const CopulaModel& model, const Prior& prior, std::uint64_t K) {
  return [model, prior, K](const Permutation& s, Rng& rng) {
    const int n = s.size();
    const double inv = 1.0 / factorial(n);
    std::vector<double> w(static_cast<std::size_t>(n) + 1), us(static_cast<std::size_t>(n)),
        vs(static_cast<std::size_t>(n));
    auto draw = [&](std::vector<double>& out) {
      double total = 0.0;
      for (double& x : w) {
        x = rng.exponential();
        total += x;
      }
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += w[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = model.score(acc / total);
      }
    };
    double sum = 0.0;
    for (std::uint64_t k = 0; k < K; ++k) {
      draw(us);
      draw(vs);
      double theta = prior.sample(rng);
      if (model.family() == CopulaFamily::gaussian) theta = std::clamp(theta, -1.0 + 1e-12, 1.0 - 1e-12);
      sum += spacings_product(s, theta, model, us, vs);
    }
    return inv * sum / static_cast<double>(K);
  };
}

EnergyFn mc_energy_common(int n, const CopulaModel& model, const Prior& prior, std::uint64_t K,
                          Rng& rng) {
  struct Bank {
    std::vector<double> us, vs, theta;
  };
  auto bank = std::make_shared<Bank>();
  const auto nn = static_cast<std::size_t>(n);
  bank->us.resize(nn * K);
  bank->vs.resize(nn * K);
  bank->theta.resize(K);
  std::vector<double> buf;
  for (std::uint64_t k = 0; k < K; ++k) {
    fill_scores(sample_spacings(n, rng), model, buf);
    std::copy(buf.begin(), buf.end(), bank->us.begin() + static_cast<std::ptrdiff_t>(k * nn));
    fill_scores(sample_spacings(n, rng), model, buf);
    std::copy(buf.begin(), buf.end(), bank->vs.begin() + static_cast<std::ptrdiff_t>(k * nn));
    double theta = prior.sample(rng);
    if (model.family() == CopulaFamily::gaussian) theta = std::clamp(theta, -1.0 + 1e-12, 1.0 - 1e-12);
    bank->theta[k] = theta;
  }
  const double inv = 1.0 / factorial(n);
  return [bank, model, K, nn, inv](const Permutation& s, Rng&) {
    if (static_cast<std::size_t>(s.size()) != nn) throw std::invalid_argument("energy: size mismatch");
    double sum = 0.0;
    for (std::uint64_t k = 0; k < K; ++k) {
      const std::span<const double> us(bank->us.data() + k * nn, nn);
      const std::span<const double> vs(bank->vs.data() + k * nn, nn);
      sum += spacings_product(s, bank->theta[k], model, us, vs);
    }
    return inv * sum / static_cast<double>(K);
  };
}

EnergyFn exact_energy(const Prior& prior, int cap) {
  auto cache = std::make_shared<std::unordered_map<int, MomentTable>>();
  return [prior, cap, cache](const Permutation& s, Rng&) {
    auto it = cache->find(s.size());
    if (it == cache->end()) it = cache->emplace(s.size(), prior.moments(s.size())).first;
    return exact_marginal(s, it->second, cap);
  };
}

AnnealResult anneal(const IncompleteRanking& inc, const CopulaModel& model, const Prior& prior,
                    const AnnealConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.common_random_numbers) {
    return anneal(inc, mc_energy_common(inc.n(), model, prior, cfg.K, rng), cfg, rng);
  }
  return anneal(inc, mc_energy(model, prior, cfg.K), cfg, rng);
}

// ------------------------------------------------------- simplex proposals

double simplex_delta(const SpacingsVector& w, const SpacingsVector& w0) {
  if (w.size() != w0.size()) throw std::invalid_argument("simplex_delta: size mismatch");
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i) d = std::min(d, w[i] / w0[i]);
  return d;
}

SpacingsVector instrumental_sample(const SpacingsVector& w0, const MixingDensity& g, Rng& rng) {
  const int n = w0.n();
  double lambda = 0.0;
  switch (g.kind) {
    case MixingKind::uniform: lambda = rng.uniform(); break;
    case MixingKind::beta_n1: lambda = std::pow(rng.uniform(), 1.0 / n); break;
    case MixingKind::fixed: lambda = g.lambda; break;
  }
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("instrumental_sample: lambda outside [0,1]");
  const SpacingsVector fresh = dirichlet(n, rng);
  std::vector<double> w(w0.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (1.0 - lambda) * w0[i] + lambda * fresh[i];
  return SpacingsAccess::adopt(std::move(w));
}

double log_instrumental_density(double delta, int n, const MixingDensity& g) {
  if (n < 1) throw std::invalid_argument("instrumental density: n must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("instrumental density: point on the boundary");
  if (delta >= 1.0) return std::numeric_limits<double>::infinity();
  const double log1m = std::log1p(-delta);  // log(1 - delta) < 0
  const double lf = log_factorial(n);
  switch (g.kind) {
    case MixingKind::uniform: {
      if (n == 1) return lf + std::log(-log1m);
      // [(1-delta)^-(n-1) - 1] / (n-1), with a = -(n-1) log(1-delta) > 0
      const double a = -(n - 1) * log1m;
      return lf + a + std::log(-std::expm1(-a)) - std::log(static_cast<double>(n - 1));
    }
    case MixingKind::beta_n1:
      return lf + std::log(static_cast<double>(n)) + std::log(-log1m);
    case MixingKind::fixed:
      break;
  }
  throw std::invalid_argument("instrumental density: a fixed mixing weight has no density");
}

double log_instrumental_density(const SpacingsVector& w, const SpacingsVector& w0,
                                const MixingDensity& g) {
  return log_instrumental_density(simplex_delta(w, w0), w0.n(), g);
}

double instrumental_density(const SpacingsVector& w, const SpacingsVector& w0, const MixingDensity& g) {
  return std::exp(log_instrumental_density(w, w0, g));
}

// ------------------------------------------------------------------ Gibbs

void OccupancyTable::add(const Permutation& s, std::uint64_t count) {
  counts[s] += count;
  total += count;
}

void OccupancyTable::merge(const OccupancyTable& other) {
  for (const auto& [s, c] : other.counts) counts[s] += c;
  total += other.total;
}

double OccupancyTable::frequency(const Permutation& s) const {
  if (total == 0) return 0.0;
  auto it = counts.find(s);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

std::vector<std::pair<Permutation, std::uint64_t>> OccupancyTable::sorted() const {
  std::vector<std::pair<Permutation, std::uint64_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

Permutation OccupancyTable::mode() const {
  if (counts.empty()) throw std::logic_error("occupancy table is empty");
  const Permutation* best = nullptr;
  std::uint64_t best_count = 0;
  for (const auto& [s, c] : counts) {
    if (!best || c > best_count || (c == best_count && tie_break_less(s, *best))) {
      best = &s;
      best_count = c;
    }
  }
  return *best;
}

void GibbsConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("gibbs: steps must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("gibbs: epsilon must be positive");
  if (variant == SimplexMove::mhrw && g.kind == MixingKind::fixed) {
    throw std::invalid_argument("gibbs: MHRW needs a mixing density, not a fixed weight");
  }
}

GibbsResult gibbs_run(const IncompleteRanking& inc, const CopulaModel& model, const Prior& prior,
                      const GibbsConfig& cfg, Rng& rng, const CheckpointFn& checkpoint) {
  cfg.validate();
  const int n = inc.n();
  GibbsResult res;
  if (cfg.record_theta) res.theta_trace.reserve(static_cast<std::size_t>(cfg.steps));

  Permutation S = random_compatible(inc, rng);
  SpacingsVector W1 = dirichlet(n, rng);
  SpacingsVector W2 = dirichlet(n, rng);
  double theta = prior.sample(rng);
  if (model.family() == CopulaFamily::gaussian) theta = std::clamp(theta, -1.0 + 1e-9, 1.0 - 1e-9);
  std::vector<double> us, vs, us_new, vs_new;
  fill_scores(W1, model, us);
  fill_scores(W2, model, vs);
  double log_lik = log_product(S, theta, model, us, vs);
  double log_pi = log_prior(prior, theta);
  const bool theta_moves = prior.has_density();

  for (std::uint64_t t = 1; t <= cfg.steps; ++t) {
    const std::size_t move = rng.below(3);
    ++res.proposed[move];
    if (move == 0) {
      Permutation S2 = compat_step(S, inc, rng);
      const double lr = log_permutation_ratio(S, S2, us, vs, theta, model);
      if (accept_log(lr, rng)) {
        S = std::move(S2);
        log_lik += lr;
        ++res.accepted[0];
      }
    } else if (move == 1) {
      if (cfg.variant == SimplexMove::mhi) {
        SpacingsVector W1n = dirichlet(n, rng);
        SpacingsVector W2n = dirichlet(n, rng);
        fill_scores(W1n, model, us_new);
        fill_scores(W2n, model, vs_new);
        const double ll = log_product(S, theta, model, us_new, vs_new);
        if (accept_log(ll - log_lik, rng)) {
          W1 = std::move(W1n);
          W2 = std::move(W2n);
          us.swap(us_new);
          vs.swap(vs_new);
          log_lik = ll;
          ++res.accepted[1];
        }
      } else {
        const bool first = rng.coin();
        SpacingsVector& W = first ? W1 : W2;
        SpacingsVector Wn = instrumental_sample(W, cfg.g, rng);
        const double q_back = log_instrumental_density(W, Wn, cfg.g);
        const double q_fwd = log_instrumental_density(Wn, W, cfg.g);
        double ll;
        if (first) {
          fill_scores(Wn, model, us_new);
          ll = log_product(S, theta, model, us_new, vs);
        } else {
          fill_scores(Wn, model, vs_new);
          ll = log_product(S, theta, model, us, vs_new);
        }
        if (accept_log(ll - log_lik + q_back - q_fwd, rng)) {
          W = std::move(Wn);
          if (first) us.swap(us_new);
          else vs.swap(vs_new);
          log_lik = ll;
          ++res.accepted[1];
        }
      }
    } else if (theta_moves) {
      const double lo = std::max(-1.0, theta - cfg.epsilon);
      const double hi = std::min(1.0, theta + cfg.epsilon);
      const double th2 = rng.uniform(lo, hi);
      if (model.in_domain(th2)) {
        const double lo2 = std::max(-1.0, th2 - cfg.epsilon);
        const double hi2 = std::min(1.0, th2 + cfg.epsilon);
        // q(theta | theta') / q(theta' | theta) = width(theta) / width(theta')
        const double lq = std::log(hi - lo) - std::log(hi2 - lo2);
        const double lp2 = log_prior(prior, th2);
        const double ll = log_product(S, th2, model, us, vs);
        if (accept_log(ll + lp2 - log_lik - log_pi + lq, rng)) {
          theta = th2;
          log_lik = ll;
          log_pi = lp2;
          ++res.accepted[2];
        }
      }
    }
    if (!is_compatible(S, inc)) throw std::logic_error("gibbs: left the compatible set");
    res.occupancy.add(S);
    if (cfg.record_theta) res.theta_trace.push_back(theta);
    if (cfg.trace_every > 0 && t % cfg.trace_every == 0) res.trace.push_back({t, S, theta});
    if (checkpoint && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0) {
      checkpoint(t, res.occupancy);
    }
  }
  return res;
}

GibbsResult gibbs_run_chains(const IncompleteRanking& inc, const CopulaModel& model,
                             const Prior& prior, const GibbsConfig& cfg, std::uint64_t seed,
                             int chains, int threads) {
  if (chains < 1) throw std::invalid_argument("gibbs: chains must be >= 1");
  cfg.validate();
  std::vector<GibbsResult> parts(static_cast<std::size_t>(chains));
#ifdef _OPENMP
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
#else
  (void)threads;
#endif
  for (int c = 0; c < chains; ++c) {
    Rng rng(seed, static_cast<std::uint64_t>(c));
    parts[static_cast<std::size_t>(c)] = gibbs_run(inc, model, prior, cfg, rng);
  }
  GibbsResult out;
  for (auto& p : parts) {
    out.occupancy.merge(p.occupancy);
    out.theta_trace.insert(out.theta_trace.end(), p.theta_trace.begin(), p.theta_trace.end());
    out.trace.insert(out.trace.end(), p.trace.begin(), p.trace.end());
    for (int k = 0; k < 3; ++k) {
      out.proposed[static_cast<std::size_t>(k)] += p.proposed[static_cast<std::size_t>(k)];
      out.accepted[static_cast<std::size_t>(k)] += p.accepted[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

double tv_empirical(const OccupancyTable& occupancy, const ExactPredictive& exact) {
  double acc = 0.0;
  double covered = 0.0;
  for (std::size_t i = 0; i < exact.support.size(); ++i) {
    const double f = occupancy.frequency(exact.support[i]);
    covered += f;
    acc += std::abs(f - exact.probabilities[i]);
  }
  // Mass outside the exact support (none for a correct chain).
  acc += std::max(0.0, 1.0 - covered) * (occupancy.total > 0 ? 1.0 : 0.0);
  return 0.5 * acc;
}

}  // namespace rankcop
