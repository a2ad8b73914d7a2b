#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rankcop/copula.hpp"
#include "rankcop/fgm_exact.hpp"
#include "rankcop/montecarlo.hpp"
#include "rankcop/perm.hpp"
#include "rankcop/prior.hpp"
#include "rankcop/rng.hpp"

namespace rankcop {

enum class CompatMove { swap, swap_rearrange, none };

/// One step of the uniform chain on the compatible set. Picks the swap move or
/// the swap-and-rearrange move with probability 1/2 each; when fewer than two
/// positions are free only the second is available, and with nothing observed
/// (m = 0) only the first. `used` reports the move taken.
Permutation compat_step(const Permutation& s, const IncompleteRanking& inc, Rng& rng,
                        CompatMove* used = nullptr);

struct ChainState {
  Permutation S;
  SpacingsVector W1;
  SpacingsVector W2;
  double theta = 0.0;
};

/// n! pi(theta) prod_i c_theta(prefix_W1(i), prefix_W2(S(i))).
double joint_density(const ChainState& state, const CopulaModel& model, const Prior& prior);
double log_joint_density(const ChainState& state, const CopulaModel& model, const Prior& prior);

/// log f(s2, ...) - log f(s, ...) summed over the positions where s and s2 differ.
double log_permutation_ratio(const Permutation& s, const Permutation& s2,
                             std::span<const double> u_scores, std::span<const double> v_scores,
                             double theta, const CopulaModel& model);

// ---------------------------------------------------------------- annealing

/// Energy of a candidate: an estimate of P(S = s) (unnormalized over the
/// compatible set). May consume randomness.
using EnergyFn = std::function<double(const Permutation&, Rng&)>;

struct AnnealConfig {
  std::uint64_t K = 100;
  std::uint64_t iters = 100000;
  /// Multiplies energy differences; 0 means n!.
  double scale = 0.0;
  /// Re-estimate the incumbent on every iteration instead of keeping its estimate.
  bool reestimate = false;
  /// Draw one bank of K (spacings, theta) samples up front and reuse it for
  /// every energy evaluation.
  bool common_random_numbers = false;
  /// Keep every visited state in the trace (otherwise only the result).
  bool record_trace = true;

  void validate() const;
};

struct AnnealStep {
  std::uint64_t iter = 0;
  Permutation state;
  double energy = 0.0;
};

struct AnnealResult {
  Permutation best;
  double best_energy = 0.0;
  std::uint64_t accepted = 0;
  std::vector<AnnealStep> trace;
};

/// T_t = 1 / log(t + 1), t >= 1.
double anneal_temperature(std::uint64_t t);

AnnealResult anneal(const IncompleteRanking& inc, const EnergyFn& energy, const AnnealConfig& cfg,
                    Rng& rng);
/// Monte Carlo energy with K draws per evaluation.
AnnealResult anneal(const IncompleteRanking& inc, const CopulaModel& model, const Prior& prior,
                    const AnnealConfig& cfg, Rng& rng);

EnergyFn mc_energy(const CopulaModel& model, const Prior& prior, std::uint64_t K);
/// Reuses a fixed bank of K draws taken from `rng` now.
EnergyFn mc_energy_common(int n, const CopulaModel& model, const Prior& prior, std::uint64_t K,
                          Rng& rng);
/// Exact FGM marginal (no noise).
EnergyFn exact_energy(const Prior& prior, int cap = kDefaultExactCap);

// ------------------------------------------------------- simplex proposals

enum class MixingKind { uniform, beta_n1, fixed };

/// Density g of the mixing weight Lambda on (0, 1).
struct MixingDensity {
  MixingKind kind = MixingKind::uniform;
  /// Used by MixingKind::fixed only.
  double lambda = 0.5;
};

/// min_i w_i / w0_i over all n+1 coordinates.
double simplex_delta(const SpacingsVector& w, const SpacingsVector& w0);

/// W = (1 - Lambda) w0 + Lambda W', W' ~ Dirichlet(1, ..., 1), Lambda ~ g.
SpacingsVector instrumental_sample(const SpacingsVector& w0, const MixingDensity& g, Rng& rng);

/// n! int_{1-delta}^1 lambda^-n g(lambda) dlambda. +infinity when delta = 1.
/// Throws for MixingKind::fixed (no density).
double instrumental_density(const SpacingsVector& w, const SpacingsVector& w0, const MixingDensity& g);
double log_instrumental_density(const SpacingsVector& w, const SpacingsVector& w0,
                                const MixingDensity& g);
/// Same as a function of delta and n.
double log_instrumental_density(double delta, int n, const MixingDensity& g);

// ------------------------------------------------------------------ Gibbs

enum class SimplexMove { mhi, mhrw };

struct OccupancyTable {
  std::unordered_map<Permutation, std::uint64_t, PermutationHash> counts;
  std::uint64_t total = 0;

  void add(const Permutation& s, std::uint64_t count = 1);
  void merge(const OccupancyTable& other);
  double frequency(const Permutation& s) const;
  /// Entries sorted lexicographically by permutation.
  std::vector<std::pair<Permutation, std::uint64_t>> sorted() const;
  /// Most visited permutation; ties resolved by tie_break_less.
  Permutation mode() const;
};

struct GibbsConfig {
  SimplexMove variant = SimplexMove::mhi;
  std::uint64_t steps = 1000000;
  double epsilon = 0.1;
  MixingDensity g{};
  /// Checkpoint callback period in steps (0 = never).
  std::uint64_t checkpoint_every = 0;
  bool record_theta = true;
  /// Keep (step, S, theta) every this many steps (0 = never).
  std::uint64_t trace_every = 0;

  void validate() const;
};

struct GibbsStep {
  std::uint64_t iter = 0;
  Permutation state;
  double theta = 0.0;
};

struct GibbsResult {
  OccupancyTable occupancy;
  std::vector<double> theta_trace;
  std::vector<GibbsStep> trace;
  /// Indexed by move: 0 permutation, 1 simplex, 2 parameter.
  std::array<std::uint64_t, 3> proposed{};
  std::array<std::uint64_t, 3> accepted{};
};

using CheckpointFn = std::function<void(std::uint64_t step, const OccupancyTable&)>;

/// Metropolis-within-Gibbs over (S, W1, W2, theta). The prior must have a
/// density, or be a point mass (theta then stays fixed).
GibbsResult gibbs_run(const IncompleteRanking& inc, const CopulaModel& model, const Prior& prior,
                      const GibbsConfig& cfg, Rng& rng, const CheckpointFn& checkpoint = {});

/// Independent chains c = 0..chains-1 on streams (seed, c), run in parallel and
/// merged in chain order. Checkpoints are not reported.
GibbsResult gibbs_run_chains(const IncompleteRanking& inc, const CopulaModel& model,
                             const Prior& prior, const GibbsConfig& cfg, std::uint64_t seed,
                             int chains, int threads = 0);

/// Half the L1 distance between visit frequencies and the exact predictive.
double tv_empirical(const OccupancyTable& occupancy, const ExactPredictive& exact);

}  // namespace rankcop
