#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rankcop/chains.hpp"
#include "rankcop/copula.hpp"
#include "rankcop/fgm_exact.hpp"
#include "rankcop/perm.hpp"
#include "rankcop/prior.hpp"
#include "rankcop/rng.hpp"

namespace rankcop {

using Id = std::int64_t;

struct RatingsMatrix {
  std::vector<Id> users;  // sorted, unique
  std::vector<Id> items;  // sorted, unique
  std::map<std::pair<Id, Id>, double> ratings;

  /// Adds (or overwrites) one rating and registers the ids.
  void add(Id user, Id item, double rating);
  std::size_t size() const noexcept { return ratings.size(); }
  bool has(Id user, Id item) const { return ratings.count({user, item}) != 0; }
  double rating(Id user, Id item) const;
  /// (item, rating) pairs of one user, by item id.
  std::vector<std::pair<Id, double>> user_ratings(Id user) const;
};

/// Thrown for unreadable or malformed input; `lines` lists offending line numbers.
class RatingsFormatError : public std::runtime_error {
 public:
  RatingsFormatError(const std::string& what, std::vector<std::size_t> lines)
      : std::runtime_error(what), lines_(std::move(lines)) {}
  const std::vector<std::size_t>& lines() const noexcept { return lines_; }

 private:
  std::vector<std::size_t> lines_;
};

/// MovieLens u.data (user \t item \t rating \t timestamp) or CSV user,item,rating.
/// Blank lines and lines starting with '#' are skipped; a CSV header line
/// "user,item,rating" is accepted.
RatingsMatrix ingest_ratings(const std::string& path);
RatingsMatrix parse_ratings(std::istream& in, std::string_view source = "<stream>");

struct ExpertOrder {
  std::vector<Id> items;       // best first
  std::vector<double> means;   // same order

  std::size_t size() const noexcept { return items.size(); }
  /// Position of an item in the order; throws if absent.
  int position(Id item) const;
};

/// Sorts `items` by descending mean rating over all users, ties by ascending id.
ExpertOrder derive_expert(const RatingsMatrix& ratings, std::span<const Id> items);
ExpertOrder derive_expert(const RatingsMatrix& ratings);

/// A user's rated items in expert coordinates.
struct UserObservation {
  Id user = 0;
  /// Expert positions (0-based, increasing) of the items the user rated.
  std::vector<int> positions;
  /// ranking[k] = user's rank (0 = best) of the item at positions[k]; rating
  /// ties go to the item ranked higher by the expert.
  Permutation ranking;
};

UserObservation user_ranking(const RatingsMatrix& ratings, Id user, const ExpertOrder& expert);

struct HoldoutSplit {
  /// Kept part in the user's own coordinates (n = number of rated items).
  IncompleteRanking kept;
  /// The user's full ranking, for scoring.
  Permutation truth;
};

/// m = max(1, round(p * n)), at most n - 1.
int holdout_size(double proportion, int n);
HoldoutSplit holdout_split(const Permutation& truth, double proportion, Rng& rng);
HoldoutSplit holdout_split(const Permutation& truth, double proportion, std::uint64_t seed);

// ---------------------------------------------------------------- engines

enum class Engine { automatic, exact, anneal, gibbs_mode };

Engine parse_engine(std::string_view tag);
std::string engine_tag(Engine e);

struct EngineConfig {
  Engine engine = Engine::automatic;
  AnnealConfig anneal{};
  GibbsConfig gibbs{};
  ExactOptions exact{};
  /// Largest n!/m! for which `automatic` picks the exact engine.
  std::uint64_t exact_limit = 1000000;
};

/// The engine actually used for this instance.
Engine resolve_engine(const IncompleteRanking& kept, const CopulaModel& model, const EngineConfig& cfg);

/// Full predicted ranking of all n objects in the kept ranking's coordinates.
/// Throws std::invalid_argument when the engine cannot handle the instance.
Permutation predict_user(const IncompleteRanking& kept, const EngineConfig& cfg,
                         const CopulaModel& model, const Prior& prior, Rng& rng);
/// Same from explicit parts; rejects m == n (nothing to predict).
Permutation predict_user(int n, std::span<const int> kept_positions, const Permutation& kept_ranking,
                         const EngineConfig& cfg, const CopulaModel& model, const Prior& prior,
                         Rng& rng);

// ------------------------------------------------------------- evaluation

struct UserTruth {
  Id user = 0;
  Permutation truth;
};

/// Users with at least two rated items, in id order, ranked against `expert`.
std::vector<UserTruth> user_truths(const RatingsMatrix& ratings, const ExpertOrder& expert);

struct EvalCase {
  Id user = 0;
  HoldoutSplit split;
};

/// Receives the split (including the truth, so oracle stubs can be written)
/// and a per-case RNG.
using Predictor = std::function<Permutation(const EvalCase&, Rng&)>;

struct EvalConfig {
  std::vector<double> proportions{0.25};
  int repetitions = 1;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct EvalReport {
  std::vector<double> proportions;
  int repetitions = 0;
  std::vector<Id> users;
  /// distances[p][k][u]
  std::vector<std::vector<std::vector<std::int64_t>>> distances;
  /// d[p][k]: mean over users.
  std::vector<std::vector<double>> d;
  /// dbar[p]: mean over repetitions of d[p][k].
  std::vector<double> dbar;
};

/// Deterministic given (seed, config): case (p, k, u) uses its own stream.
EvalReport evaluate(std::span<const UserTruth> users, const EvalConfig& cfg, const Predictor& predictor);
EvalReport evaluate(const RatingsMatrix& ratings, const EvalConfig& cfg, const EngineConfig& engine,
                    const CopulaModel& model, const Prior& prior);

/// BBR predictor over an engine configuration.
Predictor engine_predictor(const EngineConfig& engine, const CopulaModel& model, const Prior& prior);
/// Uniform compatible ranking (baseline).
Predictor random_compatible_predictor();

// ------------------------------------------------------------------ top n'

enum class TopRule { mean_position, top_count };

struct TopNPrimeResult {
  /// Selected positions (0-based, increasing) in the original coordinates.
  std::vector<int> selected;
  /// Kept ranking restricted to the selected positions; m' may be 0.
  Permutation reduced_kept_ranking;
  std::vector<int> reduced_kept_positions;
  /// Ranking of the n' selected objects among themselves.
  Permutation prediction;
};

/// Picks n' objects from a first-stage occupancy table and predicts their
/// relative order on the reduced instance.
TopNPrimeResult top_nprime(const IncompleteRanking& kept, const OccupancyTable& stage1, int nprime,
                           TopRule rule, const EngineConfig& cfg, const CopulaModel& model,
                           const Prior& prior, Rng& rng);
/// Runs the first-stage Gibbs chain with cfg.gibbs.
TopNPrimeResult top_nprime(const IncompleteRanking& kept, int nprime, TopRule rule,
                           const EngineConfig& cfg, const CopulaModel& model, const Prior& prior,
                           Rng& rng);

/// Object positions ordered by the selection rule (best first).
std::vector<int> rank_by_occupancy(const OccupancyTable& stage1, int n, int nprime, TopRule rule);

// --------------------------------------------------------------- fit prior

struct PriorFit {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t users = 0;
  double mean_rho = 0.0;
  double var_rho = 0.0;
};

/// Kendall tau of each user against the expert, rho = sin(tau pi / 2), then a
/// Beta(alpha, beta) for (rho + 1) / 2 matching mean and variance.
PriorFit fit_prior(const RatingsMatrix& ratings, const ExpertOrder& expert);
PriorFit fit_prior_from_rhos(std::span<const double> rhos);

/// 1 - 4 d / (n (n - 1)) between the user's ranking and the expert order.
double kendall_tau(const Permutation& s);

// --------------------------------------------------------------- synthetic

/// Rank alignment s = r_y o r_x^{-1} of n pairs drawn from the copula.
Permutation synthetic_alignment(int n, const CopulaModel& model, double theta, Rng& rng);

std::vector<UserTruth> synthetic_users(int users, int n, const CopulaModel& model, double theta,
                                       std::uint64_t seed);

}  // namespace rankcop
