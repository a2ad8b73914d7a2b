#include "rankcop/recommender.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rankcop {

// ---------------------------------------------------------------- ratings

void RatingsMatrix::add(Id user, Id item, double rating) {
  ratings[{user, item}] = rating;
  auto insert_sorted = [](std::vector<Id>& v, Id x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  };
  insert_sorted(users, user);
  insert_sorted(items, item);
}

double RatingsMatrix::rating(Id user, Id item) const {
  auto it = ratings.find({user, item});
  if (it == ratings.end()) {
    throw std::out_of_range("no rating for user " + std::to_string(user) + ", item " + std::to_string(item));
  }
  return it->second;
}

std::vector<std::pair<Id, double>> RatingsMatrix::user_ratings(Id user) const {
  std::vector<std::pair<Id, double>> out;
  for (auto it = ratings.lower_bound({user, std::numeric_limits<Id>::min()});
       it != ratings.end() && it->first.first == user; ++it) {
    out.emplace_back(it->first.second, it->second);
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

RatingsMatrix parse_ratings(std::istream& in, std::string_view source) {
  RatingsMatrix m;
  std::vector<std::size_t> bad;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = trim(line);
    if (v.empty() || v.front() == '#') continue;
    const bool tabbed = v.find('\t') != std::string_view::npos;
    const auto fields = split(v, tabbed ? '\t' : ',');
    if (!tabbed && lineno == 1 && fields.size() == 3 && fields[0] == "user") continue;
    Id user = 0, item = 0;
    double rating = 0.0;
    const std::size_t want = tabbed ? 4 : 3;
    if (fields.size() != want || !parse_number(fields[0], user) || !parse_number(fields[1], item) ||
        !parse_number(fields[2], rating) || !std::isfinite(rating)) {
      bad.push_back(lineno);
      continue;
    }
    if (tabbed) {
      std::int64_t ts = 0;
      if (!parse_number(fields[3], ts)) {
        bad.push_back(lineno);
        continue;
      }
    }
    m.add(user, item, rating);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << source << ": " << bad.size() << " malformed line" << (bad.size() == 1 ? "" : "s") << " (line";
    if (bad.size() > 1) msg << "s";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 10); ++i) msg << (i ? ", " : " ") << bad[i];
    if (bad.size() > 10) msg << ", ...";
    msg << ")";
    throw RatingsFormatError(msg.str(), std::move(bad));
  }
  return m;
}

RatingsMatrix ingest_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RatingsFormatError("cannot read ratings file: " + path, {});
  return parse_ratings(in, path);
}

// ----------------------------------------------------------------- expert

int ExpertOrder::position(Id item) const {
  auto it = std::find(items.begin(), items.end(), item);
  if (it == items.end()) throw std::out_of_range("item " + std::to_string(item) + " not in expert order");
  return static_cast<int>(it - items.begin());
}

ExpertOrder derive_expert(const RatingsMatrix& ratings, std::span<const Id> items) {
  std::map<Id, std::pair<double, std::size_t>> acc;
  for (Id i : items) acc[i] = {0.0, 0};
  for (const auto& [key, r] : ratings.ratings) {
    auto it = acc.find(key.second);
    if (it != acc.end()) {
      it->second.first += r;
      ++it->second.second;
    }
  }
  std::vector<std::pair<Id, double>> means;
  for (const auto& [item, sc] : acc) {
    if (sc.second == 0) throw std::invalid_argument("item " + std::to_string(item) + " has no ratings");
    means.emplace_back(item, sc.first / static_cast<double>(sc.second));
  }
  std::stable_sort(means.begin(), means.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  ExpertOrder out;
  for (const auto& [item, mean] : means) {
    out.items.push_back(item);
    out.means.push_back(mean);
  }
  return out;
}

ExpertOrder derive_expert(const RatingsMatrix& ratings) { return derive_expert(ratings, ratings.items); }

UserObservation user_ranking(const RatingsMatrix& ratings, Id user, const ExpertOrder& expert) {
  std::map<Id, int> pos_of;
  for (std::size_t p = 0; p < expert.items.size(); ++p) pos_of[expert.items[p]] = static_cast<int>(p);
  std::vector<std::pair<int, double>> rated;  // (expert position, rating)
  for (const auto& [item, r] : ratings.user_ratings(user)) {
    auto it = pos_of.find(item);
    if (it != pos_of.end()) rated.emplace_back(it->second, r);
  }
  if (rated.empty()) throw std::invalid_argument("user " + std::to_string(user) + " has no ratings");
  std::sort(rated.begin(), rated.end());
  const std::size_t k = rated.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rated[a].second > rated[b].second;  // equal ratings keep expert order
  });
  std::vector<int> rank(k);
  for (std::size_t r = 0; r < k; ++r) rank[order[r]] = static_cast<int>(r);
  UserObservation obs;
  obs.user = user;
  for (const auto& pr : rated) obs.positions.push_back(pr.first);
  obs.ranking = Permutation(std::move(rank));
  return obs;
}

// ---------------------------------------------------------------- holdout

int holdout_size(double proportion, int n) {
  if (!(proportion > 0.0 && proportion < 1.0)) {
    throw std::invalid_argument("holdout: proportion must be in (0, 1)");
  }
  if (n < 2) throw std::invalid_argument("holdout: need at least 2 rated items");
  const long m = std::max(1L, std::lround(proportion * n));
  return static_cast<int>(std::min<long>(m, n - 1));
}

HoldoutSplit holdout_split(const Permutation& truth, double proportion, Rng& rng) {
  const int n = truth.size();
  const int m = holdout_size(proportion, n);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::size_t>(n - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  Permutation sub = induced_subranking(truth, idx);
  return {IncompleteRanking(std::move(sub), std::move(idx), n), truth};
}

HoldoutSplit holdout_split(const Permutation& truth, double proportion, std::uint64_t seed) {
  Rng rng(seed, 0);
  return holdout_split(truth, proportion, rng);
}

// ---------------------------------------------------------------- engines

Engine parse_engine(std::string_view tag) {
  if (tag == "auto" || tag == "automatic") return Engine::automatic;
  if (tag == "exact") return Engine::exact;
  if (tag == "anneal") return Engine::anneal;
  if (tag == "gibbs-mode" || tag == "gibbs") return Engine::gibbs_mode;
  throw std::invalid_argument("unknown engine '" + std::string(tag) + "' (auto, exact, anneal, gibbs-mode)");
}

std::string engine_tag(Engine e) {
  switch (e) {
    case Engine::automatic: return "auto";
    case Engine::exact: return "exact";
    case Engine::anneal: return "anneal";
    case Engine::gibbs_mode: return "gibbs-mode";
  }
  return "?";
}

Engine resolve_engine(const IncompleteRanking& kept, const CopulaModel& model, const EngineConfig& cfg) {
  if (cfg.engine != Engine::automatic) return cfg.engine;
  const bool exact_ok = model.family() == CopulaFamily::fgm && kept.n() <= cfg.exact.cap &&
                        compatible_count(kept) <= cfg.exact_limit;
  return exact_ok ? Engine::exact : Engine::anneal;
}

Permutation predict_user(const IncompleteRanking& kept, const EngineConfig& cfg,
                         const CopulaModel& model, const Prior& prior, Rng& rng) {
  switch (resolve_engine(kept, model, cfg)) {
    case Engine::exact: {
      if (model.family() != CopulaFamily::fgm) {
        throw std::invalid_argument("exact engine requires the FGM copula");
      }
      if (kept.n() > cfg.exact.cap) {
        throw std::invalid_argument("exact engine: n = " + std::to_string(kept.n()) +
                                    " exceeds the cap of " + std::to_string(cfg.exact.cap));
      }
      ExactOptions opts = cfg.exact;
      opts.parallel = opts.parallel && !omp_in_parallel();
      return exact_predictive(kept, prior, opts).mode();
    }
    case Engine::anneal:
      return anneal(kept, model, prior, cfg.anneal, rng).best;
    case Engine::gibbs_mode: {
      GibbsConfig g = cfg.gibbs;
      g.record_theta = false;
      return gibbs_run(kept, model, prior, g, rng).occupancy.mode();
    }
    case Engine::automatic: break;
  }
  throw std::logic_error("unresolved engine");
}

Permutation predict_user(int n, std::span<const int> kept_positions, const Permutation& kept_ranking,
                         const EngineConfig& cfg, const CopulaModel& model, const Prior& prior,
                         Rng& rng) {
  if (static_cast<int>(kept_positions.size()) >= n) {
    throw std::invalid_argument("predict: all " + std::to_string(n) +
                                " objects are already ranked, nothing to predict");
  }
  IncompleteRanking kept(kept_ranking, std::vector<int>(kept_positions.begin(), kept_positions.end()), n);
  return predict_user(kept, cfg, model, prior, rng);
}

// ------------------------------------------------------------- evaluation

std::vector<UserTruth> user_truths(const RatingsMatrix& ratings, const ExpertOrder& expert) {
  std::vector<UserTruth> out;
  for (Id u : ratings.users) {
    if (ratings.user_ratings(u).size() < 2) continue;
    UserObservation obs = user_ranking(ratings, u, expert);
    if (obs.positions.size() < 2) continue;
    out.push_back({u, std::move(obs.ranking)});
  }
  return out;
}

EvalReport evaluate(std::span<const UserTruth> users, const EvalConfig& cfg, const Predictor& predictor) {
  if (cfg.repetitions < 1) throw std::invalid_argument("evaluate: repetitions must be >= 1");
  if (cfg.proportions.empty()) throw std::invalid_argument("evaluate: no proportions");
  if (users.empty()) throw std::invalid_argument("evaluate: no users with at least 2 rated items");
  for (double p : cfg.proportions) holdout_size(p, 2);
  const std::size_t P = cfg.proportions.size();
  const auto R = static_cast<std::size_t>(cfg.repetitions);
  const std::size_t U = users.size();

  EvalReport rep;
  rep.proportions = cfg.proportions;
  rep.repetitions = cfg.repetitions;
  for (const auto& u : users) rep.users.push_back(u.user);
  rep.distances.assign(P, std::vector<std::vector<std::int64_t>>(R, std::vector<std::int64_t>(U, 0)));

  const auto total = static_cast<std::int64_t>(P * R * U);
  std::exception_ptr failure;
#ifdef _OPENMP
  const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (std::int64_t flat = 0; flat < total; ++flat) {
    const auto f = static_cast<std::size_t>(flat);
    const std::size_t u = f % U;
    const std::size_t k = (f / U) % R;
    const std::size_t p = f / (U * R);
    try {
      Rng rng(stream_seed(cfg.seed, p * R + k), u);
      EvalCase c{users[u].user, holdout_split(users[u].truth, cfg.proportions[p], rng)};
      const Permutation pred = predictor(c, rng);
      if (pred.size() != c.split.truth.size()) throw std::logic_error("predictor returned a ranking of the wrong size");
      rep.distances[p][k][u] = kendall_distance(pred, c.split.truth);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(rankcop_eval_failure)
#endif
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  rep.d.assign(P, std::vector<double>(R, 0.0));
  rep.dbar.assign(P, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t k = 0; k < R; ++k) {
      double s = 0.0;
      for (std::int64_t x : rep.distances[p][k]) s += static_cast<double>(x);
      rep.d[p][k] = s / static_cast<double>(U);
      rep.dbar[p] += rep.d[p][k];
    }
    rep.dbar[p] /= static_cast<double>(R);
  }
  return rep;
}

Predictor engine_predictor(const EngineConfig& engine, const CopulaModel& model, const Prior& prior) {
  return [engine, model, prior](const EvalCase& c, Rng& rng) {
    return predict_user(c.split.kept, engine, model, prior, rng);
  };
}

Predictor random_compatible_predictor() {
  return [](const EvalCase& c, Rng& rng) { return random_compatible(c.split.kept, rng); };
}

EvalReport evaluate(const RatingsMatrix& ratings, const EvalConfig& cfg, const EngineConfig& engine,
                    const CopulaModel& model, const Prior& prior) {
  const auto truths = user_truths(ratings, derive_expert(ratings));
  return evaluate(truths, cfg, engine_predictor(engine, model, prior));
}

// ------------------------------------------------------------------ top n'

std::vector<int> rank_by_occupancy(const OccupancyTable& stage1, int n, int nprime, TopRule rule) {
  if (stage1.total == 0) throw std::invalid_argument("top-n': empty first-stage occupancy");
  std::vector<double> score(static_cast<std::size_t>(n), 0.0);
  for (const auto& [s, c] : stage1.counts) {
    if (s.size() != n) throw std::invalid_argument("top-n': occupancy size mismatch");
    for (int i = 0; i < n; ++i) {
      if (rule == TopRule::mean_position) {
        score[static_cast<std::size_t>(i)] += static_cast<double>(c) * s[i];
      } else if (s[i] < nprime) {
        // more appearances in the top n' = better; store negated
        score[static_cast<std::size_t>(i)] -= static_cast<double>(c);
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] < score[static_cast<std::size_t>(b)];
  });
  return order;
}

TopNPrimeResult top_nprime(const IncompleteRanking& kept, const OccupancyTable& stage1, int nprime,
                           TopRule rule, const EngineConfig& cfg, const CopulaModel& model,
                           const Prior& prior, Rng& rng) {
  const int n = kept.n();
  if (nprime < 1 || nprime >= n) throw std::invalid_argument("top-n': need 1 <= n' < n");
  const auto order = rank_by_occupancy(stage1, n, nprime, rule);
  TopNPrimeResult res;
  res.selected.assign(order.begin(), order.begin() + nprime);
  std::sort(res.selected.begin(), res.selected.end());

  std::vector<int> surviving;  // indices into kept.indices()
  for (std::size_t k = 0; k < kept.indices().size(); ++k) {
    auto it = std::lower_bound(res.selected.begin(), res.selected.end(), kept.indices()[k]);
    if (it != res.selected.end() && *it == kept.indices()[k]) {
      surviving.push_back(static_cast<int>(k));
      res.reduced_kept_positions.push_back(static_cast<int>(it - res.selected.begin()));
    }
  }
  res.reduced_kept_ranking = surviving.empty() ? Permutation{} : induced_subranking(kept.sub_perm(), surviving);
  if (static_cast<int>(surviving.size()) == nprime) {
    // every selected object is already ranked by the user
    res.prediction = res.reduced_kept_ranking;
    return res;
  }
  IncompleteRanking reduced(res.reduced_kept_ranking, res.reduced_kept_positions, nprime);
  res.prediction = predict_user(reduced, cfg, model, prior, rng);
  return res;
}

TopNPrimeResult top_nprime(const IncompleteRanking& kept, int nprime, TopRule rule,
                           const EngineConfig& cfg, const CopulaModel& model, const Prior& prior,
                           Rng& rng) {
  GibbsConfig g = cfg.gibbs;
  g.record_theta = false;
  const GibbsResult stage1 = gibbs_run(kept, model, prior, g, rng);
  return top_nprime(kept, stage1.occupancy, nprime, rule, cfg, model, prior, rng);
}

// --------------------------------------------------------------- fit prior

double kendall_tau(const Permutation& s) {
  const int n = s.size();
  if (n < 2) throw std::invalid_argument("kendall_tau: need n >= 2");
  const double d = static_cast<double>(kendall_distance(s, Permutation::identity(n)));
  return 1.0 - 4.0 * d / (static_cast<double>(n) * (n - 1));
}

PriorFit fit_prior_from_rhos(std::span<const double> rhos) {
  if (rhos.size() < 2) throw std::invalid_argument("fit-prior: need at least 2 users");
  double mean = 0.0;
  for (double r : rhos) mean += (r + 1.0) / 2.0;
  mean /= static_cast<double>(rhos.size());
  double var = 0.0;
  for (double r : rhos) var += ((r + 1.0) / 2.0 - mean) * ((r + 1.0) / 2.0 - mean);
  var /= static_cast<double>(rhos.size() - 1);
  if (!(var > 0.0)) throw std::invalid_argument("fit-prior: zero spread across users");
  const double common = mean * (1.0 - mean) / var - 1.0;
  if (!(common > 0.0)) throw std::invalid_argument("fit-prior: spread too large for a Beta fit");
  PriorFit fit;
  fit.alpha = mean * common;
  fit.beta = (1.0 - mean) * common;
  fit.users = rhos.size();
  fit.mean_rho = 2.0 * mean - 1.0;
  fit.var_rho = 4.0 * var;
  return fit;
}

PriorFit fit_prior(const RatingsMatrix& ratings, const ExpertOrder& expert) {
  std::vector<double> rhos;
  for (const auto& ut : user_truths(ratings, expert)) {
    rhos.push_back(std::sin(kendall_tau(ut.truth) * std::numbers::pi / 2.0));
  }
  return fit_prior_from_rhos(rhos);
}

// --------------------------------------------------------------- synthetic

Permutation synthetic_alignment(int n, const CopulaModel& model, double theta, Rng& rng) {
  model.check_domain(theta);
  std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (model.family() == CopulaFamily::gaussian) {
      const double a = rng.normal();
      const double b = rng.normal();
      x[static_cast<std::size_t>(i)] = a;
      y[static_cast<std::size_t>(i)] = theta * a + std::sqrt(1.0 - theta * theta) * b;
    } else {
      // conditional inverse: v + a v (1 - v) = w with a = theta (1 - 2u)
      const double u = rng.uniform();
      const double w = rng.uniform();
      const double a = theta * (1.0 - 2.0 * u);
      double v = w;
      if (std::abs(a) > 1e-12) v = ((1.0 + a) - std::sqrt((1.0 + a) * (1.0 + a) - 4.0 * a * w)) / (2.0 * a);
      x[static_cast<std::size_t>(i)] = u;
      y[static_cast<std::size_t>(i)] = v;
    }
  }
  return compose(rank_of(y), inverse(rank_of(x)));
}

std::vector<UserTruth> synthetic_users(int users, int n, const CopulaModel& model, double theta,
                                       std::uint64_t seed) {
  std::vector<UserTruth> out;
  for (int u = 0; u < users; ++u) {
    Rng rng(seed, static_cast<std::uint64_t>(u));
    out.push_back({static_cast<Id>(u + 1), synthetic_alignment(n, model, theta, rng)});
  }
  return out;
}

}  // namespace rankcop
