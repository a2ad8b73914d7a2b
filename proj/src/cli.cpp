#include "rankcop/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "rankcop/chains.hpp"
#include "rankcop/copula.hpp"
#include "rankcop/fgm_exact.hpp"
#include "rankcop/montecarlo.hpp"
#include "rankcop/perm.hpp"
#include "rankcop/prior.hpp"
#include "rankcop/recommender.hpp"

namespace rankcop::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

/// An output destination: a file, or the fallback stream for "" and "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot write " + path);
      os_ = file_.get();
    }
  }
  std::ostream& os() { return *os_; }
  ~Sink() {
    if (file_) file_->flush();
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

struct Common {
  std::uint64_t seed = 1;
  int threads = 0;
};

std::string config_of(const CLI::App& sub) {
  std::string out;
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_single_name();
    if (name == "help" || name == "threads") continue;
    std::string value;
    if (o->count() > 0) {
      const auto& res = o->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      if (value.empty()) value = "true";
    } else {
      value = o->get_default_str();
    }
    if (value.empty()) continue;
    if (!out.empty()) out += ' ';
    out += name + "=" + value;
  }
  return out;
}

std::string text_header(const CLI::App& sub, const Common& c) {
  std::string h = "# rankcop " RANKCOP_VERSION "\n";
  h += "# command: " + sub.get_name() + "\n";
  h += "# config: " + config_of(sub) + "\n";
  h += "# seed: " + std::to_string(c.seed) + "\n";
  return h;
}

ojson json_header(const CLI::App& sub, const Common& c) {
  ojson h;
  h["version"] = RANKCOP_VERSION;
  h["command"] = sub.get_name();
  h["config"] = config_of(sub);
  h["seed"] = c.seed;
  return h;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Random seed (echoed into every output)");
  sub->add_option("--threads", c.threads, std::string("Worker threads (default: $") + kThreadsEnv +
                                              " or all cores); results do not depend on it");
}

// Instance given as n, M* and s* (1-based).
struct InstanceOpts {
  int n = 7;
  std::string mstar;
  std::string sstar;
  std::string model = "fgm";
  std::string prior = "jeffreys";

  IncompleteRanking instance() const {
    if (mstar.empty() != sstar.empty()) throw CLI::ValidationError("--mstar and --sstar go together");
    std::string text = "n=" + std::to_string(n);
    if (!mstar.empty()) text = "s*=" + sstar + "; M*=" + mstar + "; " + text;
    return IncompleteRanking::parse(text);
  }
};

void add_instance(CLI::App* sub, InstanceOpts& o, bool with_model) {
  sub->add_option("--n", o.n, "Number of objects")->check(CLI::Range(1, 64));
  sub->add_option("--mstar", o.mstar, "Expert ranks of the user-ranked objects, e.g. 2,4,5 (empty: none)");
  sub->add_option("--sstar", o.sstar, "User's ranking of those objects, e.g. 2,1,3");
  if (with_model) sub->add_option("--model", o.model, "Copula family: fgm or gaussian");
  sub->add_option("--prior", o.prior, "Prior: jeffreys, beta:A,B, table:FILE or point:V");
}

bool exact_feasible(const IncompleteRanking& inc, const CopulaModel& model) {
  return model.family() == CopulaFamily::fgm && inc.n() <= kDefaultExactCap &&
         compatible_count(inc) <= 1000000;
}

ojson perm_list(const std::vector<Permutation>& ps) {
  ojson a = ojson::array();
  for (const auto& p : ps) a.push_back(p.to_string());
  return a;
}

std::vector<Permutation> mode_perms(const ExactPredictive& ex) {
  std::vector<Permutation> out;
  for (auto i : ex.modes) out.push_back(ex.support[i]);
  return out;
}

void write_occupancy(std::ostream& os, const OccupancyTable& occ) {
  os << "permutation,count,freq\n";
  for (const auto& [s, c] : occ.sorted()) {
    os << '"' << s.to_string() << "\"," << c << ',' << num(static_cast<double>(c) / occ.total) << '\n';
  }
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
  }
  return out;
}

MixingDensity parse_mixing(const std::string& tag) {
  if (tag == "uniform") return {MixingKind::uniform, 0.5};
  if (tag == "beta-n1") return {MixingKind::beta_n1, 0.5};
  throw std::invalid_argument("unknown mixing density '" + tag + "' (uniform, beta-n1)");
}

// ------------------------------------------------------------ exact-predict

struct ExactPredictCmd {
  Common common;
  InstanceOpts inst;
  int cap = kDefaultExactCap;
  std::string out;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("exact-predict", "Exact FGM predictive distribution over the compatible set");
    add_common(app, common);
    add_instance(app, inst, false);
    app->add_option("--cap", cap, "Largest n for the exact computation")->check(CLI::Range(1, kHardExactCap));
    app->add_option("-o,--out", out, "CSV output (default: standard output)");
  }

  int run(std::ostream& os_default, std::ostream&) {
    const IncompleteRanking inc = inst.instance();
    const Prior prior = Prior::parse(inst.prior);
    ExactOptions opts;
    opts.cap = cap;
    const ExactPredictive ex = exact_predictive(inc, prior, opts);
    double nfact = 1.0;
    for (int i = 2; i <= inc.n(); ++i) nfact *= i;
    Sink sink(out, os_default);
    auto& os = sink.os();
    os << text_header(*app, common);
    os << "# support: " << ex.support.size() << "  modes: " << ex.modes.size() << '\n';
    os << "permutation,probability,scaled,kendall_to_mode,mode\n";
    const Permutation& mode = ex.mode();
    for (std::size_t i = 0; i < ex.support.size(); ++i) {
      const bool is_mode = std::binary_search(ex.modes.begin(), ex.modes.end(), i);
      os << '"' << ex.support[i].to_string() << "\"," << num(ex.probabilities[i]) << ','
         << num(nfact * ex.probabilities[i]) << ',' << kendall_distance(ex.support[i], mode) << ','
         << (is_mode ? 1 : 0) << '\n';
    }
    return kExitOk;
  }
};

// ------------------------------------------------------------ mc-likelihood

struct McLikelihoodCmd {
  Common common;
  std::string model = "fgm";
  std::string s;
  std::optional<double> theta;
  std::string prior = "jeffreys";
  std::uint64_t K = 100000;
  std::uint64_t block = 4096;
  bool serial = false;
  std::string out;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("mc-likelihood",
                              "Monte Carlo estimate of P(S = s) at a fixed parameter or under a prior");
    add_common(app, common);
    app->add_option("--model", model, "Copula family: fgm or gaussian");
    app->add_option("--s", s, "Permutation, e.g. 2,1,3")->required();
    app->add_option("--theta", theta, "Copula parameter (omit to integrate over --prior)");
    app->add_option("--prior", prior, "Prior used when --theta is absent");
    app->add_option("--K", K, "Number of draws")->check(CLI::PositiveNumber);
    app->add_option("--block", block, "Draws per RNG block")->check(CLI::PositiveNumber);
    app->add_flag("--serial", serial, "Use the serial reference implementation");
    app->add_option("-o,--out", out, "CSV output (default: standard output)");
  }

  int run(std::ostream& os_default, std::ostream&) {
    const Permutation perm = Permutation::parse(s);
    const CopulaModel m = CopulaModel::parse(model);
    McOptions opts;
    opts.seed = common.seed;
    opts.block = block;
    MCEstimate est;
    if (theta) {
      est = serial ? mc_rank_likelihood_serial(perm, *theta, m, K, opts)
                   : mc_rank_likelihood(perm, *theta, m, K, opts);
    } else {
      const Prior p = Prior::parse(prior);
      est = serial ? mc_marginal_serial(perm, p, m, K, opts) : mc_marginal(perm, p, m, K, opts);
    }
    Sink sink(out, os_default);
    sink.os() << text_header(*app, common) << "mean,se,K\n"
              << num(est.mean) << ',' << num(est.standard_error) << ',' << est.draws << '\n';
    return kExitOk;
  }
};

// ------------------------------------------------------------------ anneal

struct AnnealCmd {
  Common common;
  InstanceOpts inst;
  AnnealConfig cfg;
  std::string energy = "mc";
  std::string distance_to;
  std::string trace, occupancy, summary;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("anneal", "Simulated annealing for the predictive mode");
    add_common(app, common);
    add_instance(app, inst, true);
    app->add_option("--K", cfg.K, "Monte Carlo draws per energy evaluation")->check(CLI::PositiveNumber);
    app->add_option("--iters", cfg.iters, "Iterations")->check(CLI::PositiveNumber);
    app->add_option("--scale", cfg.scale, "Energy-difference multiplier (0 = n!)")->check(CLI::NonNegativeNumber);
    app->add_flag("--reestimate", cfg.reestimate, "Re-estimate the incumbent every iteration");
    app->add_flag("--crn", cfg.common_random_numbers, "Reuse one bank of K draws for all evaluations");
    app->add_option("--energy", energy, "mc or exact (FGM oracle, no noise)")
        ->check(CLI::IsMember({"mc", "exact"}));
    app->add_option("--distance-to", distance_to,
                    "Add a kendall_to column measuring each visited state against this permutation");
    app->add_option("--trace", trace, "Trace CSV: iter,permutation,energy");
    app->add_option("--occupancy", occupancy, "Occupancy CSV: permutation,count,freq");
    app->add_option("--summary", summary, "JSON summary (default: standard output)");
  }

  int run(std::ostream& os_default, std::ostream&) {
    const IncompleteRanking inc = inst.instance();
    const CopulaModel model = CopulaModel::parse(inst.model);
    const Prior prior = Prior::parse(inst.prior);
    Rng rng(common.seed, 0);
    AnnealResult res;
    if (energy == "exact") {
      if (model.family() != CopulaFamily::fgm) throw std::invalid_argument("exact energy needs --model fgm");
      res = anneal(inc, exact_energy(prior), cfg, rng);
    } else {
      res = anneal(inc, model, prior, cfg, rng);
    }
    std::optional<Permutation> ref;
    if (!distance_to.empty()) ref = Permutation::parse(distance_to);
    if (!trace.empty()) {
      Sink sink(trace, os_default);
      auto& os = sink.os();
      os << text_header(*app, common) << "iter,permutation,energy" << (ref ? ",kendall_to" : "") << '\n';
      for (const auto& st : res.trace) {
        os << st.iter << ",\"" << st.state.to_string() << "\"," << num(st.energy);
        if (ref) os << ',' << kendall_distance(st.state, *ref);
        os << '\n';
      }
    }
    OccupancyTable occ;
    for (const auto& st : res.trace) occ.add(st.state);
    if (!occupancy.empty()) {
      Sink sink(occupancy, os_default);
      sink.os() << text_header(*app, common);
      write_occupancy(sink.os(), occ);
    }
    ojson j;
    j["header"] = json_header(*app, common);
    j["best"] = res.best.to_string();
    j["best_energy"] = res.best_energy;
    j["accepted"] = res.accepted;
    j["iters"] = cfg.iters;
    j["trace_mode"] = occ.total ? occ.mode().to_string() : res.best.to_string();
    if (exact_feasible(inc, model)) {
      const ExactPredictive ex = exact_predictive(inc, prior);
      const auto modes = mode_perms(ex);
      j["exact_modes"] = perm_list(modes);
      j["best_is_exact_mode"] = std::find(modes.begin(), modes.end(), res.best) != modes.end();
      double mode_freq = 0.0;
      for (const auto& mo : modes) mode_freq += occ.frequency(mo);
      j["trace_mode_frequency"] = mode_freq;
      j["tv_trace_to_exact"] = tv_empirical(occ, ex);
    }
    Sink sink(summary, os_default);
    sink.os() << j.dump(2) << '\n';
    return kExitOk;
  }
};

// -------------------------------------------------------- sample-predictive

struct SamplePredictiveCmd {
  Common common;
  InstanceOpts inst;
  GibbsConfig cfg;
  std::string variant = "mhi";
  std::string mixing = "uniform";
  int chains = 1;
  std::uint64_t trace_every = 1;
  std::string trace, occupancy, summary, tv_curve;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("sample-predictive",
                              "Metropolis-within-Gibbs sampler for the predictive distribution");
    add_common(app, common);
    add_instance(app, inst, true);
    app->add_option("--variant", variant, "Simplex move: mhi or mhrw")->check(CLI::IsMember({"mhi", "mhrw"}));
    app->add_option("--N", cfg.steps, "Steps per chain")->check(CLI::PositiveNumber);
    app->add_option("--epsilon", cfg.epsilon, "Half-width of the parameter random walk")
        ->check(CLI::PositiveNumber);
    app->add_option("--g", mixing, "Mixing density for mhrw: uniform or beta-n1");
    app->add_option("--chains", chains, "Independent chains (merged)")->check(CLI::PositiveNumber);
    app->add_option("--checkpoint-every", cfg.checkpoint_every,
                    "Record TV to the exact predictive every this many steps (single chain)");
    app->add_option("--trace-every", trace_every, "Trace thinning")->check(CLI::PositiveNumber);
    app->add_option("--trace", trace, "Trace CSV: iter,permutation,theta");
    app->add_option("--occupancy", occupancy, "Occupancy CSV: permutation,count,freq");
    app->add_option("--tv-curve", tv_curve, "Checkpoint CSV: step,tv");
    app->add_option("--summary", summary, "JSON summary (default: standard output)");
  }

  int run(std::ostream& os_default, std::ostream&) {
    const IncompleteRanking inc = inst.instance();
    const CopulaModel model = CopulaModel::parse(inst.model);
    const Prior prior = Prior::parse(inst.prior);
    cfg.variant = variant == "mhrw" ? SimplexMove::mhrw : SimplexMove::mhi;
    cfg.g = parse_mixing(mixing);
    cfg.record_theta = true;
    cfg.trace_every = trace.empty() ? 0 : trace_every;
    std::optional<ExactPredictive> ex;
    if (exact_feasible(inc, model)) ex = exact_predictive(inc, prior);
    if (cfg.checkpoint_every > 0 && !ex) {
      throw std::invalid_argument("--checkpoint-every needs the exact oracle (FGM, small n)");
    }
    std::vector<std::pair<std::uint64_t, double>> curve;
    GibbsResult res;
    if (chains == 1) {
      Rng rng(common.seed, 0);
      res = gibbs_run(inc, model, prior, cfg, rng, [&](std::uint64_t t, const OccupancyTable& o) {
        curve.emplace_back(t, tv_empirical(o, *ex));
      });
    } else {
      if (cfg.checkpoint_every > 0) throw std::invalid_argument("--checkpoint-every needs --chains 1");
      res = gibbs_run_chains(inc, model, prior, cfg, common.seed, chains, common.threads);
    }
    if (!trace.empty()) {
      Sink sink(trace, os_default);
      auto& os = sink.os();
      os << text_header(*app, common) << "iter,permutation,theta\n";
      for (const auto& st : res.trace) os << st.iter << ",\"" << st.state.to_string() << "\"," << num(st.theta) << '\n';
    }
    if (!occupancy.empty()) {
      Sink sink(occupancy, os_default);
      sink.os() << text_header(*app, common);
      write_occupancy(sink.os(), res.occupancy);
    }
    if (!tv_curve.empty()) {
      Sink sink(tv_curve, os_default);
      sink.os() << text_header(*app, common) << "step,tv\n";
      for (const auto& [t, tv] : curve) sink.os() << t << ',' << num(tv) << '\n';
    }
    ojson j;
    j["header"] = json_header(*app, common);
    j["steps"] = res.occupancy.total;
    j["distinct_visited"] = res.occupancy.counts.size();
    // all permutations sharing the top count
    std::uint64_t top = 0;
    for (const auto& [s, c] : res.occupancy.counts) top = std::max(top, c);
    std::vector<Permutation> modes;
    for (const auto& [s, c] : res.occupancy.sorted()) {
      if (c == top) modes.push_back(s);
    }
    j["modes"] = perm_list(modes);
    j["mode_frequency"] = static_cast<double>(top) / static_cast<double>(res.occupancy.total);
    const char* names[3] = {"permutation", "simplex", "parameter"};
    for (int k = 0; k < 3; ++k) {
      const auto p = res.proposed[static_cast<std::size_t>(k)];
      j["acceptance"][names[k]] = p ? static_cast<double>(res.accepted[static_cast<std::size_t>(k)]) / p : 0.0;
    }
    if (!res.theta_trace.empty()) {
      j["theta_mean"] = std::accumulate(res.theta_trace.begin(), res.theta_trace.end(), 0.0) /
                        static_cast<double>(res.theta_trace.size());
    }
    if (ex) {
      j["exact_modes"] = perm_list(mode_perms(*ex));
      j["tv_to_exact"] = tv_empirical(res.occupancy, *ex);
    }
    if (!curve.empty()) {
      for (const auto& [t, tv] : curve) j["checkpoints"].push_back({{"step", t}, {"tv", tv}});
    }
    Sink sink(summary, os_default);
    sink.os() << j.dump(2) << '\n';
    return kExitOk;
  }
};

// --------------------------------------------------------------- benchmark

struct BenchmarkCmd {
  Common common;
  int n_table = 9;
  std::uint64_t K = 1000000;
  int reps = 3;
  std::string out;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("benchmark", "Time serial against parallel kernels");
    add_common(app, common);
    app->add_option("--table-n", n_table, "n for the coefficient-table kernel")->check(CLI::Range(2, kHardExactCap));
    app->add_option("--K", K, "Draws for the Monte Carlo kernel")->check(CLI::PositiveNumber);
    app->add_option("--reps", reps, "Repetitions (best time is reported)")->check(CLI::PositiveNumber);
    app->add_option("-o,--out", out, "CSV output (default: standard output)");
  }

  template <class F>
  double best_time(F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      f();
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  }

  int run(std::ostream& os_default, std::ostream&) {
    Sink sink(out, os_default);
    auto& os = sink.os();
    os << text_header(*app, common);
    os << "# timings vary between runs; the agree column is deterministic\n";
    os << "kernel,variant,threads,seconds,agree\n";
    const int threads = omp_get_max_threads();
    auto row = [&](const char* kernel, const char* variant, int th, double sec, bool agree) {
      os << kernel << ',' << variant << ',' << th << ',' << num(sec) << ',' << (agree ? 1 : 0) << '\n';
    };
    {
      std::unique_ptr<DCoefficientTable> a, b;
      const double ts = best_time([&] { b = std::make_unique<DCoefficientTable>(DCoefficientTable::build_serial(n_table)); });
      const double tp = best_time([&] { a = std::make_unique<DCoefficientTable>(n_table); });
      bool same = true;
      for (std::uint32_t mask = 1; mask + 1 < (1u << n_table); ++mask) same = same && a->numerator(mask) == b->numerator(mask);
      row("d_table", "serial", 1, ts, same);
      row("d_table", "openmp", threads, tp, same);
    }
    {
      const auto inc = IncompleteRanking::parse("s*=2,1,3; M*=2,4,5; n=7");
      const Prior prior = Prior::jeffreys();
      ExactOptions so, po;
      so.parallel = false;
      ExactPredictive a, b;
      const double ts = best_time([&] { b = exact_predictive(inc, prior, so); });
      const double tp = best_time([&] { a = exact_predictive(inc, prior, po); });
      const bool same = a.probabilities == b.probabilities;
      row("exact_predictive", "serial", 1, ts, same);
      row("exact_predictive", "openmp", threads, tp, same);
    }
    {
      const Permutation s = Permutation::parse("2,1,3,5,4");
      const CopulaModel m(CopulaFamily::fgm);
      McOptions opts;
      opts.seed = common.seed;
      MCEstimate a, b;
      const double ts = best_time([&] { b = mc_rank_likelihood_serial(s, 0.5, m, K, opts); });
      const double tp = best_time([&] { a = mc_rank_likelihood(s, 0.5, m, K, opts); });
      const bool same = a.mean == b.mean && a.standard_error == b.standard_error;
      row("mc_likelihood", "serial", 1, ts, same);
      row("mc_likelihood", "openmp", threads, tp, same);
    }
    return kExitOk;
  }
};

// --------------------------------------------------------------- fit-prior

struct FitPriorCmd {
  Common common;
  std::string ratings;
  std::string out;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("fit-prior", "Fit a Beta prior to per-user rank correlations with the expert");
    add_common(app, common);
    app->add_option("--ratings", ratings, "u.data (tab separated) or CSV user,item,rating")->required();
    app->add_option("-o,--out", out, "CSV output (default: standard output)");
  }

  int run(std::ostream& os_default, std::ostream&) {
    const RatingsMatrix m = ingest_ratings(ratings);
    const PriorFit fit = fit_prior(m, derive_expert(m));
    Sink sink(out, os_default);
    sink.os() << text_header(*app, common) << "# users: " << fit.users << "  mean rho: " << num(fit.mean_rho)
              << "  var rho: " << num(fit.var_rho) << '\n'
              << "alpha,beta\n"
              << num(fit.alpha) << ',' << num(fit.beta) << '\n';
    return kExitOk;
  }
};

// ------------------------------------------------------------- diagnostics

struct DiagnosticsCmd {
  Common common;
  std::string check = "symmetries";
  int n = 4;
  std::string model = "fgm";
  std::string prior = "jeffreys";
  double tol = 1e-10;
  double alpha_min = 0.1, alpha_max = 3.0, alpha_step = 0.01;
  int points = 201;
  std::string mstar = "2,4", sstar = "1,2";
  std::uint64_t steps = 1000000;
  std::string out;
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("diagnostics", "Identity checks and figure data for priors and chains");
    add_common(app, common);
    app->add_option("--check", check,
                    "symmetries, normalization, modes, jeffreys-tv, jeffreys-density or uniformity")
        ->check(CLI::IsMember({"symmetries", "normalization", "modes", "jeffreys-tv", "jeffreys-density",
                               "uniformity"}));
    app->add_option("--n", n, "Number of objects")->check(CLI::Range(1, kHardExactCap));
    app->add_option("--model", model, "Copula family for the copula-level checks");
    app->add_option("--prior", prior, "Prior for the modes check (default: the three reference priors)");
    app->add_option("--tol", tol, "Pass tolerance");
    app->add_option("--alpha-min", alpha_min, "jeffreys-tv grid start");
    app->add_option("--alpha-max", alpha_max, "jeffreys-tv grid end");
    app->add_option("--alpha-step", alpha_step, "jeffreys-tv grid step")->check(CLI::PositiveNumber);
    app->add_option("--points", points, "jeffreys-density grid size")->check(CLI::Range(2, 1000000));
    app->add_option("--mstar", mstar, "uniformity: ranked positions");
    app->add_option("--sstar", sstar, "uniformity: observed ranking");
    app->add_option("--steps", steps, "uniformity: chain length")->check(CLI::PositiveNumber);
    app->add_option("-o,--out", out, "CSV output (default: standard output)");
  }

  int symmetries(std::ostream& os) {
    const auto perms = all_permutations(n);
    const Permutation a = Permutation::anti_identity(n);
    std::vector<RankLikelihoodPolynomial> polys;
    for (const auto& s : perms) polys.push_back(rank_likelihood_poly(s, kHardExactCap));
    auto index_of = [&](const Permutation& p) {
      return static_cast<std::size_t>(std::lower_bound(perms.begin(), perms.end(), p) - perms.begin());
    };
    os << "identity,max_abs_diff,pass\n";
    bool all = true;
    for (int i = 0; i <= 1; ++i) {
      for (int j = 0; j <= 1; ++j) {
        for (int k : {1, -1}) {
          double worst = 0.0;
          for (std::size_t si = 0; si < perms.size(); ++si) {
            Permutation t = k == 1 ? perms[si] : inverse(perms[si]);
            if (i) t = compose(a, t);
            if (j) t = compose(t, a);
            const std::size_t ti = index_of(t);
            for (int g = 0; g < 9; ++g) {
              const double theta = -1.0 + 0.25 * g;
              const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
              worst = std::max(worst, std::abs(polys[si].evaluate(theta) - polys[ti].evaluate(sign * theta)));
            }
          }
          const bool ok = worst <= tol;
          all = all && ok;
          std::string name = std::string(i ? "a o " : "") + (k == 1 ? "s" : "s^-1") + (j ? " o a" : "");
          os << '"' << name << "\"," << num(worst) << ',' << (ok ? "pass" : "FAIL") << '\n';
        }
      }
    }
    const SymmetryReport rep = check_symmetries(CopulaModel::parse(model));
    os << "\"copula exchange\"," << num(rep.exchange_violation) << ',' << (rep.passed(tol) ? "pass" : "FAIL") << '\n';
    os << "\"copula sign flip\"," << num(rep.sign_flip_violation) << ',' << (rep.passed(tol) ? "pass" : "FAIL")
       << '\n';
    all = all && rep.passed(tol);
    return all ? kExitOk : kExitRuntime;
  }

  int normalization(std::ostream& os) {
    os << "n,theta,sum,abs_err,pass\n";
    bool all = true;
    for (int k = 2; k <= n; ++k) {
      const auto perms = all_permutations(k);
      for (double theta : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        double sum = 0.0;
        for (const auto& s : perms) sum += exact_rank_likelihood(s, theta, kHardExactCap);
        const double err = std::abs(sum - 1.0);
        all = all && err <= tol;
        os << k << ',' << num(theta) << ',' << num(sum) << ',' << num(err) << ',' << (err <= tol ? "pass" : "FAIL")
           << '\n';
      }
    }
    return all ? kExitOk : kExitRuntime;
  }

  int modes(std::ostream& os) {
    std::vector<std::pair<std::string, std::string>> cases;  // prior, expected
    if (app->get_option("--prior")->count() > 0) {
      cases.emplace_back(prior, "");
    } else {
      cases = {{"beta:2,1", "e"}, {"beta:1,2", "a"}, {"jeffreys", "e+a"}};
    }
    os << "prior,n,modes,expected,pass\n";
    bool all = true;
    for (const auto& [spec, expected] : cases) {
      const Prior p = Prior::parse(spec);
      const auto perms = all_permutations(n);
      const auto probs = exact_marginal_all(n, p.moments(n));
      const double top = *std::max_element(probs.begin(), probs.end());
      std::vector<Permutation> found;
      for (std::size_t i = 0; i < perms.size(); ++i) {
        if (top - probs[i] <= 1e-10 * top) found.push_back(perms[i]);
      }
      std::string listed;
      for (const auto& f : found) listed += (listed.empty() ? "" : " ") + f.to_string();
      std::vector<Permutation> want;
      if (expected == "e" || expected == "e+a") want.push_back(Permutation::identity(n));
      if (expected == "a" || expected == "e+a") want.push_back(Permutation::anti_identity(n));
      std::sort(want.begin(), want.end());
      want.erase(std::unique(want.begin(), want.end()), want.end());
      const bool ok = expected.empty() || found == want;
      all = all && ok;
      os << '"' << spec << "\"," << n << ",\"" << listed << "\"," << (expected.empty() ? "-" : expected) << ','
         << (ok ? "pass" : "FAIL") << '\n';
    }
    return all ? kExitOk : kExitRuntime;
  }

  int jeffreys_tv(std::ostream& os) {
    const Prior j = Prior::jeffreys();
    os << "alpha,tv\n";
    double best_a = 0.0, best_tv = 2.0;
    const auto steps_n = static_cast<int>(std::floor((alpha_max - alpha_min) / alpha_step + 1e-9));
    for (int k = 0; k <= steps_n; ++k) {
      const double a = alpha_min + k * alpha_step;
      const double tv = tv_distance(j, Prior::beta(a, a));
      if (tv < best_tv) {
        best_tv = tv;
        best_a = a;
      }
      os << num(a) << ',' << num(tv) << '\n';
    }
    os << "# argmin alpha=" << num(best_a) << " tv=" << num(best_tv) << '\n';
    return kExitOk;
  }

  int jeffreys_density(std::ostream& os) {
    const Prior j = Prior::jeffreys();
    os << "theta,density,fisher_information\n";
    for (int k = 0; k < points; ++k) {
      const double t = -1.0 + 2.0 * k / (points - 1);
      os << num(t) << ',' << num(j.density(t)) << ',' << num(jeffreys_fisher_info(t)) << '\n';
    }
    return kExitOk;
  }

  int uniformity(std::ostream& os) {
    const auto inc = IncompleteRanking::parse("s*=" + sstar + "; M*=" + mstar + "; n=" + std::to_string(n));
    const auto support = enumerate_compatible(inc);
    std::map<Permutation, std::uint64_t> counts;
    for (const auto& s : support) counts[s] = 0;
    Rng rng(common.seed, 0);
    Permutation s = random_compatible(inc, rng);
    for (std::uint64_t t = 0; t < steps; ++t) {
      s = compat_step(s, inc, rng);
      ++counts.at(s);
    }
    const double expected = static_cast<double>(steps) / static_cast<double>(support.size());
    double chi2 = 0.0;
    os << "permutation,count,expected\n";
    for (const auto& [p, c] : counts) {
      chi2 += (c - expected) * (c - expected) / expected;
      os << '"' << p.to_string() << "\"," << c << ',' << num(expected) << '\n';
    }
    const double df = static_cast<double>(support.size() - 1);
    const double pval = df > 0 ? boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), chi2)) : 1.0;
    os << "# chi2=" << num(chi2) << " df=" << num(df) << " p=" << num(pval) << (pval > 0.001 ? " pass" : " FAIL")
       << '\n';
    return pval > 0.001 ? kExitOk : kExitRuntime;
  }

  int run(std::ostream& os_default, std::ostream&) {
    Sink sink(out, os_default);
    auto& os = sink.os();
    os << text_header(*app, common);
    if (check == "symmetries") return symmetries(os);
    if (check == "normalization") return normalization(os);
    if (check == "modes") return modes(os);
    if (check == "jeffreys-tv") return jeffreys_tv(os);
    if (check == "jeffreys-density") return jeffreys_density(os);
    return uniformity(os);
  }
};

// ---------------------------------------------------------------- evaluate

struct EvaluateCmd {
  Common common;
  std::string ratings;
  int syn_users = 0, syn_n = 20;
  double syn_theta = 0.8;
  std::string syn_model = "gaussian";
  std::string proportions = "0.25";
  int reps = 1;
  std::string engine = "auto";
  std::string model = "fgm";
  std::string prior = "jeffreys";
  AnnealConfig anneal_cfg;
  std::uint64_t gibbs_steps = 100000;
  bool baseline = false;
  std::string out_dir = ".";
  CLI::App* app = nullptr;

  void setup(CLI::App& root) {
    app = root.add_subcommand("evaluate", "Holdout evaluation with Kendall distances (report.json, boxplot.csv, curve.csv)");
    add_common(app, common);
    auto* src = app->add_option("--ratings", ratings, "u.data (tab separated) or CSV user,item,rating");
    auto* syn = app->add_option("--synthetic-users", syn_users, "Generate this many synthetic users instead");
    src->excludes(syn);
    app->add_option("--synthetic-n", syn_n, "Items per synthetic user")->check(CLI::Range(2, 1000));
    app->add_option("--synthetic-theta", syn_theta, "Dependence parameter of the synthetic users");
    app->add_option("--synthetic-model", syn_model, "Copula used to generate synthetic users");
    app->add_option("--proportions", proportions, "Kept proportions, comma separated");
    app->add_option("--reps", reps, "Repetitions per proportion")->check(CLI::PositiveNumber);
    app->add_option("--engine", engine, "auto, exact, anneal, gibbs-mode or random (baseline)");
    app->add_option("--model", model, "Copula family for prediction");
    app->add_option("--prior", prior, "Prior for prediction");
    app->add_option("--K", anneal_cfg.K, "anneal: draws per energy evaluation")->check(CLI::PositiveNumber);
    app->add_option("--iters", anneal_cfg.iters, "anneal: iterations")->check(CLI::PositiveNumber);
    app->add_option("--scale", anneal_cfg.scale, "anneal: energy multiplier (0 = n!)");
    app->add_flag("--crn", anneal_cfg.common_random_numbers, "anneal: one bank of draws per prediction");
    app->add_option("--N", gibbs_steps, "gibbs-mode: steps")->check(CLI::PositiveNumber);
    app->add_option("--out-dir", out_dir, "Directory for the three output files");
  }

  int run(std::ostream&, std::ostream& err) {
    std::vector<UserTruth> users;
    if (!ratings.empty()) {
      const RatingsMatrix m = ingest_ratings(ratings);
      users = user_truths(m, derive_expert(m));
    } else if (syn_users > 0) {
      users = synthetic_users(syn_users, syn_n, CopulaModel::parse(syn_model), syn_theta, common.seed);
    } else {
      throw CLI::ValidationError("give --ratings or --synthetic-users");
    }
    EvalConfig ec;
    ec.proportions = parse_doubles(proportions);
    ec.repetitions = reps;
    ec.seed = common.seed;
    ec.threads = common.threads;
    const CopulaModel m = CopulaModel::parse(model);
    const Prior p = Prior::parse(prior);
    Predictor pred;
    if (engine == "random") {
      pred = random_compatible_predictor();
    } else {
      EngineConfig en;
      en.engine = parse_engine(engine);
      en.anneal = anneal_cfg;
      en.anneal.record_trace = false;
      en.gibbs.steps = gibbs_steps;
      pred = engine_predictor(en, m, p);
    }
    const EvalReport rep = evaluate(users, ec, pred);

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    {
      ojson j;
      j["header"] = json_header(*app, common);
      j["proportions"] = rep.proportions;
      j["repetitions"] = rep.repetitions;
      j["users"] = rep.users;
      j["d"] = rep.d;
      j["dbar"] = rep.dbar;
      j["distances"] = rep.distances;
      Sink sink((dir / "report.json").string(), err);
      sink.os() << j.dump(1) << '\n';
    }
    {
      Sink sink((dir / "boxplot.csv").string(), err);
      sink.os() << text_header(*app, common) << "p,k,d\n";
      for (std::size_t pi = 0; pi < rep.proportions.size(); ++pi) {
        for (std::size_t k = 0; k < rep.d[pi].size(); ++k) {
          sink.os() << num(rep.proportions[pi]) << ',' << k + 1 << ',' << num(rep.d[pi][k]) << '\n';
        }
      }
    }
    {
      Sink sink((dir / "curve.csv").string(), err);
      sink.os() << text_header(*app, common) << "p,dbar\n";
      for (std::size_t pi = 0; pi < rep.proportions.size(); ++pi) {
        sink.os() << num(rep.proportions[pi]) << ',' << num(rep.dbar[pi]) << '\n';
      }
    }
    return kExitOk;
  }
};

int default_threads() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const int t = std::stoi(env);
      if (t > 0) return t;
    } catch (const std::exception&) {
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian rank prediction with bivariate copulas", "rankcop"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("rankcop ") + RANKCOP_VERSION);

  ExactPredictCmd exact_cmd;
  McLikelihoodCmd mc_cmd;
  AnnealCmd anneal_cmd;
  SamplePredictiveCmd sample_cmd;
  BenchmarkCmd bench_cmd;
  FitPriorCmd fit_cmd;
  DiagnosticsCmd diag_cmd;
  EvaluateCmd eval_cmd;
  exact_cmd.setup(app);
  mc_cmd.setup(app);
  anneal_cmd.setup(app);
  sample_cmd.setup(app);
  bench_cmd.setup(app);
  fit_cmd.setup(app);
  diag_cmd.setup(app);
  eval_cmd.setup(app);

  const int env_threads = default_threads();
  for (Common* c : {&exact_cmd.common, &mc_cmd.common, &anneal_cmd.common, &sample_cmd.common,
                    &bench_cmd.common, &fit_cmd.common, &diag_cmd.common, &eval_cmd.common}) {
    c->threads = env_threads;
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto dispatch = [&](auto& cmd) -> std::optional<int> {
    if (!cmd.app->parsed()) return std::nullopt;
    if (cmd.common.threads > 0) omp_set_num_threads(cmd.common.threads);
    return cmd.run(out, err);
  };
  try {
    for (auto r : {dispatch(exact_cmd), dispatch(mc_cmd), dispatch(anneal_cmd), dispatch(sample_cmd),
                   dispatch(bench_cmd), dispatch(fit_cmd), dispatch(diag_cmd), dispatch(eval_cmd)}) {
      if (r) return *r;
    }
  } catch (const CLI::ValidationError& e) {
    err << "rankcop: " << e.what() << '\n' << "Run with --help for usage.\n";
    return kExitUsage;
  } catch (const RatingsFormatError& e) {
    err << "rankcop: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "rankcop: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace rankcop::cli
