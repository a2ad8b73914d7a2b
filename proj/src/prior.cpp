#include "rankcop/prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rankcop/quadrature.hpp"

namespace rankcop {

namespace {

constexpr int kCachedMomentOrder = 16;
constexpr int kCdfGridSize = 10'000;

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Legendre chi: sum_{k>=0} x^{2k+1} / (2k+1)^2 for 0 <= x <= 1.
double legendre_chi2(double x) {
  if (x == 0.0) return 0.0;
  if (x > 0.7) {
    const double y = (1.0 - x) / (1.0 + x);
    const double log_term = y > 0.0 ? std::log(x) * std::log(y) : 0.0;
    return M_PI * M_PI / 8.0 - 0.5 * log_term - legendre_chi2(y);
  }
  double sum = 0.0;
  double power = x;
  const double x2 = x * x;
  for (int k = 0; k < 10'000; ++k) {
    const double denom = 2.0 * k + 1.0;
    sum += power / (denom * denom);
    power *= x2;
    if (power / (1.0 - x2) / ((denom + 2.0) * (denom + 2.0)) < 1e-17) break;
  }
  return sum;
}

void check_shapes(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("beta prior: shape parameters must be positive");
  }
}

}  // namespace

double beta_moment(double alpha, double beta, int j) {
  check_shapes(alpha, beta);
  if (j < 0) throw std::invalid_argument("beta_moment: order must be nonnegative");
  if (j == 0) return 1.0;
  // (-1)^j / ((j+1) B(a,b)) sum_k (-1)^k B(a+k, b+j-k) / B(1+k, 1+j-k)
  const double lb = log_beta_fn(alpha, beta);
  double sum = 0.0;
  for (int k = 0; k <= j; ++k) {
    const double term = std::exp(log_beta_fn(alpha + k, beta + j - k) - lb -
                                 log_beta_fn(1.0 + k, 1.0 + j - k));
    sum += (k % 2 == 0) ? term : -term;
  }
  sum /= (j + 1);
  return (j % 2 == 0) ? sum : -sum;
}

double jeffreys_fisher_info(double theta) {
  const double x = std::abs(theta);
  if (x > 1.0) throw std::domain_error("jeffreys_fisher_info: |theta| > 1");
  if (x <= 0.7) {
    double sum = 0.0;
    double power = 1.0;
    const double x2 = x * x;
    for (int k = 0;; ++k) {
      const double denom = 2.0 * k + 3.0;
      sum += power / (denom * denom);
      power *= x2;
      const double next = 2.0 * k + 5.0;
      if (power / (1.0 - x2) / (next * next) < 1e-14 * 1e-3 || power == 0.0) break;
    }
    return sum;
  }
  // I(theta) = (chi2(x)/x - 1) / x^2, with chi2 reflected near 1.
  return (legendre_chi2(x) / x - 1.0) / (x * x);
}

Prior::Prior(PriorKind kind) : kind_(std::move(kind)) {
  if (auto* b = std::get_if<TransformedBeta>(&kind_)) check_shapes(b->alpha, b->beta);
  if (auto* pm = std::get_if<PointMass>(&kind_)) {
    if (pm->value < -1.0 || pm->value > 1.0) throw std::invalid_argument("point mass outside [-1, 1]");
  }
  if (auto* t = std::get_if<Tabulated>(&kind_)) {
    if (t->grid.size() < 2 || t->grid.size() != t->density.size()) {
      throw std::invalid_argument("tabulated prior: need >= 2 (grid, density) rows");
    }
    for (std::size_t i = 0; i < t->grid.size(); ++i) {
      if (t->density[i] < 0.0 || !std::isfinite(t->density[i])) {
        throw std::invalid_argument("tabulated prior: densities must be finite and nonnegative");
      }
      if (i > 0 && !(t->grid[i] > t->grid[i - 1])) {
        throw std::invalid_argument("tabulated prior: grid must be strictly increasing");
      }
    }
    if (t->grid.front() < -1.0 || t->grid.back() > 1.0) {
      throw std::invalid_argument("tabulated prior: grid must lie in [-1, 1]");
    }
    double mass = 0.0;
    for (std::size_t i = 1; i < t->grid.size(); ++i) {
      mass += 0.5 * (t->density[i] + t->density[i - 1]) * (t->grid[i] - t->grid[i - 1]);
    }
    if (!(mass > 0.0)) throw std::invalid_argument("tabulated prior: zero total mass");
    for (double& d : t->density) d /= mass;
  }
  if (std::holds_alternative<JeffreysFgm>(kind_)) {
    const auto half = integrate([](double t) { return std::sqrt(jeffreys_fisher_info(t)); }, 0.0,
                                1.0, 1e-13);
    normalizer_ = 2.0 * half.value;
  }
  if (std::holds_alternative<JeffreysFgm>(kind_) || std::holds_alternative<Tabulated>(kind_)) {
    cached_moments_.resize(kCachedMomentOrder + 1);
    for (int j = 0; j <= kCachedMomentOrder; ++j) cached_moments_[static_cast<std::size_t>(j)] = quadrature_moment(j);
    cdf_grid_.resize(kCdfGridSize + 1);
    cdf_.resize(kCdfGridSize + 1);
    double acc = 0.0;
    double prev = 0.0;
    for (int i = 0; i <= kCdfGridSize; ++i) {
      const double t = -1.0 + 2.0 * i / kCdfGridSize;
      const double d = raw_density(t) / normalizer_;
      if (i > 0) acc += 0.5 * (d + prev) * (2.0 / kCdfGridSize);
      cdf_grid_[static_cast<std::size_t>(i)] = t;
      cdf_[static_cast<std::size_t>(i)] = acc;
      prev = d;
    }
    for (double& c : cdf_) c /= acc;
  }
}

Prior Prior::tabulated(std::vector<double> grid, std::vector<double> density) {
  return Prior(Tabulated{std::move(grid), std::move(density)});
}

Prior Prior::from_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prior table '" + path + "'");
  std::vector<double> grid, dens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double g, d;
    std::string extra;
    if (!(ls >> g >> d) || (ls >> extra)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected two numeric columns (grid density)");
    }
    grid.push_back(g);
    dens.push_back(d);
  }
  return tabulated(std::move(grid), std::move(dens));
}

Prior Prior::parse(std::string_view spec) {
  if (spec.starts_with("prior=")) spec.remove_prefix(6);
  if (spec == "jeffreys") return jeffreys();
  if (spec.starts_with("beta:")) {
    std::string body(spec.substr(5));
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("beta prior: expected beta:<alpha>,<beta>");
    return beta(std::stod(body.substr(0, comma)), std::stod(body.substr(comma + 1)));
  }
  if (spec.starts_with("table:")) return from_table_file(std::string(spec.substr(6)));
  if (spec.starts_with("point:")) return point_mass(std::stod(std::string(spec.substr(6))));
  throw std::invalid_argument("unknown prior '" + std::string(spec) +
                              "' (expected jeffreys, beta:a,b, table:<file> or point:<v>)");
}

std::string Prior::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&os](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TransformedBeta>) os << "beta:" << k.alpha << ',' << k.beta;
        else if constexpr (std::is_same_v<K, JeffreysFgm>) os << "jeffreys";
        else if constexpr (std::is_same_v<K, Tabulated>) os << "table[" << k.grid.size() << ']';
        else os << "point:" << k.value;
      },
      kind_);
  return os.str();
}

bool Prior::symmetric() const {
  return std::visit(
      [this](const auto& k) -> bool {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TransformedBeta>) return k.alpha == k.beta;
        else if constexpr (std::is_same_v<K, JeffreysFgm>) return true;
        else if constexpr (std::is_same_v<K, PointMass>) return k.value == 0.0;
        else {
          for (double t = 0.0; t <= 1.0; t += 0.01) {
            if (std::abs(raw_density(t) - raw_density(-t)) > 1e-12) return false;
          }
          return true;
        }
      },
      kind_);
}

double Prior::raw_density(double theta) const {
  return std::visit(
      [theta](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TransformedBeta>) {
          const double t = 0.5 * (theta + 1.0);
          if (t <= 0.0) return k.alpha < 1.0 ? HUGE_VAL : (k.alpha == 1.0 ? 0.5 / std::exp(log_beta_fn(k.alpha, k.beta)) : 0.0);
          if (t >= 1.0) return k.beta < 1.0 ? HUGE_VAL : (k.beta == 1.0 ? 0.5 / std::exp(log_beta_fn(k.alpha, k.beta)) : 0.0);
          return 0.5 * std::exp((k.alpha - 1.0) * std::log(t) + (k.beta - 1.0) * std::log1p(-t) -
                                log_beta_fn(k.alpha, k.beta));
        } else if constexpr (std::is_same_v<K, JeffreysFgm>) {
          return std::sqrt(jeffreys_fisher_info(theta));
        } else if constexpr (std::is_same_v<K, Tabulated>) {
          if (theta < k.grid.front() || theta > k.grid.back()) return 0.0;
          auto it = std::upper_bound(k.grid.begin(), k.grid.end(), theta);
          if (it == k.grid.end()) return k.density.back();
          const auto i = static_cast<std::size_t>(it - k.grid.begin());
          const double w = (theta - k.grid[i - 1]) / (k.grid[i] - k.grid[i - 1]);
          return (1.0 - w) * k.density[i - 1] + w * k.density[i];
        } else {
          throw std::logic_error("point-mass prior has no density");
        }
      },
      kind_);
}

double Prior::density(double theta) const {
  if (theta < -1.0 || theta > 1.0) {
    throw std::domain_error("prior density: theta " + std::to_string(theta) + " outside [-1, 1]");
  }
  return raw_density(theta) / normalizer_;
}

double Prior::quadrature_moment(int j) const {
  const bool jeff = std::holds_alternative<JeffreysFgm>(kind_);
  if (jeff && j % 2 == 1) return 0.0;
  auto f = [this, j](double t) { return std::pow(t, j) * raw_density(t) / normalizer_; };
  if (const auto* tab = std::get_if<Tabulated>(&kind_)) {
    // GK15 is exact on each linear panel times a polynomial of this degree.
    double sum = 0.0;
    for (std::size_t i = 1; i < tab->grid.size(); ++i) {
      sum += integrate(f, tab->grid[i - 1], tab->grid[i], 1e-12, 0).value;
    }
    return sum;
  }
  if (jeff) return 2.0 * integrate(f, 0.0, 1.0, 1e-13).value;
  return integrate(f, -1.0, 1.0, 1e-12).value;
}

MomentTable Prior::moments(int upto) const {
  if (upto < 0) throw std::invalid_argument("moments: order must be nonnegative");
  MomentTable table;
  table.moments.resize(static_cast<std::size_t>(upto) + 1);
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        for (int j = 0; j <= upto; ++j) {
          double m;
          if constexpr (std::is_same_v<K, TransformedBeta>) {
            m = beta_moment(k.alpha, k.beta, j);
          } else if constexpr (std::is_same_v<K, PointMass>) {
            m = std::pow(k.value, j);
          } else {
            m = j <= kCachedMomentOrder ? cached_moments_[static_cast<std::size_t>(j)] : quadrature_moment(j);
            table.provenance = MomentTable::Provenance::quadrature;
          }
          table.moments[static_cast<std::size_t>(j)] = m;
        }
      },
      kind_);
  table.moments[0] = 1.0;
  return table;
}

double Prior::sample(Rng& rng) const {
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TransformedBeta>) {
          return 2.0 * rng.beta(k.alpha, k.beta) - 1.0;
        } else if constexpr (std::is_same_v<K, PointMass>) {
          return k.value;
        } else {
          const double u = rng.uniform();
          auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
          if (it == cdf_.begin()) return cdf_grid_.front();
          if (it == cdf_.end()) return cdf_grid_.back();
          const auto i = static_cast<std::size_t>(it - cdf_.begin());
          const double span = cdf_[i] - cdf_[i - 1];
          const double w = span > 0.0 ? (u - cdf_[i - 1]) / span : 0.0;
          return cdf_grid_[i - 1] + w * (cdf_grid_[i] - cdf_grid_[i - 1]);
        }
      },
      kind_);
}

double density(const Prior& prior, double theta) { return prior.density(theta); }
MomentTable moments(const Prior& prior, int upto) { return prior.moments(upto); }
double sample_prior(const Prior& prior, Rng& rng) { return prior.sample(rng); }

double tv_distance(const Prior& p, const Prior& q, double tol) {
  auto f = [&](double t) { return 0.5 * std::abs(p.density(t) - q.density(t)); };
  return integrate(f, -1.0, 1.0, tol, 40).value;
}

}  // namespace rankcop
