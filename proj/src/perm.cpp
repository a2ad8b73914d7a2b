#include "rankcop/perm.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <numeric>
#include <sstream>

namespace rankcop {

namespace {

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view tok = text.substr(pos, comma - pos);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw std::invalid_argument("invalid integer list: '" + std::string(text) + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::string join_one_based(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i] + 1);
  }
  return out;
}

void check_same_size(const Permutation& p, const Permutation& q, const char* what) {
  if (p.size() != q.size()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch (" +
                                std::to_string(p.size()) + " vs " + std::to_string(q.size()) +
                                ")");
  }
}

}  // namespace

Permutation::Permutation(std::vector<int> values) : values_(std::move(values)) {
  std::vector<char> seen(values_.size(), 0);
  for (int v : values_) {
    if (v < 0 || v >= size() || seen[static_cast<std::size_t>(v)]) {
      throw std::invalid_argument("not a permutation: " + join_one_based(values_));
    }
    seen[static_cast<std::size_t>(v)] = 1;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return Permutation(std::move(v), Unchecked{});
}

Permutation Permutation::anti_identity(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n - 1 - i;
  return Permutation(std::move(v), Unchecked{});
}

Permutation Permutation::from_one_based(std::span<const int> values) {
  std::vector<int> v(values.begin(), values.end());
  for (int& x : v) --x;
  return Permutation(std::move(v));
}

Permutation Permutation::parse(std::string_view text) {
  auto v = parse_int_list(text);
  return from_one_based(v);
}

std::vector<int> Permutation::one_based() const {
  std::vector<int> v = values_;
  for (int& x : v) ++x;
  return v;
}

std::string Permutation::to_string() const { return join_one_based(values_); }

bool Permutation::is_identity() const noexcept {
  for (int i = 0; i < size(); ++i) {
    if (values_[static_cast<std::size_t>(i)] != i) return false;
  }
  return true;
}

std::size_t PermutationHash::operator()(const Permutation& p) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int v : p.values()) {
    h ^= static_cast<std::uint64_t>(v) + 1;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(splitmix64(h));
}

template <class T>
static Permutation rank_impl(std::span<const T> g) {
  const int n = static_cast<int>(g.size());
  std::vector<int> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g[static_cast<std::size_t>(a)] < g[static_cast<std::size_t>(b)];
  });
  std::vector<int> r(g.size());
  for (int k = 0; k < n; ++k) {
    if (k > 0 && g[static_cast<std::size_t>(order[k])] == g[static_cast<std::size_t>(order[k - 1])]) {
      return Permutation::identity(n);
    }
    r[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;
  }
  return PermutationBuilder::adopt(std::move(r));
}

Permutation rank_of(std::span<const double> grades) { return rank_impl(grades); }
Permutation rank_of(std::span<const int> values) { return rank_impl(values); }

Permutation compose(const Permutation& p, const Permutation& q) {
  check_same_size(p, q, "compose");
  std::vector<int> r(q.values_.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = p.values_[static_cast<std::size_t>(q.values_[i])];
  }
  return Permutation(std::move(r), Permutation::Unchecked{});
}

Permutation inverse(const Permutation& p) {
  std::vector<int> r(p.values_.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[static_cast<std::size_t>(p.values_[i])] = static_cast<int>(i);
  }
  return Permutation(std::move(r), Permutation::Unchecked{});
}

bool tie_break_less(const Permutation& a, const Permutation& b) {
  return inverse(a) < inverse(b);
}

std::int64_t kendall_distance(const Permutation& s, const Permutation& t) {
  check_same_size(s, t, "kendall_distance");
  // Discordant pairs of (s(i), t(i)) == inversions of t o s^{-1}.
  const int n = s.size();
  std::int64_t d = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if ((s[i] < s[j]) != (t[i] < t[j])) ++d;
    }
  }
  return d;
}

Permutation induced_subranking(const Permutation& r, std::span<const int> indices) {
  std::vector<int> sub;
  sub.reserve(indices.size());
  int prev = -1;
  for (int idx : indices) {
    if (idx < 0 || idx >= r.size()) {
      throw std::out_of_range("induced_subranking: index " + std::to_string(idx + 1) +
                              " out of range 1.." + std::to_string(r.size()));
    }
    if (idx <= prev) throw std::invalid_argument("induced_subranking: indices not increasing");
    prev = idx;
    sub.push_back(r[idx]);
  }
  return rank_of(std::span<const int>(sub));
}

IncompleteRanking::IncompleteRanking(Permutation sub_perm, std::vector<int> indices, int n)
    : sub_perm_(std::move(sub_perm)), indices_(std::move(indices)), n_(n) {
  if (n < 1) throw std::invalid_argument("incomplete ranking: n must be >= 1");
  if (static_cast<int>(indices_.size()) != sub_perm_.size()) {
    throw std::invalid_argument("incomplete ranking: |M| != size of sub-permutation");
  }
  if (m() >= n) {
    throw std::invalid_argument("incomplete ranking: m must be < n (nothing to predict)");
  }
  int prev = -1;
  for (int idx : indices_) {
    if (idx < 0 || idx >= n) throw std::out_of_range("incomplete ranking: index out of range");
    if (idx <= prev) throw std::invalid_argument("incomplete ranking: indices not increasing");
    prev = idx;
  }
  std::vector<char> in_m(static_cast<std::size_t>(n), 0);
  for (int idx : indices_) in_m[static_cast<std::size_t>(idx)] = 1;
  for (int i = 0; i < n; ++i) {
    if (!in_m[static_cast<std::size_t>(i)]) free_.push_back(i);
  }
  const Permutation sigma = inverse(sub_perm_);
  ordered_slots_.resize(indices_.size());
  for (int k = 0; k < m(); ++k) {
    ordered_slots_[static_cast<std::size_t>(k)] = indices_[static_cast<std::size_t>(sigma[k])];
  }
}

IncompleteRanking IncompleteRanking::unconstrained(int n) {
  return IncompleteRanking(Permutation{}, {}, n);
}

IncompleteRanking IncompleteRanking::parse(std::string_view text) {
  std::string sstar, mstar, nstr;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t semi = text.find(';', pos);
    if (semi == std::string_view::npos) semi = text.size();
    std::string_view part = text.substr(pos, semi - pos);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("incomplete ranking: missing '='");
    std::string key(part.substr(0, eq));
    std::string value(part.substr(eq + 1));
    if (key == "s*") sstar = value;
    else if (key == "M*") mstar = value;
    else if (key == "n") nstr = value;
    else throw std::invalid_argument("incomplete ranking: unknown key '" + key + "'");
    pos = semi + 1;
  }
  if (nstr.empty()) throw std::invalid_argument("incomplete ranking: missing n");
  const int n = std::stoi(nstr);
  if (sstar.empty() && mstar.empty()) return unconstrained(n);
  std::vector<int> idx = parse_int_list(mstar);
  for (int& i : idx) --i;
  return IncompleteRanking(Permutation::parse(sstar), std::move(idx), n);
}

std::string IncompleteRanking::to_string() const {
  return "s*=" + sub_perm_.to_string() + "; M*=" + join_one_based(indices_) +
         "; n=" + std::to_string(n_);
}

IncompleteRanking to_star_form(const Permutation& r_x, const Permutation& r_y_star,
                               std::span<const int> observed) {
  const int n = r_x.size();
  const int m = static_cast<int>(observed.size());
  if (r_y_star.size() != m) {
    throw std::invalid_argument("to_star_form: |M| differs from the size of r_y*");
  }
  if (m < 1 || m > n - 1) {
    throw std::invalid_argument("to_star_form: m must lie in [1, n-1]");
  }
  const Permutation r_x_star = induced_subranking(r_x, observed);
  Permutation s_star = compose(r_y_star, inverse(r_x_star));
  std::vector<int> mstar;
  mstar.reserve(observed.size());
  for (int i : observed) mstar.push_back(r_x[i]);
  std::sort(mstar.begin(), mstar.end());
  return IncompleteRanking(std::move(s_star), std::move(mstar), n);
}

bool is_compatible(const Permutation& s, const IncompleteRanking& inc) {
  if (s.size() != inc.n()) return false;
  const auto& slots = inc.ordered_slots();
  for (std::size_t k = 1; k < slots.size(); ++k) {
    if (s[slots[k - 1]] > s[slots[k]]) return false;
  }
  return true;
}

std::uint64_t compatible_count(const IncompleteRanking& inc) {
  std::uint64_t c = 1;
  for (int k = inc.m() + 1; k <= inc.n(); ++k) {
    const auto f = static_cast<std::uint64_t>(k);
    if (c > std::numeric_limits<std::uint64_t>::max() / f) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    c *= f;
  }
  return c;
}

void restore_pattern(std::vector<int>& values, const IncompleteRanking& inc) {
  const auto& slots = inc.ordered_slots();
  if (slots.size() < 2) return;
  int buf[64];
  std::vector<int> heap;
  int* held = buf;
  if (slots.size() > 64) {
    heap.resize(slots.size());
    held = heap.data();
  }
  for (std::size_t k = 0; k < slots.size(); ++k) held[k] = values[static_cast<std::size_t>(slots[k])];
  std::sort(held, held + slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) values[static_cast<std::size_t>(slots[k])] = held[k];
}

std::vector<Permutation> enumerate_compatible(const IncompleteRanking& inc, std::uint64_t cap) {
  const std::uint64_t count = compatible_count(inc);
  if (count > cap) {
    throw CapExceeded("enumerate_compatible: " + std::to_string(inc.n()) + "!/" +
                      std::to_string(inc.m()) + "! compatible rankings exceed the cap of " +
                      std::to_string(cap));
  }
  const int n = inc.n();
  const auto& free = inc.free_positions();
  const int nf = static_cast<int>(free.size());
  std::vector<Permutation> out;
  out.reserve(static_cast<std::size_t>(count));

  // Assign values to free positions injectively (depth-first), then place the
  // remaining values on the ranked positions in the required order.
  std::vector<int> values(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<int> cursor(static_cast<std::size_t>(nf) + 1, -1);
  auto emit = [&]() {
    std::vector<int> v = values;
    int k = 0;
    for (int val = 0; val < n; ++val) {
      if (!used[static_cast<std::size_t>(val)]) {
        v[static_cast<std::size_t>(inc.ordered_slots()[static_cast<std::size_t>(k++)])] = val;
      }
    }
    out.push_back(PermutationBuilder::adopt(std::move(v)));
  };
  if (nf == 0) {
    emit();
  } else {
    int depth = 0;
    cursor[0] = -1;
    while (depth >= 0) {
      const auto pos = static_cast<std::size_t>(free[static_cast<std::size_t>(depth)]);
      if (cursor[static_cast<std::size_t>(depth)] >= 0) {
        used[static_cast<std::size_t>(cursor[static_cast<std::size_t>(depth)])] = 0;
      }
      int next = cursor[static_cast<std::size_t>(depth)] + 1;
      while (next < n && used[static_cast<std::size_t>(next)]) ++next;
      if (next >= n) {
        cursor[static_cast<std::size_t>(depth)] = -1;
        values[pos] = -1;
        --depth;
        continue;
      }
      cursor[static_cast<std::size_t>(depth)] = next;
      used[static_cast<std::size_t>(next)] = 1;
      values[pos] = next;
      if (depth + 1 == nf) {
        emit();
      } else {
        ++depth;
        cursor[static_cast<std::size_t>(depth)] = -1;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Permutation> all_permutations(int n, std::uint64_t cap) {
  return enumerate_compatible(IncompleteRanking::unconstrained(n), cap);
}

Permutation random_compatible(const IncompleteRanking& inc, Rng& rng) {
  std::vector<int> v(static_cast<std::size_t>(inc.n()));
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v.begin(), v.end());
  restore_pattern(v, inc);
  return PermutationBuilder::adopt(std::move(v));
}

}  // namespace rankcop
