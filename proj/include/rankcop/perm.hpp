#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rankcop/rng.hpp"

namespace rankcop {

/// Raised when an operation would materialize more elements than allowed.
class CapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// A bijection of {0, ..., n-1}, stored in one-line notation. The public
/// text form is 1-based ("3,1,2"); indexing is 0-based.
class Permutation {
 public:
  Permutation() = default;

  /// Takes 0-based values; throws std::invalid_argument if they are not a bijection.
  explicit Permutation(std::vector<int> values);

  static Permutation identity(int n);
  /// a = (n, ..., 1)
  static Permutation anti_identity(int n);
  static Permutation from_one_based(std::span<const int> values);
  /// Parses "3,1,2" (1-based, comma separated).
  static Permutation parse(std::string_view text);

  int size() const noexcept { return static_cast<int>(values_.size()); }
  int operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& values() const noexcept { return values_; }
  std::vector<int> one_based() const;
  std::string to_string() const;

  bool is_identity() const noexcept;

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

 private:
  struct Unchecked {};
  Permutation(std::vector<int> values, Unchecked) : values_(std::move(values)) {}
  friend Permutation compose(const Permutation&, const Permutation&);
  friend Permutation inverse(const Permutation&);
  friend class PermutationBuilder;

  std::vector<int> values_;
};

struct PermutationHash {
  std::size_t operator()(const Permutation& p) const noexcept;
};

/// Builds permutations from values already known to be bijective (hot paths).
class PermutationBuilder {
 public:
  static Permutation adopt(std::vector<int> values) {
    return Permutation(std::move(values), Permutation::Unchecked{});
  }
};

/// Ascending rank: r(i) = #{j : g_j <= g_i}. A vector with any tie maps to the identity.
Permutation rank_of(std::span<const double> grades);
/// Rank of integer values (all distinct by precondition of callers; ties -> identity).
Permutation rank_of(std::span<const int> values);

/// (p o q)(i) = p(q(i))
Permutation compose(const Permutation& p, const Permutation& q);
Permutation inverse(const Permutation& p);

/// Order used to pick one ranking among equally good ones: lexicographic on the
/// objects listed best-first by rank, i.e. on the one-line form of the inverse.
bool tie_break_less(const Permutation& a, const Permutation& b);

/// Number of discordant pairs between s and t.
std::int64_t kendall_distance(const Permutation& s, const Permutation& t);

/// Ranking of r restricted to the positions in `indices` (0-based, strictly increasing).
Permutation induced_subranking(const Permutation& r, std::span<const int> indices);

/// An observed ranking of m of the n objects: sub_perm ranks the objects at
/// `indices` (0-based, strictly increasing) among themselves. m == 0 is the
/// unconstrained case where every permutation of size n is compatible.
class IncompleteRanking {
 public:
  IncompleteRanking(Permutation sub_perm, std::vector<int> indices, int n);

  static IncompleteRanking unconstrained(int n);
  /// Parses "s*=2,1,3; M*=2,4,5; n=7" (1-based).
  static IncompleteRanking parse(std::string_view text);

  const Permutation& sub_perm() const noexcept { return sub_perm_; }
  const std::vector<int>& indices() const noexcept { return indices_; }
  /// Positions not in indices(), increasing.
  const std::vector<int>& free_positions() const noexcept { return free_; }
  int n() const noexcept { return n_; }
  int m() const noexcept { return static_cast<int>(indices_.size()); }
  /// ordered_slots()[k] is the position in indices() that must hold the k-th
  /// smallest of the ranked values, i.e. indices()[(s*)^{-1}(k)].
  const std::vector<int>& ordered_slots() const noexcept { return ordered_slots_; }

  std::string to_string() const;

 private:
  Permutation sub_perm_;
  std::vector<int> indices_;
  std::vector<int> free_;
  std::vector<int> ordered_slots_;
  int n_ = 0;
};

/// Transforms an observation (expert ranking r_x, user's ranking r_y_star of the
/// objects in `observed`) into the expert-aligned incomplete ranking (s*, M*).
IncompleteRanking to_star_form(const Permutation& r_x, const Permutation& r_y_star,
                               std::span<const int> observed);

bool is_compatible(const Permutation& s, const IncompleteRanking& inc);

/// n!/m!, saturating at UINT64_MAX.
std::uint64_t compatible_count(const IncompleteRanking& inc);

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Every compatible permutation, sorted lexicographically.
std::vector<Permutation> enumerate_compatible(const IncompleteRanking& inc,
                                              std::uint64_t cap = kDefaultEnumerationCap);

/// All n! permutations in lexicographic order.
std::vector<Permutation> all_permutations(int n, std::uint64_t cap = kDefaultEnumerationCap);

/// Reorders the values sitting at the ranked positions of `values` so that
/// their induced ranking is the observed one.
void restore_pattern(std::vector<int>& values, const IncompleteRanking& inc);

/// Uniform draw from the compatible set.
Permutation random_compatible(const IncompleteRanking& inc, Rng& rng);

}  // namespace rankcop
