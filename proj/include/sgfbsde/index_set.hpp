#pragma once

// Multi-index bookkeeping shared by sparse interpolation and sparse
// quadrature: admissible level sets, the hierarchical basis index set and
// the Smolyak combination coefficients.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgfbsde/error.hpp"

namespace sgfbsde {

template <class Tag>
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> components) : c_(std::move(components)) {}
  MultiIndex(std::initializer_list<int> components) : c_(components) {}

  std::size_t size() const noexcept { return c_.size(); }
  int operator[](std::size_t i) const { return c_[i]; }
  int& operator[](std::size_t i) { return c_[i]; }
  const std::vector<int>& components() const noexcept { return c_; }
  int sum() const { return std::accumulate(c_.begin(), c_.end(), 0); }

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  std::vector<int> c_;
};

struct LevelTag {};
struct BasisTag {};

/// Level multi-index (i_1, ..., i_q), every component >= 1.
using LevelIndex = MultiIndex<LevelTag>;
/// Hierarchical basis multi-index (k_1, ..., k_q), every component >= 0.
using BasisIndex = MultiIndex<BasisTag>;

/// One-dimensional hierarchical index conventions for the nested CGL
/// sequence with N_i = 2^i + 1 points. Level 1 owns indices {0, 1, 2};
/// level j >= 2 owns 2^(j-1)+1 ... 2^j. Index k doubles as the Chebyshev
/// degree of the associated basis function.
namespace hier {

constexpr int level_size(int level) { return (1 << level) + 1; }

constexpr int new_count(int level) { return level == 1 ? 3 : (1 << (level - 1)); }

constexpr int first_index(int level) { return level == 1 ? 0 : (1 << (level - 1)) + 1; }

constexpr int owning_level(int k) {
  if (k <= 2) return 1;
  int j = 2;
  while ((1 << j) < k) ++j;
  return j;
}

}  // namespace hier

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;  // exact at every step
  return r;
}

struct LevelSet {
  int q = 0;
  int p = 0;
  std::vector<LevelIndex> members;
};

namespace detail {

inline void check_qp(int q, int p) {
  require(q >= 1, "dimension q must be >= 1");
  require(p >= q, "sparseness p must satisfy p >= q");
  require(p - q <= 14, "sparseness p - q too large");
}

// Lexicographic enumeration (first component most significant) of all
// q-tuples with components >= 1 and component sum in [min_sum, max_sum].
inline void enumerate_levels(int q, int min_sum, int max_sum,
                             std::vector<LevelIndex>& out) {
  std::vector<int> cur(static_cast<std::size_t>(q), 1);
  auto rec = [&](auto&& self, int dim, int used) -> void {
    if (dim == q) {
      if (used >= min_sum) out.emplace_back(cur);
      return;
    }
    const int remaining_dims = q - dim - 1;
    for (int v = 1; used + v + remaining_dims <= max_sum; ++v) {
      cur[static_cast<std::size_t>(dim)] = v;
      self(self, dim + 1, used + v);
    }
  };
  rec(rec, 0, 0);
}

}  // namespace detail

/// All level indices i with q <= |i|_1 <= p, in lexicographic order.
inline LevelSet level_set(int q, int p) {
  detail::check_qp(q, p);
  LevelSet s{q, p, {}};
  detail::enumerate_levels(q, q, p, s.members);
  return s;
}

/// Smolyak prefactor (-1)^(p-|i|) * C(q-1, p-|i|). Only defined for
/// p-q < |i|_1 <= p; everywhere else the coefficient is zero and asking for
/// it is a caller bug.
inline int combination_coefficient(int q, int p, const LevelIndex& i) {
  detail::check_qp(q, p);
  require(static_cast<int>(i.size()) == q, "level index has wrong dimension");
  const int s = i.sum();
  require(s > p - q && s <= p, "combination coefficient requested outside p-q < |i| <= p");
  const auto c = binomial(q - 1, p - s);
  return static_cast<int>(((p - s) % 2 == 0) ? c : -c);
}

/// The hierarchical basis index set I_q^p, stored as one block per
/// admissible level index. Blocks follow the lexicographic level order and
/// entries inside a block are lexicographic in their local positions.
class BasisIndexSet {
 public:
  BasisIndexSet(int q, int p) : q_(q), p_(p) {
    auto levels = level_set(q, p);
    levels_ = std::move(levels.members);
    const auto uq = static_cast<std::size_t>(q);
    offsets_.reserve(levels_.size() + 1);
    strides_.resize(levels_.size() * uq);
    std::size_t offset = 0;
    for (std::size_t b = 0; b < levels_.size(); ++b) {
      const auto& lv = levels_[b];
      std::size_t stride = 1;
      for (std::size_t m = uq; m-- > 0;) {
        strides_[b * uq + m] = stride;
        stride *= static_cast<std::size_t>(hier::new_count(lv[m]));
      }
      offsets_.push_back(offset);
      block_of_.emplace(key(lv.components()), b);
      offset += stride;
    }
    offsets_.push_back(offset);

    entries_.resize(offset * uq);
    for (std::size_t b = 0; b < levels_.size(); ++b) {
      const auto& lv = levels_[b];
      for (std::size_t local = 0; local < block_size(b); ++local) {
        std::size_t rem = local;
        const std::size_t f = offsets_[b] + local;
        for (std::size_t m = 0; m < uq; ++m) {
          const std::size_t st = strides_[b * uq + m];
          const auto r = static_cast<int>(rem / st);
          rem %= st;
          entries_[f * uq + m] = static_cast<std::uint16_t>(hier::first_index(lv[m]) + r);
        }
      }
    }
  }

  int dimension() const noexcept { return q_; }
  int sparseness() const noexcept { return p_; }
  std::size_t size() const noexcept { return offsets_.back(); }

  /// Largest one-dimensional index present, 2^(p-q+1).
  int max_1d_index() const noexcept { return 1 << (p_ - q_ + 1); }

  std::size_t block_count() const noexcept { return levels_.size(); }
  const LevelIndex& block_level(std::size_t b) const { return levels_[b]; }
  std::size_t block_offset(std::size_t b) const { return offsets_[b]; }
  std::size_t block_size(std::size_t b) const { return offsets_[b + 1] - offsets_[b]; }
  std::size_t block_stride(std::size_t b, std::size_t m) const {
    return strides_[b * static_cast<std::size_t>(q_) + m];
  }

  /// The one-dimensional indices of flat entry f.
  std::span<const std::uint16_t> entry(std::size_t f) const {
    const auto uq = static_cast<std::size_t>(q_);
    return {entries_.data() + f * uq, uq};
  }

  BasisIndex index(std::size_t f) const {
    const auto e = entry(f);
    return BasisIndex(std::vector<int>(e.begin(), e.end()));
  }

  const std::vector<LevelIndex>& levels() const noexcept { return levels_; }

  std::optional<std::size_t> find_block(std::span<const int> levels) const {
    const auto it = block_of_.find(key(levels));
    if (it == block_of_.end()) return std::nullopt;
    return it->second;
  }

  /// Flat position of a basis index, or nullopt if it is not in I_q^p.
  std::optional<std::size_t> position(const BasisIndex& k) const {
    if (static_cast<int>(k.size()) != q_) return std::nullopt;
    std::vector<int> lv(k.size());
    for (std::size_t m = 0; m < k.size(); ++m) {
      if (k[m] < 0) return std::nullopt;
      lv[m] = hier::owning_level(k[m]);
    }
    const auto b = find_block(lv);
    if (!b) return std::nullopt;
    std::size_t f = offsets_[*b];
    for (std::size_t m = 0; m < k.size(); ++m)
      f += static_cast<std::size_t>(k[m] - hier::first_index(lv[m])) * block_stride(*b, m);
    return f;
  }

 private:
  static std::uint64_t key(std::span<const int> levels) {
    std::uint64_t k = 0;
    for (int l : levels) k = (k << 5) | static_cast<std::uint64_t>(l);
    return k;
  }

  int q_;
  int p_;
  std::vector<LevelIndex> levels_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> strides_;
  std::vector<std::uint16_t> entries_;
  std::unordered_map<std::uint64_t, std::size_t> block_of_;
};

inline BasisIndexSet basis_index_set(int q, int p) { return BasisIndexSet(q, p); }

}  // namespace sgfbsde
