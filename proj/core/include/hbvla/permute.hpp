// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hbvla/matrix.hpp"

namespace hbvla {

/// Column permutation pi: position k of the reordered matrix holds original
/// column order[k]. Realizes the sparse orthogonal transform P (W P).
struct ColumnOrdering {
  std::vector<std::size_t> order;
  /// Column that was paired with itself when the pairing saw an odd count.
  std::optional<std::size_t> self_paired;

  std::size_t m() const noexcept { return order.size(); }

  static ColumnOrdering identity(std::size_t m);
  /// Throws ErrorCode::permutation unless `order` is a bijection on [0, m).
  void validate() const;
  bool is_identity() const noexcept;
};

ColumnOrdering invert_ordering(const ColumnOrdering& pi);

/// Column gather: result(:, k) = w(:, pi.order[k]).
Matrix apply_ordering(const Matrix& w, const ColumnOrdering& pi);
/// Column scatter, the inverse of apply_ordering.
Matrix unapply_ordering(const Matrix& w, const ColumnOrdering& pi);

/// Squared Euclidean distances between columns, optionally with the K nearest
/// neighbours of every column (ascending distance, ties by lower index).
struct DistanceTable {
  std::size_t m = 0;
  std::vector<double> d;  // m x m, row-major
  std::vector<std::vector<std::size_t>> neighbors;

  double operator()(std::size_t i, std::size_t j) const noexcept { return d[i * m + j]; }
  bool has_neighbors() const noexcept { return !neighbors.empty(); }
};

DistanceTable pairwise_distances(const Matrix& w, std::optional<std::size_t> k = std::nullopt);

enum class SeedNorm { l1, l2 };

/// Per-column norms used to prioritise pairing seeds.
std::vector<double> column_norms(const Matrix& w, SeedNorm norm);

using Pair = std::pair<std::size_t, std::size_t>;

/// Greedy nearest-neighbour pairing followed by tail-distance chaining.
/// Seeds are taken in descending `seed_norms` order (ties: lower index).
ColumnOrdering greedy_pair_and_chain(const DistanceTable& dist,
                                     std::span<const double> seed_norms);

/// Pairing phase alone, in formation order. An odd leftover appears as (r, r).
std::vector<Pair> greedy_pairs(const DistanceTable& dist, std::span<const double> seed_norms);

/// Sum of d over consecutive Haar windows (order[2k], order[2k+1]).
double within_pair_cost(const DistanceTable& dist, const ColumnOrdering& pi);

struct OptimalPairing {
  std::vector<Pair> pairs;  // self pair (r, r) marks the node matched to the virtual node
  double cost = 0.0;
};

/// Exhaustive minimum-cost perfect matching, m <= 12. Odd m gets a virtual
/// zero-distance node. Ties resolve to the lexicographically smallest pairing.
OptimalPairing optimal_pairing_oracle(const DistanceTable& dist);

/// Default neighbour pruning for a column count: exact below 513 columns.
std::optional<std::size_t> default_neighbors(std::size_t m);

}  // namespace hbvla
