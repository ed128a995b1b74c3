// SPDX-License-Identifier: Apache-2.0
#include "hbvla/permute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace hbvla {

ColumnOrdering ColumnOrdering::identity(std::size_t m) {
  ColumnOrdering pi;
  pi.order.resize(m);
  std::iota(pi.order.begin(), pi.order.end(), std::size_t{0});
  return pi;
}

void ColumnOrdering::validate() const {
  std::vector<bool> seen(order.size(), false);
  for (std::size_t idx : order) {
    if (idx >= order.size() || seen[idx]) {
      fail(ErrorCode::permutation, "ordering is not a bijection on [0, " +
                                       std::to_string(order.size()) + ")");
    }
    seen[idx] = true;
  }
  if (self_paired && *self_paired >= order.size()) {
    fail(ErrorCode::permutation, "self-paired column out of range");
  }
}

bool ColumnOrdering::is_identity() const noexcept {
  for (std::size_t k = 0; k < order.size(); ++k)
    if (order[k] != k) return false;
  return true;
}

ColumnOrdering invert_ordering(const ColumnOrdering& pi) {
  pi.validate();
  ColumnOrdering inv;
  inv.order.resize(pi.m());
  for (std::size_t k = 0; k < pi.m(); ++k) inv.order[pi.order[k]] = k;
  return inv;
}

Matrix apply_ordering(const Matrix& w, const ColumnOrdering& pi) {
  if (pi.m() != w.cols()) fail(ErrorCode::permutation, "apply_ordering: size mismatch");
  pi.validate();
  return gather_columns(w, pi.order);
}

Matrix unapply_ordering(const Matrix& w, const ColumnOrdering& pi) {
  if (pi.m() != w.cols()) fail(ErrorCode::permutation, "unapply_ordering: size mismatch");
  pi.validate();
  Matrix out(w.rows(), w.cols(), w.precision());
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t k = 0; k < pi.m(); ++k) out(r, pi.order[k]) = w(r, k);
  return out;
}

DistanceTable pairwise_distances(const Matrix& w, std::optional<std::size_t> k) {
  const std::size_t m = w.cols();
  if (m < 2) fail(ErrorCode::degenerate_input, "pairwise_distances: need at least 2 columns");
  if (k && (*k >= m || *k == 0)) {
    fail(ErrorCode::configuration, "pairwise_distances: K=" + std::to_string(*k) +
                                       " must lie in [1, m-1] for m=" + std::to_string(m));
  }
  DistanceTable t;
  t.m = m;
  t.d.assign(m * m, 0.0);

  // Blocks of anchor columns stream over the rows once per block; the inner
  // loop runs over contiguous row entries so it vectorizes.
  constexpr std::size_t kBlock = 64;
  std::vector<double> acc;
  for (std::size_t i0 = 0; i0 < m; i0 += kBlock) {
    const std::size_t i1 = std::min(m, i0 + kBlock);
    const std::size_t width = m - i0;
    acc.assign((i1 - i0) * width, 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double* row = w.row(r).data() + i0;
      for (std::size_t i = i0; i < i1; ++i) {
        const double x = row[i - i0];
        double* a = acc.data() + (i - i0) * width;
        for (std::size_t j = i - i0 + 1; j < width; ++j) {
          const double diff = x - row[j];
          a[j] += diff * diff;
        }
      }
    }
    for (std::size_t i = i0; i < i1; ++i) {
      const double* a = acc.data() + (i - i0) * width;
      for (std::size_t j = i + 1; j < m; ++j) {
        t.d[i * m + j] = a[j - i0];
        t.d[j * m + i] = a[j - i0];
      }
    }
  }

  if (k) {
    t.neighbors.resize(m);
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) {
      idx.clear();
      for (std::size_t j = 0; j < m; ++j)
        if (j != i) idx.push_back(j);
      const double* row = t.d.data() + i * m;
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(*k), idx.end(),
                        [row](std::size_t a, std::size_t b) {
                          return row[a] < row[b] || (row[a] == row[b] && a < b);
                        });
      t.neighbors[i].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(*k));
    }
  }
  return t;
}

std::vector<double> column_norms(const Matrix& w, SeedNorm norm) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c)
      out[c] += norm == SeedNorm::l1 ? std::abs(row[c]) : row[c] * row[c];
  }
  if (norm == SeedNorm::l2)
    for (double& v : out) v = std::sqrt(v);
  return out;
}

std::vector<Pair> greedy_pairs(const DistanceTable& dist, std::span<const double> seed_norms) {
  const std::size_t m = dist.m;
  if (seed_norms.size() != m) fail(ErrorCode::dimension, "greedy_pairs: seed norm count mismatch");

  std::vector<std::size_t> seeds(m);
  std::iota(seeds.begin(), seeds.end(), std::size_t{0});
  std::stable_sort(seeds.begin(), seeds.end(), [&](std::size_t a, std::size_t b) {
    return seed_norms[a] > seed_norms[b];
  });

  std::vector<bool> used(m, false);
  std::size_t remaining = m;
  std::vector<Pair> pairs;
  pairs.reserve(m / 2 + 1);
  std::size_t cursor = 0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  while (remaining > 1) {
    while (used[seeds[cursor]]) ++cursor;
    const std::size_t i = seeds[cursor];
    std::size_t best = m;
    double best_d = kInf;
    auto consider = [&](std::size_t t) {
      if (t == i || used[t]) return;
      const double d = dist(i, t);
      if (d < best_d || (d == best_d && t < best)) {
        best_d = d;
        best = t;
      }
    };
    if (dist.has_neighbors()) {
      for (std::size_t t : dist.neighbors[i]) consider(t);
    }
    if (best == m) {
      for (std::size_t t = 0; t < m; ++t) consider(t);
    }
    pairs.emplace_back(i, best);
    used[i] = true;
    used[best] = true;
    remaining -= 2;
  }
  if (remaining == 1) {
    for (std::size_t r = 0; r < m; ++r) {
      if (!used[r]) {
        pairs.emplace_back(r, r);
        break;
      }
    }
  }
  return pairs;
}

ColumnOrdering greedy_pair_and_chain(const DistanceTable& dist, std::span<const double> seed_norms) {
  auto pairs = greedy_pairs(dist, seed_norms);
  ColumnOrdering pi;
  pi.order.reserve(dist.m);

  // The self pair is held back and appended last so every Haar window keeps
  // one greedy pair.
  std::optional<std::size_t> leftover;
  if (!pairs.empty() && pairs.back().first == pairs.back().second) {
    leftover = pairs.back().first;
    pairs.pop_back();
  }

  if (!pairs.empty()) {
    pi.order.push_back(pairs.front().first);
    pi.order.push_back(pairs.front().second);
    std::size_t tail = pairs.front().second;
    std::vector<bool> done(pairs.size(), false);
    done[0] = true;
    for (std::size_t step = 1; step < pairs.size(); ++step) {
      std::size_t best = pairs.size();
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (done[p]) continue;
        const double d = std::min(dist(tail, pairs[p].first), dist(tail, pairs[p].second));
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      auto [u, v] = pairs[best];
      // Ties keep the pair's formed orientation.
      if (dist(tail, u) > dist(tail, v)) std::swap(u, v);
      pi.order.push_back(u);
      pi.order.push_back(v);
      tail = v;
      done[best] = true;
    }
  }
  if (leftover) {
    pi.order.push_back(*leftover);
    pi.self_paired = leftover;
  }
  return pi;
}

double within_pair_cost(const DistanceTable& dist, const ColumnOrdering& pi) {
  if (pi.m() != dist.m) fail(ErrorCode::permutation, "within_pair_cost: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < pi.m(); k += 2) s += dist(pi.order[k], pi.order[k + 1]);
  return s;
}

namespace {

struct MatchingSearch {
  const DistanceTable& dist;
  std::size_t nodes;  // m, or m + 1 with the virtual node
  std::vector<bool> used;
  std::vector<Pair> current;
  std::vector<Pair> best;
  double best_cost = std::numeric_limits<double>::infinity();

  double d(std::size_t a, std::size_t b) const {
    return (a >= dist.m || b >= dist.m) ? 0.0 : dist(a, b);
  }

  void run(double cost) {
    std::size_t i = 0;
    while (i < nodes && used[i]) ++i;
    if (i == nodes) {
      if (cost < best_cost) {
        best_cost = cost;
        best = current;
      }
      return;
    }
    used[i] = true;
    for (std::size_t j = i + 1; j < nodes; ++j) {
      if (used[j]) continue;
      used[j] = true;
      current.emplace_back(i, j);
      run(cost + d(i, j));
      current.pop_back();
      used[j] = false;
    }
    used[i] = false;
  }
};

}  // namespace

OptimalPairing optimal_pairing_oracle(const DistanceTable& dist) {
  if (dist.m > 12) {
    fail(ErrorCode::size_limit, "optimal_pairing_oracle: m=" + std::to_string(dist.m) + " > 12");
  }
  if (dist.m < 2) fail(ErrorCode::degenerate_input, "optimal_pairing_oracle: need m >= 2");
  MatchingSearch s{dist, dist.m + dist.m % 2, std::vector<bool>(dist.m + dist.m % 2, false), {}, {}};
  s.run(0.0);
  OptimalPairing out;
  out.cost = s.best_cost;
  for (auto [a, b] : s.best) {
    if (b >= dist.m) out.pairs.emplace_back(a, a);
    else out.pairs.emplace_back(a, b);
  }
  return out;
}

std::optional<std::size_t> default_neighbors(std::size_t m) {
  if (m <= 512) return std::nullopt;
  return std::min<std::size_t>(32, m - 1);
}

}  // namespace hbvla
