// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hbvla/tools/bench.hpp"

namespace hbvla::tools {

Matrix fixture_matrix() {
  return Matrix::from_rows({
      {0.9, -1.3, 0.4, 2.1},
      {-0.7, 0.2, 1.6, -0.5},
      {1.1, -0.8, -1.9, 0.3},
      {0.05, 1.45, -0.6, -1.2},
  });
}

Matrix gaussian_weights(std::size_t n, std::size_t m, Rng& rng) {
  return rng.normal_matrix(n, m);
}

Matrix two_cluster_weights(std::size_t n, std::size_t m, Rng& rng, double separation,
                           ClusterLayout layout) {
  std::vector<double> dir(n);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : dir) v = rng.normal();
    norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
  }
  const double half = 0.5 * separation / norm;
  std::vector<int> label(m);
  for (std::size_t c = 0; c < m; ++c) label[c] = static_cast<int>(c % 2);
  if (layout == ClusterLayout::shuffled) {
    for (std::size_t i = m; i > 1; --i) std::swap(label[i - 1], label[rng.below(i)]);
  }
  Matrix w = rng.normal_matrix(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) w(r, c) += (label[c] == 0 ? half : -half) * dir[r];
  return w;
}

Matrix heavy_tail_col_weights(std::size_t n, std::size_t m, Rng& rng) {
  Matrix w = rng.normal_matrix(n, m);
  const std::size_t count = std::max<std::size_t>(1, m / 20);
  std::vector<std::size_t> cols(m);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(m - i);
    std::swap(cols[i], cols[j]);
  }
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t r = 0; r < n; ++r) w(r, cols[i]) *= 10.0;
  return w;
}

std::uint64_t case_seed(const BenchCase& c, std::uint64_t run_seed) noexcept {
  return splitmix64(c.seed ^ splitmix64(run_seed));
}

BenchInstance generate_instance(const BenchCase& c, std::uint64_t run_seed) {
  if (c.n == 0 || c.m == 0) fail(ErrorCode::configuration, "case " + c.name + ": dims must be positive");
  const Rng base(case_seed(c, run_seed));
  Rng wr = base.split(0);
  Rng xr = base.split(1);
  BenchInstance inst;
  switch (c.generator) {
    case Generator::gaussian:
      inst.w = gaussian_weights(c.n, c.m, wr);
      break;
    case Generator::two_cluster:
      inst.w = two_cluster_weights(c.n, c.m, wr);
      break;
    case Generator::heavy_tail_cols:
      inst.w = heavy_tail_col_weights(c.n, c.m, wr);
      break;
    case Generator::fixture:
      if (c.n != 4 || c.m != 4) fail(ErrorCode::configuration, "case " + c.name + ": fixture is 4x4");
      inst.w = fixture_matrix();
      break;
  }
  inst.x = xr.normal_matrix(c.m, std::max<std::size_t>(c.calib_tokens, 1));
  return inst;
}

}  // namespace hbvla::tools
