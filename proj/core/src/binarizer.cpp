// SPDX-License-Identifier: Apache-2.0
#include "hbvla/binarizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hbvla/half.hpp"

namespace hbvla {

namespace {

double mean_of(std::span<const double> u) {
  double s = 0.0;
  for (double v : u) s += v;
  return s / static_cast<double>(u.size());
}

}  // namespace

GroupQuantParams quantize_group(std::span<const double> u, std::optional<double> mu_override,
                                MetaPrecision meta) {
  GroupQuantParams p;
  if (u.empty()) return p;
  p.mu = mu_override ? *mu_override : mean_of(u);
  if (meta == MetaPrecision::half && !mu_override) p.mu = round_to_half(p.mu);
  p.signs.resize(u.size());
  double dev = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double c = u[j] - p.mu;
    p.signs[j] = c >= 0.0 ? 1 : 0;
    dev += std::abs(c);
  }
  p.alpha = dev / static_cast<double>(u.size());
  if (meta == MetaPrecision::half) p.alpha = round_to_half(p.alpha);
  return p;
}

double group_error(std::span<const double> u, const GroupQuantParams& p) {
  double e = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double d = u[j] - p.value(j);
    e += d * d;
  }
  return e;
}

double grouping_error(std::span<const double> u, const std::vector<GroupSpec>& groups,
                      std::optional<double> mu_override) {
  double e = 0.0;
  std::vector<double> vals;
  for (const auto& g : groups) {
    vals.clear();
    for (std::size_t idx : g.members) vals.push_back(u[idx]);
    e += group_error(vals, quantize_group(vals, mu_override));
  }
  return e;
}

std::vector<GroupSpec> split_band(std::span<const double> u, std::size_t max_groups,
                                  std::optional<double> mu_override) {
  if (max_groups != 1 && max_groups != 2) {
    fail(ErrorCode::configuration, "split_band: max_groups must be 1 or 2, got " +
                                       std::to_string(max_groups));
  }
  const std::size_t n = u.size();
  GroupSpec all;
  all.members.resize(n);
  std::iota(all.members.begin(), all.members.end(), std::size_t{0});
  all.shared_mean = mu_override.has_value();
  if (max_groups == 1 || n < 2) return {all};

  const double centre = mu_override ? *mu_override : mean_of(u);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> dev(n);
  for (std::size_t j = 0; j < n; ++j) dev[j] = std::abs(u[j] - centre);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dev[a] < dev[b]; });

  std::size_t best_break = 0;  // 0 = no split
  double best;
  if (mu_override) {
    // Fixed centre: a group's error is sum(dev^2) - (sum dev)^2 / size.
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      s1[k + 1] = s1[k] + dev[idx[k]];
      s2[k + 1] = s2[k] + dev[idx[k]] * dev[idx[k]];
    }
    auto err = [&](std::size_t a, std::size_t b) {
      const double cnt = static_cast<double>(b - a);
      const double sum = s1[b] - s1[a];
      return std::max(0.0, (s2[b] - s2[a]) - sum * sum / cnt);
    };
    best = err(0, n);
    for (std::size_t b = 1; b < n; ++b) {
      const double e = err(0, b) + err(b, n);
      if (e < best) {
        best = e;
        best_break = b;
      }
    }
  } else {
    std::vector<double> lo_vals, hi_vals;
    auto side_error = [&](std::size_t a, std::size_t b, std::vector<double>& vals) {
      vals.clear();
      for (std::size_t k = a; k < b; ++k) vals.push_back(u[idx[k]]);
      return group_error(vals, quantize_group(vals));
    };
    best = side_error(0, n, lo_vals);
    for (std::size_t b = 1; b < n; ++b) {
      const double e = side_error(0, b, lo_vals) + side_error(b, n, hi_vals);
      if (e < best) {
        best = e;
        best_break = b;
      }
    }
  }
  if (best_break == 0) return {all};

  GroupSpec dense, sparse;
  dense.shared_mean = sparse.shared_mean = mu_override.has_value();
  dense.members.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(best_break));
  sparse.members.assign(idx.begin() + static_cast<std::ptrdiff_t>(best_break), idx.end());
  std::sort(dense.members.begin(), dense.members.end());
  std::sort(sparse.members.begin(), sparse.members.end());
  return {dense, sparse};
}

SharedMeanBand quantize_band_shared_mean(const Matrix& band,
                                         const std::vector<std::vector<GroupSpec>>& groups,
                                         MetaPrecision meta) {
  if (band.rows() == 0 || band.cols() == 0) fail(ErrorCode::degenerate_input, "shared-mean band is empty");
  if (groups.size() != band.rows()) fail(ErrorCode::dimension, "shared-mean band: one group list per row");
  SharedMeanBand out;
  out.row_mu.resize(band.rows());
  out.groups = groups;
  out.params.resize(band.rows());
  std::vector<double> vals;
  for (std::size_t r = 0; r < band.rows(); ++r) {
    const auto row = band.row(r);
    double mu = mean_of(row);
    if (meta == MetaPrecision::half) mu = round_to_half(mu);
    out.row_mu[r] = mu;
    for (auto& g : out.groups[r]) {
      g.row = r;
      g.shared_mean = true;
      vals.clear();
      for (std::size_t idx : g.members) {
        if (idx >= row.size()) fail(ErrorCode::dimension, "shared-mean band: member out of range");
        vals.push_back(row[idx]);
      }
      out.params[r].push_back(quantize_group(vals, mu, meta));
    }
  }
  return out;
}

SharedMeanBand quantize_band_shared_mean(const Matrix& band, std::size_t window,
                                         std::size_t max_groups, MetaPrecision meta) {
  if (window == 0) fail(ErrorCode::configuration, "shared-mean band: window must be positive");
  std::vector<std::vector<GroupSpec>> groups(band.rows());
  for (std::size_t r = 0; r < band.rows(); ++r) {
    const auto row = band.row(r);
    double mu = mean_of(row);
    if (meta == MetaPrecision::half) mu = round_to_half(mu);
    for (std::size_t w0 = 0; w0 < row.size(); w0 += window) {
      const std::size_t len = std::min(window, row.size() - w0);
      auto specs = split_band(row.subspan(w0, len), max_groups, mu);
      for (auto& g : specs) {
        for (auto& idx : g.members) idx += w0;
        groups[r].push_back(std::move(g));
      }
    }
  }
  return quantize_band_shared_mean(band, groups, meta);
}

std::vector<double> dequantize_band(const std::vector<GroupSpec>& specs,
                                    const std::vector<GroupQuantParams>& params,
                                    std::size_t len) {
  if (specs.size() != params.size()) fail(ErrorCode::inconsistent, "dequantize_band: spec/param count mismatch");
  std::vector<double> out(len, 0.0);
  std::vector<bool> covered(len, false);
  for (std::size_t g = 0; g < specs.size(); ++g) {
    if (params[g].signs.size() != specs[g].members.size()) {
      fail(ErrorCode::inconsistent, "dequantize_band: sign count does not match group size");
    }
    for (std::size_t j = 0; j < specs[g].members.size(); ++j) {
      const std::size_t idx = specs[g].members[j];
      if (idx >= len || covered[idx]) fail(ErrorCode::inconsistent, "dequantize_band: bad member index");
      covered[idx] = true;
      out[idx] = params[g].value(j);
    }
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
    fail(ErrorCode::inconsistent, "dequantize_band: groups do not cover the band");
  }
  return out;
}

Matrix dequantize_band(const SharedMeanBand& band, std::size_t len) {
  Matrix out(band.groups.size(), len);
  for (std::size_t r = 0; r < band.groups.size(); ++r) {
    const auto row = dequantize_band(band.groups[r], band.params[r], len);
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace hbvla
