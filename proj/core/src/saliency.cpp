// SPDX-License-Identifier: Apache-2.0
#include "hbvla/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hbvla/binarizer.hpp"
#include "hbvla/linalg.hpp"

namespace hbvla {

TokenImportance token_importance(const Matrix& g, std::size_t dp, Projection p) {
  if (dp == 0) fail(ErrorCode::domain, "token_importance: d_p must be positive");
  if (g.rows() != dp) {
    fail(ErrorCode::dimension, "token_importance: gradient has " + std::to_string(g.rows()) +
                                   " rows, expected d_p=" + std::to_string(dp));
  }
  TokenImportance out;
  out.projection = p;
  out.a.assign(g.cols(), 0.0);
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row(r);
    for (std::size_t t = 0; t < g.cols(); ++t) out.a[t] += row[t] * row[t];
  }
  for (double& v : out.a) v = std::sqrt(v) / static_cast<double>(dp);
  return out;
}

RectifiedHessian rectified_hessian(const Matrix& x, std::span<const double> s, double damping) {
  if (damping < 0.0 || !std::isfinite(damping)) {
    fail(ErrorCode::domain, "rectified_hessian: damping must be a finite non-negative number");
  }
  if (!s.empty() && s.size() != x.cols()) {
    fail(ErrorCode::dimension, "rectified_hessian: importance has " + std::to_string(s.size()) +
                                   " entries for " + std::to_string(x.cols()) + " tokens");
  }
  for (double v : s) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::domain, "rectified_hessian: negative importance");
  }

  const std::size_t d = x.rows();
  Matrix xs = x;
  if (!s.empty()) {
    for (std::size_t r = 0; r < d; ++r) {
      auto row = xs.row(r);
      for (std::size_t t = 0; t < row.size(); ++t) row[t] *= s[t];
    }
  }
  RectifiedHessian out;
  out.h = Matrix(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto a = xs.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const auto b = x.row(j);
      double acc = 0.0;
      for (std::size_t t = 0; t < a.size(); ++t) acc += a[t] * b[t];
      out.h(i, j) = acc;
      out.h(j, i) = acc;
    }
  }
  if (damping > 0.0) {
    double md = mean_diagonal(out.h);
    if (!(md > 0.0)) md = 1.0;
    for (std::size_t i = 0; i < d; ++i) out.h(i, i) += damping * md;
  }
  out.damping = damping;
  out.source = s.empty() ? HessianSource::standard : HessianSource::rectified;
  return out;
}

namespace {

bool is_diagonal(const Matrix& h) {
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j)
      if (i != j && h(i, j) != 0.0) return false;
  return true;
}

std::vector<double> inverse_diagonal(const Matrix& h) {
  std::vector<double> out(h.rows());
  if (is_diagonal(h)) {
    for (std::size_t j = 0; j < h.rows(); ++j) {
      if (!(h(j, j) > 0.0)) fail(ErrorCode::singular, "column_scores: Hessian is singular");
      out[j] = 1.0 / h(j, j);
    }
    return out;
  }
  const Matrix inv = spd_inverse(h);
  for (std::size_t j = 0; j < h.rows(); ++j) out[j] = inv(j, j);
  return out;
}

}  // namespace

std::vector<double> column_scores(const Matrix& w, const RectifiedHessian& h, ScoreRule rule) {
  const std::size_t m = w.cols();
  if (h.h.rows() != m || h.h.cols() != m) {
    fail(ErrorCode::dimension, "column_scores: Hessian is " + std::to_string(h.h.rows()) + "x" +
                                   std::to_string(h.h.cols()) + ", weight has " +
                                   std::to_string(m) + " columns");
  }
  std::vector<double> norm(m);
  if (rule == ScoreRule::inverse_diag) {
    const auto dinv = inverse_diagonal(h.h);
    for (std::size_t j = 0; j < m; ++j) norm[j] = 1.0 / (dinv[j] * dinv[j]);
  } else {
    for (std::size_t j = 0; j < m; ++j) norm[j] = h.h(j, j);
  }
  std::vector<double> acc(m, 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    for (std::size_t j = 0; j < m; ++j) {
      const double s = row[j] * row[j] * norm[j];
      acc[j] += s * s;
    }
  }
  for (double& v : acc) v = std::sqrt(v);
  return acc;
}

bool SaliencyPartition::is_salient(std::size_t c) const {
  return std::binary_search(salient.begin(), salient.end(), c);
}

void SaliencyPartition::validate() const {
  std::vector<int> seen(m, 0);
  for (std::size_t c : salient) {
    if (c >= m) fail(ErrorCode::inconsistent, "partition: salient index out of range");
    ++seen[c];
  }
  for (std::size_t c : nonsalient) {
    if (c >= m) fail(ErrorCode::inconsistent, "partition: non-salient index out of range");
    ++seen[c];
  }
  for (int s : seen)
    if (s != 1) fail(ErrorCode::inconsistent, "partition: sets are not a disjoint cover");
  if (!std::is_sorted(salient.begin(), salient.end()) ||
      !std::is_sorted(nonsalient.begin(), nonsalient.end())) {
    fail(ErrorCode::inconsistent, "partition: index sets must be sorted");
  }
  if (salient.size() > candidate_budget) {
    fail(ErrorCode::inconsistent, "partition: more salient columns than the candidate budget");
  }
}

double sign_probe_error(const Matrix& w, std::span<const std::size_t> salient) {
  std::vector<bool> is_sal(w.cols(), false);
  for (std::size_t c : salient) is_sal[c] = true;
  double err = 0.0;
  std::vector<double> sal, rest;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    sal.clear();
    rest.clear();
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) (is_sal[c] ? sal : rest).push_back(row[c]);
    if (!sal.empty()) err += group_error(sal, quantize_group(sal));
    if (!rest.empty()) err += group_error(rest, quantize_group(rest));
  }
  return std::sqrt(err);
}

SaliencyPartition select_salient(const Matrix& w, std::span<const double> scores,
                                 std::size_t candidate_budget, const QuantProbe& probe,
                                 std::vector<SalientSweepPoint>* sweep) {
  const std::size_t m = w.cols();
  if (scores.size() != m) fail(ErrorCode::dimension, "select_salient: score count mismatch");
  if (candidate_budget > m) {
    fail(ErrorCode::configuration, "select_salient: candidate budget " +
                                       std::to_string(candidate_budget) + " exceeds " +
                                       std::to_string(m) + " columns");
  }
  std::vector<std::size_t> ranked(m);
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::size_t best_k = 0;
  double best_err = INFINITY;
  std::vector<std::size_t> chosen;
  if (sweep) sweep->clear();
  for (std::size_t k = 0; k <= candidate_budget; k += 2) {
    chosen.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
    const double err = probe(w, chosen);
    if (sweep) sweep->push_back({k, err});
    if (err < best_err) {
      best_err = err;
      best_k = k;
    }
  }

  SaliencyPartition part;
  part.m = m;
  part.candidate_budget = candidate_budget;
  part.probe_error = best_err;
  part.salient.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(best_k));
  std::sort(part.salient.begin(), part.salient.end());
  for (std::size_t c = 0; c < m; ++c)
    if (!part.is_salient(c)) part.nonsalient.push_back(c);
  return part;
}

std::vector<double> obq_update(std::span<const double> w_row, std::size_t q,
                               double quantized_value, const Matrix& x,
                               std::span<const double> g, std::span<const double> r,
                               double damping) {
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (w_row.size() != m) fail(ErrorCode::dimension, "obq_update: weight row length != X rows");
  if (g.size() != n || r.size() != n) fail(ErrorCode::dimension, "obq_update: g/r length != tokens");
  if (q >= m) fail(ErrorCode::dimension, "obq_update: q out of range");

  const RectifiedHessian he = rectified_hessian(x, g, damping);
  Matrix hinv;
  try {
    hinv = spd_inverse(he.h);
  } catch (const Error&) {
    fail(ErrorCode::numerical, "obq_update: importance Hessian is not invertible");
  }
  const double hqq = hinv(q, q);
  if (!(hqq > 0.0)) fail(ErrorCode::numerical, "obq_update: (H^-1)_qq <= 0");

  // r~ X~^T = r G X^T
  std::vector<double> rx(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const auto xr = x.row(j);
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += r[t] * g[t] * xr[t];
    rx[j] = acc;
  }

  const double c = quantized_value - w_row[q];
  std::vector<double> dw(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double acc = c * hinv(q, j) / hqq;
    for (std::size_t i = 0; i < m; ++i) {
      acc += rx[i] * (hinv(i, j) - hinv(i, q) * hinv(q, j) / hqq);
    }
    dw[j] = acc;
  }
  dw[q] = c;  // the eliminated column contributes exactly zero
  return dw;
}

}  // namespace hbvla
