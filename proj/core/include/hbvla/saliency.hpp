// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hbvla/attention.hpp"
#include "hbvla/matrix.hpp"

namespace hbvla {

/// a_t = ||G(:, t)||_2 / d_p for one projection.
struct TokenImportance {
  Projection projection = Projection::o;
  std::vector<double> a;
};

TokenImportance token_importance(const Matrix& g, std::size_t dp,
                                 Projection p = Projection::o);

enum class HessianSource { standard, rectified };

struct RectifiedHessian {
  Matrix h;  // includes the damping term
  double damping = 0.0;
  HessianSource source = HessianSource::standard;
};

/// sum_t s_t x_t x_t^T + damping * mean(diag) * I. An empty `s` means s = 1.
RectifiedHessian rectified_hessian(const Matrix& x, std::span<const double> s, double damping);

enum class ScoreRule {
  inverse_diag,  // w_ij^2 / ([H^-1]_jj)^2
  hessian_diag,  // w_ij^2 * H_jj
};

/// Per-column l2 reduction of the element-wise saliency score.
std::vector<double> column_scores(const Matrix& w, const RectifiedHessian& h,
                                  ScoreRule rule = ScoreRule::inverse_diag);

struct SaliencyPartition {
  std::vector<std::size_t> salient;     // ascending
  std::vector<std::size_t> nonsalient;  // ascending
  std::size_t m = 0;
  std::size_t candidate_budget = 0;
  double probe_error = 0.0;  // error of the chosen k under the probe

  bool is_salient(std::size_t c) const;
  void validate() const;
};

/// Reconstruction error of W when the columns in `salient` are treated as a
/// separate set. Must be deterministic.
using QuantProbe = std::function<double(const Matrix& w, std::span<const std::size_t> salient)>;

/// One centred-sign group per row over the non-salient entries and one over
/// the salient entries, evaluated in the spatial domain.
double sign_probe_error(const Matrix& w, std::span<const std::size_t> salient);

struct SalientSweepPoint {
  std::size_t k = 0;
  double error = 0.0;
};

/// Candidate columns by descending score, then the even k in [0, budget]
/// minimising the probe error (ties: smaller k).
SaliencyPartition select_salient(const Matrix& w, std::span<const double> scores,
                                 std::size_t candidate_budget,
                                 const QuantProbe& probe = sign_probe_error,
                                 std::vector<SalientSweepPoint>* sweep = nullptr);

/// Importance-weighted Hessian-guided update of one weight row after fixing
/// coordinate q to `quantized_value`:
///   dw = (w_hat_q - w_q) Hinv(q,:) / Hinv(q,q) + r~ X~^T (Hinv)_{-q}
/// with H_e = X G X^T (+ damping * mean(diag) * I) and (Hinv)_{-q} the
/// inverse with the q-th row/column eliminated.
std::vector<double> obq_update(std::span<const double> w_row, std::size_t q,
                               double quantized_value, const Matrix& x,
                               std::span<const double> g, std::span<const double> r,
                               double damping = 0.0);

}  // namespace hbvla
