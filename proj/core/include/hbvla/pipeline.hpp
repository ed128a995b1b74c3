// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hbvla/binarizer.hpp"
#include "hbvla/haar.hpp"
#include "hbvla/matrix.hpp"
#include "hbvla/permute.hpp"
#include "hbvla/saliency.hpp"

namespace hbvla {

enum class FillRule { flanking, row_mean };
enum class SplitScope { window, row };

struct QuantConfig {
  std::size_t candidate_budget = 40;
  std::size_t group_window = 128;
  std::size_t max_groups = 2;
  SeedNorm seed_norm = SeedNorm::l2;
  HessianSource hessian_mode = HessianSource::rectified;
  HaarNorm normalization = HaarNorm::average;
  /// Top-K neighbour pruning for the pairing search; 0 disables pruning.
  /// Pruning only kicks in above `exact_pairing_max_cols` columns.
  std::size_t k_neighbors = 32;
  std::size_t exact_pairing_max_cols = 512;
  double damping = 0.01;
  std::size_t salient_bitplanes = 1;
  ScoreRule score_rule = ScoreRule::inverse_diag;
  FillRule fill_rule = FillRule::flanking;
  SplitScope split_scope = SplitScope::window;
  /// Column reordering before the row transform. Off gives the unpermuted
  /// Haar control.
  bool permute = true;
  /// Tokens of the calibration set used for the output-space error.
  std::size_t proxy_tokens = 512;

  void validate() const;
  std::optional<std::size_t> effective_neighbors(std::size_t m) const;
};

/// One binarized window: 1 or 2 groups with a membership bitmap when split.
struct WindowCode {
  std::vector<std::uint8_t> membership;  // empty unless split; 1 = sparse group
  std::vector<std::uint16_t> mu;         // per group, empty under a shared mean
  std::vector<std::uint16_t> alpha;      // per group, binary16 bits
  std::vector<std::uint8_t> signs;       // one per coefficient, 1 = positive

  bool split() const noexcept { return alpha.size() == 2; }
};

/// A binarized coefficient sequence (one band row or one band column).
struct CodedSequence {
  std::size_t len = 0;
  std::optional<std::uint16_t> shared_mu;
  std::vector<WindowCode> windows;
};

/// Encoding parameters needed to parse and rebuild a layer.
struct LayerFormat {
  HaarNorm normalization = HaarNorm::average;
  std::size_t group_window = 128;
  std::size_t max_groups = 2;
  SplitScope split_scope = SplitScope::window;
};

struct SalientPlane {
  std::vector<CodedSequence> lo;  // one per salient column, length n/2
  std::vector<CodedSequence> hi;
  std::optional<CodedSequence> leftover_row;  // odd n: one group across salient columns
};

struct BinarizedLayer {
  std::size_t n = 0;
  std::size_t m = 0;
  LayerFormat format;
  ColumnOrdering ordering;
  std::vector<std::size_t> salient;
  std::vector<CodedSequence> nonsalient_lo;  // one per row, length floor(m/2)
  std::vector<CodedSequence> nonsalient_hi;
  std::optional<CodedSequence> leftover_column;  // odd m, spatial domain, length n
  std::vector<SalientPlane> salient_planes;
};

/// Payload bit counts by category.
struct BitBreakdown {
  std::uint64_t signs = 0;
  std::uint64_t scales = 0;      // alpha
  std::uint64_t means = 0;       // shared and per-group mu
  std::uint64_t split_flags = 0;
  std::uint64_t membership = 0;
  std::uint64_t ordering = 0;
  std::uint64_t indices = 0;

  std::uint64_t total() const noexcept {
    return signs + scales + means + split_flags + membership + ordering + indices;
  }
};

BitBreakdown bit_breakdown(const BinarizedLayer& layer);
/// Exact payload bits per weight.
double bit_budget(const BinarizedLayer& layer);
/// Bits per weight counting only signs, scales and means.
double bit_budget_without_layout(const BinarizedLayer& layer);

/// Decodes one coded sequence using the layer format.
std::vector<double> decode_sequence(const CodedSequence& seq, const LayerFormat& fmt);
Matrix reconstruct(const BinarizedLayer& layer);
Matrix reconstruct_nonsalient(const BinarizedLayer& layer);

Matrix fill_salient_columns(const Matrix& w, const SaliencyPartition& part,
                            FillRule rule = FillRule::flanking);

struct NonSalientResult {
  Matrix w_hat;
  ColumnOrdering ordering;
  std::vector<CodedSequence> lo;
  std::vector<CodedSequence> hi;
  std::optional<CodedSequence> leftover;
  double haar_domain_error = 0.0;  // ||U - Q(U)||_F, leftover included
  double highpass_identity = 0.0;  // high-pass energy before reordering
  double highpass_ordered = 0.0;   // after
};

/// Reorders, row-transforms, binarizes with a shared mean per row and band,
/// and synthesises back. Columns listed in `salient` are kept out of the
/// pairing search and placed first (in ascending order).
NonSalientResult quantize_nonsalient(const Matrix& w_filled, const QuantConfig& cfg,
                                     std::span<const std::size_t> salient = {});

struct SalientResult {
  Matrix w_hat;  // n x m, zero outside salient columns
  std::vector<SalientPlane> planes;
};

SalientResult quantize_salient_residual(const Matrix& w, const Matrix& w_hat_nonsal,
                                        const SaliencyPartition& part, const QuantConfig& cfg);

struct Calibration {
  std::optional<Matrix> x;         // m x N activations
  std::vector<double> importance;  // length N, empty = not supplied
};

struct QuantReport {
  double fro_error = 0.0;
  std::optional<double> proxy_error;
  std::optional<double> weighted_proxy_error;
  double avg_bits = 0.0;
  double avg_bits_without_layout = 0.0;
  BitBreakdown bits;
  std::size_t salient_count = 0;
  double nonsalient_fro_error = 0.0;
  double haar_domain_error = 0.0;
  double highpass_identity = 0.0;
  double highpass_ordered = 0.0;
  std::map<std::string, double> timing_ms;
  QuantConfig config;
};

struct QuantizedLayer {
  BinarizedLayer layer;
  QuantReport report;
  Matrix w_hat;
  SaliencyPartition partition;
};

QuantizedLayer quantize_layer(const Matrix& w, const Calibration& calib, const QuantConfig& cfg);

/// Hessian used for saliency under `cfg` (identity when no activations).
RectifiedHessian saliency_hessian(const Matrix& w, const Calibration& calib,
                                  const QuantConfig& cfg);

/// ||(W - W_hat) X||_F over the first `tokens` calibration tokens, optionally
/// weighting token t by sqrt(s_t).
double proxy_error(const Matrix& w, const Matrix& w_hat, const Matrix& x, std::size_t tokens,
                   std::span<const double> importance = {});

}  // namespace hbvla
