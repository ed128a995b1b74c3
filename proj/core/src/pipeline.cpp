// SPDX-License-Identifier: Apache-2.0
#include "hbvla/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <iterator>
#include <string>

#include "hbvla/half.hpp"

namespace hbvla {

void QuantConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::configuration, "config: " + what); };
  if (group_window == 0) bad("group_window must be positive");
  if (max_groups != 1 && max_groups != 2) bad("max_groups must be 1 or 2");
  if (salient_bitplanes == 0 || salient_bitplanes > 255) bad("salient_bitplanes must be in [1, 255]");
  if (!(damping >= 0.0) || !std::isfinite(damping)) bad("damping must be a finite non-negative number");
  if (proxy_tokens == 0) bad("proxy_tokens must be positive");
  if (group_window > 0xFFFFFFFFu) bad("group_window too large");
}

std::optional<std::size_t> QuantConfig::effective_neighbors(std::size_t m) const {
  if (k_neighbors == 0 || m <= exact_pairing_max_cols || m < 2) return std::nullopt;
  return std::min(k_neighbors, m - 1);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct SequenceLayout {
  std::size_t window;
  std::size_t max_groups;
};

SequenceLayout band_layout(const LayerFormat& fmt, std::size_t len) {
  const std::size_t window = fmt.split_scope == SplitScope::row ? std::max<std::size_t>(len, 1)
                                                                : fmt.group_window;
  return {window, fmt.max_groups};
}

SequenceLayout single_group_layout(std::size_t len) { return {std::max<std::size_t>(len, 1), 1}; }

double mean_of(std::span<const double> u) {
  double s = 0.0;
  for (double v : u) s += v;
  return u.empty() ? 0.0 : s / static_cast<double>(u.size());
}

CodedSequence encode_sequence(std::span<const double> u, SequenceLayout layout, bool shared_mean) {
  CodedSequence seq;
  seq.len = u.size();
  std::optional<double> mu_shared;
  if (shared_mean) {
    const std::uint16_t bits = to_half_bits(mean_of(u));
    seq.shared_mu = bits;
    mu_shared = from_half_bits(bits);
  }
  std::vector<double> vals;
  for (std::size_t w0 = 0; w0 < u.size(); w0 += layout.window) {
    const std::size_t len = std::min(layout.window, u.size() - w0);
    const auto slice = u.subspan(w0, len);
    const auto groups = split_band(slice, layout.max_groups, mu_shared);
    WindowCode code;
    code.signs.assign(len, 0);
    if (groups.size() == 2) {
      code.membership.assign(len, 0);
      for (std::size_t idx : groups[1].members) code.membership[idx] = 1;
    }
    for (const auto& g : groups) {
      vals.clear();
      for (std::size_t idx : g.members) vals.push_back(slice[idx]);
      const auto p = quantize_group(vals, mu_shared, MetaPrecision::half);
      if (!shared_mean) code.mu.push_back(to_half_bits(p.mu));
      code.alpha.push_back(to_half_bits(p.alpha));
      for (std::size_t j = 0; j < g.members.size(); ++j) code.signs[g.members[j]] = p.signs[j];
    }
    seq.windows.push_back(std::move(code));
  }
  return seq;
}

std::vector<double> decode_with_layout(const CodedSequence& seq, SequenceLayout layout) {
  std::vector<double> out(seq.len, 0.0);
  const std::size_t expected = seq.len == 0 ? 0 : (seq.len + layout.window - 1) / layout.window;
  if (seq.windows.size() != expected) fail(ErrorCode::inconsistent, "coded sequence: window count mismatch");
  for (std::size_t w = 0; w < seq.windows.size(); ++w) {
    const auto& code = seq.windows[w];
    const std::size_t w0 = w * layout.window;
    const std::size_t len = std::min(layout.window, seq.len - w0);
    const std::size_t groups = code.alpha.size();
    if (groups == 0 || groups > layout.max_groups || code.signs.size() != len ||
        (groups == 2) != (code.membership.size() == len) ||
        (seq.shared_mu ? !code.mu.empty() : code.mu.size() != groups)) {
      fail(ErrorCode::inconsistent, "coded sequence: malformed window");
    }
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t g = groups == 2 ? code.membership[j] : 0;
      const double mu = seq.shared_mu ? from_half_bits(*seq.shared_mu) : from_half_bits(code.mu[g]);
      const double alpha = from_half_bits(code.alpha[g]);
      out[w0 + j] = code.signs[j] ? mu + alpha : mu - alpha;
    }
  }
  return out;
}

void count_sequence(const CodedSequence& seq, SequenceLayout layout, BitBreakdown& b) {
  if (seq.shared_mu) b.means += 16;
  for (const auto& code : seq.windows) {
    if (layout.max_groups == 2) b.split_flags += 1;
    b.membership += code.membership.size();
    b.scales += 16 * code.alpha.size();
    b.means += 16 * code.mu.size();
    b.signs += code.signs.size();
  }
}

std::size_t index_bits(std::size_t m) {
  return m <= 1 ? 1 : static_cast<std::size_t>(std::bit_width(m - 1));
}

Matrix sequences_to_rows(const std::vector<CodedSequence>& seqs, const LayerFormat& fmt,
                         std::size_t len) {
  Matrix out(seqs.size(), len);
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    if (seqs[r].len != len) fail(ErrorCode::inconsistent, "coded band has the wrong length");
    const auto vals = decode_with_layout(seqs[r], band_layout(fmt, len));
    std::copy(vals.begin(), vals.end(), out.row(r).begin());
  }
  return out;
}

Matrix sequences_to_cols(const std::vector<CodedSequence>& seqs, const LayerFormat& fmt,
                         std::size_t len) {
  Matrix out(len, seqs.size());
  for (std::size_t c = 0; c < seqs.size(); ++c) {
    if (seqs[c].len != len) fail(ErrorCode::inconsistent, "coded band has the wrong length");
    out.set_col(c, decode_with_layout(seqs[c], band_layout(fmt, len)));
  }
  return out;
}

LayerFormat format_of(const QuantConfig& cfg) {
  return {cfg.normalization, cfg.group_window, cfg.max_groups, cfg.split_scope};
}

Matrix decode_plane(const SalientPlane& plane, const LayerFormat& fmt, std::size_t n) {
  HaarBands b;
  b.axis = Axis::cols;
  b.original_len = n;
  b.norm = fmt.normalization;
  b.lo = sequences_to_cols(plane.lo, fmt, n / 2);
  b.hi = sequences_to_cols(plane.hi, fmt, n / 2);
  if (n % 2 == 1) {
    if (!plane.leftover_row) fail(ErrorCode::inconsistent, "salient plane: missing leftover row");
    const auto vals = decode_with_layout(*plane.leftover_row, single_group_layout(plane.lo.size()));
    b.leftover = Matrix(1, vals.size(), vals);
  }
  return haar_inverse_cols(b);
}

}  // namespace

std::vector<double> decode_sequence(const CodedSequence& seq, const LayerFormat& fmt) {
  return decode_with_layout(seq, band_layout(fmt, seq.len));
}

BitBreakdown bit_breakdown(const BinarizedLayer& layer) {
  BitBreakdown b;
  b.ordering = static_cast<std::uint64_t>(layer.m) * index_bits(layer.m);
  b.indices = 32ull * layer.salient.size();
  for (const auto& s : layer.nonsalient_lo) count_sequence(s, band_layout(layer.format, s.len), b);
  for (const auto& s : layer.nonsalient_hi) count_sequence(s, band_layout(layer.format, s.len), b);
  for (const auto& plane : layer.salient_planes) {
    for (const auto& s : plane.lo) count_sequence(s, band_layout(layer.format, s.len), b);
    for (const auto& s : plane.hi) count_sequence(s, band_layout(layer.format, s.len), b);
    if (plane.leftover_row) {
      count_sequence(*plane.leftover_row, single_group_layout(plane.leftover_row->len), b);
    }
  }
  if (layer.leftover_column) {
    count_sequence(*layer.leftover_column, single_group_layout(layer.leftover_column->len), b);
  }
  return b;
}

double bit_budget(const BinarizedLayer& layer) {
  return static_cast<double>(bit_breakdown(layer).total()) /
         static_cast<double>(layer.n * layer.m);
}

double bit_budget_without_layout(const BinarizedLayer& layer) {
  const auto b = bit_breakdown(layer);
  return static_cast<double>(b.signs + b.scales + b.means) / static_cast<double>(layer.n * layer.m);
}

Matrix reconstruct_nonsalient(const BinarizedLayer& layer) {
  const std::size_t half = layer.m / 2;
  if (layer.nonsalient_lo.size() != layer.n || layer.nonsalient_hi.size() != layer.n) {
    fail(ErrorCode::inconsistent, "layer: one coded band row per weight row expected");
  }
  HaarBands b;
  b.axis = Axis::rows;
  b.original_len = layer.m;
  b.norm = layer.format.normalization;
  b.lo = sequences_to_rows(layer.nonsalient_lo, layer.format, half);
  b.hi = sequences_to_rows(layer.nonsalient_hi, layer.format, half);
  if (layer.m % 2 == 1) {
    if (!layer.leftover_column) fail(ErrorCode::inconsistent, "layer: missing leftover column");
    const auto vals = decode_with_layout(*layer.leftover_column, single_group_layout(layer.n));
    b.leftover = Matrix(layer.n, 1, vals);
  }
  return unapply_ordering(haar_inverse_rows(b), layer.ordering);
}

Matrix reconstruct(const BinarizedLayer& layer) {
  Matrix w = reconstruct_nonsalient(layer);
  for (const auto& plane : layer.salient_planes) {
    if (plane.lo.size() != layer.salient.size()) fail(ErrorCode::inconsistent, "salient plane width mismatch");
    const Matrix q = decode_plane(plane, layer.format, layer.n);
    for (std::size_t r = 0; r < layer.n; ++r)
      for (std::size_t c = 0; c < layer.salient.size(); ++c) w(r, layer.salient[c]) += q(r, c);
  }
  return w;
}

Matrix fill_salient_columns(const Matrix& w, const SaliencyPartition& part, FillRule rule) {
  if (part.m != w.cols()) fail(ErrorCode::inconsistent, "fill: partition does not match matrix width");
  if (part.salient.empty()) return w;
  if (part.nonsalient.empty()) fail(ErrorCode::degenerate_input, "fill: every column is salient");

  Matrix out = w;
  if (rule == FillRule::row_mean) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c : part.nonsalient) s += w(r, c);
      s /= static_cast<double>(part.nonsalient.size());
      for (std::size_t c : part.salient) out(r, c) = s;
    }
    return out;
  }
  const auto& ns = part.nonsalient;
  for (std::size_t c : part.salient) {
    const auto it = std::lower_bound(ns.begin(), ns.end(), c);
    const bool has_right = it != ns.end();
    const bool has_left = it != ns.begin();
    for (std::size_t r = 0; r < w.rows(); ++r) {
      if (has_left && has_right) {
        out(r, c) = 0.5 * (w(r, *std::prev(it)) + w(r, *it));
      } else {
        out(r, c) = w(r, has_left ? *std::prev(it) : *it);
      }
    }
  }
  return out;
}

NonSalientResult quantize_nonsalient(const Matrix& w_filled, const QuantConfig& cfg,
                                     std::span<const std::size_t> salient) {
  cfg.validate();
  const std::size_t n = w_filled.rows();
  const std::size_t m = w_filled.cols();
  if (m < 2) fail(ErrorCode::degenerate_input, "quantize_nonsalient: need at least 2 columns");

  NonSalientResult res;
  if (cfg.permute) {
    std::vector<bool> is_sal(m, false);
    for (std::size_t c : salient) {
      if (c >= m) fail(ErrorCode::dimension, "quantize_nonsalient: salient index out of range");
      is_sal[c] = true;
    }
    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < m; ++c)
      if (!is_sal[c]) rest.push_back(c);
    res.ordering.order.assign(salient.begin(), salient.end());
    std::sort(res.ordering.order.begin(), res.ordering.order.end());
    if (rest.size() >= 2) {
      const Matrix sub = gather_columns(w_filled, rest);
      const auto dist = pairwise_distances(sub, cfg.effective_neighbors(sub.cols()));
      const auto norms = column_norms(sub, cfg.seed_norm);
      const auto chain = greedy_pair_and_chain(dist, norms);
      for (std::size_t k : chain.order) res.ordering.order.push_back(rest[k]);
      if (chain.self_paired) res.ordering.self_paired = rest[*chain.self_paired];
    } else {
      res.ordering.order.insert(res.ordering.order.end(), rest.begin(), rest.end());
    }
  } else {
    res.ordering = ColumnOrdering::identity(m);
  }
  res.ordering.validate();
  res.highpass_identity = highpass_energy(w_filled, ColumnOrdering::identity(m));
  res.highpass_ordered = highpass_energy(w_filled, res.ordering);

  const LayerFormat fmt = format_of(cfg);
  const HaarBands u = haar_forward_rows(apply_ordering(w_filled, res.ordering), cfg.normalization);
  const std::size_t half = m / 2;
  res.lo.reserve(n);
  res.hi.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    res.lo.push_back(encode_sequence(u.lo.row(r), band_layout(fmt, half), true));
    res.hi.push_back(encode_sequence(u.hi.row(r), band_layout(fmt, half), true));
  }

  HaarBands q;
  q.axis = Axis::rows;
  q.original_len = m;
  q.norm = cfg.normalization;
  q.lo = sequences_to_rows(res.lo, fmt, half);
  q.hi = sequences_to_rows(res.hi, fmt, half);
  double err = 0.0;
  if (u.leftover) {
    const auto col = u.leftover->col(0);
    res.leftover = encode_sequence(col, single_group_layout(n), false);
    const auto vals = decode_with_layout(*res.leftover, single_group_layout(n));
    q.leftover = Matrix(n, 1, vals);
    const double e = frobenius_distance(*u.leftover, *q.leftover);
    err += e * e;
  }
  const double elo = frobenius_distance(u.lo, q.lo);
  const double ehi = frobenius_distance(u.hi, q.hi);
  res.haar_domain_error = std::sqrt(err + elo * elo + ehi * ehi);
  res.w_hat = unapply_ordering(haar_inverse_rows(q), res.ordering);
  return res;
}

SalientResult quantize_salient_residual(const Matrix& w, const Matrix& w_hat_nonsal,
                                        const SaliencyPartition& part, const QuantConfig& cfg) {
  cfg.validate();
  const std::size_t n = w.rows();
  SalientResult res;
  res.w_hat = Matrix(n, w.cols());
  if (part.salient.empty()) return res;
  if (n < 2) fail(ErrorCode::degenerate_input, "salient residual: column transform needs 2 rows");

  const LayerFormat fmt = format_of(cfg);
  const std::size_t s = part.salient.size();
  Matrix remaining = gather_columns(w - w_hat_nonsal, part.salient);
  Matrix total(n, s);
  for (std::size_t plane_idx = 0; plane_idx < cfg.salient_bitplanes; ++plane_idx) {
    const HaarBands bands = haar_forward_cols(remaining, cfg.normalization);
    SalientPlane plane;
    for (std::size_t c = 0; c < s; ++c) {
      plane.lo.push_back(encode_sequence(bands.lo.col(c), band_layout(fmt, n / 2), false));
      plane.hi.push_back(encode_sequence(bands.hi.col(c), band_layout(fmt, n / 2), false));
    }
    if (bands.leftover) {
      const auto row = bands.leftover->row(0);
      plane.leftover_row = encode_sequence(row, single_group_layout(s), false);
    }
    const Matrix q = decode_plane(plane, fmt, n);
    remaining = remaining - q;
    total = total + q;
    res.planes.push_back(std::move(plane));
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < s; ++c) res.w_hat(r, part.salient[c]) = total(r, c);
  return res;
}

RectifiedHessian saliency_hessian(const Matrix& w, const Calibration& calib, const QuantConfig& cfg) {
  const std::size_t m = w.cols();
  if (calib.x && calib.x->rows() != m) {
    fail(ErrorCode::dimension, "calibration activations have " + std::to_string(calib.x->rows()) +
                                   " rows, weight has " + std::to_string(m) + " columns");
  }
  if (cfg.hessian_mode == HessianSource::rectified) {
    if (!calib.x) {
      fail(ErrorCode::configuration,
           "rectified Hessian mode needs calibration activations (use hessian_mode=standard)");
    }
    return rectified_hessian(*calib.x, calib.importance, cfg.damping);
  }
  if (calib.x) return rectified_hessian(*calib.x, {}, cfg.damping);
  RectifiedHessian h;
  h.h = Matrix::identity(m);
  h.damping = cfg.damping;
  h.source = HessianSource::standard;
  return h;
}

double proxy_error(const Matrix& w, const Matrix& w_hat, const Matrix& x, std::size_t tokens,
                   std::span<const double> importance) {
  if (x.rows() != w.cols()) fail(ErrorCode::dimension, "proxy_error: activation rows != weight columns");
  const std::size_t t = std::min(tokens, x.cols());
  if (!importance.empty() && importance.size() < t) {
    fail(ErrorCode::dimension, "proxy_error: importance shorter than token slice");
  }
  Matrix xs(x.rows(), t);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < t; ++c)
      xs(r, c) = x(r, c) * (importance.empty() ? 1.0 : std::sqrt(importance[c]));
  return frobenius_norm(matmul(w - w_hat, xs));
}

QuantizedLayer quantize_layer(const Matrix& w, const Calibration& calib, const QuantConfig& cfg) {
  cfg.validate();
  if (w.empty()) fail(ErrorCode::degenerate_input, "quantize_layer: empty weight");
  if (w.cols() < 2) fail(ErrorCode::degenerate_input, "quantize_layer: need at least 2 columns");
  w.check_finite("weight");
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();

  QuantizedLayer out;
  auto& rep = out.report;
  rep.config = cfg;

  auto t0 = Clock::now();
  const RectifiedHessian h = saliency_hessian(w, calib, cfg);
  const auto scores = column_scores(w, h, cfg.score_rule);
  // At least one column must stay non-salient; the column transform needs 2 rows.
  const std::size_t budget = n < 2 ? 0 : std::min(cfg.candidate_budget, m - 1);
  out.partition = select_salient(w, scores, budget);
  rep.timing_ms["saliency"] = ms_since(t0);

  t0 = Clock::now();
  const Matrix filled = fill_salient_columns(w, out.partition, cfg.fill_rule);
  const auto ns = quantize_nonsalient(filled, cfg, out.partition.salient);
  rep.timing_ms["nonsalient"] = ms_since(t0);

  t0 = Clock::now();
  auto sal = quantize_salient_residual(w, ns.w_hat, out.partition, cfg);
  rep.timing_ms["salient"] = ms_since(t0);

  auto& layer = out.layer;
  layer.n = n;
  layer.m = m;
  layer.format = format_of(cfg);
  layer.ordering = ns.ordering;
  layer.salient = out.partition.salient;
  layer.nonsalient_lo = ns.lo;
  layer.nonsalient_hi = ns.hi;
  layer.leftover_column = ns.leftover;
  layer.salient_planes = std::move(sal.planes);

  t0 = Clock::now();
  out.w_hat = reconstruct(layer);
  rep.timing_ms["reconstruct"] = ms_since(t0);

  rep.fro_error = frobenius_distance(w, out.w_hat);
  rep.nonsalient_fro_error = frobenius_distance(w, ns.w_hat);
  rep.haar_domain_error = ns.haar_domain_error;
  rep.highpass_identity = ns.highpass_identity;
  rep.highpass_ordered = ns.highpass_ordered;
  rep.salient_count = layer.salient.size();
  rep.bits = bit_breakdown(layer);
  rep.avg_bits = bit_budget(layer);
  rep.avg_bits_without_layout = bit_budget_without_layout(layer);
  if (calib.x) {
    rep.proxy_error = proxy_error(w, out.w_hat, *calib.x, cfg.proxy_tokens);
    if (!calib.importance.empty()) {
      rep.weighted_proxy_error = proxy_error(w, out.w_hat, *calib.x, cfg.proxy_tokens, calib.importance);
    }
  }
  return out;
}

}  // namespace hbvla
