// SPDX-License-Identifier: Apache-2.0
#include "hbvla/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hbvla {

const char* to_string(Projection p) noexcept {
  switch (p) {
    case Projection::q: return "q";
    case Projection::k: return "k";
    case Projection::v: return "v";
    case Projection::o: return "o";
  }
  return "?";
}

const Matrix& AttentionBlockWeights::get(Projection p) const noexcept {
  switch (p) {
    case Projection::q: return wq;
    case Projection::k: return wk;
    case Projection::v: return wv;
    case Projection::o: break;
  }
  return wo;
}

Matrix& AttentionBlockWeights::get(Projection p) noexcept {
  return const_cast<Matrix&>(static_cast<const AttentionBlockWeights&>(*this).get(p));
}

void AttentionBlockWeights::validate() const {
  const std::size_t d = wq.rows();
  for (Projection p : kProjections) {
    const Matrix& w = get(p);
    if (w.rows() != d || w.cols() != d) {
      fail(ErrorCode::dimension, std::string("attention: W") + to_string(p) +
                                     " must be " + std::to_string(d) + "x" + std::to_string(d));
    }
  }
  if (d == 0 || heads == 0 || d % heads != 0) {
    fail(ErrorCode::dimension, "attention: d=" + std::to_string(d) +
                                   " not divisible by heads=" + std::to_string(heads));
  }
}

namespace {

// Softmax attention over head slices; fills probs and returns the d x N concat.
Matrix attend(const Matrix& yq, const Matrix& yk, const Matrix& yv, std::size_t heads,
              std::vector<Matrix>* probs_out) {
  const std::size_t d = yq.rows();
  const std::size_t n = yq.cols();
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix concat(d, n);
  if (probs_out) probs_out->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t r0 = h * dh;
    Matrix p(n, n);
    for (std::size_t t = 0; t < n; ++t) {
      double mx = -INFINITY;
      for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t r = r0; r < r0 + dh; ++r) acc += yq(r, t) * yk(r, s);
        p(t, s) = acc * scale;
        mx = std::max(mx, p(t, s));
      }
      double z = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        p(t, s) = std::exp(p(t, s) - mx);
        z += p(t, s);
      }
      for (std::size_t s = 0; s < n; ++s) p(t, s) /= z;
    }
    for (std::size_t r = r0; r < r0 + dh; ++r) {
      for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s) acc += p(t, s) * yv(r, s);
        concat(r, t) = acc;
      }
    }
    if (probs_out) probs_out->push_back(std::move(p));
  }
  return concat;
}

void require_finite(const Matrix& m, const char* tag) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) fail(ErrorCode::numerical, std::string("attention: non-finite ") + tag);
  }
}

}  // namespace

AttentionResult attention_forward(const AttentionBlockWeights& w, const Matrix& x) {
  w.validate();
  if (x.rows() != w.dim()) {
    fail(ErrorCode::dimension, "attention: input has " + std::to_string(x.rows()) +
                                   " rows, block dimension is " + std::to_string(w.dim()));
  }
  AttentionResult res;
  auto& y = res.cache.y;
  y[0] = matmul(w.wq, x);
  y[1] = matmul(w.wk, x);
  y[2] = matmul(w.wv, x);
  res.cache.concat = attend(y[0], y[1], y[2], w.heads, &res.cache.probs);
  y[3] = matmul(w.wo, res.cache.concat);
  res.z = x + y[3];
  require_finite(res.z, "block output");
  return res;
}

Matrix attention_from_projections(const Matrix& x, const Matrix& yq, const Matrix& yk,
                                  const Matrix& yv, const Matrix& wo, std::size_t heads) {
  const Matrix concat = attend(yq, yk, yv, heads, nullptr);
  return x + matmul(wo, concat);
}

double block_loss(const Matrix& z, const Matrix& z_hat) {
  const double f = frobenius_distance(z, z_hat);
  return f * f;
}

ProjectionGradients projection_gradients(const AttentionBlockWeights& full,
                                         const AttentionBlockWeights& quantized,
                                         const Matrix& x) {
  const auto fwd = attention_forward(full, x);
  const auto fwd_hat = attention_forward(quantized, x);
  const std::size_t d = full.dim();
  const std::size_t n = x.cols();
  const std::size_t heads = full.heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ProjectionGradients out;
  out.loss = block_loss(fwd.z, fwd_hat.z);

  Matrix go = 2.0 * (fwd.z - fwd_hat.z);
  const Matrix dconcat = matmul(transpose(full.wo), go);

  const Matrix& yq = fwd.cache.proj(Projection::q);
  const Matrix& yk = fwd.cache.proj(Projection::k);
  const Matrix& yv = fwd.cache.proj(Projection::v);
  Matrix gq(d, n), gk(d, n), gv(d, n);

  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t r0 = h * dh;
    const Matrix& p = fwd.cache.probs[h];
    // concat(:, t) = sum_s p(t, s) v(:, s)
    Matrix dp(n, n);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t r = r0; r < r0 + dh; ++r) acc += dconcat(r, t) * yv(r, s);
        dp(t, s) = acc;
      }
    }
    for (std::size_t r = r0; r < r0 + dh; ++r) {
      for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) acc += dconcat(r, t) * p(t, s);
        gv(r, s) = acc;
      }
    }
    // Softmax backward, row-wise over keys.
    Matrix ds(n, n);
    for (std::size_t t = 0; t < n; ++t) {
      double dot = 0.0;
      for (std::size_t s = 0; s < n; ++s) dot += p(t, s) * dp(t, s);
      for (std::size_t s = 0; s < n; ++s) ds(t, s) = p(t, s) * (dp(t, s) - dot);
    }
    for (std::size_t r = r0; r < r0 + dh; ++r) {
      for (std::size_t t = 0; t < n; ++t) {
        double acc_q = 0.0;
        double acc_k = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          acc_q += ds(t, s) * yk(r, s);
          acc_k += ds(s, t) * yq(r, s);
        }
        gq(r, t) = scale * acc_q;
        gk(r, t) = scale * acc_k;
      }
    }
  }

  out.g[0] = std::move(gq);
  out.g[1] = std::move(gk);
  out.g[2] = std::move(gv);
  out.g[3] = std::move(go);
  for (Projection p : kProjections) {
    for (double v : out[p].data()) {
      if (!std::isfinite(v)) {
        fail(ErrorCode::numerical, std::string("projection_gradients: non-finite gradient at ") +
                                       to_string(p));
      }
    }
  }
  return out;
}

Matrix weight_gradient(const ProjectionGradients& grads, const AttentionCache& cache,
                       const Matrix& x, Projection p) {
  if (p == Projection::o) return matmul(grads[p], transpose(cache.concat));
  return matmul(grads[p], transpose(x));
}

}  // namespace hbvla
