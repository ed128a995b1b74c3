// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>

#include "hbvla/matrix.hpp"

namespace hbvla {

enum class Projection : std::size_t { q = 0, k = 1, v = 2, o = 3 };
inline constexpr std::array<Projection, 4> kProjections = {Projection::q, Projection::k,
                                                           Projection::v, Projection::o};
const char* to_string(Projection p) noexcept;

/// Residual attention block Phi(X) = X + MHSA(X), tokens stored as columns
/// (X is d x N). No bias, no layer norm; scores are scaled by 1/sqrt(d/heads).
struct AttentionBlockWeights {
  Matrix wq, wk, wv, wo;
  std::size_t heads = 1;

  std::size_t dim() const noexcept { return wq.rows(); }
  const Matrix& get(Projection p) const noexcept;
  Matrix& get(Projection p) noexcept;
  void validate() const;
};

/// Projection outputs Y^(p) and per-head softmax weights of one forward pass.
struct AttentionCache {
  std::array<Matrix, 4> y;     // indexed by Projection
  std::vector<Matrix> probs;   // heads x (N x N), probs[h](t, s) = weight of key s for query t
  Matrix concat;               // d x N head outputs before Wo

  const Matrix& proj(Projection p) const noexcept { return y[static_cast<std::size_t>(p)]; }
};

struct AttentionResult {
  Matrix z;
  AttentionCache cache;
};

AttentionResult attention_forward(const AttentionBlockWeights& w, const Matrix& x);

/// Block output recomputed from given Q/K/V projection outputs:
/// z = x + Wo * attend(yq, yk, yv). Used for perturbation studies on Y^(p).
Matrix attention_from_projections(const Matrix& x, const Matrix& yq, const Matrix& yk,
                                  const Matrix& yv, const Matrix& wo, std::size_t heads);

/// ||Z - Z_hat||_F^2.
double block_loss(const Matrix& z, const Matrix& z_hat);

/// G^(p) = dL/dY^(p) for L = ||Phi(X) - Phi_hat(X)||_F^2, with Phi_hat held
/// fixed and the derivative taken through the full-precision block.
struct ProjectionGradients {
  std::array<Matrix, 4> g;
  double loss = 0.0;

  const Matrix& operator[](Projection p) const noexcept { return g[static_cast<std::size_t>(p)]; }
};

ProjectionGradients projection_gradients(const AttentionBlockWeights& full,
                                         const AttentionBlockWeights& quantized,
                                         const Matrix& x);

/// dL/dW^(p) assembled from the projection gradients (G^(p) X^T, or G^(O) C^T).
Matrix weight_gradient(const ProjectionGradients& grads, const AttentionCache& cache,
                       const Matrix& x, Projection p);

}  // namespace hbvla
