#pragma once

// Spatial message-passing operators over inputs laid out [B, N, D]. The
// three graph operators differ only in where the propagation matrix comes
// from: a predefined distance matrix, learned node embeddings, or attention
// computed from the input itself.

#include <span>
#include <vector>

#include "stnas/layers.hpp"

namespace stnas {

/// sum_{k=0..K} A^k x W with a predefined A.
struct GnnFixedParams {
  Tensor w;  // [D, D]
  std::size_t depth = 2;

  static GnnFixedParams init(std::size_t d_model, std::size_t depth, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
};

/// sum_{k=0..K} A^k x W with A = softmax(relu(E1 E2^T)) recomputed from the
/// embeddings on every forward.
struct GnnAdapParams {
  Tensor e1;  // [N, d]
  Tensor e2;  // [N, d]
  Tensor w;   // [D, D]
  std::size_t depth = 2;

  static GnnAdapParams init(std::size_t nodes, std::size_t node_dim, std::size_t d_model,
                            std::size_t depth, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
};

/// Grouped multi-head attention over nodes followed by a two-layer map.
/// Features split into `groups` equal slices; each slice runs
/// max(1, heads / groups) heads.
struct GnnAttParams {
  std::vector<Tensor> wq;  // per group [D/g, D/g], heads side by side
  std::vector<Tensor> wk;
  std::vector<Tensor> wv;
  Tensor w1, b1, w2, b2;
  std::size_t heads = 4;
  std::size_t groups = 1;

  static GnnAttParams init(std::size_t d_model, std::size_t heads, std::size_t groups, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
  std::size_t heads_per_group() const;
};

/// Throws std::invalid_argument unless heads and groups split d_model evenly.
void validate_attention_layout(std::size_t d_model, std::size_t heads, std::size_t groups);

Tensor op_gnn_fixed(const Tensor& x, const Tensor& a_dis, const GnnFixedParams& p);
Tensor build_adaptive_adj(const Tensor& e1, const Tensor& e2);
Tensor op_gnn_adap(const Tensor& x, const GnnAdapParams& p);
/// One [B, N, N] row-stochastic matrix per (group, head), group-major.
std::vector<Tensor> gnn_att_attention(const Tensor& x, const GnnAttParams& p);
/// The concatenated head outputs before the two-layer map, [B, N, D].
Tensor gnn_att_messages(const Tensor& x, const GnnAttParams& p);
Tensor op_gnn_att(const Tensor& x, const GnnAttParams& p);

/// Elementwise sum of the per-patch spatial outputs.
Tensor aggregate_patches(std::span<const Tensor> outputs);

}  // namespace stnas
