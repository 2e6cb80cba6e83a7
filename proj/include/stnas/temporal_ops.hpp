#pragma once

// Temporal operators. Inputs are laid out [B, P, N, D]; both operators act
// along the time axis independently for every (sample, node) pair.

#include <vector>

#include "stnas/layers.hpp"

namespace stnas {

/// Gated causal convolution: conv(z, filter) * sigmoid(conv(z, gate)).
/// Kernels are [K, D, D]; tap 0 reads the current step.
struct GdccParams {
  Tensor filter;
  Tensor gate;
  std::size_t dilation = 1;

  static GdccParams init(std::size_t d_model, std::size_t kernel, std::size_t dilation, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
};

/// Full (dense) self-attention over time with an output projection back to D.
struct InformerParams {
  Tensor wq;  // [D, D']
  Tensor wk;  // [D, D']
  Tensor wv;  // [D, D']
  Tensor wo;  // [D', D]

  static InformerParams init(std::size_t d_model, std::size_t d_attn, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
};

Tensor op_gdcc(const Tensor& z, const GdccParams& p);
Tensor op_informer(const Tensor& z, const InformerParams& p);
/// Row-stochastic attention weights [B*N, P, P] used by op_informer.
Tensor informer_attention(const Tensor& z, const InformerParams& p);

}  // namespace stnas
