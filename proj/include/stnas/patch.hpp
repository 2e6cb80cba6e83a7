#pragma once

// Multi-patch transfer: slice the temporal output along time, squeeze each
// slice to one step, and bind it with the context embedding.

#include <vector>

#include "stnas/layers.hpp"

namespace stnas {

struct PatchParams {
  std::size_t patches = 1;
  std::vector<Tensor> compress_w;  // per patch [P/M, 1]
  std::vector<Tensor> compress_b;  // per patch [1]
  std::vector<Tensor> bind_w;      // per patch [2D, D]
  std::vector<Tensor> bind_b;      // per patch [D]

  static PatchParams init(std::size_t history, std::size_t patches, std::size_t d_model, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
};

/// h [B, P, N, D] -> M contiguous slices [B, P/M, N, D]. Throws if M does not divide P.
std::vector<Tensor> split_patches(const Tensor& h, std::size_t patches);

/// h [B, L, N, D] -> [B, N, D]: sum_t w[t] h[:, t] + b.
Tensor compress_patch(const Tensor& h, const Tensor& w, const Tensor& b);

/// concat(h, e_emb) on the feature axis, then an affine map 2D -> D.
Tensor bind_context(const Tensor& h, const Tensor& e_emb, const Tensor& w, const Tensor& b);

}  // namespace stnas
