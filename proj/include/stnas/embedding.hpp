#pragma once

#include <span>
#include <vector>

#include "stnas/data.hpp"
#include "stnas/layers.hpp"

namespace stnas {

struct EmbeddingParams {
  Tensor w_t;     // [C, D]
  Tensor b_t;     // [D]
  Tensor node;    // [N, D]
  Tensor tod;     // [N_d, D]
  Tensor dow;     // [7, D]
  Tensor fuse_w;  // [3D, D]
  Tensor fuse_b;  // [D]

  static EmbeddingParams init(std::size_t channels, std::size_t nodes, std::size_t slots_per_day,
                              std::size_t d_model, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
  std::size_t d_model() const { return b_t.size(); }
};

/// x [B, P, N, C] -> Z0 [B, P, N, D], an affine map on the channel axis.
Tensor embed_series(const Tensor& x, const EmbeddingParams& p);

/// One context row per node and sample: FC(concat[E_ToD[tod], E_DoW[dow], E_N]),
/// with the time rows repeated for every node. Returns [B, N, D].
Tensor fuse_context(std::span<const data::TimeIndex> time, const EmbeddingParams& p);

}  // namespace stnas
