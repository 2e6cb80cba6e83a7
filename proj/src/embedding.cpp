#include "stnas/embedding.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stnas {

EmbeddingParams EmbeddingParams::init(std::size_t channels, std::size_t nodes,
                                      std::size_t slots_per_day, std::size_t d_model, Rng& rng) {
  if (d_model == 0) throw std::invalid_argument("embedding: D must be positive");
  const double table = 1.0 / std::sqrt(static_cast<double>(d_model));
  EmbeddingParams p;
  p.w_t = glorot_parameter({channels, d_model}, rng);
  p.b_t = zero_parameter({d_model});
  p.node = uniform_parameter({nodes, d_model}, table, rng);
  p.tod = uniform_parameter({slots_per_day, d_model}, table, rng);
  p.dow = uniform_parameter({7, d_model}, table, rng);
  p.fuse_w = glorot_parameter({3 * d_model, d_model}, rng);
  p.fuse_b = zero_parameter({d_model});
  return p;
}

void EmbeddingParams::collect(std::vector<Tensor>& out) const {
  for (const auto& t : {w_t, b_t, node, tod, dow, fuse_w, fuse_b}) out.push_back(t);
}

Tensor embed_series(const Tensor& x, const EmbeddingParams& p) {
  if (x.rank() != 4 || x.dim(3) != p.w_t.dim(0)) {
    throw std::invalid_argument("embed_series: input " + ad::shape_str(x.shape()) +
                                " does not carry " + std::to_string(p.w_t.dim(0)) + " channels");
  }
  const Shape& s = x.shape();
  const std::size_t rows = s[0] * s[1] * s[2];
  const Tensor z = affine(ad::reshape(x, {rows, s[3]}), p.w_t, p.b_t);
  return ad::reshape(z, {s[0], s[1], s[2], p.d_model()});
}

Tensor fuse_context(std::span<const data::TimeIndex> time, const EmbeddingParams& p) {
  const std::size_t B = time.size(), N = p.node.dim(0), D = p.d_model();
  std::vector<std::size_t> tod, dow, node;
  tod.reserve(B * N);
  dow.reserve(B * N);
  node.reserve(B * N);
  for (const auto& t : time) {
    if (t.tod >= p.tod.dim(0) || t.dow >= 7) {
      throw std::out_of_range("fuse_context: time index (" + std::to_string(t.tod) + ", " +
                              std::to_string(t.dow) + ") outside the embedding tables");
    }
    for (std::size_t n = 0; n < N; ++n) {
      tod.push_back(t.tod);
      dow.push_back(t.dow);
      node.push_back(n);
    }
  }
  const Tensor joined =
      ad::concat({gather_rows(p.tod, tod), gather_rows(p.dow, dow), gather_rows(p.node, node)}, 1);
  return ad::reshape(affine(joined, p.fuse_w, p.fuse_b), {B, N, D});
}

}  // namespace stnas
