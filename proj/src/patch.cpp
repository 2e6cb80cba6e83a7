#include "stnas/patch.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stnas {

PatchParams PatchParams::init(std::size_t history, std::size_t patches, std::size_t d_model,
                              Rng& rng) {
  if (patches == 0 || history % patches != 0) {
    throw std::invalid_argument("patches: P=" + std::to_string(history) +
                                " is not divisible by M=" + std::to_string(patches));
  }
  const std::size_t len = history / patches;
  PatchParams p;
  p.patches = patches;
  for (std::size_t m = 0; m < patches; ++m) {
    p.compress_w.push_back(uniform_parameter({len, 1}, 1.0 / std::sqrt(static_cast<double>(len)), rng));
    p.compress_b.push_back(zero_parameter({1}));
    p.bind_w.push_back(glorot_parameter({2 * d_model, d_model}, rng));
    p.bind_b.push_back(zero_parameter({d_model}));
  }
  return p;
}

void PatchParams::collect(std::vector<Tensor>& out) const {
  for (std::size_t m = 0; m < patches; ++m) {
    out.push_back(compress_w[m]);
    out.push_back(compress_b[m]);
    out.push_back(bind_w[m]);
    out.push_back(bind_b[m]);
  }
}

std::vector<Tensor> split_patches(const Tensor& h, std::size_t patches) {
  if (h.rank() != 4) {
    throw std::invalid_argument("split_patches: expected [B,P,N,D], got " +
                                ad::shape_str(h.shape()));
  }
  const std::size_t P = h.dim(1);
  if (patches == 0 || P % patches != 0) {
    throw std::invalid_argument("split_patches: P=" + std::to_string(P) +
                                " is not divisible by M=" + std::to_string(patches));
  }
  if (patches == 1) return {h};
  const std::size_t len = P / patches;
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < patches; ++m) out.push_back(ad::slice(h, 1, m * len, len));
  return out;
}

Tensor compress_patch(const Tensor& h, const Tensor& w, const Tensor& b) {
  if (h.rank() != 4 || w.rank() != 2 || w.dim(0) != h.dim(1) || w.dim(1) != 1 || b.size() != 1) {
    throw std::invalid_argument("compress_patch: patch " + ad::shape_str(h.shape()) +
                                " incompatible with weights " + ad::shape_str(w.shape()));
  }
  const std::size_t B = h.dim(0), L = h.dim(1), N = h.dim(2), D = h.dim(3);
  const std::size_t rows = B * N * D;
  const Tensor flat = ad::reshape(ad::transpose(h, {0, 2, 3, 1}), {rows, L});
  return ad::reshape(affine(flat, w, b), {B, N, D});
}

Tensor bind_context(const Tensor& h, const Tensor& e_emb, const Tensor& w, const Tensor& b) {
  if (h.rank() != 3 || h.shape() != e_emb.shape() || w.dim(0) != 2 * h.dim(2)) {
    throw std::invalid_argument("bind_context: " + ad::shape_str(h.shape()) + " and " +
                                ad::shape_str(e_emb.shape()) + " do not bind with " +
                                ad::shape_str(w.shape()));
  }
  const std::size_t B = h.dim(0), N = h.dim(1);
  const Tensor joined = ad::reshape(ad::concat({h, e_emb}, 2), {B * N, w.dim(0)});
  return ad::reshape(affine(joined, w, b), {B, N, w.dim(1)});
}

}  // namespace stnas
