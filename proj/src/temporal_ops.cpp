#include "stnas/temporal_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace stnas {

namespace {

void require_sequence(const char* op, const Tensor& z, std::size_t d_model) {
  if (z.rank() != 4 || z.dim(3) != d_model) {
    throw std::invalid_argument(std::string(op) + ": expected [B,P,N," + std::to_string(d_model) +
                                "] input, got " + ad::shape_str(z.shape()));
  }
}

// [B,P,N,D] -> [B*N, P, D]
Tensor to_node_major(const Tensor& z) {
  const Shape& s = z.shape();
  return ad::reshape(ad::transpose(z, {0, 2, 1, 3}), {s[0] * s[2], s[1], s[3]});
}

// [B*N, P, D] -> [B,P,N,D]
Tensor from_node_major(const Tensor& y, std::size_t batch, std::size_t nodes) {
  const Shape& s = y.shape();
  return ad::transpose(ad::reshape(y, {batch, nodes, s[1], s[2]}), {0, 2, 1, 3});
}

struct Projections {
  Tensor attention;  // [BN, P, P]
  Tensor values;     // [BN, P, D']
};

Projections attend(const Tensor& z, const InformerParams& p) {
  require_sequence("informer", z, p.wq.dim(0));
  const Tensor zn = to_node_major(z);
  const Tensor q = linear_last(zn, p.wq);
  const Tensor k = linear_last(zn, p.wk);
  const Tensor v = linear_last(zn, p.wv);
  const double inv = 1.0 / std::sqrt(static_cast<double>(p.wq.dim(1)));
  const Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k, {0, 2, 1})), inv);
  return {ad::softmax(scores, 2), v};
}

}  // namespace

GdccParams GdccParams::init(std::size_t d_model, std::size_t kernel, std::size_t dilation,
                            Rng& rng) {
  if (kernel == 0 || dilation == 0) {
    throw std::invalid_argument("gdcc: kernel size and dilation must be positive");
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(kernel * d_model + d_model));
  GdccParams p;
  p.filter = uniform_parameter({kernel, d_model, d_model}, bound, rng);
  p.gate = uniform_parameter({kernel, d_model, d_model}, bound, rng);
  p.dilation = dilation;
  return p;
}

void GdccParams::collect(std::vector<Tensor>& out) const {
  out.push_back(filter);
  out.push_back(gate);
}

InformerParams InformerParams::init(std::size_t d_model, std::size_t d_attn, Rng& rng) {
  InformerParams p;
  p.wq = glorot_parameter({d_model, d_attn}, rng);
  p.wk = glorot_parameter({d_model, d_attn}, rng);
  p.wv = glorot_parameter({d_model, d_attn}, rng);
  p.wo = glorot_parameter({d_attn, d_model}, rng);
  return p;
}

void InformerParams::collect(std::vector<Tensor>& out) const {
  out.push_back(wq);
  out.push_back(wk);
  out.push_back(wv);
  out.push_back(wo);
}

Tensor op_gdcc(const Tensor& z, const GdccParams& p) {
  require_sequence("gdcc", z, p.filter.dim(1));
  const Tensor zn = to_node_major(z);
  const Tensor filtered = ad::causal_conv1d(zn, p.filter, p.dilation);
  const Tensor gate = ad::sigmoid(ad::causal_conv1d(zn, p.gate, p.dilation));
  return from_node_major(ad::mul(filtered, gate), z.dim(0), z.dim(2));
}

Tensor informer_attention(const Tensor& z, const InformerParams& p) {
  return attend(z, p).attention;
}

Tensor op_informer(const Tensor& z, const InformerParams& p) {
  const Projections a = attend(z, p);
  const Tensor mixed = ad::matmul(a.attention, a.values);
  return from_node_major(linear_last(mixed, p.wo), z.dim(0), z.dim(2));
}

}  // namespace stnas
