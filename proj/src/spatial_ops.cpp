#include "stnas/spatial_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stnas {

namespace {

void require_graph_signal(const char* op, const Tensor& x, std::size_t d_model) {
  if (x.rank() != 3 || x.dim(2) != d_model) {
    throw std::invalid_argument(std::string(op) + ": expected [B,N," + std::to_string(d_model) +
                                "] input, got " + ad::shape_str(x.shape()));
  }
}

// sum_{k=0..K} A^k y for y [B,N,D], with A [N,N] applied on the node axis.
Tensor diffuse(const Tensor& a, const Tensor& y, std::size_t depth, const char* op) {
  const std::size_t B = y.dim(0), N = y.dim(1), D = y.dim(2);
  if (a.rank() != 2 || a.dim(0) != N || a.dim(1) != N) {
    throw std::invalid_argument(std::string(op) + ": adjacency " + ad::shape_str(a.shape()) +
                                " does not match " + std::to_string(N) + " nodes");
  }
  if (depth == 0) return y;
  const Tensor flat = ad::reshape(ad::transpose(y, {1, 0, 2}), {N, B * D});
  Tensor acc = flat;
  Tensor cur = flat;
  for (std::size_t k = 1; k <= depth; ++k) {
    cur = ad::matmul(a, cur);
    acc = ad::add(acc, cur);
  }
  return ad::transpose(ad::reshape(acc, {N, B, D}), {1, 0, 2});
}

struct HeadOutputs {
  std::vector<Tensor> attention;
  std::vector<Tensor> messages;
};

HeadOutputs attend(const Tensor& x, const GnnAttParams& p, bool keep_attention) {
  require_graph_signal("gnn_att", x, p.w1.dim(0));
  const std::size_t width = x.dim(2) / p.groups;
  const std::size_t per_group = p.heads_per_group();
  const std::size_t head_dim = width / per_group;
  const double inv = 1.0 / std::sqrt(static_cast<double>(head_dim));
  HeadOutputs out;
  for (std::size_t g = 0; g < p.groups; ++g) {
    const Tensor xg = p.groups == 1 ? x : ad::slice(x, 2, g * width, width);
    const Tensor q = linear_last(xg, p.wq[g]);
    const Tensor k = linear_last(xg, p.wk[g]);
    const Tensor v = linear_last(xg, p.wv[g]);
    for (std::size_t h = 0; h < per_group; ++h) {
      auto head = [&](const Tensor& t) {
        return per_group == 1 ? t : ad::slice(t, 2, h * head_dim, head_dim);
      };
      const Tensor scores =
          ad::scale(ad::matmul(head(q), ad::transpose(head(k), {0, 2, 1})), inv);
      const Tensor att = ad::softmax(scores, 2);
      if (keep_attention) out.attention.push_back(att);
      out.messages.push_back(ad::matmul(att, head(v)));
    }
  }
  return out;
}

}  // namespace

void validate_attention_layout(std::size_t d_model, std::size_t heads, std::size_t groups) {
  if (heads == 0 || groups == 0) {
    throw std::invalid_argument("gnn_att: heads and groups must be positive");
  }
  if (d_model % heads != 0) {
    throw std::invalid_argument("gnn_att: heads=" + std::to_string(heads) +
                                " does not divide D=" + std::to_string(d_model));
  }
  if (d_model % groups != 0) {
    throw std::invalid_argument("gnn_att: groups=" + std::to_string(groups) +
                                " does not divide D=" + std::to_string(d_model));
  }
  if (heads > groups && heads % groups != 0) {
    throw std::invalid_argument("gnn_att: heads=" + std::to_string(heads) +
                                " cannot be spread evenly over groups=" + std::to_string(groups));
  }
  const std::size_t per_group = heads > groups ? heads / groups : 1;
  if ((d_model / groups) % per_group != 0) {
    throw std::invalid_argument("gnn_att: group width " + std::to_string(d_model / groups) +
                                " not divisible by " + std::to_string(per_group) + " heads");
  }
}

GnnFixedParams GnnFixedParams::init(std::size_t d_model, std::size_t depth, Rng& rng) {
  return {glorot_parameter({d_model, d_model}, rng), depth};
}

void GnnFixedParams::collect(std::vector<Tensor>& out) const { out.push_back(w); }

GnnAdapParams GnnAdapParams::init(std::size_t nodes, std::size_t node_dim, std::size_t d_model,
                                  std::size_t depth, Rng& rng) {
  if (node_dim == 0) throw std::invalid_argument("gnn_adap: node embedding size must be >= 1");
  GnnAdapParams p;
  p.e1 = uniform_parameter({nodes, node_dim}, 1.0, rng);
  p.e2 = uniform_parameter({nodes, node_dim}, 1.0, rng);
  p.w = glorot_parameter({d_model, d_model}, rng);
  p.depth = depth;
  return p;
}

void GnnAdapParams::collect(std::vector<Tensor>& out) const {
  out.push_back(e1);
  out.push_back(e2);
  out.push_back(w);
}

GnnAttParams GnnAttParams::init(std::size_t d_model, std::size_t heads, std::size_t groups,
                                Rng& rng) {
  validate_attention_layout(d_model, heads, groups);
  GnnAttParams p;
  p.heads = heads;
  p.groups = groups;
  const std::size_t width = d_model / groups;
  for (std::size_t g = 0; g < groups; ++g) {
    p.wq.push_back(glorot_parameter({width, width}, rng));
    p.wk.push_back(glorot_parameter({width, width}, rng));
    p.wv.push_back(glorot_parameter({width, width}, rng));
  }
  p.w1 = glorot_parameter({d_model, d_model}, rng);
  p.b1 = zero_parameter({d_model});
  p.w2 = glorot_parameter({d_model, d_model}, rng);
  p.b2 = zero_parameter({d_model});
  return p;
}

void GnnAttParams::collect(std::vector<Tensor>& out) const {
  for (std::size_t g = 0; g < groups; ++g) {
    out.push_back(wq[g]);
    out.push_back(wk[g]);
    out.push_back(wv[g]);
  }
  out.push_back(w1);
  out.push_back(b1);
  out.push_back(w2);
  out.push_back(b2);
}

std::size_t GnnAttParams::heads_per_group() const { return heads > groups ? heads / groups : 1; }

Tensor op_gnn_fixed(const Tensor& x, const Tensor& a_dis, const GnnFixedParams& p) {
  require_graph_signal("gnn_fixed", x, p.w.dim(0));
  if (!a_dis.defined()) throw std::invalid_argument("gnn_fixed: no predefined adjacency");
  return diffuse(a_dis, linear_last(x, p.w), p.depth, "gnn_fixed");
}

Tensor build_adaptive_adj(const Tensor& e1, const Tensor& e2) {
  if (e1.rank() != 2 || e2.rank() != 2 || e1.shape() != e2.shape()) {
    throw std::invalid_argument("adaptive adjacency: embeddings " + ad::shape_str(e1.shape()) +
                                " and " + ad::shape_str(e2.shape()) + " differ");
  }
  return ad::softmax(ad::relu(ad::matmul(e1, ad::transpose(e2, {1, 0}))), 1);
}

Tensor op_gnn_adap(const Tensor& x, const GnnAdapParams& p) {
  require_graph_signal("gnn_adap", x, p.w.dim(0));
  const Tensor xw = linear_last(x, p.w);
  if (p.depth == 0) return xw;
  return diffuse(build_adaptive_adj(p.e1, p.e2), xw, p.depth, "gnn_adap");
}

std::vector<Tensor> gnn_att_attention(const Tensor& x, const GnnAttParams& p) {
  return attend(x, p, true).attention;
}

Tensor gnn_att_messages(const Tensor& x, const GnnAttParams& p) {
  const HeadOutputs h = attend(x, p, false);
  return h.messages.size() == 1 ? h.messages.front() : ad::concat(h.messages, 2);
}

Tensor op_gnn_att(const Tensor& x, const GnnAttParams& p) {
  const Tensor msg = gnn_att_messages(x, p);
  const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
  const Tensor flat = ad::reshape(msg, {B * N, D});
  const Tensor hidden = ad::relu(affine(flat, p.w1, p.b1));
  return ad::reshape(affine(hidden, p.w2, p.b2), {B, N, D});
}

Tensor aggregate_patches(std::span<const Tensor> outputs) {
  if (outputs.empty()) throw std::invalid_argument("aggregate_patches: no patch outputs");
  Tensor acc = outputs.front();
  for (std::size_t m = 1; m < outputs.size(); ++m) acc = ad::add(acc, outputs[m]);
  return acc;
}

}  // namespace stnas
