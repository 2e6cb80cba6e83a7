#include "stnas/dag.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace stnas {

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 7> kNames{{
    {OpKind::Gdcc, "gdcc"},
    {OpKind::Informer, "informer"},
    {OpKind::GnnFixed, "gnn_fixed"},
    {OpKind::GnnAdap, "gnn_adap"},
    {OpKind::GnnAtt, "gnn_att"},
    {OpKind::Zero, "zero"},
    {OpKind::Identity, "identity"},
}};

bool contains(std::span<const OpKind> ops, OpKind op) {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

template <class T>
const T& require(const std::optional<T>& p, OpKind op) {
  if (!p) {
    throw std::logic_error("edge has no weights for operator '" + std::string(op_name(op)) + "'");
  }
  return *p;
}

Tensor spatial(const Tensor& x, const std::function<Tensor(const Tensor&)>& f) {
  if (x.rank() != 4) return f(x);
  const Shape& s = x.shape();
  const Tensor y = f(ad::reshape(x, {s[0] * s[1], s[2], s[3]}));
  return ad::reshape(y, s);
}

void check_logits(const Tensor& logits, const Cell& cell) {
  if (logits.rank() != 2 || logits.dim(0) != cell.edges.size() ||
      logits.dim(1) != cell.space.size()) {
    throw std::invalid_argument("cell: logits " + ad::shape_str(logits.shape()) + " expected [" +
                                std::to_string(cell.edges.size()) + "," +
                                std::to_string(cell.space.size()) + "]");
  }
}

Tensor accumulate(const Tensor& acc, const Tensor& term) {
  return acc.defined() ? ad::add(acc, term) : term;
}

// Shared DAG walk; `edge_term(e, input)` returns the contribution of edge e or
// an undefined tensor when it contributes nothing.
template <class EdgeTerm>
Tensor walk(const Tensor& x, const Cell& cell, EdgeTerm&& edge_term) {
  std::vector<Tensor> node(cell.nodes + 1);
  node[0] = x;
  Tensor out;
  std::size_t e = 0;
  for (std::size_t j = 1; j <= cell.nodes; ++j) {
    Tensor acc;
    for (std::size_t i = 0; i < j; ++i, ++e) {
      const Tensor term = edge_term(e, node[i]);
      if (term.defined()) acc = accumulate(acc, term);
    }
    node[j] = acc.defined() ? acc : Tensor::zeros(x.shape());
    if (!acc.defined()) continue;
    out = accumulate(out, cell.multiplicity ? ad::scale(acc, static_cast<double>(j)) : acc);
  }
  return out.defined() ? out : Tensor::zeros(x.shape());
}

}  // namespace

std::string_view op_name(OpKind op) {
  for (const auto& [k, name] : kNames) {
    if (k == op) return name;
  }
  throw std::logic_error("op_name: bad operator");
}

OpKind parse_op(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown operator '" + std::string(name) + "'");
}

bool is_temporal_op(OpKind op) { return op == OpKind::Gdcc || op == OpKind::Informer; }

bool is_spatial_op(OpKind op) {
  return op == OpKind::GnnFixed || op == OpKind::GnnAdap || op == OpKind::GnnAtt;
}

std::vector<OpKind> temporal_space() {
  return {OpKind::Gdcc, OpKind::Informer, OpKind::Zero, OpKind::Identity};
}

std::vector<OpKind> spatial_space(bool has_adjacency) {
  std::vector<OpKind> s;
  if (has_adjacency) s.push_back(OpKind::GnnFixed);
  s.insert(s.end(), {OpKind::GnnAdap, OpKind::GnnAtt, OpKind::Zero, OpKind::Identity});
  return s;
}

std::vector<OpKind> mixed_space(bool has_adjacency) {
  std::vector<OpKind> s{OpKind::Gdcc, OpKind::Informer};
  for (OpKind op : spatial_space(has_adjacency)) s.push_back(op);
  return s;
}

EdgeOps EdgeOps::init(std::span<const OpKind> space, const OpHyper& h, Rng& rng) {
  EdgeOps e;
  if (contains(space, OpKind::Gdcc)) e.gdcc = GdccParams::init(h.d_model, h.kernel, h.dilation, rng);
  if (contains(space, OpKind::Informer)) {
    e.informer = InformerParams::init(h.d_model, h.informer_dim, rng);
  }
  if (contains(space, OpKind::GnnFixed)) e.gnn_fixed = GnnFixedParams::init(h.d_model, h.depth, rng);
  if (contains(space, OpKind::GnnAdap)) {
    e.gnn_adap = GnnAdapParams::init(h.nodes, h.node_dim, h.d_model, h.depth, rng);
  }
  if (contains(space, OpKind::GnnAtt)) e.gnn_att = GnnAttParams::init(h.d_model, h.heads, h.groups, rng);
  return e;
}

void EdgeOps::collect(std::vector<Tensor>& out, std::span<const OpKind> ops) const {
  if (gdcc && contains(ops, OpKind::Gdcc)) gdcc->collect(out);
  if (informer && contains(ops, OpKind::Informer)) informer->collect(out);
  if (gnn_fixed && contains(ops, OpKind::GnnFixed)) gnn_fixed->collect(out);
  if (gnn_adap && contains(ops, OpKind::GnnAdap)) gnn_adap->collect(out);
  if (gnn_att && contains(ops, OpKind::GnnAtt)) gnn_att->collect(out);
}

std::vector<Edge> cell_edges(std::size_t nodes) {
  std::vector<Edge> edges;
  for (std::size_t j = 1; j <= nodes; ++j) {
    for (std::size_t i = 0; i < j; ++i) edges.push_back({i, j});
  }
  return edges;
}

Cell Cell::init(std::size_t nodes, std::vector<OpKind> space, const OpHyper& hyper, Tensor a_dis,
                bool multiplicity, Rng& rng) {
  if (nodes == 0) throw std::invalid_argument("cell: node count must be >= 1");
  if (space.empty()) throw std::invalid_argument("cell: empty operator space");
  if (contains(space, OpKind::GnnFixed) && !a_dis.defined()) {
    throw std::invalid_argument("cell: gnn_fixed needs a predefined adjacency");
  }
  Cell c;
  c.nodes = nodes;
  c.space = std::move(space);
  c.edges = cell_edges(nodes);
  c.a_dis = std::move(a_dis);
  c.multiplicity = multiplicity;
  for (std::size_t e = 0; e < c.edges.size(); ++e) c.ops.push_back(EdgeOps::init(c.space, hyper, rng));
  return c;
}

void Cell::collect(std::vector<Tensor>& out, std::span<const OpKind> choice) const {
  for (std::size_t e = 0; e < ops.size(); ++e) {
    if (choice.empty()) {
      ops[e].collect(out, space);
    } else {
      ops[e].collect(out, choice.subspan(e, 1));
    }
  }
}

std::size_t Cell::index_of(OpKind op) const {
  const auto it = std::find(space.begin(), space.end(), op);
  if (it == space.end()) {
    throw std::invalid_argument("operator '" + std::string(op_name(op)) +
                                "' is not in this cell's space");
  }
  return static_cast<std::size_t>(it - space.begin());
}

Tensor mix_weights(const Tensor& logits) {
  for (double v : logits.values()) {
    if (!std::isfinite(v)) throw std::domain_error("mix_weights: non-finite logit");
  }
  return ad::softmax(logits, logits.rank() - 1);
}

Tensor apply_op(OpKind op, const Tensor& x, const EdgeOps& ops, const Tensor& a_dis) {
  switch (op) {
    case OpKind::Zero:
      return Tensor::zeros(x.shape());
    case OpKind::Identity:
      return x;
    case OpKind::Gdcc:
      return op_gdcc(x, require(ops.gdcc, op));
    case OpKind::Informer:
      return op_informer(x, require(ops.informer, op));
    case OpKind::GnnFixed: {
      const auto& p = require(ops.gnn_fixed, op);
      return spatial(x, [&](const Tensor& v) { return op_gnn_fixed(v, a_dis, p); });
    }
    case OpKind::GnnAdap: {
      const auto& p = require(ops.gnn_adap, op);
      return spatial(x, [&](const Tensor& v) { return op_gnn_adap(v, p); });
    }
    case OpKind::GnnAtt: {
      const auto& p = require(ops.gnn_att, op);
      return spatial(x, [&](const Tensor& v) { return op_gnn_att(v, p); });
    }
  }
  throw std::logic_error("apply_op: bad operator");
}

Tensor cell_forward(const Tensor& x, const Cell& cell, const Tensor& logits) {
  check_logits(logits, cell);
  const std::size_t K = cell.space.size();
  const Tensor w = ad::reshape(mix_weights(logits), {cell.edges.size() * K});
  return walk(x, cell, [&](std::size_t e, const Tensor& in) {
    Tensor acc;
    for (std::size_t k = 0; k < K; ++k) {
      const OpKind op = cell.space[k];
      if (op == OpKind::Zero) continue;
      const Tensor y = apply_op(op, in, cell.ops[e], cell.a_dis);
      acc = accumulate(acc, ad::scale(y, ad::slice(w, 0, e * K + k, 1)));
    }
    return acc;
  });
}

Tensor cell_forward_hard(const Tensor& x, const Cell& cell, std::span<const OpKind> choice) {
  if (choice.size() != cell.edges.size()) {
    throw std::invalid_argument("cell: " + std::to_string(choice.size()) +
                                " operator choices for " + std::to_string(cell.edges.size()) +
                                " edges");
  }
  return walk(x, cell, [&](std::size_t e, const Tensor& in) {
    if (choice[e] == OpKind::Zero) return Tensor();
    return apply_op(choice[e], in, cell.ops[e], cell.a_dis);
  });
}

std::vector<OpKind> derive_choice(const Tensor& logits, std::span<const OpKind> space) {
  if (logits.rank() != 2 || logits.dim(1) != space.size()) {
    throw std::invalid_argument("derive: logits " + ad::shape_str(logits.shape()) +
                                " do not match a space of " + std::to_string(space.size()));
  }
  const auto v = logits.values();
  const std::size_t K = space.size();
  std::vector<OpKind> out;
  for (std::size_t e = 0; e < logits.dim(0); ++e) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (v[e * K + k] > v[e * K + best]) best = k;
    }
    out.push_back(space[best]);
  }
  return out;
}

Tensor init_logits(const Cell& cell) {
  return Tensor::parameter({cell.edges.size(), cell.space.size()},
                           std::vector<double>(cell.edges.size() * cell.space.size(), 0.0));
}

Tensor temporal_dag_forward(const Tensor& z0, const TemporalDag& dag) {
  if (!dag.hard.empty()) return cell_forward_hard(z0, dag.cell, dag.hard);
  return cell_forward(z0, dag.cell, dag.alpha);
}

Tensor spatial_dag_forward(const Tensor& h, const SpatialDagSet& set, std::size_t m) {
  if (m >= set.patches()) {
    throw std::out_of_range("spatial DAG " + std::to_string(m) + " of " +
                            std::to_string(set.patches()));
  }
  if (!set.hard.empty()) return cell_forward_hard(h, set.cell, set.hard.at(m));
  return cell_forward(h, set.cell, set.beta[m]);
}

}  // namespace stnas
