#pragma once

// Searchable cells. A cell with n intermediate nodes has an edge for every
// pair i < j over nodes 0..n, visited in the order j = 1..n, i = 0..j-1.
// Node 0 is the input; node j sums its incoming edges; the cell output is the
// sum of nodes 1..n (each counted j times when `multiplicity` is set).

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "stnas/layers.hpp"
#include "stnas/spatial_ops.hpp"
#include "stnas/temporal_ops.hpp"

namespace stnas {

enum class OpKind { Gdcc, Informer, GnnFixed, GnnAdap, GnnAtt, Zero, Identity };

std::string_view op_name(OpKind op);
/// Throws std::invalid_argument for names outside the vocabulary.
OpKind parse_op(std::string_view name);
bool is_temporal_op(OpKind op);
bool is_spatial_op(OpKind op);

std::vector<OpKind> temporal_space();
/// gnn_fixed is left out when there is no predefined adjacency.
std::vector<OpKind> spatial_space(bool has_adjacency);
/// Union of both spaces with zero and identity appearing once.
std::vector<OpKind> mixed_space(bool has_adjacency);

struct OpHyper {
  std::size_t d_model = 16;
  std::size_t nodes = 1;
  std::size_t kernel = 2;
  std::size_t dilation = 1;
  std::size_t informer_dim = 16;
  std::size_t depth = 2;
  std::size_t node_dim = 8;
  std::size_t heads = 4;
  std::size_t groups = 1;
};

/// Weights of every parametric operator an edge can hold. Only operators in
/// the cell's space are initialised.
struct EdgeOps {
  std::optional<GdccParams> gdcc;
  std::optional<InformerParams> informer;
  std::optional<GnnFixedParams> gnn_fixed;
  std::optional<GnnAdapParams> gnn_adap;
  std::optional<GnnAttParams> gnn_att;

  static EdgeOps init(std::span<const OpKind> space, const OpHyper& hyper, Rng& rng);
  void collect(std::vector<Tensor>& out, std::span<const OpKind> ops) const;
};

struct Edge {
  std::size_t from;
  std::size_t to;
};

std::vector<Edge> cell_edges(std::size_t nodes);

struct Cell {
  std::size_t nodes = 0;
  std::vector<OpKind> space;
  std::vector<Edge> edges;
  std::vector<EdgeOps> ops;  // one bundle per edge
  Tensor a_dis;              // undefined when gnn_fixed is not in the space
  bool multiplicity = false;

  static Cell init(std::size_t nodes, std::vector<OpKind> space, const OpHyper& hyper,
                   Tensor a_dis, bool multiplicity, Rng& rng);
  /// Weights of the given per-edge choices, or of every operator when empty.
  void collect(std::vector<Tensor>& out, std::span<const OpKind> choice = {}) const;
  /// Index of `op` in the space; throws when absent.
  std::size_t index_of(OpKind op) const;
};

/// Softmax over the last axis of [..., K] logits. Throws on non-finite logits.
Tensor mix_weights(const Tensor& logits);

/// Applies one operator. Temporal operators need [B, P, N, D]; spatial ones
/// accept [B, N, D] or run per time step on [B, P, N, D].
Tensor apply_op(OpKind op, const Tensor& x, const EdgeOps& ops, const Tensor& a_dis);

/// Continuous relaxation with logits [E, K].
Tensor cell_forward(const Tensor& x, const Cell& cell, const Tensor& logits);
/// One operator per edge.
Tensor cell_forward_hard(const Tensor& x, const Cell& cell, std::span<const OpKind> choice);

/// Argmax per edge row; ties go to the earliest operator in the space.
std::vector<OpKind> derive_choice(const Tensor& logits, std::span<const OpKind> space);

/// Zero-initialised logits [E, K] for a cell, registered as a parameter.
Tensor init_logits(const Cell& cell);

struct TemporalDag {
  Cell cell;
  Tensor alpha;               // [E, K]
  std::vector<OpKind> hard;   // empty while searching
};

Tensor temporal_dag_forward(const Tensor& z0, const TemporalDag& dag);

/// M spatial DAGs sharing one set of operator weights per edge position,
/// each with its own logits.
struct SpatialDagSet {
  Cell cell;
  std::vector<Tensor> beta;                // M x [E, K]
  std::vector<std::vector<OpKind>> hard;   // empty while searching

  std::size_t patches() const { return beta.size(); }
};

Tensor spatial_dag_forward(const Tensor& h, const SpatialDagSet& set, std::size_t m);

}  // namespace stnas
