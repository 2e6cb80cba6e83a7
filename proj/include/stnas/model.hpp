#pragma once

// The full forecasting network: embeddings, the temporal cell, multi-patch
// transfer, the shared-weight spatial cells, and the output layer. In mixed
// mode two union-space cells run back to back on the full [B, P, N, D]
// representation and there is no patch transfer.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stnas/arch.hpp"
#include "stnas/dag.hpp"
#include "stnas/data.hpp"
#include "stnas/embedding.hpp"
#include "stnas/patch.hpp"

namespace stnas {

struct ModelConfig {
  std::size_t nodes = 0;
  std::size_t channels = 1;
  std::size_t history = 12;  // P
  std::size_t horizon = 12;  // Q
  std::size_t d_model = 16;
  std::size_t patches = 2;         // M
  std::size_t temporal_nodes = 4;  // N_T
  std::size_t spatial_nodes = 4;   // N_S
  std::size_t depth = 2;           // K
  std::size_t heads = 4;
  std::size_t groups = 1;
  std::size_t node_dim = 8;
  std::size_t slots_per_day = 288;
  std::size_t kernel = 2;
  std::size_t dilation = 1;
  std::size_t informer_dim = 0;  // 0 means D
  std::size_t hidden_factor = 4;
  bool multiplicity = false;
  SearchMode mode = SearchMode::Decoupled;
  /// Restrict the spaces; empty means the full default space.
  std::vector<OpKind> temporal_ops;
  std::vector<OpKind> spatial_ops;

  void validate() const;
  OpHyper op_hyper() const;
  std::map<std::string, long long> hyperparameters() const;
};

struct OutputParams {
  Tensor time_w, time_b;  // [P, 1], [1]
  Tensor mix_w, mix_b;    // second time compression in mixed mode
  Tensor w1, b1;          // [3D, hD]
  Tensor w2, b2;          // [hD, Q*C]
};

class Supernet {
 public:
  /// `adjacency` is the row-normalised predefined matrix, or undefined.
  Supernet(const ModelConfig& config, Tensor adjacency, data::NormStats stats, std::uint64_t seed);

  /// Denormalised predictions [B, Q, N, C].
  Tensor forward(const Tensor& x, std::span<const data::TimeIndex> time) const;
  Tensor forward(const data::Batch& batch) const { return forward(batch.x, batch.time); }

  /// Network weights; restricted to the chosen operators once hard.
  std::vector<Tensor> weights() const;
  /// Architecture logits; empty once hard.
  std::vector<Tensor> arch_params() const;
  /// Every tensor with a stable name, for checkpoints.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  DiscreteArchitecture derive() const;
  void set_hard(const DiscreteArchitecture& arch);
  bool hard() const { return hard_; }

  const ModelConfig& config() const { return config_; }
  const data::NormStats& stats() const { return stats_; }

  EmbeddingParams& embedding() { return embedding_; }
  TemporalDag& temporal() { return temporal_; }
  SpatialDagSet& spatial() { return spatial_; }
  /// The two union-space cells of mixed mode.
  std::vector<TemporalDag>& mixed() { return mixed_; }
  PatchParams& patch() { return patch_; }
  OutputParams& output() { return output_; }

 private:
  Tensor head(const Tensor& e_emb, const Tensor& a, const Tensor& b) const;

  ModelConfig config_;
  data::NormStats stats_;
  bool hard_ = false;
  EmbeddingParams embedding_;
  TemporalDag temporal_;
  PatchParams patch_;
  SpatialDagSet spatial_;
  std::vector<TemporalDag> mixed_;
  OutputParams output_;
};

}  // namespace stnas
