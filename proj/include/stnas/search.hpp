#pragma once

// Bi-level search, derivation, retraining and evaluation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stnas/metrics.hpp"
#include "stnas/model.hpp"

namespace stnas {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // added to the gradient, L2 style
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamOptions options);

  /// Updates every parameter that received a gradient.
  void step();
  void zero_grad();
  std::size_t steps() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamOptions options_;
  std::size_t t_ = 0;
};

/// mean |pred - target| over positions whose target is not the sentinel.
Tensor loss_masked_mae(const Tensor& pred, const Tensor& target,
                       std::optional<double> sentinel = std::nullopt);

struct SearchOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  AdamOptions weight_opt;
  AdamOptions arch_opt;
  std::uint64_t seed = 0;
  std::optional<double> sentinel;
};

struct SearchState {
  std::unique_ptr<Supernet> net;
  Adam weight_opt;
  Adam arch_opt;
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::size_t peak_tape_bytes = 0;
  std::optional<double> sentinel;
};

SearchState make_search_state(const ModelConfig& config, const Tensor& adjacency,
                              const data::NormStats& stats, const SearchOptions& options);

struct StepReport {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// One first-order alternation: an Adam step on the weights from the train
/// batch, then an Adam step on the logits from the val batch. Batches must
/// carry the matching split tags.
StepReport bilevel_step(SearchState& state, const data::Batch& train, const data::Batch& val);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct SearchResult {
  std::vector<EpochLog> log;
  DiscreteArchitecture arch;
  std::size_t peak_tape_bytes = 0;
  double val_mae = 0.0;
};

SearchResult run_search(SearchState& state, const data::DatasetSplits& splits,
                        const SearchOptions& options);

struct TrainOptions {
  std::size_t epochs = 40;
  std::size_t patience = 10;  // 0 disables early stopping
  std::size_t batch_size = 32;
  AdamOptions opt;
  std::uint64_t seed = 0;
  std::optional<double> sentinel;
};

struct TrainResult {
  std::unique_ptr<Supernet> net;  // restored to the best validation checkpoint
  std::vector<EpochLog> log;      // val_loss holds the full validation MAE
  double best_val_mae = 0.0;
  std::size_t best_epoch = 0;
  MetricReport test;
};

TrainResult train_derived(const DiscreteArchitecture& arch, const ModelConfig& config,
                          const Tensor& adjacency, const data::DatasetSplits& splits,
                          const TrainOptions& options);

/// Forward pass over a whole split without recording; raw predictions [S, Q, N, C].
std::vector<double> predict(const Supernet& net, const data::ForecastDataset& data,
                            std::size_t batch_size);
MetricReport evaluate(const Supernet& net, const data::ForecastDataset& data,
                      std::size_t batch_size, std::optional<double> sentinel);

/// Runs the search in both modes for the same epochs and seed.
std::vector<BenchRow> benchmark_search(ModelConfig config, const Tensor& adjacency,
                                       const data::DatasetSplits& splits,
                                       const SearchOptions& options);

void save_parameters(const std::filesystem::path& path, const Supernet& net);
/// Names and shapes must match exactly.
void load_parameters(const std::filesystem::path& path, Supernet& net);

}  // namespace stnas
