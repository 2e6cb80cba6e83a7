#pragma once

// Spatio-temporal dataset loading, splitting, windowing and normalisation,
// plus the seeded synthetic diffusion generator used for desk-scale runs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stnas/tensor.hpp"

namespace stnas::data {

struct SpatialGraph {
  std::size_t num_nodes = 0;
  std::vector<std::string> node_ids;
  std::vector<double> adjacency;  // row-major N x N, entries >= 0

  double at(std::size_t i, std::size_t j) const { return adjacency[i * num_nodes + j]; }
  ad::Tensor as_tensor() const;
  /// Copy with every non-zero row scaled to sum to one.
  SpatialGraph row_normalized() const;
};

struct GraphSignalMatrix {
  std::size_t steps = 0;
  std::size_t nodes = 0;
  std::size_t channels = 1;
  std::vector<double> values;  // row-major T x N x C
  int interval_minutes = 5;
  /// Absolute slot of step 0, counted from a Monday 00:00. Zero when unknown.
  std::int64_t slot_offset = 0;
  std::optional<double> null_value;
  std::vector<std::string> node_ids;

  double at(std::size_t t, std::size_t n, std::size_t c = 0) const {
    return values[(t * nodes + n) * channels + c];
  }
};

struct LoadOptions {
  std::optional<double> null_value;
  std::optional<int> interval_minutes;  // overrides anything found in the file
};

/// CSV (`timestamp` column optional, one column per node) or the STNAS1
/// binary format, chosen by the `.bin` extension.
GraphSignalMatrix load_signals(const std::filesystem::path& path, const LoadOptions& opts = {});
/// One file per channel; every file must agree on T and N.
GraphSignalMatrix load_signal_channels(const std::vector<std::filesystem::path>& paths,
                                       const LoadOptions& opts = {});
SpatialGraph load_graph(const std::filesystem::path& path, std::size_t n);

void write_signals_csv(const std::filesystem::path& path, const GraphSignalMatrix& signals,
                       std::size_t channel = 0);
void write_signals_binary(const std::filesystem::path& path, const GraphSignalMatrix& signals);
void write_graph_csv(const std::filesystem::path& path, const SpatialGraph& graph);

enum class Split { Train, Val, Test };
const char* split_name(Split split);

struct NormStats {
  std::vector<double> mean;  // per channel
  std::vector<double> std;
};

/// Per-channel z-score statistics over steps [begin, end), skipping sentinels.
/// Throws when a channel has zero spread.
NormStats compute_stats(const GraphSignalMatrix& signals, std::size_t begin, std::size_t end);

/// Channel-last arrays; sentinel entries pass through unchanged.
std::vector<double> normalize(std::span<const double> values, const NormStats& stats,
                              std::optional<double> sentinel = std::nullopt);
std::vector<double> denormalize(std::span<const double> values, const NormStats& stats,
                                std::optional<double> sentinel = std::nullopt);

struct TimeIndex {
  std::size_t tod = 0;
  std::size_t dow = 0;
  bool operator==(const TimeIndex&) const = default;
};

std::size_t slots_per_day(int interval_minutes);
TimeIndex time_features(std::int64_t step, int interval_minutes, std::int64_t slot_offset = 0);

struct ForecastDataset {
  Split split = Split::Train;
  std::size_t history = 0;  // P
  std::size_t horizon = 0;  // Q
  std::size_t begin = 0;    // split range [begin, end) of the raw series
  std::size_t end = 0;
  std::vector<std::size_t> origins;  // last input step of each sample
  NormStats stats;
  std::shared_ptr<const GraphSignalMatrix> signals;
  std::shared_ptr<const std::vector<double>> normalized;

  std::size_t size() const { return origins.size(); }
  std::size_t nodes() const { return signals->nodes; }
  std::size_t channels() const { return signals->channels; }
};

struct DatasetSplits {
  ForecastDataset train;
  ForecastDataset val;
  ForecastDataset test;
};

DatasetSplits split_and_window(const GraphSignalMatrix& signals, std::array<double, 3> ratios,
                               std::size_t history, std::size_t horizon);

struct Batch {
  Split split = Split::Train;
  ad::Tensor x;  // normalised inputs [B, P, N, C]
  ad::Tensor y;  // raw targets [B, Q, N, C]
  std::vector<TimeIndex> time;  // of the last input step
  std::vector<std::size_t> origins;

  std::size_t size() const { return time.size(); }
};

Batch make_batch(const ForecastDataset& data, std::span<const std::size_t> samples);
/// Consecutive batches over `order` (the last one may be short).
std::vector<Batch> make_batches(const ForecastDataset& data,
                                std::span<const std::size_t> order, std::size_t batch_size);

struct SyntheticData {
  SpatialGraph graph;
  GraphSignalMatrix signals;
};

/// Directed upstream geometric graph with row-normalised weights and the
/// process x[t+1] = 0.6 A x[t] + 0.3 x[t] + daily sinusoid + AR(1) noise,
/// sampled every 15 minutes.
SyntheticData gen_synthetic(std::size_t n_nodes, std::size_t steps, std::uint64_t seed);

}  // namespace stnas::data
