#pragma once

// Flat `key = value` run configuration with `#` comments.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stnas/data.hpp"
#include "stnas/model.hpp"
#include "stnas/search.hpp"

namespace stnas {

struct RunConfig {
  std::vector<std::filesystem::path> signals;  // one file per channel
  std::optional<std::filesystem::path> adjacency;
  std::optional<int> interval_minutes;
  std::optional<double> null_value;
  std::size_t history = 12;
  std::size_t horizon = 12;
  std::array<double, 3> split{0.7, 0.1, 0.2};
  std::size_t patches = 2;
  std::size_t d_model = 16;
  std::size_t temporal_nodes = 4;
  std::size_t spatial_nodes = 4;
  std::size_t depth = 2;
  std::size_t heads = 4;
  std::size_t groups = 1;
  std::size_t node_dim = 8;
  std::size_t kernel = 2;
  std::size_t dilation = 1;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;  // search
  std::size_t train_epochs = 40;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool eq5_multiplicity = false;
  SearchMode mode = SearchMode::Decoupled;
  std::vector<OpKind> temporal_ops;
  std::vector<OpKind> spatial_ops;
};

/// Relative paths resolve against `base_dir`. Errors name the offending key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
std::string render_config(const RunConfig& config);

struct LoadedData {
  data::GraphSignalMatrix signals;
  Tensor adjacency;  // row-normalised, undefined without an adjacency file
  data::DatasetSplits splits;
};

LoadedData load_data(const RunConfig& config);
ModelConfig model_config(const RunConfig& config, const data::GraphSignalMatrix& signals);
SearchOptions search_options(const RunConfig& config);
TrainOptions train_options(const RunConfig& config);

}  // namespace stnas
