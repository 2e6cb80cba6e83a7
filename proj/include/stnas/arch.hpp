#pragma once

// Discrete architecture document. Written as JSON with sorted keys, so two
// identical architectures serialise to identical bytes.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stnas/dag.hpp"

namespace stnas {

enum class SearchMode { Decoupled, Mixed };

const char* mode_name(SearchMode mode);
/// Throws std::invalid_argument unless `name` is "decoupled" or "mixed".
SearchMode parse_mode(const std::string& name);

using EdgeMap = std::map<std::string, std::string>;  // "i->j" -> operator name

struct DiscreteArchitecture {
  int version = 1;
  SearchMode mode = SearchMode::Decoupled;
  std::map<std::string, long long> hyperparameters;
  /// In mixed mode this is the first of the two union-space cells.
  EdgeMap temporal_edges;
  /// One map per patch; in mixed mode, a single entry for the second cell.
  std::vector<EdgeMap> spatial_dags;

  std::string to_text() const;
  static DiscreteArchitecture from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static DiscreteArchitecture load(const std::filesystem::path& path);
};

std::string edge_key(const Edge& e);
EdgeMap to_edge_map(std::span<const Edge> edges, std::span<const OpKind> choice);
/// Throws when the map misses an edge or names an operator outside `space`.
std::vector<OpKind> from_edge_map(const EdgeMap& map, std::span<const Edge> edges,
                                  std::span<const OpKind> space);

}  // namespace stnas
