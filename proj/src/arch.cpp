#include "stnas/arch.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace stnas {

using nlohmann::json;

const char* mode_name(SearchMode mode) {
  return mode == SearchMode::Mixed ? "mixed" : "decoupled";
}

SearchMode parse_mode(const std::string& name) {
  if (name == "decoupled") return SearchMode::Decoupled;
  if (name == "mixed") return SearchMode::Mixed;
  throw std::invalid_argument("mode must be 'decoupled' or 'mixed', got '" + name + "'");
}

std::string edge_key(const Edge& e) {
  return std::to_string(e.from) + "->" + std::to_string(e.to);
}

EdgeMap to_edge_map(std::span<const Edge> edges, std::span<const OpKind> choice) {
  if (edges.size() != choice.size()) throw std::invalid_argument("edge map: size mismatch");
  EdgeMap m;
  for (std::size_t e = 0; e < edges.size(); ++e) m[edge_key(edges[e])] = op_name(choice[e]);
  return m;
}

std::vector<OpKind> from_edge_map(const EdgeMap& map, std::span<const Edge> edges,
                                  std::span<const OpKind> space) {
  if (map.size() != edges.size()) {
    throw std::invalid_argument("architecture has " + std::to_string(map.size()) +
                                " edges, the model has " + std::to_string(edges.size()));
  }
  std::vector<OpKind> out;
  for (const Edge& e : edges) {
    const auto it = map.find(edge_key(e));
    if (it == map.end()) throw std::invalid_argument("architecture lacks edge " + edge_key(e));
    const OpKind op = parse_op(it->second);
    if (std::find(space.begin(), space.end(), op) == space.end()) {
      throw std::invalid_argument("edge " + edge_key(e) + ": operator '" + it->second +
                                  "' is outside the configured space");
    }
    out.push_back(op);
  }
  return out;
}

std::string DiscreteArchitecture::to_text() const {
  json j;
  j["version"] = version;
  j["mode"] = mode_name(mode);
  j["hyperparameters"] = hyperparameters;
  j["temporal_edges"] = temporal_edges;
  j["spatial_dags"] = spatial_dags;
  return j.dump(2) + "\n";
}

DiscreteArchitecture DiscreteArchitecture::from_text(const std::string& text) {
  DiscreteArchitecture a;
  try {
    const json j = json::parse(text);
    a.version = j.at("version").get<int>();
    a.mode = parse_mode(j.value("mode", std::string("decoupled")));
    a.hyperparameters = j.at("hyperparameters").get<std::map<std::string, long long>>();
    a.temporal_edges = j.at("temporal_edges").get<EdgeMap>();
    a.spatial_dags = j.at("spatial_dags").get<std::vector<EdgeMap>>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("architecture file: ") + e.what());
  }
  if (a.version != 1) {
    throw std::runtime_error("architecture file: unsupported version " + std::to_string(a.version));
  }
  return a;
}

void DiscreteArchitecture::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_text();
}

DiscreteArchitecture DiscreteArchitecture::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace stnas
