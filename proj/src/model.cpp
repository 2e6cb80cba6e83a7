#include "stnas/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stnas {

namespace {

bool has(std::span<const OpKind> ops, OpKind op) {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

void check_restriction(const std::vector<OpKind>& ops, bool (*family)(OpKind), const char* what) {
  for (OpKind op : ops) {
    if (op != OpKind::Zero && op != OpKind::Identity && !family(op)) {
      throw std::invalid_argument(std::string(what) + ": operator '" + std::string(op_name(op)) +
                                  "' does not belong to this space");
    }
  }
}

// Keeps the declared order of `full` while dropping anything not allowed.
std::vector<OpKind> restrict_space(const std::vector<OpKind>& full,
                                   const std::vector<OpKind>& allowed) {
  if (allowed.empty()) return full;
  std::vector<OpKind> out;
  for (OpKind op : full) {
    if (has(allowed, op)) out.push_back(op);
  }
  return out;
}

TemporalDag make_dag(std::size_t nodes, std::vector<OpKind> space, const ModelConfig& c,
                     const Tensor& adjacency, Rng& rng) {
  TemporalDag d;
  const Tensor a = has(space, OpKind::GnnFixed) ? adjacency : Tensor();
  d.cell = Cell::init(nodes, std::move(space), c.op_hyper(), a, c.multiplicity, rng);
  d.alpha = init_logits(d.cell);
  return d;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw std::invalid_argument(std::string(key) + " must be >= 1");
  };
  positive(nodes, "nodes");
  positive(channels, "channels");
  positive(history, "P");
  positive(horizon, "Q");
  positive(d_model, "D");
  positive(patches, "patches");
  positive(temporal_nodes, "temporal_nodes");
  positive(spatial_nodes, "spatial_nodes");
  positive(node_dim, "node_dim");
  positive(kernel, "kernel");
  positive(dilation, "dilation");
  positive(slots_per_day, "slots_per_day");
  positive(hidden_factor, "hidden_factor");
  if (history % patches != 0) {
    throw std::invalid_argument("patches: P=" + std::to_string(history) +
                                " is not divisible by M=" + std::to_string(patches));
  }
  validate_attention_layout(d_model, heads, groups);
  check_restriction(temporal_ops, is_temporal_op, "temporal_ops");
  check_restriction(spatial_ops, is_spatial_op, "spatial_ops");
}

OpHyper ModelConfig::op_hyper() const {
  OpHyper h;
  h.d_model = d_model;
  h.nodes = nodes;
  h.kernel = kernel;
  h.dilation = dilation;
  h.informer_dim = informer_dim == 0 ? d_model : informer_dim;
  h.depth = depth;
  h.node_dim = node_dim;
  h.heads = heads;
  h.groups = groups;
  return h;
}

std::map<std::string, long long> ModelConfig::hyperparameters() const {
  auto v = [](std::size_t x) { return static_cast<long long>(x); };
  return {{"C", v(channels)},          {"D", v(d_model)},        {"K", v(depth)},
          {"M", v(patches)},           {"N", v(nodes)},          {"N_S", v(spatial_nodes)},
          {"N_T", v(temporal_nodes)},  {"P", v(history)},        {"Q", v(horizon)},
          {"dilation", v(dilation)},   {"eq5_multiplicity", multiplicity ? 1 : 0},
          {"g", v(groups)},            {"kernel", v(kernel)},    {"node_dim", v(node_dim)},
          {"t", v(heads)}};
}

Supernet::Supernet(const ModelConfig& config, Tensor adjacency, data::NormStats stats,
                   std::uint64_t seed)
    : config_(config), stats_(std::move(stats)) {
  config_.validate();
  if (stats_.mean.size() != config_.channels || stats_.std.size() != config_.channels) {
    throw std::invalid_argument("model: normalisation stats do not cover " +
                                std::to_string(config_.channels) + " channels");
  }
  const bool has_adj = adjacency.defined();
  if (has_adj && (adjacency.rank() != 2 || adjacency.dim(0) != config_.nodes ||
                  adjacency.dim(1) != config_.nodes)) {
    throw std::invalid_argument("model: adjacency " + ad::shape_str(adjacency.shape()) +
                                " does not match " + std::to_string(config_.nodes) + " nodes");
  }
  if (has(config_.spatial_ops, OpKind::GnnFixed) && !has_adj) {
    throw std::invalid_argument("spatial_ops: gnn_fixed requested without an adjacency file");
  }
  const auto tspace = restrict_space(temporal_space(), config_.temporal_ops);
  const auto sspace = restrict_space(spatial_space(has_adj), config_.spatial_ops);

  Rng emb_rng(sub_seed(seed, "embedding"));
  embedding_ = EmbeddingParams::init(config_.channels, config_.nodes, config_.slots_per_day,
                                     config_.d_model, emb_rng);

  if (config_.mode == SearchMode::Decoupled) {
    Rng t_rng(sub_seed(seed, "temporal"));
    temporal_ = make_dag(config_.temporal_nodes, tspace, config_, adjacency, t_rng);
    Rng p_rng(sub_seed(seed, "patch"));
    patch_ = PatchParams::init(config_.history, config_.patches, config_.d_model, p_rng);
    Rng s_rng(sub_seed(seed, "spatial"));
    const Tensor a = has(sspace, OpKind::GnnFixed) ? adjacency : Tensor();
    spatial_.cell = Cell::init(config_.spatial_nodes, sspace, config_.op_hyper(), a,
                               config_.multiplicity, s_rng);
    for (std::size_t m = 0; m < config_.patches; ++m) spatial_.beta.push_back(init_logits(spatial_.cell));
  } else {
    std::vector<OpKind> allowed = tspace;
    allowed.insert(allowed.end(), sspace.begin(), sspace.end());
    const auto uspace = restrict_space(mixed_space(has_adj), allowed);
    Rng m_rng(sub_seed(seed, "mixed"));
    mixed_.push_back(make_dag(config_.temporal_nodes, uspace, config_, adjacency, m_rng));
    mixed_.push_back(make_dag(config_.spatial_nodes, uspace, config_, adjacency, m_rng));
  }

  Rng o_rng(sub_seed(seed, "output"));
  const std::size_t D = config_.d_model, P = config_.history;
  const double time_bound = 1.0 / std::sqrt(static_cast<double>(P));
  output_.time_w = uniform_parameter({P, 1}, time_bound, o_rng);
  output_.time_b = zero_parameter({1});
  if (config_.mode == SearchMode::Mixed) {
    output_.mix_w = uniform_parameter({P, 1}, time_bound, o_rng);
    output_.mix_b = zero_parameter({1});
  }
  const std::size_t hidden = config_.hidden_factor * D;
  output_.w1 = glorot_parameter({3 * D, hidden}, o_rng);
  output_.b1 = zero_parameter({hidden});
  output_.w2 = glorot_parameter({hidden, config_.horizon * config_.channels}, o_rng);
  output_.b2 = zero_parameter({config_.horizon * config_.channels});
}

Tensor Supernet::head(const Tensor& e_emb, const Tensor& a, const Tensor& b) const {
  const std::size_t B = e_emb.dim(0), N = config_.nodes, D = config_.d_model;
  const std::size_t Q = config_.horizon, C = config_.channels;
  const Tensor joined = ad::reshape(ad::concat({e_emb, a, b}, 2), {B * N, 3 * D});
  const Tensor hidden = ad::relu(affine(joined, output_.w1, output_.b1));
  const Tensor y = ad::reshape(affine(hidden, output_.w2, output_.b2), {B, N, Q, C});
  const Tensor pred = ad::transpose(y, {0, 2, 1, 3});

  const std::size_t total = B * Q * N * C;
  std::vector<double> sd(total), mu(total);
  for (std::size_t i = 0; i < total; ++i) {
    sd[i] = stats_.std[i % C];
    mu[i] = stats_.mean[i % C];
  }
  const Shape s{B, Q, N, C};
  return ad::add(ad::mul(pred, Tensor::constant(s, std::move(sd))), Tensor::constant(s, std::move(mu)));
}

Tensor Supernet::forward(const Tensor& x, std::span<const data::TimeIndex> time) const {
  const auto& c = config_;
  if (x.rank() != 4 || x.dim(1) != c.history || x.dim(2) != c.nodes || x.dim(3) != c.channels) {
    throw std::invalid_argument("model input: got " + ad::shape_str(x.shape()) + ", expected [B," +
                                std::to_string(c.history) + "," + std::to_string(c.nodes) + "," +
                                std::to_string(c.channels) + "]");
  }
  if (time.size() != x.dim(0)) {
    throw std::invalid_argument("model input: " + std::to_string(time.size()) +
                                " time indices for a batch of " + std::to_string(x.dim(0)));
  }
  const Tensor z0 = embed_series(x, embedding_);
  const Tensor e_emb = fuse_context(time, embedding_);

  if (c.mode == SearchMode::Mixed) {
    const Tensor h1 = temporal_dag_forward(z0, mixed_[0]);
    const Tensor h2 = temporal_dag_forward(h1, mixed_[1]);
    return head(e_emb, compress_patch(h1, output_.time_w, output_.time_b),
                compress_patch(h2, output_.mix_w, output_.mix_b));
  }

  const Tensor ht = temporal_dag_forward(z0, temporal_);
  const std::vector<Tensor> parts = split_patches(ht, c.patches);
  std::vector<Tensor> outs;
  for (std::size_t m = 0; m < c.patches; ++m) {
    const Tensor hp = compress_patch(parts[m], patch_.compress_w[m], patch_.compress_b[m]);
    const Tensor hs = bind_context(hp, e_emb, patch_.bind_w[m], patch_.bind_b[m]);
    outs.push_back(spatial_dag_forward(hs, spatial_, m));
  }
  return head(e_emb, compress_patch(ht, output_.time_w, output_.time_b), aggregate_patches(outs));
}

std::vector<Tensor> Supernet::weights() const {
  std::vector<Tensor> out;
  embedding_.collect(out);
  if (config_.mode == SearchMode::Mixed) {
    for (const auto& d : mixed_) d.cell.collect(out, d.hard);
  } else {
    temporal_.cell.collect(out, temporal_.hard);
    patch_.collect(out);
    const Cell& cell = spatial_.cell;
    for (std::size_t e = 0; e < cell.edges.size(); ++e) {
      if (!hard_) {
        cell.ops[e].collect(out, cell.space);
        continue;
      }
      std::vector<OpKind> used;
      for (const auto& choice : spatial_.hard) used.push_back(choice[e]);
      cell.ops[e].collect(out, used);
    }
  }
  for (const auto& t : {output_.time_w, output_.time_b, output_.mix_w, output_.mix_b, output_.w1,
                        output_.b1, output_.w2, output_.b2}) {
    if (t.defined()) out.push_back(t);
  }
  return out;
}

std::vector<Tensor> Supernet::arch_params() const {
  if (hard_) return {};
  if (config_.mode == SearchMode::Mixed) return {mixed_[0].alpha, mixed_[1].alpha};
  std::vector<Tensor> out{temporal_.alpha};
  out.insert(out.end(), spatial_.beta.begin(), spatial_.beta.end());
  return out;
}

std::vector<std::pair<std::string, Tensor>> Supernet::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto group = [&](const std::string& prefix, const std::vector<Tensor>& ts) {
    for (std::size_t i = 0; i < ts.size(); ++i) out.emplace_back(prefix + "." + std::to_string(i), ts[i]);
  };
  std::vector<Tensor> ts;
  embedding_.collect(ts);
  group("embedding", ts);
  if (config_.mode == SearchMode::Mixed) {
    for (std::size_t k = 0; k < mixed_.size(); ++k) {
      ts.clear();
      mixed_[k].cell.collect(ts);
      group("mixed" + std::to_string(k), ts);
      group("mixed" + std::to_string(k) + ".alpha", {mixed_[k].alpha});
    }
  } else {
    ts.clear();
    temporal_.cell.collect(ts);
    group("temporal", ts);
    group("alpha", {temporal_.alpha});
    ts.clear();
    patch_.collect(ts);
    group("patch", ts);
    ts.clear();
    spatial_.cell.collect(ts);
    group("spatial", ts);
    group("beta", spatial_.beta);
  }
  ts.clear();
  for (const auto& t : {output_.time_w, output_.time_b, output_.mix_w, output_.mix_b, output_.w1,
                        output_.b1, output_.w2, output_.b2}) {
    if (t.defined()) ts.push_back(t);
  }
  group("output", ts);
  return out;
}

DiscreteArchitecture Supernet::derive() const {
  DiscreteArchitecture a;
  a.mode = config_.mode;
  a.hyperparameters = config_.hyperparameters();
  auto choice = [](const TemporalDag& d) {
    return d.hard.empty() ? derive_choice(d.alpha, d.cell.space) : d.hard;
  };
  if (config_.mode == SearchMode::Mixed) {
    a.temporal_edges = to_edge_map(mixed_[0].cell.edges, choice(mixed_[0]));
    a.spatial_dags.push_back(to_edge_map(mixed_[1].cell.edges, choice(mixed_[1])));
    return a;
  }
  a.temporal_edges = to_edge_map(temporal_.cell.edges, choice(temporal_));
  for (std::size_t m = 0; m < spatial_.patches(); ++m) {
    const auto ops = spatial_.hard.empty() ? derive_choice(spatial_.beta[m], spatial_.cell.space)
                                           : spatial_.hard[m];
    a.spatial_dags.push_back(to_edge_map(spatial_.cell.edges, ops));
  }
  return a;
}

void Supernet::set_hard(const DiscreteArchitecture& arch) {
  if (arch.mode != config_.mode) {
    throw std::invalid_argument(std::string("architecture mode '") + mode_name(arch.mode) +
                                "' differs from the configured '" + mode_name(config_.mode) + "'");
  }
  for (const auto& [key, value] : config_.hyperparameters()) {
    const auto it = arch.hyperparameters.find(key);
    if (it == arch.hyperparameters.end() || it->second != value) {
      throw std::invalid_argument("architecture hyperparameter '" + key +
                                  "' does not match the configuration (" + std::to_string(value) + ")");
    }
  }
  if (config_.mode == SearchMode::Mixed) {
    if (arch.spatial_dags.size() != 1) {
      throw std::invalid_argument("mixed architecture needs exactly one second-cell edge map");
    }
    auto first = from_edge_map(arch.temporal_edges, mixed_[0].cell.edges, mixed_[0].cell.space);
    auto second = from_edge_map(arch.spatial_dags[0], mixed_[1].cell.edges, mixed_[1].cell.space);
    mixed_[0].hard = std::move(first);
    mixed_[1].hard = std::move(second);
  } else {
    if (arch.spatial_dags.size() != config_.patches) {
      throw std::invalid_argument("architecture has " + std::to_string(arch.spatial_dags.size()) +
                                  " spatial DAGs, expected M=" + std::to_string(config_.patches));
    }
    auto t = from_edge_map(arch.temporal_edges, temporal_.cell.edges, temporal_.cell.space);
    std::vector<std::vector<OpKind>> s;
    for (const auto& map : arch.spatial_dags) {
      s.push_back(from_edge_map(map, spatial_.cell.edges, spatial_.cell.space));
    }
    temporal_.hard = std::move(t);
    spatial_.hard = std::move(s);
  }
  hard_ = true;
}

}  // namespace stnas
