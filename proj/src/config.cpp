#include "stnas/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stnas {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    bad(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_positive(const std::string& key, const std::string& v) {
  const auto n = to_u64(key, v);
  if (n == 0) bad(key, "must be >= 1");
  return static_cast<std::size_t>(n);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    bad(key, "expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

std::vector<OpKind> to_ops(const std::string& key, const std::string& v) {
  std::vector<OpKind> ops;
  for (const auto& name : split_list(v)) {
    try {
      ops.push_back(parse_op(name));
    } catch (const std::invalid_argument& e) {
      bad(key, e.what());
    }
  }
  if (ops.empty()) bad(key, "empty operator list");
  return ops;
}

std::string join_ops(const std::vector<OpKind>& ops) {
  std::string s;
  for (std::size_t i = 0; i < ops.size(); ++i) s += (i ? "," : "") + std::string(op_name(ops[i]));
  return s;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  auto path = [&](const std::string& v) {
    const std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"signals", [&](auto& k, auto& v) {
         c.signals.clear();
         for (const auto& s : split_list(v)) c.signals.push_back(path(s));
         if (c.signals.empty()) bad(k, "no signal file given");
       }},
      {"adjacency", [&](auto&, auto& v) {
         if (v.empty() || v == "none") c.adjacency.reset(); else c.adjacency = path(v);
       }},
      {"interval_minutes", [&](auto& k, auto& v) { c.interval_minutes = static_cast<int>(to_positive(k, v)); }},
      {"null_value", [&](auto& k, auto& v) {
         if (v.empty() || v == "none") c.null_value.reset(); else c.null_value = to_double(k, v);
       }},
      {"P", [&](auto& k, auto& v) { c.history = to_positive(k, v); }},
      {"Q", [&](auto& k, auto& v) { c.horizon = to_positive(k, v); }},
      {"split", [&](auto& k, auto& v) {
         const auto parts = split_list(v);
         if (parts.size() != 3) bad(k, "expected three ratios, got '" + v + "'");
         for (int i = 0; i < 3; ++i) c.split[i] = to_double(k, parts[i]);
         const double sum = c.split[0] + c.split[1] + c.split[2];
         if (c.split[0] <= 0 || c.split[1] <= 0 || c.split[2] <= 0 || std::abs(sum - 1.0) > 1e-9) {
           bad(k, "ratios must be positive and sum to 1");
         }
       }},
      {"patches", [&](auto& k, auto& v) { c.patches = to_positive(k, v); }},
      {"D", [&](auto& k, auto& v) { c.d_model = to_positive(k, v); }},
      {"temporal_nodes", [&](auto& k, auto& v) { c.temporal_nodes = to_positive(k, v); }},
      {"spatial_nodes", [&](auto& k, auto& v) { c.spatial_nodes = to_positive(k, v); }},
      {"K", [&](auto& k, auto& v) { c.depth = static_cast<std::size_t>(to_u64(k, v)); }},
      {"heads", [&](auto& k, auto& v) { c.heads = to_positive(k, v); }},
      {"groups", [&](auto& k, auto& v) { c.groups = to_positive(k, v); }},
      {"node_dim", [&](auto& k, auto& v) { c.node_dim = to_positive(k, v); }},
      {"kernel", [&](auto& k, auto& v) { c.kernel = to_positive(k, v); }},
      {"dilation", [&](auto& k, auto& v) { c.dilation = to_positive(k, v); }},
      {"lr", [&](auto& k, auto& v) {
         c.lr = to_double(k, v);
         if (c.lr < 0) bad(k, "must be >= 0");
       }},
      {"weight_decay", [&](auto& k, auto& v) {
         c.weight_decay = to_double(k, v);
         if (c.weight_decay < 0) bad(k, "must be >= 0");
       }},
      {"batch_size", [&](auto& k, auto& v) { c.batch_size = to_positive(k, v); }},
      {"epochs", [&](auto& k, auto& v) { c.epochs = static_cast<std::size_t>(to_u64(k, v)); }},
      {"train_epochs", [&](auto& k, auto& v) { c.train_epochs = static_cast<std::size_t>(to_u64(k, v)); }},
      {"patience", [&](auto& k, auto& v) { c.patience = static_cast<std::size_t>(to_u64(k, v)); }},
      {"seed", [&](auto& k, auto& v) { c.seed = to_u64(k, v); }},
      {"eq5_multiplicity", [&](auto& k, auto& v) { c.eq5_multiplicity = to_bool(k, v); }},
      {"mode", [&](auto& k, auto& v) {
         try {
           c.mode = parse_mode(v);
         } catch (const std::invalid_argument& e) {
           bad(k, e.what());
         }
       }},
      {"temporal_ops", [&](auto& k, auto& v) { c.temporal_ops = to_ops(k, v); }},
      {"spatial_ops", [&](auto& k, auto& v) { c.spatial_ops = to_ops(k, v); }},
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw std::invalid_argument("config key '" + key + "' (line " + std::to_string(lineno) +
                                  "): unknown key");
    }
    it->second(key, value);
  }
  if (c.signals.empty()) bad("signals", "required");
  if (c.history % c.patches != 0) {
    bad("patches", "P=" + std::to_string(c.history) + " is not divisible by M=" +
                       std::to_string(c.patches));
  }
  try {
    validate_attention_layout(c.d_model, c.heads, c.groups);
  } catch (const std::invalid_argument& e) {
    bad("heads", e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  o << "signals = ";
  for (std::size_t i = 0; i < c.signals.size(); ++i) o << (i ? "," : "") << c.signals[i].string();
  o << "\n";
  if (c.adjacency) o << "adjacency = " << c.adjacency->string() << "\n";
  if (c.interval_minutes) o << "interval_minutes = " << *c.interval_minutes << "\n";
  if (c.null_value) o << "null_value = " << fmt(*c.null_value) << "\n";
  o << "P = " << c.history << "\nQ = " << c.horizon << "\n";
  o << "split = " << fmt(c.split[0]) << "," << fmt(c.split[1]) << "," << fmt(c.split[2]) << "\n";
  o << "patches = " << c.patches << "\nD = " << c.d_model << "\n";
  o << "temporal_nodes = " << c.temporal_nodes << "\nspatial_nodes = " << c.spatial_nodes << "\n";
  o << "K = " << c.depth << "\nheads = " << c.heads << "\ngroups = " << c.groups << "\n";
  o << "node_dim = " << c.node_dim << "\nkernel = " << c.kernel << "\ndilation = " << c.dilation << "\n";
  o << "lr = " << fmt(c.lr) << "\nweight_decay = " << fmt(c.weight_decay) << "\n";
  o << "batch_size = " << c.batch_size << "\nepochs = " << c.epochs << "\n";
  o << "train_epochs = " << c.train_epochs << "\npatience = " << c.patience << "\n";
  o << "seed = " << c.seed << "\n";
  o << "eq5_multiplicity = " << (c.eq5_multiplicity ? "true" : "false") << "\n";
  o << "mode = " << mode_name(c.mode) << "\n";
  if (!c.temporal_ops.empty()) o << "temporal_ops = " << join_ops(c.temporal_ops) << "\n";
  if (!c.spatial_ops.empty()) o << "spatial_ops = " << join_ops(c.spatial_ops) << "\n";
  return o.str();
}

LoadedData load_data(const RunConfig& c) {
  LoadedData d;
  data::LoadOptions opts;
  opts.null_value = c.null_value;
  opts.interval_minutes = c.interval_minutes;
  d.signals = data::load_signal_channels(c.signals, opts);
  if (c.adjacency) {
    d.adjacency = data::load_graph(*c.adjacency, d.signals.nodes).row_normalized().as_tensor();
  }
  d.splits = data::split_and_window(d.signals, c.split, c.history, c.horizon);
  return d;
}

ModelConfig model_config(const RunConfig& c, const data::GraphSignalMatrix& signals) {
  ModelConfig m;
  m.nodes = signals.nodes;
  m.channels = signals.channels;
  m.history = c.history;
  m.horizon = c.horizon;
  m.d_model = c.d_model;
  m.patches = c.patches;
  m.temporal_nodes = c.temporal_nodes;
  m.spatial_nodes = c.spatial_nodes;
  m.depth = c.depth;
  m.heads = c.heads;
  m.groups = c.groups;
  m.node_dim = c.node_dim;
  m.slots_per_day = data::slots_per_day(signals.interval_minutes);
  m.kernel = c.kernel;
  m.dilation = c.dilation;
  m.multiplicity = c.eq5_multiplicity;
  m.mode = c.mode;
  m.temporal_ops = c.temporal_ops;
  m.spatial_ops = c.spatial_ops;
  return m;
}

SearchOptions search_options(const RunConfig& c) {
  SearchOptions o;
  o.epochs = c.epochs;
  o.batch_size = c.batch_size;
  o.weight_opt.lr = o.arch_opt.lr = c.lr;
  o.weight_opt.weight_decay = o.arch_opt.weight_decay = c.weight_decay;
  o.seed = c.seed;
  o.sentinel = c.null_value;
  return o;
}

TrainOptions train_options(const RunConfig& c) {
  TrainOptions o;
  o.epochs = c.train_epochs;
  o.patience = c.patience;
  o.batch_size = c.batch_size;
  o.opt.lr = c.lr;
  o.opt.weight_decay = c.weight_decay;
  o.seed = c.seed;
  o.sentinel = c.null_value;
  return o;
}

}  // namespace stnas
