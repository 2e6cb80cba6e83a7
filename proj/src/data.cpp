#include "stnas/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace stnas::data {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// Minutes since Monday 1969-12-29 00:00 for "YYYY-MM-DD[ T]HH:MM[:SS]".
std::optional<std::int64_t> parse_iso_minutes(std::string_view s) {
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != ' ' && s[10] != 'T') ||
      s[13] != ':') {
    return std::nullopt;
  }
  const auto y = parse_int(s.substr(0, 4));
  const auto mo = parse_int(s.substr(5, 2));
  const auto d = parse_int(s.substr(8, 2));
  const auto h = parse_int(s.substr(11, 2));
  const auto mi = parse_int(s.substr(14, 2));
  if (!y || !mo || !d || !h || !mi || *mo < 1 || *mo > 12 || *d < 1 || *d > 31 || *h > 23 ||
      *mi > 59) {
    return std::nullopt;
  }
  const std::int64_t days =
      days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d)) + 3;
  return days * 1440 + *h * 60 + *mi;
}

std::string where(const fs::path& path, std::size_t row, std::size_t line) {
  return path.filename().string() + ": row " + std::to_string(row) + " (line " +
         std::to_string(line) + ")";
}

GraphSignalMatrix load_signals_csv(const fs::path& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open signals file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::optional<int> meta_interval;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto eq = t.find("interval_minutes=");
      if (eq != std::string_view::npos) {
        const auto v = parse_int(trim(t.substr(eq + 17)));
        if (!v || *v <= 0) {
          throw std::runtime_error(path.filename().string() + ": bad interval metadata on line " +
                                   std::to_string(line_no));
        }
        meta_interval = static_cast<int>(*v);
      }
      continue;
    }
    for (auto cell : split_csv(t)) header.emplace_back(cell);
    break;
  }
  if (header.empty()) throw std::runtime_error(path.filename().string() + ": empty file");
  const bool has_time = header.front() == "timestamp";
  const std::size_t first = has_time ? 1 : 0;
  if (header.size() <= first) {
    throw std::runtime_error(path.filename().string() + ": header names no node columns");
  }

  GraphSignalMatrix g;
  g.nodes = header.size() - first;
  g.channels = 1;
  g.node_ids.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
  g.null_value = opts.null_value;
  std::vector<std::int64_t> stamps;
  bool iso = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    ++row;
    const auto cells = split_csv(t);
    if (cells.size() != header.size()) {
      throw std::runtime_error(where(path, row, line_no) + ": expected " +
                               std::to_string(header.size()) + " cells, found " +
                               std::to_string(cells.size()));
    }
    if (has_time) {
      const auto as_int = parse_int(cells[0]);
      const auto as_iso = as_int ? std::nullopt : parse_iso_minutes(cells[0]);
      if (!as_int && !as_iso) {
        throw std::runtime_error(where(path, row, line_no) + ", column 'timestamp': cannot parse '" +
                                 std::string(cells[0]) + "'");
      }
      if (row == 1) iso = as_iso.has_value();
      stamps.push_back(as_int ? *as_int : *as_iso);
    }
    for (std::size_t c = first; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      if (!v) {
        throw std::runtime_error(where(path, row, line_no) + ", column '" + header[c] +
                                 "': non-numeric cell '" + std::string(cells[c]) + "'");
      }
      g.values.push_back(*v);
    }
  }
  if (row == 0) throw std::runtime_error(path.filename().string() + ": no data rows");
  g.steps = row;

  int interval = 5;
  if (iso && stamps.size() >= 2 && stamps[1] > stamps[0]) {
    interval = static_cast<int>(stamps[1] - stamps[0]);
  }
  if (meta_interval) interval = *meta_interval;
  if (opts.interval_minutes) interval = *opts.interval_minutes;
  g.interval_minutes = interval;
  if (has_time) {
    g.slot_offset = iso ? stamps[0] / interval : stamps[0];
  }
  return g;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kMagic[6] = {'S', 'T', 'N', 'A', 'S', '1'};

GraphSignalMatrix load_signals_binary(const fs::path& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open signals file " + path.string());
  char magic[6];
  if (!in.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) {
    throw std::runtime_error(path.filename().string() + ": missing STNAS1 magic");
  }
  GraphSignalMatrix g;
  g.steps = read_u64(in);
  g.nodes = read_u64(in);
  g.channels = read_u64(in);
  if (g.steps == 0 || g.nodes == 0 || g.channels == 0) {
    throw std::runtime_error(path.filename().string() + ": empty extents");
  }
  g.values.resize(g.steps * g.nodes * g.channels);
  for (auto& v : g.values) {
    const std::uint64_t bits = read_u64(in);
    std::memcpy(&v, &bits, sizeof v);
  }
  for (std::size_t n = 0; n < g.nodes; ++n) g.node_ids.push_back("n" + std::to_string(n));
  g.null_value = opts.null_value;
  if (opts.interval_minutes) g.interval_minutes = *opts.interval_minutes;
  return g;
}

}  // namespace

// ---------------------------------------------------------------- graph

ad::Tensor SpatialGraph::as_tensor() const {
  return ad::Tensor::constant({num_nodes, num_nodes}, adjacency);
}

SpatialGraph SpatialGraph::row_normalized() const {
  SpatialGraph g = *this;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < num_nodes; ++j) total += at(i, j);
    if (total <= 0) continue;
    for (std::size_t j = 0; j < num_nodes; ++j) g.adjacency[i * num_nodes + j] /= total;
  }
  return g;
}

GraphSignalMatrix load_signals(const fs::path& path, const LoadOptions& opts) {
  return path.extension() == ".bin" ? load_signals_binary(path, opts)
                                    : load_signals_csv(path, opts);
}

GraphSignalMatrix load_signal_channels(const std::vector<fs::path>& paths,
                                       const LoadOptions& opts) {
  if (paths.empty()) throw std::invalid_argument("no signal files given");
  std::vector<GraphSignalMatrix> parts;
  for (const auto& p : paths) parts.push_back(load_signals(p, opts));
  if (parts.size() == 1) return std::move(parts.front());
  GraphSignalMatrix g = parts.front();
  std::size_t total_c = 0;
  for (const auto& p : parts) {
    if (p.steps != g.steps || p.nodes != g.nodes) {
      throw std::runtime_error("channel files disagree on extents");
    }
    total_c += p.channels;
  }
  g.channels = total_c;
  g.values.assign(g.steps * g.nodes * total_c, 0.0);
  for (std::size_t t = 0; t < g.steps; ++t) {
    for (std::size_t n = 0; n < g.nodes; ++n) {
      std::size_t c_out = 0;
      for (const auto& p : parts) {
        for (std::size_t c = 0; c < p.channels; ++c) {
          g.values[(t * g.nodes + n) * total_c + c_out++] = p.at(t, n, c);
        }
      }
    }
  }
  return g;
}

SpatialGraph load_graph(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open adjacency file " + path.string());
  SpatialGraph g;
  g.num_nodes = n;
  g.adjacency.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) g.node_ids.push_back("n" + std::to_string(i));
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split_csv(t);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() != 3 || cells[0] != "src" || cells[1] != "dst" || cells[2] != "weight") {
        throw std::runtime_error(path.filename().string() + ": header must be src,dst,weight");
      }
      continue;
    }
    ++row;
    if (cells.size() != 3) {
      throw std::runtime_error(where(path, row, line_no) + ": expected 3 cells");
    }
    const auto src = parse_int(cells[0]);
    const auto dst = parse_int(cells[1]);
    const auto w = parse_double(cells[2]);
    if (!src || !dst || !w) {
      throw std::runtime_error(where(path, row, line_no) + ": non-numeric cell");
    }
    if (*src < 0 || *dst < 0 || static_cast<std::size_t>(*src) >= n ||
        static_cast<std::size_t>(*dst) >= n) {
      throw std::runtime_error(where(path, row, line_no) + ": node id out of range for n=" +
                               std::to_string(n));
    }
    if (*w < 0) throw std::runtime_error(where(path, row, line_no) + ": negative weight");
    g.adjacency[static_cast<std::size_t>(*src) * n + static_cast<std::size_t>(*dst)] += *w;
  }
  if (!header_seen) throw std::runtime_error(path.filename().string() + ": empty file");
  return g;
}

void write_signals_csv(const fs::path& path, const GraphSignalMatrix& s, std::size_t channel) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# interval_minutes=" << s.interval_minutes << "\n";
  out << "timestamp";
  for (std::size_t n = 0; n < s.nodes; ++n) {
    out << ',' << (n < s.node_ids.size() ? s.node_ids[n] : "n" + std::to_string(n));
  }
  out << '\n';
  char buf[64];
  for (std::size_t t = 0; t < s.steps; ++t) {
    out << (s.slot_offset + static_cast<std::int64_t>(t));
    for (std::size_t n = 0; n < s.nodes; ++n) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, s.at(t, n, channel));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

void write_signals_binary(const fs::path& path, const GraphSignalMatrix& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, 6);
  write_u64(out, s.steps);
  write_u64(out, s.nodes);
  write_u64(out, s.channels);
  for (double v : s.values) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof v);
    write_u64(out, bits);
  }
}

void write_graph_csv(const fs::path& path, const SpatialGraph& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "src,dst,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    for (std::size_t j = 0; j < g.num_nodes; ++j) {
      if (g.at(i, j) == 0.0) continue;
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, g.at(i, j));
      out << i << ',' << j << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf))
          << '\n';
    }
  }
}

// ---------------------------------------------------------------- splits

const char* split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

NormStats compute_stats(const GraphSignalMatrix& s, std::size_t begin, std::size_t end) {
  NormStats st;
  st.mean.assign(s.channels, 0.0);
  st.std.assign(s.channels, 0.0);
  for (std::size_t c = 0; c < s.channels; ++c) {
    double total = 0;
    std::size_t count = 0;
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t n = 0; n < s.nodes; ++n) {
        const double v = s.at(t, n, c);
        if (s.null_value && v == *s.null_value) continue;
        total += v;
        ++count;
      }
    }
    if (count == 0) {
      throw std::runtime_error("normalisation: channel " + std::to_string(c) +
                               " has no observed values");
    }
    const double mu = total / static_cast<double>(count);
    double sq = 0;
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t n = 0; n < s.nodes; ++n) {
        const double v = s.at(t, n, c);
        if (s.null_value && v == *s.null_value) continue;
        sq += (v - mu) * (v - mu);
      }
    }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    if (!(sd > 0)) {
      throw std::runtime_error("normalisation: channel " + std::to_string(c) +
                               " is constant (zero std)");
    }
    st.mean[c] = mu;
    st.std[c] = sd;
  }
  return st;
}

std::vector<double> normalize(std::span<const double> values, const NormStats& stats,
                              std::optional<double> sentinel) {
  const std::size_t C = stats.mean.size();
  for (double sd : stats.std) {
    if (!(sd > 0)) throw std::invalid_argument("normalize: zero std");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const std::size_t c = i % C;
    out[i] = sentinel && v == *sentinel ? v : (v - stats.mean[c]) / stats.std[c];
  }
  return out;
}

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats,
                                std::optional<double> sentinel) {
  const std::size_t C = stats.mean.size();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const std::size_t c = i % C;
    out[i] = sentinel && v == *sentinel ? v : v * stats.std[c] + stats.mean[c];
  }
  return out;
}

std::size_t slots_per_day(int interval_minutes) {
  if (interval_minutes <= 0 || 1440 % interval_minutes != 0) {
    throw std::invalid_argument("interval of " + std::to_string(interval_minutes) +
                                " minutes does not divide a day");
  }
  return static_cast<std::size_t>(1440 / interval_minutes);
}

TimeIndex time_features(std::int64_t step, int interval_minutes, std::int64_t slot_offset) {
  const auto nd = static_cast<std::int64_t>(slots_per_day(interval_minutes));
  const std::int64_t g = step + slot_offset;
  const auto mod = [](std::int64_t a, std::int64_t m) { return ((a % m) + m) % m; };
  const std::int64_t day = (g - mod(g, nd)) / nd;
  return {static_cast<std::size_t>(mod(g, nd)), static_cast<std::size_t>(mod(day, 7))};
}

DatasetSplits split_and_window(const GraphSignalMatrix& signals, std::array<double, 3> ratios,
                               std::size_t history, std::size_t horizon) {
  if (history == 0 || horizon == 0) throw std::invalid_argument("P and Q must be at least 1");
  double total = 0;
  for (double r : ratios) {
    if (!(r > 0)) throw std::invalid_argument("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  const auto T = static_cast<double>(signals.steps);
  const auto n_train = static_cast<std::size_t>(std::llround(T * ratios[0]));
  const auto n_val = static_cast<std::size_t>(std::llround(T * ratios[1]));
  if (n_train + n_val > signals.steps) throw std::invalid_argument("split ratios exceed series");
  const std::array<std::size_t, 4> bounds{0, n_train, n_train + n_val, signals.steps};

  auto shared = std::make_shared<const GraphSignalMatrix>(signals);
  const NormStats stats = compute_stats(signals, bounds[0], bounds[1]);
  auto norm = std::make_shared<const std::vector<double>>(
      normalize(signals.values, stats, signals.null_value));

  const std::array<Split, 3> tags{Split::Train, Split::Val, Split::Test};
  std::array<ForecastDataset, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t b = bounds[k], e = bounds[k + 1];
    if (e - b < history + horizon) {
      throw std::invalid_argument(std::string(split_name(tags[k])) + " split holds " +
                                  std::to_string(e - b) + " steps, fewer than P+Q=" +
                                  std::to_string(history + horizon));
    }
    ForecastDataset& d = out[k];
    d.split = tags[k];
    d.history = history;
    d.horizon = horizon;
    d.begin = b;
    d.end = e;
    d.stats = stats;
    d.signals = shared;
    d.normalized = norm;
    for (std::size_t t = b + history - 1; t + horizon < e; ++t) d.origins.push_back(t);
  }
  return {std::move(out[0]), std::move(out[1]), std::move(out[2])};
}

Batch make_batch(const ForecastDataset& data, std::span<const std::size_t> samples) {
  const GraphSignalMatrix& s = *data.signals;
  const std::size_t B = samples.size(), P = data.history, Q = data.horizon;
  const std::size_t row = s.nodes * s.channels;
  std::vector<double> x(B * P * row), y(B * Q * row);
  Batch batch;
  batch.split = data.split;
  for (std::size_t b = 0; b < B; ++b) {
    if (samples[b] >= data.size()) throw std::out_of_range("make_batch: sample index");
    const std::size_t t = data.origins[samples[b]];
    std::copy_n(data.normalized->data() + (t + 1 - P) * row, P * row, x.data() + b * P * row);
    std::copy_n(s.values.data() + (t + 1) * row, Q * row, y.data() + b * Q * row);
    batch.time.push_back(time_features(static_cast<std::int64_t>(t), s.interval_minutes,
                                       s.slot_offset));
    batch.origins.push_back(t);
  }
  batch.x = ad::Tensor::constant({B, P, s.nodes, s.channels}, std::move(x));
  batch.y = ad::Tensor::constant({B, Q, s.nodes, s.channels}, std::move(y));
  return batch;
}

std::vector<Batch> make_batches(const ForecastDataset& data, std::span<const std::size_t> order,
                                std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.push_back(make_batch(data, order.subspan(i, std::min(batch_size, order.size() - i))));
  }
  return out;
}

// ---------------------------------------------------------------- synthetic

SyntheticData gen_synthetic(std::size_t n_nodes, std::size_t steps, std::uint64_t seed) {
  if (n_nodes < 2) throw std::invalid_argument("gen-synth needs at least 2 nodes");
  if (steps < 200) throw std::invalid_argument("gen-synth needs at least 200 steps");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> px(n_nodes), py(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    px[i] = unit(rng);
    py[i] = unit(rng);
  }
  auto dist = [&](std::size_t i, std::size_t j) { return std::hypot(px[i] - px[j], py[i] - py[j]); };
  auto kernel = [&](std::size_t i, std::size_t j) {
    const double d = dist(i, j) / 0.3;
    return std::exp(-d * d);
  };

  // Flow runs along the x axis: each node listens to its two nearest nodes
  // further upstream; the most upstream node listens to its nearest node.
  std::vector<std::size_t> order(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return px[a] < px[b]; });
  SpatialGraph g;
  g.num_nodes = n_nodes;
  g.adjacency.assign(n_nodes * n_nodes, 0.0);
  for (std::size_t i = 0; i < n_nodes; ++i) g.node_ids.push_back("n" + std::to_string(i));
  for (std::size_t r = 0; r < n_nodes; ++r) {
    const std::size_t i = order[r];
    std::vector<std::size_t> cand;
    if (r == 0) {
      for (std::size_t j = 0; j < n_nodes; ++j) {
        if (j != i) cand.push_back(j);
      }
      std::stable_sort(cand.begin(), cand.end(),
                       [&](std::size_t a, std::size_t b) { return dist(i, a) < dist(i, b); });
      cand.resize(1);
    } else {
      cand.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(r));
      std::stable_sort(cand.begin(), cand.end(),
                       [&](std::size_t a, std::size_t b) { return dist(i, a) < dist(i, b); });
      cand.resize(std::min<std::size_t>(2, cand.size()));
    }
    for (std::size_t j : cand) g.adjacency[i * n_nodes + j] = kernel(i, j);
  }
  g = g.row_normalized();

  std::vector<double> amp(n_nodes), phase(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    amp[i] = 0.5 + unit(rng);
    phase[i] = 2 * std::numbers::pi * unit(rng);
  }
  constexpr double kSelf = 0.3, kNeighbour = 0.6, kRho = 0.9, kSigma = 0.05;
  // 15-minute sampling keeps a few thousand steps spanning more than two
  // weeks, so every day-of-week row is seen during training.
  constexpr int kInterval = 15;
  constexpr std::size_t kDay = 1440 / kInterval, kBurnIn = kDay;

  GraphSignalMatrix s;
  s.steps = steps;
  s.nodes = n_nodes;
  s.channels = 1;
  s.interval_minutes = kInterval;
  s.node_ids = g.node_ids;
  s.values.resize(steps * n_nodes);
  std::vector<double> cur(n_nodes, 0.0), next(n_nodes), eta(n_nodes, 0.0);
  for (std::size_t k = 0; k < steps + kBurnIn; ++k) {
    if (k >= kBurnIn) std::copy(cur.begin(), cur.end(), s.values.begin() + (k - kBurnIn) * n_nodes);
    const std::size_t t = k + kDay - kBurnIn % kDay;  // step k - kBurnIn, shifted non-negative
    for (std::size_t i = 0; i < n_nodes; ++i) {
      double diffusion = 0;
      for (std::size_t j = 0; j < n_nodes; ++j) diffusion += g.at(i, j) * cur[j];
      eta[i] = kRho * eta[i] + kSigma * normal(rng);
      const double season =
          amp[i] * std::sin(2 * std::numbers::pi * static_cast<double>(t % kDay) / kDay + phase[i]);
      next[i] = kNeighbour * diffusion + kSelf * cur[i] + season + eta[i];
    }
    cur.swap(next);
  }
  return {std::move(g), std::move(s)};
}

}  // namespace stnas::data
