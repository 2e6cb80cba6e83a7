#include "stnas/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace stnas {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with our own draws: std::shuffle is not portable across
  // standard libraries.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<std::size_t> in_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

struct StepResult {
  double loss;
  std::size_t tape_bytes;
};

// Holds the other group's parameters as constants for one step so the tape
// neither records nor differentiates through them.
class Freeze {
 public:
  explicit Freeze(const std::vector<Tensor>& params) : params_(params) {
    for (const auto& p : params_) p.node()->requires_grad = false;
  }
  ~Freeze() {
    for (const auto& p : params_) p.node()->requires_grad = true;
  }
  Freeze(const Freeze&) = delete;
  Freeze& operator=(const Freeze&) = delete;

 private:
  const std::vector<Tensor>& params_;
};

StepResult optimise(const Supernet& net, const data::Batch& batch, Adam& opt, Adam& other,
                    std::optional<double> sentinel, const char* group) {
  other.zero_grad();
  const Freeze frozen(other.params());
  ad::Tape tape;
  ad::TapeScope scope(&tape);
  const Tensor loss = loss_masked_mae(net.forward(batch), batch.y, sentinel);
  const double value = loss.item();
  if (!std::isfinite(value)) {
    throw std::runtime_error(std::string(group) + " step: non-finite loss on a " +
                             data::split_name(batch.split) + " batch of " +
                             std::to_string(batch.size()) + " samples (first origin " +
                             std::to_string(batch.origins.empty() ? 0 : batch.origins.front()) +
                             ", optimizer step " + std::to_string(opt.steps()) + ")");
  }
  opt.zero_grad();
  tape.backward(loss);
  opt.step();
  return {value, tape.storage_bytes()};
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& ts) {
  std::vector<std::vector<double>> out;
  for (const auto& t : ts) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

void restore(std::vector<Tensor>& ts, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), ts[i].mutable_values().begin());
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kCheckpointMagic[8] = {'S', 'T', 'N', 'A', 'S', 'P', '1', '\0'};

}  // namespace

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const auto& o = options_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) continue;
    const auto g = params_[i].grad();
    auto w = params_[i].mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k] + o.weight_decay * w[k];
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * gk;
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk;
      w[k] -= o.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + o.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Tensor loss_masked_mae(const Tensor& pred, const Tensor& target, std::optional<double> sentinel) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("loss: prediction " + ad::shape_str(pred.shape()) +
                                " vs target " + ad::shape_str(target.shape()));
  }
  const auto t = target.values();
  std::vector<double> mask(t.size(), 1.0);
  std::size_t count = t.size();
  if (sentinel) {
    count = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      mask[i] = t[i] == *sentinel ? 0.0 : 1.0;
      count += mask[i] != 0.0;
    }
  }
  if (count == 0) throw std::invalid_argument("loss: every target position is masked");
  Tensor err = abs(ad::sub(pred, target));
  if (sentinel) err = ad::mul(err, Tensor::constant(target.shape(), std::move(mask)));
  return ad::scale(sum_all(err), 1.0 / static_cast<double>(count));
}

SearchState make_search_state(const ModelConfig& config, const Tensor& adjacency,
                              const data::NormStats& stats, const SearchOptions& options) {
  SearchState s;
  s.net = std::make_unique<Supernet>(config, adjacency, stats, sub_seed(options.seed, "supernet"));
  s.weight_opt = Adam(s.net->weights(), options.weight_opt);
  s.arch_opt = Adam(s.net->arch_params(), options.arch_opt);
  s.seed = options.seed;
  s.sentinel = options.sentinel;
  return s;
}

StepReport bilevel_step(SearchState& state, const data::Batch& train, const data::Batch& val) {
  if (train.split != data::Split::Train) {
    throw std::logic_error(std::string("weight step received a ") + data::split_name(train.split) +
                           " batch");
  }
  if (val.split != data::Split::Val) {
    throw std::logic_error(std::string("architecture step received a ") +
                           data::split_name(val.split) + " batch");
  }
  StepReport r;
  const auto w = optimise(*state.net, train, state.weight_opt, state.arch_opt, state.sentinel, "weight");
  const auto a = optimise(*state.net, val, state.arch_opt, state.weight_opt, state.sentinel, "architecture");
  r.train_loss = w.loss;
  r.val_loss = a.loss;
  state.peak_tape_bytes = std::max({state.peak_tape_bytes, w.tape_bytes, a.tape_bytes});
  ++state.step;
  return r;
}

SearchResult run_search(SearchState& state, const data::DatasetSplits& splits,
                        const SearchOptions& options) {
  if (options.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  SearchResult result;
  Rng rng(sub_seed(options.seed, "search-shuffle"));
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto start = Clock::now();
    const auto train_order = shuffled(splits.train.size(), rng);
    const auto val_order = shuffled(splits.val.size(), rng);
    const auto train_batches = data::make_batches(splits.train, train_order, options.batch_size);
    const auto val_batches = data::make_batches(splits.val, val_order, options.batch_size);
    double tl = 0.0, vl = 0.0;
    for (std::size_t b = 0; b < train_batches.size(); ++b) {
      const auto r = bilevel_step(state, train_batches[b], val_batches[b % val_batches.size()]);
      tl += r.train_loss;
      vl += r.val_loss;
    }
    const double n = static_cast<double>(train_batches.size());
    result.log.push_back({epoch, tl / n, vl / n, seconds_since(start)});
  }
  result.arch = state.net->derive();
  result.peak_tape_bytes = state.peak_tape_bytes;
  result.val_mae = evaluate(*state.net, splits.val, options.batch_size, options.sentinel).overall.mae;
  return result;
}

std::vector<double> predict(const Supernet& net, const data::ForecastDataset& data,
                            std::size_t batch_size) {
  ad::TapeScope scope(nullptr);
  std::vector<double> out;
  const auto order = in_order(data.size());
  for (const auto& batch : data::make_batches(data, order, batch_size)) {
    const Tensor p = net.forward(batch);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return out;
}

MetricReport evaluate(const Supernet& net, const data::ForecastDataset& data,
                      std::size_t batch_size, std::optional<double> sentinel) {
  const auto pred = predict(net, data, batch_size);
  const auto target = dataset_targets(data);
  const ad::Shape shape{data.size(), data.horizon, data.nodes(), data.channels()};
  MetricReport r = metrics_multistep(pred, target, shape, sentinel);
  const bool varied = std::any_of(target.begin(), target.end(),
                                  [&](double v) { return v != target.front(); });
  if (varied) {
    const auto s = metrics_singlestep(pred, target, shape);
    r.rrse = s.rrse;
    r.corr = s.corr;
  }
  return r;
}

TrainResult train_derived(const DiscreteArchitecture& arch, const ModelConfig& config,
                          const Tensor& adjacency, const data::DatasetSplits& splits,
                          const TrainOptions& options) {
  if (options.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  TrainResult result;
  result.net = std::make_unique<Supernet>(config, adjacency, splits.train.stats,
                                          sub_seed(options.seed, "retrain"));
  Supernet& net = *result.net;
  net.set_hard(arch);
  std::vector<Tensor> weights = net.weights();
  Adam opt(weights, options.opt);
  Adam none;

  result.best_val_mae = evaluate(net, splits.val, options.batch_size, options.sentinel).overall.mae;
  auto best = snapshot(weights);
  std::size_t stale = 0;
  Rng rng(sub_seed(options.seed, "retrain-shuffle"));
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto start = Clock::now();
    const auto order = shuffled(splits.train.size(), rng);
    double tl = 0.0;
    const auto batches = data::make_batches(splits.train, order, options.batch_size);
    for (const auto& batch : batches) tl += optimise(net, batch, opt, none, options.sentinel, "weight").loss;
    const double val = evaluate(net, splits.val, options.batch_size, options.sentinel).overall.mae;
    result.log.push_back({epoch, tl / static_cast<double>(batches.size()), val, seconds_since(start)});
    if (val < result.best_val_mae) {
      result.best_val_mae = val;
      result.best_epoch = epoch;
      best = snapshot(weights);
      stale = 0;
    } else if (options.patience > 0 && ++stale >= options.patience) {
      break;
    }
  }
  restore(weights, best);
  result.test = evaluate(net, splits.test, options.batch_size, options.sentinel);
  return result;
}

std::vector<BenchRow> benchmark_search(ModelConfig config, const Tensor& adjacency,
                                       const data::DatasetSplits& splits,
                                       const SearchOptions& options) {
  std::vector<BenchRow> rows;
  for (SearchMode mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    config.mode = mode;
    SearchState state = make_search_state(config, adjacency, splits.train.stats, options);
    const SearchResult r = run_search(state, splits, options);
    BenchRow row;
    row.mode = mode_name(mode);
    row.epochs = r.log.size();
    double total = 0.0;
    for (const auto& e : r.log) total += e.seconds;
    row.seconds_per_epoch = r.log.empty() ? 0.0 : total / static_cast<double>(r.log.size());
    std::size_t param_bytes = 0;
    for (const auto& [name, t] : state.net->named_parameters()) param_bytes += t.size() * sizeof(double);
    // Adam keeps two moments per parameter.
    row.peak_bytes = r.peak_tape_bytes + 3 * param_bytes;
    row.val_mae = r.val_mae;
    rows.push_back(row);
  }
  return rows;
}

void save_parameters(const std::filesystem::path& path, const Supernet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto params = net.named_parameters();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u64(out, params.size());
  for (const auto& [name, t] : params) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, t.rank());
    for (std::size_t d : t.shape()) write_u64(out, d);
    for (double v : t.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      write_u64(out, bits);
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void load_parameters(const std::filesystem::path& path, Supernet& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error(path.string() + ": not a parameter checkpoint");
  }
  auto params = net.named_parameters();
  if (read_u64(in) != params.size()) {
    throw std::runtime_error(path.string() + ": parameter count differs from the configured model");
  }
  for (auto& [name, t] : params) {
    const std::uint64_t len = read_u64(in);
    if (len > 4096) throw std::runtime_error("checkpoint: corrupt name length");
    std::string stored(len, '\0');
    in.read(stored.data(), static_cast<std::streamsize>(len));
    if (stored != name) {
      throw std::runtime_error("checkpoint: expected '" + name + "', found '" + stored + "'");
    }
    ad::Shape shape(read_u64(in));
    for (auto& d : shape) d = read_u64(in);
    if (shape != t.shape()) {
      throw std::runtime_error("checkpoint: '" + name + "' has shape " + ad::shape_str(shape) +
                               ", model expects " + ad::shape_str(t.shape()));
    }
    for (double& v : t.mutable_values()) {
      const std::uint64_t bits = read_u64(in);
      std::memcpy(&v, &bits, sizeof v);
    }
  }
}

}  // namespace stnas
