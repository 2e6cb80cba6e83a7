// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: stnas_acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "cli_runner.hpp"
#include "stnas/config.hpp"
#include "toy_model.hpp"

namespace fs = std::filesystem;
using namespace stnas;
using namespace stnas::testing;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kExpansionTol = 1e-9;
constexpr double kCollapseTol = 1e-6;
constexpr double kCollapseLogit = 20.0;
constexpr double kRowSumTol = 1e-12;
constexpr double kPersistenceRatio = 0.75;  // at least 25% below persistence
constexpr double kAblationRatio = 0.95;     // at least 5% below the w/o-SS pipeline
constexpr double kEndToEndSeconds = 600.0;
constexpr std::size_t kMaxSearchEpochs = 30;
constexpr std::size_t kMaxTrainEpochs = 50;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Criterion 1
void gradients(Outcome& o) {
  const auto start = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  auto check = [&](const std::string& name, double err) {
    worst = std::max(worst, err);
    o.require(err <= kGradTol, name + " " + fmt(err));
  };

  const Tensor b = random_tensor({3, 4}, rng);
  const Tensor w = random_tensor({3, 3, 2}, rng);
  const std::vector<std::pair<std::string, std::function<Tensor(const Tensor&)>>> prims = {
      {"matmul", [&](const Tensor& x) { return ad::matmul(x, ad::reshape(b, {4, 3})); }},
      {"batched-matmul", [&](const Tensor& x) { return ad::matmul(ad::reshape(x, {2, 2, 3}), ad::reshape(b, {2, 3, 2})); }},
      {"add", [&](const Tensor& x) { return ad::add(x, b); }},
      {"sub", [&](const Tensor& x) { return ad::sub(b, x); }},
      {"mul", [&](const Tensor& x) { return ad::mul(x, b); }},
      {"scale", [&](const Tensor& x) { return ad::scale(x, -1.7); }},
      {"scale-by-tensor", [&](const Tensor& x) { return ad::scale(b, ad::slice(ad::reshape(x, {12}), 0, 3, 1)); }},
      {"relu", [&](const Tensor& x) { return ad::relu(x); }},
      {"sigmoid", [&](const Tensor& x) { return ad::sigmoid(x); }},
      {"tanh", [&](const Tensor& x) { return ad::tanh(x); }},
      {"exp", [&](const Tensor& x) { return ad::exp(x); }},
      {"softmax", [&](const Tensor& x) { return ad::softmax(x, 1); }},
      {"concat", [&](const Tensor& x) { return ad::concat({x, b}, 0); }},
      {"slice", [&](const Tensor& x) { return ad::slice(x, 1, 1, 2); }},
      {"reshape", [&](const Tensor& x) { return ad::reshape(x, {2, 6}); }},
      {"sum", [&](const Tensor& x) { return ad::sum(x, 0); }},
      {"mean", [&](const Tensor& x) { return ad::mean(x, 1); }},
      {"transpose", [&](const Tensor& x) { return ad::transpose(x, {1, 0}); }},
      {"causal-conv", [&](const Tensor& x) { return ad::causal_conv1d(ad::reshape(x, {1, 4, 3}), w, 2); }},
  };
  for (const auto& [name, f] : prims) {
    const Tensor x = random_constant({3, 4}, rng);
    check(name, ad::grad_check([&](const Tensor& v) { return probe(f(v)); }, x, kGradEps));
  }
  check("causal-conv kernel", ad::grad_check_params([&] { return probe(ad::causal_conv1d(ad::reshape(b, {1, 4, 3}), w, 1)); }, {w}, kGradEps));

  // Operators: gradient in the input and in every weight.
  const std::size_t D = 4;
  const Tensor z = random_constant({2, 4, 3, D}, rng);
  const Tensor x = random_constant({2, 3, D}, rng);
  const Tensor a = ring_adjacency(3);
  const auto gdcc = GdccParams::init(D, 2, 1, rng);
  const auto informer = InformerParams::init(D, D, rng);
  const auto fixed = GnnFixedParams::init(D, 2, rng);
  const auto adap = GnnAdapParams::init(3, 2, D, 2, rng);
  const auto att = GnnAttParams::init(D, 2, 1, rng);
  auto op_check = [&](const std::string& name, const Tensor& in, auto&& params, auto&& f) {
    check(name + " input", ad::grad_check([&](const Tensor& v) { return probe(f(v)); }, in, kGradEps));
    std::vector<Tensor> ws;
    params.collect(ws);
    check(name + " weights", ad::grad_check_params([&] { return probe(f(in)); }, ws, kGradEps));
  };
  op_check("gdcc", z, gdcc, [&](const Tensor& v) { return op_gdcc(v, gdcc); });
  op_check("informer", z, informer, [&](const Tensor& v) { return op_informer(v, informer); });
  op_check("gnn_fixed", x, fixed, [&](const Tensor& v) { return op_gnn_fixed(v, a, fixed); });
  op_check("gnn_adap", x, adap, [&](const Tensor& v) { return op_gnn_adap(v, adap); });
  op_check("gnn_att", x, att, [&](const Tensor& v) { return op_gnn_att(v, att); });

  // Composed supernet, every parameter including the logits.
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const ModelConfig c = tiny_config(mode);
    Supernet net(c, ring_adjacency(c.nodes), unit_stats(), 3);
    randomise_logits(net, rng);
    const auto batch = random_batch(c, 2, rng);
    std::vector<Tensor> all;
    for (const auto& [name, t] : net.named_parameters()) all.push_back(t);
    check(std::string("supernet ") + mode_name(mode),
          ad::grad_check_params([&] { return loss_masked_mae(net.forward(batch), batch.y); }, all, kGradEps));
  }
  const double secs = since(start);
  o.require(secs < kGradSeconds, "runtime " + fmt(secs) + " s");
  o.detail << "max relative error " << fmt(worst) << " over " << prims.size() + 1
           << " primitive checks, 5 operators and 2 supernets, " << fmt(secs) << " s";
}

// Criterion 2
void expansions(Outcome& o) {
  Rng rng(2);
  OpHyper h;
  h.d_model = 4;
  h.nodes = 3;
  TemporalDag t{Cell::init(2, {OpKind::Zero, OpKind::Identity}, h, Tensor(), false, rng), {}, {}};
  t.alpha = init_logits(t.cell);
  const Tensor z0 = random_constant({2, 4, 3, 4}, rng);
  const double dt = max_diff(values(temporal_dag_forward(z0, t)), values(ad::scale(z0, 1.25)));

  SpatialDagSet s;
  s.cell = Cell::init(2, {OpKind::Zero, OpKind::Identity}, h, Tensor(), false, rng);
  s.beta = {init_logits(s.cell), init_logits(s.cell)};
  const Tensor hs = random_constant({2, 3, 4}, rng);
  double ds = 0.0;
  for (std::size_t m = 0; m < 2; ++m)
    ds = std::max(ds, max_diff(values(spatial_dag_forward(hs, s, m)), values(ad::scale(hs, 1.25))));
  o.require(dt <= kExpansionTol, "temporal " + fmt(dt));
  o.require(ds <= kExpansionTol, "spatial " + fmt(ds));
  o.detail << "temporal deviation " << fmt(dt) << ", spatial deviation " << fmt(ds);
}

// Criterion 3
void collapse(Outcome& o) {
  Rng rng(3);
  double worst = 0.0;
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const ModelConfig c = tiny_config(mode);
    for (int trial = 0; trial < 4; ++trial) {
      Supernet soft(c, ring_adjacency(c.nodes), unit_stats(), 40 + trial);
      randomise_logits(soft, rng);
      const auto arch = soft.derive();
      peak_logits(soft, arch, kCollapseLogit);
      auto hard = clone_net(soft, ring_adjacency(c.nodes), 40 + trial);
      hard->set_hard(arch);
      const auto batch = random_batch(c, 3, rng);
      const double d = max_diff(values(soft.forward(batch)), values(hard->forward(batch)));
      worst = std::max(worst, d);
      o.require(d <= kCollapseTol, std::string(mode_name(mode)) + " " + fmt(d));
    }
  }
  o.detail << "max |soft - hard| " << fmt(worst) << " over 4 architectures per mode";
}

double max_row_error(const Tensor& t, std::size_t axis) {
  const Tensor rows = ad::sum(t, axis);
  double d = 0.0;
  for (double v : rows.values()) d = std::max(d, std::abs(v - 1.0));
  return d;
}

// Criterion 4
void structure(Outcome& o) {
  Rng rng(4);
  double row = 0.0;
  row = std::max(row, max_row_error(mix_weights(random_constant({10, 7}, rng, -20, 20)), 1));
  row = std::max(row, max_row_error(build_adaptive_adj(random_constant({9, 4}, rng, -3, 3), random_constant({9, 4}, rng, -3, 3)), 1));
  const auto att = GnnAttParams::init(8, 4, 2, rng);
  for (const auto& a : gnn_att_attention(random_constant({3, 9, 8}, rng, -3, 3), att)) row = std::max(row, max_row_error(a, 2));
  o.require(row <= kRowSumTol, "row sums " + fmt(row));

  const auto gdcc = GdccParams::init(4, 2, 2, rng);
  const Tensor z = random_constant({1, 10, 3, 4}, rng);
  const auto base = values(op_gdcc(z, gdcc));
  bool causal = true;
  for (std::size_t t = 0; t < 10; ++t) {
    Tensor bumped = z.detach();
    for (std::size_t i = 0; i < 12; ++i) bumped.mutable_values()[t * 12 + i] += 1.0;
    const auto out = values(op_gdcc(bumped, gdcc));
    for (std::size_t i = 0; i < t * 12; ++i) causal = causal && out[i] == base[i];
  }
  o.require(causal, "gdcc causality");

  const Tensor h = random_constant({2, 12, 3, 4}, rng);
  bool round_trip = true;
  for (std::size_t m : {1, 2, 3, 4, 6, 12}) round_trip = round_trip && values(ad::concat(split_patches(h, m), 1)) == values(h);
  o.require(round_trip, "patch round trip");

  bool rejected = false;
  try {
    split_patches(h, 5);
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  ModelConfig c = tiny_config();
  c.patches = 3;
  try {
    c.validate();
    rejected = false;
  } catch (const std::invalid_argument&) {
  }
  o.require(rejected, "P mod M rejection");
  o.detail << "max row-sum error " << fmt(row) << ", causality " << (causal ? "holds" : "broken")
           << ", split/concat exact for M in {1,2,3,4,6,12}, P=12 M=5 rejected";
}

std::vector<std::vector<double>> snap(const std::vector<Tensor>& ts) {
  std::vector<std::vector<double>> out;
  for (const auto& t : ts) out.push_back(values(t));
  return out;
}

// Criterion 5
void sharing(Outcome& o) {
  Rng rng(5);
  ModelConfig c = tiny_config();
  c.patches = 4;
  Supernet net(c, ring_adjacency(c.nodes), unit_stats(), 6);
  randomise_logits(net, rng);
  auto& set = net.spatial();
  const Tensor h = random_constant({2, c.nodes, c.d_model}, rng);
  auto outputs = [&] {
    std::vector<std::vector<double>> out;
    for (std::size_t m = 0; m < set.patches(); ++m) out.push_back(values(spatial_dag_forward(h, set, m)));
    return out;
  };
  const auto base = outputs();
  set.cell.ops[0].gnn_att->w1.mutable_values()[0] += 0.5;
  const auto shared = outputs();
  for (std::size_t m = 0; m < base.size(); ++m) o.require(shared[m] != base[m], "shared weight missed DAG " + std::to_string(m));
  for (std::size_t m = 0; m < set.patches(); ++m) {
    const auto before = outputs();
    set.beta[m].mutable_values()[1] += 1.0;
    const auto after = outputs();
    for (std::size_t k = 0; k < set.patches(); ++k) {
      o.require((after[k] != before[k]) == (k == m), "beta " + std::to_string(m) + " vs DAG " + std::to_string(k));
    }
  }

  const ModelConfig t = tiny_config();
  const auto train = random_batch(t, 3, rng, data::Split::Train);
  const auto val = random_batch(t, 3, rng, data::Split::Val);
  auto options = [](double wl, double al) {
    SearchOptions so;
    so.seed = 8;
    so.weight_opt.lr = wl;
    so.arch_opt.lr = al;
    return so;
  };
  for (auto mode : {SearchMode::Decoupled, SearchMode::Mixed}) {
    const ModelConfig mc = tiny_config(mode);
    SearchState w = make_search_state(mc, ring_adjacency(4), unit_stats(), options(1e-2, 0.0));
    const auto theta = snap(w.net->arch_params());
    const auto omega = snap(w.net->weights());
    bilevel_step(w, train, val);
    o.require(snap(w.net->arch_params()) == theta, "weight step touched the logits");
    o.require(snap(w.net->weights()) != omega, "weight step moved nothing");
    SearchState a = make_search_state(mc, ring_adjacency(4), unit_stats(), options(0.0, 1e-2));
    bilevel_step(a, train, val);
    o.require(snap(a.net->weights()) == omega, "architecture step touched the weights");
    o.require(snap(a.net->arch_params()) != theta, "architecture step moved nothing");
  }

  // Replay the alternation by hand: the logits must follow the val batch.
  SearchState s = make_search_state(t, ring_adjacency(4), unit_stats(), options(1e-2, 1e-2));
  bilevel_step(s, train, val);
  auto replay = [&](const data::Batch& arch_batch) {
    SearchState r = make_search_state(t, ring_adjacency(4), unit_stats(), options(1e-2, 1e-2));
    for (auto [opt, batch] : {std::pair{&r.weight_opt, &train}, std::pair{&r.arch_opt, &arch_batch}}) {
      r.weight_opt.zero_grad();
      r.arch_opt.zero_grad();
      ad::Tape tape;
      ad::TapeScope scope(&tape);
      tape.backward(loss_masked_mae(r.net->forward(*batch), batch->y));
      opt->step();
    }
    double d = 0.0;
    const auto got = snap(s.net->arch_params()), ref = snap(r.net->arch_params());
    for (std::size_t i = 0; i < got.size(); ++i) d = std::max(d, max_diff(got[i], ref[i]));
    return d;
  };
  const double on_val = replay(val), on_train = replay(train);
  o.require(on_val <= 1e-12, "logits differ from a val-batch replay by " + fmt(on_val));
  o.require(on_train > 1e-9, "logits indistinguishable from a train-batch replay");
  bool guarded = false;
  try {
    bilevel_step(s, train, train);
  } catch (const std::logic_error&) {
    guarded = true;
  }
  o.require(guarded, "a train batch was accepted for the architecture step");
  o.detail << "shared weight reaches all " << c.patches << " DAGs, each beta reaches only its own; "
           << "groups bit-separated in both modes; logits match a val replay within " << fmt(on_val)
           << " and differ from a train replay by " << fmt(on_train);
}

struct Pipeline {
  double test_mae = 0.0;
  double seconds = 0.0;
  std::size_t search_epochs = 0;
  std::size_t train_epochs = 0;
  std::string arch;
};

Pipeline pipeline(const RunConfig& rc, const LoadedData& d) {
  const auto start = Clock::now();
  const ModelConfig mc = model_config(rc, d.signals);
  const SearchOptions so = search_options(rc);
  SearchState state = make_search_state(mc, d.adjacency, d.splits.train.stats, so);
  const SearchResult sr = run_search(state, d.splits, so);
  const TrainResult tr = train_derived(sr.arch, mc, d.adjacency, d.splits, train_options(rc));
  return {tr.test.overall.mae, since(start), sr.log.size(), tr.log.size(), sr.arch.to_text()};
}

RunConfig synthetic_config(const fs::path& work) {
  const fs::path dir = work / "synthetic";
  const auto r = run_tool({"gen-synth", "--nodes", "12", "--steps", "2000", "--seed", "7", "--out", dir.string()});
  if (r.code != 0) throw std::runtime_error("gen-synth failed: " + r.err);
  RunConfig rc = load_config(dir / "config.txt");
  if (rc.history != 12 || rc.horizon != 12 || rc.patches != 2 || rc.d_model != 16 ||
      rc.temporal_nodes != 4 || rc.spatial_nodes != 4 || rc.batch_size != 32) {
    throw std::runtime_error("generated config drifted from the acceptance setup");
  }
  return rc;
}

// Criterion 6
void end_to_end(Outcome& o, const fs::path& work) {
  const auto start = Clock::now();
  const RunConfig rc = synthetic_config(work);
  o.require(rc.epochs <= kMaxSearchEpochs && rc.train_epochs <= kMaxTrainEpochs, "epoch budget");
  const LoadedData d = load_data(rc);
  const auto& test = d.splits.test;
  const ad::Shape shape{test.size(), test.horizon, test.nodes(), test.channels()};
  const double persistence = metrics_multistep(persistence_forecast(test), dataset_targets(test), shape).overall.mae;

  const Pipeline full = pipeline(rc, d);
  RunConfig ablated = rc;
  ablated.spatial_ops = {OpKind::Zero, OpKind::Identity};
  const Pipeline no_ss = pipeline(ablated, d);
  const double secs = since(start);

  o.require(full.test_mae <= kPersistenceRatio * persistence, "vs persistence");
  o.require(full.test_mae <= kAblationRatio * no_ss.test_mae, "vs w/o SS");
  o.require(secs <= kEndToEndSeconds, "runtime");
  o.detail << "test MAE " << fmt(full.test_mae) << " vs persistence " << fmt(persistence) << " (ratio "
           << fmt(full.test_mae / persistence) << ", limit " << kPersistenceRatio << ") and w/o SS "
           << fmt(no_ss.test_mae) << " (ratio " << fmt(full.test_mae / no_ss.test_mae) << ", limit "
           << kAblationRatio << "); search " << full.search_epochs << " + train " << full.train_epochs
           << " epochs; both pipelines " << fmt(secs) << " s";
}

// Criterion 7
void speedup(Outcome& o, const fs::path& work) {
  const RunConfig rc = synthetic_config(work);
  const LoadedData d = load_data(rc);
  SearchOptions so = search_options(rc);
  so.epochs = 1;
  const auto rows = benchmark_search(model_config(rc, d.signals), d.adjacency, d.splits, so);
  const bool shape = rows.size() == 2 && rows[0].mode == "decoupled" && rows[1].mode == "mixed";
  o.require(shape, "one row per mode");
  if (!shape) return;
  o.require(rows[0].seconds_per_epoch > 0.0, "positive time");
  o.require(rows[0].seconds_per_epoch < rows[1].seconds_per_epoch, "direction");
  o.detail << "decoupled " << fmt(rows[0].seconds_per_epoch) << " s/epoch vs mixed "
           << fmt(rows[1].seconds_per_epoch) << " s/epoch";
}

// Criterion 8
void metrics(Outcome& o) {
  using V = std::vector<double>;
  auto flat = [](const V& p, const V& t) { return metrics_multistep(p, t, {1, 1, p.size(), 1}); };
  const auto same = flat({1, -2, 3}, {1, -2, 3});
  o.require(same.overall.mae == 0 && same.overall.rmse == 0 && same.overall.mape == 0, "pred = target");
  const auto guard = flat({2, 2}, {0, 2});
  o.require(guard.overall.mae == 1 && guard.overall.rmse == std::sqrt(2.0) && guard.overall.mape == 0, "[2,2] vs [0,2]");
  const auto one = flat({3}, {2});
  o.require(one.overall.mae == 1 && one.overall.rmse == 1 && one.overall.mape == 50, "[3] vs [2]");
  const auto masked = metrics_multistep(V{99, 3}, V{0, 2}, {1, 1, 2, 1}, 0.0);
  o.require(masked.overall.mae == 1 && masked.masked == 1, "sentinel");

  Rng rng(8);
  std::uniform_real_distribution<double> u(-100, 100);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    V p(len(rng)), t(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = u(rng);
      t[k] = u(rng);
    }
    const auto r = flat(p, t);
    violations += r.overall.mae > r.overall.rmse * (1 + 1e-15);
  }
  o.require(violations == 0, std::to_string(violations) + " MAE > RMSE cases");

  const V t{1, 5, 2, 3, 4, 4, 3, 8, 7, 6};
  const ad::Shape s{5, 1, 2, 1};
  double mean = 0;
  for (double v : t) mean += v;
  mean /= static_cast<double>(t.size());
  const double rrse = metrics_singlestep(V(t.size(), mean), t, s).rrse;
  o.require(rrse == 1.0, "RRSE of the mean predictor " + fmt(rrse));
  o.require(metrics_singlestep(t, t, s).rrse == 0.0, "RRSE of a perfect forecast");
  V anti(t.size()), pos(t.size());
  for (std::size_t n = 0; n < 2; ++n) {
    double m = 0;
    for (std::size_t b = 0; b < 5; ++b) m += t[b * 2 + n] / 5.0;
    for (std::size_t b = 0; b < 5; ++b) {
      anti[b * 2 + n] = -t[b * 2 + n] + 2 * m;
      pos[b * 2 + n] = 2 * t[b * 2 + n] + 1;
    }
  }
  const double c_neg = metrics_singlestep(anti, t, s).corr, c_pos = metrics_singlestep(pos, t, s).corr;
  o.require(std::abs(c_neg + 1) <= 1e-12, "CORR -1 got " + fmt(c_neg));
  o.require(std::abs(c_pos - 1) <= 1e-12, "CORR +1 got " + fmt(c_pos));
  o.detail << "hand examples exact, 1000 fuzzed MAE <= RMSE, RRSE(mean) = " << rrse << ", CORR = "
           << c_pos << " / " << c_neg;
}

// Criterion 9
void determinism(Outcome& o, const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  auto must = [&](const CliRun& r, const std::string& what) {
    if (r.code != 0) throw std::runtime_error(what + " failed: " + r.err);
  };
  must(run_tool({"gen-synth", "--nodes", "6", "--steps", "400", "--seed", "11", "--out", (dir / "data").string()}), "gen-synth");
  const fs::path cfg = dir / "data" / "config.txt";
  append_file(cfg, "epochs = 2\ntrain_epochs = 3\n");
  for (const char* run : {"a", "b"}) {
    must(run_tool({"search", "--config", cfg.string(), "--out", (dir / "search" / run).string()}), "search");
  }
  const std::string arch_a = read_file(dir / "search" / "a" / "arch.txt");
  o.require(!arch_a.empty() && arch_a == read_file(dir / "search" / "b" / "arch.txt"), "arch.txt differs");
  for (const char* run : {"a", "b"}) {
    must(run_tool({"train", "--config", cfg.string(), "--arch", (dir / "search" / "a" / "arch.txt").string(),
                   "--out", (dir / "train" / run).string()}),
         "train");
  }
  const std::string metrics_a = read_file(dir / "train" / "a" / "metrics.csv");
  o.require(!metrics_a.empty() && metrics_a == read_file(dir / "train" / "b" / "metrics.csv"), "metrics.csv differs");
  o.detail << "arch.txt (" << arch_a.size() << " bytes) and metrics.csv (" << metrics_a.size()
           << " bytes) identical across two runs";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stnas_acceptance";
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient correctness", gradients},
      {"supernet oracle equivalence", expansions},
      {"one-hot collapse", collapse},
      {"structural invariants", structure},
      {"sharing and separation", sharing},
      {"synthetic end-to-end", [&](Outcome& o) { end_to_end(o, work); }},
      {"decoupling speedup direction", [&](Outcome& o) { speedup(o, work); }},
      {"metric correctness", metrics},
      {"determinism", [&](Outcome& o) { determinism(o, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first
              << ": " << o.detail.str() << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
