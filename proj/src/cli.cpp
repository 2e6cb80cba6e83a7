#include "stnas/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "stnas/config.hpp"

namespace stnas {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "run configuration file");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "overrides the configured seed");
  cmd->add_option("--mode", c.mode, "decoupled or mixed")->check(CLI::IsMember({"decoupled", "mixed"}));
}

RunConfig resolve(const Common& c) {
  RunConfig rc = load_config(c.config);
  if (c.seed) rc.seed = *c.seed;
  if (c.mode) rc.mode = parse_mode(*c.mode);
  return rc;
}

fs::path out_dir(const Common& c) {
  const fs::path dir(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string epoch_csv(const std::vector<EpochLog>& log, const char* val_column) {
  std::ostringstream o;
  o.precision(10);
  o << "epoch,train_loss," << val_column << ",seconds\n";
  for (const auto& e : log) o << e.epoch << "," << e.train_loss << "," << e.val_loss << "," << e.seconds << "\n";
  return o.str();
}

// Execution is single-threaded; the variable is still validated so a typo
// does not pass silently.
void check_threads() {
  const char* v = std::getenv("STNAS_THREADS");
  if (v == nullptr || *v == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) {
    throw std::invalid_argument(std::string("STNAS_THREADS must be a positive integer, got '") + v + "'");
  }
}

const data::ForecastDataset& pick_split(const data::DatasetSplits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  return s.test;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decoupled differentiable architecture search for spatio-temporal forecasting",
               "stnas"};
  app.require_subcommand(1);

  std::size_t gen_nodes = 12, gen_steps = 2000;
  std::uint64_t gen_seed = 7;
  std::string gen_out = ".";
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic diffusion dataset and a config");
  gen->add_option("--nodes", gen_nodes, "sensor count")->check(CLI::PositiveNumber);
  gen->add_option("--steps", gen_steps, "time steps")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");

  Common search_c, derive_c, train_c, eval_c, bench_c;
  auto* search = app.add_subcommand("search", "run the bi-level search");
  add_common(search, search_c);

  std::string state_path;
  auto* derive = app.add_subcommand("derive", "derive an architecture from a saved search state");
  add_common(derive, derive_c);
  derive->add_option("--state", state_path, "state.bin written by search")->required();

  std::string arch_path;
  auto* train = app.add_subcommand("train", "retrain a derived architecture from scratch");
  add_common(train, train_c);
  train->add_option("--arch", arch_path, "architecture file")->required();

  std::string eval_arch, eval_model, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "evaluate a trained model");
  add_common(eval, eval_c);
  eval->add_option("--arch", eval_arch, "architecture file")->required();
  eval->add_option("--model", eval_model, "model.bin written by train")->required();
  eval->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* bench = app.add_subcommand("bench", "time decoupled against mixed search");
  add_common(bench, bench_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    check_threads();
    if (*gen) {
      const fs::path dir(gen_out);
      fs::create_directories(dir);
      const auto synth = data::gen_synthetic(gen_nodes, gen_steps, gen_seed);
      data::write_signals_csv(dir / "signals.csv", synth.signals);
      data::write_graph_csv(dir / "adjacency.csv", synth.graph);
      RunConfig rc;
      rc.signals = {"signals.csv"};
      rc.adjacency = "adjacency.csv";
      rc.split = {0.7, 0.1, 0.2};
      rc.batch_size = 32;
      rc.epochs = 10;
      rc.train_epochs = 50;
      rc.patience = 10;
      rc.seed = gen_seed;
      write_text(dir / "config.txt", render_config(rc));
      out << "wrote " << (dir / "signals.csv").string() << ", " << (dir / "adjacency.csv").string()
          << ", " << (dir / "config.txt").string() << "\n";
      return 0;
    }

    if (*search) {
      const RunConfig rc = resolve(search_c);
      const LoadedData d = load_data(rc);
      const SearchOptions so = search_options(rc);
      SearchState state =
          make_search_state(model_config(rc, d.signals), d.adjacency, d.splits.train.stats, so);
      const SearchResult r = run_search(state, d.splits, so);
      const fs::path dir = out_dir(search_c);
      r.arch.save(dir / "arch.txt");
      write_text(dir / "search_log.csv", epoch_csv(r.log, "val_loss"));
      save_parameters(dir / "state.bin", *state.net);
      out << "search finished: " << r.log.size() << " epochs, val MAE " << r.val_mae << "\n"
          << r.arch.to_text();
      return 0;
    }

    if (*derive) {
      const RunConfig rc = resolve(derive_c);
      const LoadedData d = load_data(rc);
      const SearchOptions so = search_options(rc);
      SearchState state =
          make_search_state(model_config(rc, d.signals), d.adjacency, d.splits.train.stats, so);
      load_parameters(state_path, *state.net);
      const auto arch = state.net->derive();
      arch.save(out_dir(derive_c) / "arch.txt");
      out << arch.to_text();
      return 0;
    }

    if (*train) {
      const RunConfig rc = resolve(train_c);
      const LoadedData d = load_data(rc);
      const auto arch = DiscreteArchitecture::load(arch_path);
      const TrainResult r = train_derived(arch, model_config(rc, d.signals), d.adjacency, d.splits,
                                          train_options(rc));
      const fs::path dir = out_dir(train_c);
      save_parameters(dir / "model.bin", *r.net);
      write_text(dir / "train_log.csv", epoch_csv(r.log, "val_mae"));
      write_text(dir / "metrics.csv", to_csv(r.test));
      const auto& test = d.splits.test;
      const ad::Shape shape{test.size(), test.horizon, test.nodes(), test.channels()};
      const auto persistence =
          metrics_multistep(persistence_forecast(test), dataset_targets(test), shape, rc.null_value);
      out << "best epoch " << r.best_epoch << ", val MAE " << r.best_val_mae << "\n"
          << format_table(r.test) << "persistence MAE " << persistence.overall.mae << "\n";
      return 0;
    }

    if (*eval) {
      const RunConfig rc = resolve(eval_c);
      const LoadedData d = load_data(rc);
      const auto arch = DiscreteArchitecture::load(eval_arch);
      Supernet net(model_config(rc, d.signals), d.adjacency, d.splits.train.stats, 0);
      net.set_hard(arch);
      load_parameters(eval_model, net);
      const auto report = evaluate(net, pick_split(d.splits, eval_split), rc.batch_size, rc.null_value);
      write_text(out_dir(eval_c) / ("eval_" + eval_split + ".csv"), to_csv(report));
      out << format_table(report);
      return 0;
    }

    if (*bench) {
      const RunConfig rc = resolve(bench_c);
      const LoadedData d = load_data(rc);
      const auto rows =
          benchmark_search(model_config(rc, d.signals), d.adjacency, d.splits, search_options(rc));
      write_text(out_dir(bench_c) / "bench.csv", bench_csv(rows));
      out << bench_table(rows);
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace stnas
