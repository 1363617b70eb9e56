#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "hscrf/harness.hpp"
#include "hscrf/synth_gen.hpp"
#include "hscrf/toml_lite.hpp"

using namespace hscrf;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  bool quiet = false;
  bool timing = false;
};

Globals g;

void note(const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

fs::path resolve(const fs::path& base_file, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base_file.parent_path() / path;
}

struct Loaded {
  Dataset ds;
  ProviderStores stores;
};

Loaded load_data(const fs::path& dir) {
  if (dir.empty()) throw UsageError("no data directory given (set 'data' in the config or pass --data)");
  note("loading " + dir.string());
  Loaded l;
  l.ds = load_dataset(dir);
  l.stores = load_stores(dir, l.ds, 0);
  return l;
}

ExperimentConfig defaults() {
  ExperimentConfig c;
  if (g.seed) c.seed = *g.seed;
  return c;
}

// The global seed wins over any seed in a file.
ExperimentConfig reseed(ExperimentConfig c) {
  if (g.seed) c.seed = *g.seed;
  c.learn_opts.seed = c.seed;
  return c;
}

void write_experiment_files(const ExperimentResult& r, const fs::path& dir) {
  write_json_file(dir / "weights.json", r.weights.to_json());
  write_json_file(dir / "predictions.json", predictions_to_json(r.row.config, r.predictions));
}

void print_rows(const std::vector<ReportRow>& rows) {
  if (g.quiet) return;
  for (const auto& r : rows)
    std::cerr << r.config << ": avg_recall " << format_fixed(r.avg_recall, 4) << " global " << format_fixed(r.global_recall, 4)
              << " mAP " << format_fixed(r.mAP, 4) << " scene " << format_fixed(r.scene_acc, 4) << "\n";
}

int cmd_gen(const std::string& config, const std::string& out) {
  GeneratorConfig cfg;
  if (!config.empty()) cfg = generator_config_from_json(read_toml_file(config), cfg, config);
  if (g.seed) cfg.seed = *g.seed;
  validate_generator_config(cfg);
  note("generating " + std::to_string(cfg.train) + " train and " + std::to_string(cfg.test) + " test scenes");
  const GeneratedData data = generate_dataset(cfg, g.jobs);
  write_generated(data, out);
  note("wrote " + out);
  return 0;
}

int cmd_run(const std::string& config, const std::string& data, const std::string& out) {
  ExperimentConfig cfg = reseed(config_from_json(read_toml_file(config), defaults(), config));
  const fs::path data_dir = data.empty() ? resolve(config, cfg.data) : fs::path(data);
  fs::path out_dir = out.empty() ? resolve(config, cfg.output) : fs::path(out);
  if (out_dir.empty()) out_dir = fs::path("out") / cfg.name;
  const Loaded l = load_data(data_dir);
  const ExperimentResult r = run_experiment(cfg, l.ds, l.stores, g.jobs);
  emit_report({r.row}, out_dir, 0, g.timing);
  write_experiment_files(r, out_dir);
  print_rows({r.row});
  return 0;
}

int cmd_ablate(const std::string& grid, const std::string& data, const std::string& out) {
  const auto j = read_toml_file(grid);
  std::vector<ExperimentConfig> cfgs = grid_from_json(j, defaults(), grid);
  for (auto& c : cfgs) c = reseed(c);
  const ExperimentConfig& first = cfgs.front();
  const fs::path data_dir = data.empty() ? resolve(grid, first.data) : fs::path(data);
  fs::path out_dir = out.empty() ? resolve(grid, first.output) : fs::path(out);
  if (out_dir.empty()) out_dir = "out/ablation";
  const Loaded l = load_data(data_dir);
  const SuiteResult s = run_ablation_suite(cfgs, l.ds, l.stores, g.jobs);
  for (const auto& [name, msg] : s.errors) note("config " + name + " failed: " + msg);
  if (s.rows.empty()) throw RuntimeError("every configuration failed");
  emit_report(s.rows, out_dir, s.baseline, g.timing);
  if (!s.errors.empty()) {
    std::string csv = "config,error\n";
    for (const auto& [name, msg] : s.errors) csv += name + ",\"" + msg + "\"\n";
    write_text_file(out_dir / "errors.csv", csv);
  }
  for (const auto& r : s.results) write_experiment_files(r, out_dir / "configs" / r.row.config);
  print_rows(s.rows);
  return 0;
}

int cmd_journey(const std::string& seq, const std::string& data, const std::string& out) {
  const auto j = read_toml_file(seq);
  std::vector<ExperimentConfig> steps = journey_from_json(j, defaults(), seq);
  for (auto& c : steps) c = reseed(c);
  const fs::path data_dir = data.empty() ? resolve(seq, steps.front().data) : fs::path(data);
  fs::path out_dir = out.empty() ? resolve(seq, steps.front().output) : fs::path(out);
  if (out_dir.empty()) out_dir = "out/journey";
  const Loaded l = load_data(data_dir);
  const auto results = journey(steps, l.ds, l.stores, g.jobs);
  std::vector<ReportRow> rows;
  for (const auto& r : results) rows.push_back(r.row);
  emit_report(rows, out_dir, 0, g.timing);
  write_text_file(out_dir / "journey.csv", journey_csv(rows));
  write_text_file(out_dir / "snap_bound.txt",
                  format_fixed(snap_upper_bound(l.ds.test, l.ds.label_space.num_classes())) + "\n");
  print_rows(rows);
  return 0;
}

int cmd_shapes(const std::string& data, const std::string& out) {
  const Loaded l = load_data(data);
  const auto rows = shape_table(l.ds, l.stores);
  const fs::path out_dir = out.empty() ? fs::path(data) : fs::path(out);
  write_text_file(out_dir / "shapes.csv", shapes_csv(rows));
  if (!g.quiet)
    for (const auto& r : rows)
      std::cerr << r.prior << ": " << format_fixed(r.normalized_acc, 4) << " (" << r.count << " boxes)\n";
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt, const std::string& out) {
  const Dataset ds = load_dataset(gt);
  const auto j = read_json_file(pred);
  const auto preds = predictions_from_json(j, ds.test);
  const ReportRow row =
      evaluate_predictions(j.value("config", std::string("predictions")), preds, ds.test, ds.label_space.num_classes());
  const std::string csv = report_csv({row}, false);
  if (out.empty())
    std::cout << csv;
  else
    write_text_file(fs::path(out) / "report.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holistic scene CRF experiments"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override every seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", g.quiet, "No progress output");
  app.add_flag("--timing", g.timing, "Fill the seconds column of reports");

  std::string config, out, data, grid, seq, pred, gt;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--config", config, "Generator TOML")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Learn, infer and evaluate one configuration");
  run->add_option("--config", config, "Experiment TOML")->required()->check(CLI::ExistingFile);
  run->add_option("--data", data, "Dataset directory");
  run->add_option("--out", out, "Output directory");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  ablate->add_option("--grid", grid, "Grid TOML")->required()->check(CLI::ExistingFile);
  ablate->add_option("--data", data, "Dataset directory");
  ablate->add_option("--out", out, "Output directory");

  auto* jour = app.add_subcommand("journey", "Run a cumulative sequence of configurations");
  jour->add_option("--seq", seq, "Sequence TOML")->required()->check(CLI::ExistingFile);
  jour->add_option("--data", data, "Dataset directory");
  jour->add_option("--out", out, "Output directory");

  auto* shapes = app.add_subcommand("shapes", "Score the shape priors on the test boxes");
  shapes->add_option("--data", data, "Dataset directory")->required();
  shapes->add_option("--out", out, "Output directory (default: the dataset)");

  auto* eval = app.add_subcommand("eval", "Evaluate a predictions file");
  eval->add_option("--pred", pred, "predictions.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "Dataset directory")->required();
  eval->add_option("--out", out, "Write report.csv here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) return cmd_gen(config, out);
    if (*run) return cmd_run(config, data, out);
    if (*ablate) return cmd_ablate(grid, data, out);
    if (*jour) return cmd_journey(seq, data, out);
    if (*shapes) return cmd_shapes(data, out);
    if (*eval) return cmd_eval(pred, gt, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
