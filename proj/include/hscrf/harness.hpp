#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hscrf/eval_metrics.hpp"
#include "hscrf/learning.hpp"
#include "hscrf/potentials.hpp"

namespace hscrf {

struct ExperimentConfig {
  std::string name = "machine";
  std::string output;
  std::string data;
  std::uint64_t seed = 7;
  ComponentSources sources{};  // all Machine
  ClampOptions clamps;
  bool learn = true;  // false keeps the all-ones weights
  LearnOptions learn_opts;
  bool allow_disconnected = false;
  int human_min_area = 0;

  /// Everything that affects results, as canonical text (the name and
  /// output paths excluded).
  std::string canonical() const;
  std::string digest() const;
};

/// Applies the keys of a parsed config table onto `base`. Unknown keys and
/// wrong value types are UsageErrors naming `where`.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base, const std::string& where);

/// Rejected configuration: some instance graph falls apart into pieces.
struct DisconnectedGraph : UsageError {
  using UsageError::UsageError;
};

struct ReportRow {
  std::string config;
  double avg_recall = 0.0;
  double global_recall = 0.0;
  double mAP = 0.0;
  double scene_acc = 0.0;
  std::string weights_digest;
  double seconds = 0.0;
};

struct InstancePrediction {
  std::string id;
  std::vector<int> segments, supersegments, presence;
  int scene = 0;
  std::vector<DetResult> detections;  // `image` is the instance position
};

struct ExperimentResult {
  ReportRow row;
  WeightVector weights;
  ConfusionMatrix confusion;
  std::vector<InstancePrediction> predictions;
};

/// Learns on the training split under `cfg`, infers on the test split and
/// evaluates segmentation, detection and scene recognition.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds, const ProviderStores& stores,
                                int jobs = 0);

/// Segmentation, detection and scene metrics of a set of predictions.
ReportRow evaluate_predictions(const std::string& name, const std::vector<InstancePrediction>& preds,
                               const std::vector<SceneInstance>& test, int num_classes,
                               ConfusionMatrix* confusion = nullptr);

nlohmann::json predictions_to_json(const std::string& config, const std::vector<InstancePrediction>& preds);
/// Matches records to `test` by id. Throws DataError on missing or malformed records.
std::vector<InstancePrediction> predictions_from_json(const nlohmann::json& j, const std::vector<SceneInstance>& test);

/// Average per-class recall of painting every segment with its majority GT
/// label: the best any segment-level labelling can do.
double snap_upper_bound(const std::vector<SceneInstance>& test, int num_classes);

struct SuiteResult {
  std::vector<ReportRow> rows;
  std::vector<ExperimentResult> results;  // parallel to rows
  std::vector<std::pair<std::string, std::string>> errors;  // config, message
  int baseline = 0;  // row index of the all-Machine configuration
};

/// Parses an ablation grid: `[[config]]` tables and/or a `sweep` list of
/// components expanded over every source, on top of an optional `[base]`.
std::vector<ExperimentConfig> grid_from_json(const nlohmann::json& j, const ExperimentConfig& defaults,
                                             const std::string& where);

/// Runs every distinct configuration (duplicates dropped by canonical
/// digest), adding the all-Machine baseline when the grid lacks it. Failing
/// configurations are reported, not fatal.
SuiteResult run_ablation_suite(std::vector<ExperimentConfig> grid, const Dataset& ds, const ProviderStores& stores,
                               int jobs = 0);

/// `[[step]]` tables, each applying its keys on top of the previous step.
std::vector<ExperimentConfig> journey_from_json(const nlohmann::json& j, const ExperimentConfig& defaults,
                                                const std::string& where);
/// Runs the steps in order; errors propagate.
std::vector<ExperimentResult> journey(const std::vector<ExperimentConfig>& steps, const Dataset& ds,
                                      const ProviderStores& stores, int jobs = 0);

/// The `seconds` column stays empty unless `timing` is set, so that reports
/// are reproducible byte for byte.
std::string report_csv(const std::vector<ReportRow>& rows, bool timing = false);
std::string journey_csv(const std::vector<ReportRow>& rows);
/// Three panels (average recall, mAP, scene accuracy) with one bar per row
/// and a rule at the baseline row's value.
std::string report_svg(const std::vector<ReportRow>& rows, int baseline);
void emit_report(const std::vector<ReportRow>& rows, const std::filesystem::path& outdir, int baseline,
                 bool timing = false);

struct ShapeRow {
  std::string prior;
  double normalized_acc = 0.0;
  double pixel_acc = 0.0;
  int count = 0;
};

/// Every shape prior scored against the GT object masks of the test boxes.
std::vector<ShapeRow> shape_table(const Dataset& ds, const ProviderStores& stores);
std::string shapes_csv(const std::vector<ShapeRow>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hscrf
