#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hscrf/potentials.hpp"
#include "hscrf/scene_data.hpp"
#include "hscrf/shape_priors.hpp"

namespace hscrf {

enum class ChannelKind { Contextual, Visual };

/// Row-stochastic confusion structure: row g spreads over the labels g can be
/// mistaken for (zero diagonal). `strength` is both the chance a region is
/// misread and the mass moved off the true label.
struct ConfusionChannel {
  ChannelKind kind = ChannelKind::Contextual;
  double strength = 0.0;
  Matrix row;  // C x C
  int num_classes() const { return static_cast<int>(row.size()); }
};

/// Confusions between spatially adjacent classes.
ConfusionChannel contextual_channel(int C, const std::vector<std::pair<int, int>>& adjacency, double strength);
/// Confusions inside each group of look-alike classes.
ConfusionChannel visual_channel(int C, const std::vector<std::vector<int>>& groups, double strength);
/// Uniform confusion over every other label (used for scene types).
ConfusionChannel uniform_channel(int C, double strength);

/// (1 - s) one-hot + s row, jittered by a Dirichlet with concentration 50
/// over its support and renormalized.
std::vector<double> apply_channel(int gt, const ConfusionChannel& ch, std::mt19937_64& rng);

/// Expected confusion of argmax predictions: (1 - s) I + s row.
Matrix expected_channel_matrix(const ConfusionChannel& ch);

/// Multinomial draw of `n_subjects` votes.
std::vector<int> synth_votes(const std::vector<double>& dist, int n_subjects, std::mt19937_64& rng);

/// Unaries of one channel for every segment and super-segment. Each
/// super-segment region is misread with probability `strength`; a misread
/// region moves each true label to one confuser drawn per (region, label),
/// for the region and all of its segments alike.
struct ChannelDraw {
  Matrix seg;
  Matrix supseg;
};
ChannelDraw draw_channel(const SceneInstance& inst, const ConfusionChannel& ch, std::mt19937_64& rng);

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int height = 40;
  int width = 40;
  int train = 80;
  int test = 200;
  int ss_rows = 3;
  int ss_cols = 3;
  int seg_split = 2;  // each super-segment cut into seg_split x seg_split segments
  double potts_beta = 1.0;
  double void_rate = 0.5;     // chance of a void strip per image
  int object_min = 8;
  int object_max = 13;
  double machine_strength = 0.28;
  double human_strength = 0.33;
  double machine_scene_flip = 0.2;
  double human_scene_flip = 0.1;
  int subjects = 10;
  double tp_rate = 0.85;
  double fp_rate = 0.5;
  double tp_score_mean = 1.0;
  double fp_score_mean = -0.5;
  double score_sigma = 0.8;
  int components = 3;
  double edge_dropout = 0.2;
  double edge_noise = 0.02;
  int min_box_pixels = 6;
};

/// The label space used by the generator: 4 stuff and 4 thing classes and
/// three scene types.
LabelSpace synthetic_label_space();
std::vector<std::pair<int, int>> synthetic_adjacency();
std::vector<std::vector<int>> synthetic_visual_groups();
/// P(class present | scene), C_l x C.
Matrix synthetic_scene_presence();

struct GeneratedData {
  Dataset dataset;
  std::map<std::string, MachineTables> machine;
  std::vector<VoteRecord> votes;
  nlohmann::json preferences;
  std::map<int, std::vector<TrainingMask>> masks;
  std::map<std::string, Mask> edges;
  nlohmann::json report;
};

/// Throws UsageError for an infeasible configuration.
void validate_generator_config(const GeneratorConfig& cfg);
/// Applies the keys of a parsed `[generator]`-style table; unknown keys are UsageErrors.
GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig base, const std::string& where);
GeneratedData generate_dataset(const GeneratorConfig& cfg, int jobs = 0);
/// Writes the dataset and every provider store under `dir`.
void write_generated(const GeneratedData& data, const std::filesystem::path& dir);

}  // namespace hscrf
