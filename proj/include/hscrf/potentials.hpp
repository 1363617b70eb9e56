#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hscrf/factor_graph.hpp"
#include "hscrf/scene_data.hpp"
#include "hscrf/shape_priors.hpp"

namespace hscrf {

enum class Source { Machine, Human, GT, Remove };

/// Swappable model components. Each maps onto one or more factor templates.
enum class Component {
  SegUnary,
  SupSegUnary,
  Pn,
  ClassUnary,
  ClassTree,
  Detection,
  Shape,
  SceneUnary,
  SceneClass,
};
inline constexpr int kNumComponents = 9;

const char* source_name(Source s);
Source source_from_name(const std::string& name);  // UsageError
const char* component_name(Component c);
Component component_from_name(const std::string& name);  // UsageError

using Matrix = std::vector<std::vector<double>>;

/// One Chow-Liu edge between presence variables z_i and z_k with a 2x2
/// log table indexed [z_i][z_k].
struct TreeEdge {
  int i = 0;
  int k = 0;
  std::array<double, 4> table{};
};

/// Every potential table for one instance. Probability-valued members hold
/// rows summing to one; logs are taken when the graph is built. Removed
/// components are absent.
struct PotentialBundle {
  std::array<Source, kNumComponents> sources{};
  std::optional<Matrix> seg_unary;       // N_seg x C
  std::optional<Matrix> supseg_unary;    // N_ss x C
  bool pn = false;
  std::optional<std::vector<double>> class_unary;  // P(z_k = 1)
  std::optional<std::vector<TreeEdge>> class_tree;
  std::optional<std::vector<DetectionCandidate>> detections;
  std::optional<std::vector<Mask>> shape_masks;    // one per detection, on the box raster
  std::optional<std::vector<double>> scene_unary;  // C_l
  std::optional<Matrix> scene_class;               // C_l x C, P(z_k = 1 | s)

  Source source(Component c) const { return sources[static_cast<int>(c)]; }
};

struct VoteRecord {
  std::string instance;
  std::string level;  // "segment", "supersegment" or "scene"
  int index = 0;
  std::vector<int> counts;
};

struct PairPreferenceAnswers {
  Matrix pair_counts;         // [i][j] = times j was preferred with anchor i
  std::vector<double> marginals;  // P(z_i) from training images
};

/// Vote-proportional distribution; uniform when area < min_area or no votes.
/// Throws DataError on a negative count.
std::vector<double> human_unary_from_votes(const std::vector<int>& counts, int min_area, int area);

/// One-hot tables from annotation. Void segments get a uniform row;
/// detections become the GT boxes with an infinite score.
PotentialBundle gt_potentials(const SceneInstance& inst, const LabelSpace& ls);

/// Presence statistics over images: diagonal = P(z_i), off-diagonal =
/// P(z_i = 1, z_j = 1). Every 2x2 presence cell gets `alpha` pseudo-counts.
Matrix cooccurrence_from_counts(const std::vector<SceneInstance>& images, int num_classes, double alpha = 1.0);

/// Joint from conditional preference answers times training marginals,
/// symmetrized by averaging with its transpose; the diagonal holds P(z_i).
/// Throws DataError when an anchor has no answers.
Matrix cooccurrence_from_preferences(const PairPreferenceAnswers& p);
/// The conditional P(z_j | z_i) behind the joint; rows sum to one.
Matrix preference_conditional(const PairPreferenceAnswers& p);

/// 2x2 presence distribution [z_i][z_j] implied by a joint; cells floored
/// and renormalized.
std::array<double, 4> presence_table(const Matrix& joint, int i, int j);
double mutual_information(const Matrix& joint, int i, int j);

/// Maximum mutual-information spanning tree; edges returned as (i < j) in
/// Kruskal acceptance order. Ties go to the lexicographically first pair.
std::vector<std::pair<int, int>> chow_liu_tree(const Matrix& joint);

/// Pointwise mutual information tables for the given tree.
std::vector<TreeEdge> tree_potentials(const Matrix& joint, const std::vector<std::pair<int, int>>& edges);

/// P(z_k = 1 | s) from training images with `alpha` pseudo-counts per outcome.
Matrix scene_class_from_counts(const std::vector<SceneInstance>& images, const LabelSpace& ls, double alpha = 1.0);

// --- provider stores -----------------------------------------------------

struct MachineTables {
  Matrix seg_unary;
  Matrix supseg_unary;
  std::vector<double> scene_unary;
};

struct HumanStore {
  // instance -> level -> index -> counts
  std::map<std::string, std::map<std::string, std::map<int, std::vector<int>>>> votes;
  bool has_preferences = false;
  Matrix class_pair_counts;
  std::vector<double> occurrence_wins, occurrence_trials;
  Matrix scene_class_wins, scene_class_trials;
};

/// Statistics estimated once from the training split.
struct TrainStats {
  Matrix joint;                  // cooccurrence_from_counts
  std::vector<std::pair<int, int>> tree;
  std::vector<TreeEdge> tree_tables;
  Matrix scene_class;
};

struct ProviderStores {
  LabelSpace label_space;
  std::map<std::string, MachineTables> machine;
  HumanStore human;
  TrainStats train;
  MaskLibrary masks;
  std::map<std::string, Mask> edges;  // full-grid edge maps
  int human_min_area = 0;
};

TrainStats compute_train_stats(const Dataset& ds);

/// Reads machine_potentials/, votes.json, preferences.json, masks/ and
/// edges/ under `dir`; missing optional stores stay empty.
ProviderStores load_stores(const std::filesystem::path& dir, const Dataset& ds, int human_min_area);

std::vector<VoteRecord> votes_from_json(const nlohmann::json& j);
nlohmann::json votes_to_json(const std::vector<VoteRecord>& votes);

using ComponentSources = std::array<Source, kNumComponents>;

/// Routes every component to its configured source. Throws UsageError for
/// combinations that have no meaning and DataError when a store lacks the
/// instance.
PotentialBundle assemble_bundle(const SceneInstance& inst, const ComponentSources& cfg, const ProviderStores& stores);

/// Per-variable-kind ground truth. b_i is 1 iff the detection overlaps a
/// same-class GT box with IoU >= 0.5.
std::vector<int> gt_detection_labels(const SceneInstance& inst, const std::vector<DetectionCandidate>& dets);

struct ClampOptions {
  bool z = false;
  bool s = false;
  bool b = false;
};

/// Index layout of a built graph.
struct GraphLayout {
  int num_seg = 0, num_ss = 0, num_det = 0, num_classes = 0;
  int seg(int i) const { return i; }
  int ss(int j) const { return num_seg + j; }
  int det(int d) const { return num_seg + num_ss + d; }
  int presence(int k) const { return num_seg + num_ss + num_det + k; }
  int scene() const { return num_seg + num_ss + num_det + num_classes; }
  int size() const { return scene() + 1; }
};

struct BuiltGraph {
  FactorGraph graph;
  GraphLayout layout;
  Assignment gt;  // ground-truth labels; void segments hold -1
};

/// Shape reward for each segment: fraction of the segment's area covered by
/// the mask (soft values summed).
std::vector<double> shape_overlap(const Mask& mask, const std::vector<Segment>& segments, int grid_width);

/// Builds the CRF. Throws DataError when a table does not fit the instance.
BuiltGraph build_graph(const SceneInstance& inst, const LabelSpace& ls, const PotentialBundle& bundle,
                       const WeightVector& w, const ClampOptions& clamps = {});

}  // namespace hscrf
