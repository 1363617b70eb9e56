#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hscrf/common.hpp"
#include "json.hpp"

namespace hscrf {

/// The semantic classes, scene types and detector subset of a dataset.
struct LabelSpace {
  std::vector<std::string> classes;
  std::vector<std::string> scene_types;
  std::vector<bool> is_thing;
  std::vector<int> detector_classes;  // class indices, ascending

  int num_classes() const { return static_cast<int>(classes.size()); }
  int num_scenes() const { return static_cast<int>(scene_types.size()); }
  bool is_detector_class(int c) const;
  /// Throws DataError for unknown names.
  int class_index(const std::string& name) const;

  /// Empty iff the label space is well formed.
  std::vector<std::string> violations() const;
};

/// An image region at the fine level of the partition hierarchy.
struct Segment {
  std::vector<Run> runs;
  std::vector<int> pixels;  // decoded flat indices, ascending
  int area = 0;
  int gt_label = kVoid;
};

/// A coarse region: the union of its child segments.
struct SuperSegment {
  int gt_label = kVoid;
  std::vector<int> children;  // derived from seg_parent
  int area = 0;               // derived
};

struct DetectionCandidate {
  int class_id = 0;
  double score = 0.0;
  Box box;
  int component = 0;
};

struct GtBox {
  int class_id = 0;
  Box box;
};

struct SceneInstance {
  std::string id;
  std::string split;  // "train" or "test"
  int height = 0;
  int width = 0;
  std::vector<Segment> segments;
  std::vector<SuperSegment> supersegments;
  std::vector<int> seg_parent;
  std::vector<DetectionCandidate> detections;
  std::vector<int> gt_pixel_labels;  // height*width, kVoid for unlabeled
  std::vector<GtBox> gt_boxes;
  int gt_scene = 0;

  int num_pixels() const { return height * width; }
  /// z_k ground truth: 1 iff some pixel carries label k.
  std::vector<int> gt_presence(int num_classes) const;
  /// Recomputes supersegment children and areas from seg_parent.
  void link_hierarchy();
};

struct Dataset {
  LabelSpace label_space;
  std::vector<SceneInstance> train;
  std::vector<SceneInstance> test;
};

/// Majority label over the non-void pixels; ties go to the lowest class.
/// kVoid when every pixel is void.
int majority_label(const std::vector<int>& pixels, const std::vector<int>& label_grid,
                   int num_classes);

std::vector<std::string> validate_instance(const SceneInstance& inst, const LabelSpace& ls);

struct CoverageStats {
  double fraction = 0.0;  // non-void pixels inside segments of area >= min_area
  int segment_count = 0;
};

/// Segment area counts void pixels; only the numerator/denominator of the
/// fraction exclude them.
CoverageStats coverage_stats(const SceneInstance& inst, int min_area);

// --- serialization -------------------------------------------------------

nlohmann::json runs_to_json(const std::vector<Run>& runs);
std::vector<Run> runs_from_json(const nlohmann::json& a);  // DataError
nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& a);  // DataError

nlohmann::json to_json(const LabelSpace& ls);
LabelSpace label_space_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneInstance& inst);
SceneInstance instance_from_json(const nlohmann::json& j);

/// Parses a JSON file; parse errors are reported as DataError "file:line: ...".
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Canonical form: sorted keys, two-space indent, trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Loads `labelspace.json` and `instances/*.json` (sorted by file name) and
/// validates everything. Violations raise DataError naming the instance.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace hscrf
