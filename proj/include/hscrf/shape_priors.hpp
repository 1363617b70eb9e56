#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "hscrf/common.hpp"
#include "hscrf/scene_data.hpp"

namespace hscrf {

/// A real-valued grid aligned with a box. Binary masks hold 0/1.
struct Mask {
  int height = 0;
  int width = 0;
  Box box;
  std::vector<double> values;  // row-major, height*width

  static Mask zeros(int height, int width);
  /// Zeros on the raster of `box`, remembering the box.
  static Mask for_box(const Box& box);
  double at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
  double& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
  bool same_raster(const Mask& o) const { return height == o.height && width == o.width; }
};

/// Side of the common raster used for averaging and clustering.
inline constexpr int kCommonRaster = 10;

/// Area-weighted resampling; works for up- and down-sampling.
Mask resample(const Mask& m, int height, int width);
Mask binarize(const Mask& m, double threshold = 0.5);
Mask complement(const Mask& m);

/// Per-cell mean of same-raster masks. Throws std::invalid_argument on an
/// empty list or mismatched rasters.
Mask average_component_mask(const std::vector<Mask>& masks);

struct ClusterResult {
  std::vector<int> representatives;  // indices into the input, one per cluster
  std::vector<std::vector<double>> centers;
  std::vector<int> assignment;
  double sse = 0.0;  // within-cluster sum of squares on the common raster
};

/// K-means (k-means++ seeding, best of several restarts) on the masks
/// resampled to the common raster. Each cluster is represented by its member
/// closest to the center. Throws std::invalid_argument for K <= 0 or K > n.
ClusterResult cluster_masks(const std::vector<Mask>& masks, int K, std::uint64_t seed);

/// Exact Euclidean distance to the nearest nonzero cell; +inf when there is none.
std::vector<double> distance_transform(const Mask& edges);

/// Foreground cells 4-adjacent to a background cell; cells beyond the raster
/// count as background.
std::vector<int> inner_boundary(const Mask& m);

struct DtSelection {
  int index = 0;
  double score = 0.0;
  std::vector<double> scores;
};

/// Mean distance-transform value along each candidate's boundary; the
/// minimizer wins, ties to the lowest index. Throws std::invalid_argument for
/// an empty candidate list, mismatched rasters, or an empty boundary.
DtSelection distance_transform_select(const Mask& edges, const std::vector<Mask>& candidates);

/// 1 for segments lying entirely inside the (inclusive) box.
std::vector<int> naive_box_prior(const Box& box, const std::vector<Segment>& segments, int grid_width);
/// Box-raster mask that is on over the segments selected by naive_box_prior.
Mask naive_box_mask(const Box& box, const std::vector<Segment>& segments, int grid_width);

/// Per-segment majority vote of `gt` (a box-raster mask) over the segment's
/// in-box pixels; ties go to background.
Mask snap_mask_to_segments(const Mask& gt, const std::vector<Segment>& segments, int grid_width);

struct MaskAccuracy {
  double value = 0.0;
  bool degenerate = false;  // gt had no foreground or no background pixel
};

/// (TPR + TNR) / 2 over the raster; predictions binarized at 0.5. When gt
/// lacks one of the two classes the single defined rate is returned.
MaskAccuracy normalized_mask_accuracy(const Mask& pred, const Mask& gt);
/// Unnormalized fraction of agreeing cells.
double pixel_accuracy(const Mask& pred, const Mask& gt);

struct OracleChoice {
  int index = 0;
  double accuracy = 0.0;
};
OracleChoice oracle_best(const std::vector<Mask>& candidates, const Mask& gt);

/// Binary mask of the pixels inside `box` labelled `class_id`.
Mask gt_object_mask(const SceneInstance& inst, int class_id, const Box& box);

struct TrainingMask {
  Mask mask;  // binary, at its original box raster
  int component = 0;
  std::string source;  // instance id
};

/// Shape statistics learned from training object masks.
class MaskLibrary {
 public:
  MaskLibrary() = default;
  MaskLibrary(int num_classes, std::map<int, std::vector<TrainingMask>> masks, std::uint64_t seed);

  int num_components(int class_id) const;
  const std::vector<TrainingMask>& training_masks(int class_id) const;
  /// Soft average over the common raster; zero-filled when the component is unseen.
  const Mask& average_mask(int class_id, int component) const;
  /// Cluster representatives, K = num_components(class_id).
  const std::vector<Mask>& cluster_masks(int class_id) const;
  /// Component whose mean box aspect (height/width) is closest in log space.
  int component_for_box(int class_id, const Box& box) const;
  bool empty() const { return masks_.empty(); }

 private:
  int num_classes_ = 0;
  std::map<int, std::vector<TrainingMask>> masks_;
  std::map<std::pair<int, int>, Mask> averages_;
  std::map<std::pair<int, int>, double> aspects_;
  std::map<int, std::vector<Mask>> clusters_;
  Mask empty_mask_ = Mask::zeros(kCommonRaster, kCommonRaster);
};

}  // namespace hscrf
