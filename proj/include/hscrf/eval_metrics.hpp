#pragma once

#include <map>
#include <vector>

#include "hscrf/common.hpp"
#include "hscrf/scene_data.hpp"

namespace hscrf {

/// Pixel counts, rows = ground truth, columns = prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<double> counts;

  explicit ConfusionMatrix(int C = 0) : num_classes(C), counts(static_cast<size_t>(C) * C, 0.0) {}
  double& at(int gt, int pred) { return counts[static_cast<size_t>(gt) * num_classes + pred]; }
  double at(int gt, int pred) const { return counts[static_cast<size_t>(gt) * num_classes + pred]; }
  double total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
};

/// Paints per-segment labels onto pixels; void pixels are skipped.
ConfusionMatrix segment_confusion(const SceneInstance& inst, const std::vector<int>& seg_labels, int num_classes);

struct RecallResult {
  std::vector<double> per_class;
  std::vector<bool> counted;  // class had at least one GT pixel
  double average = 0.0;
};

/// Throws std::invalid_argument on an all-zero matrix.
RecallResult per_class_recall(const ConfusionMatrix& cm);
double global_recall(const ConfusionMatrix& cm);

struct DetResult {
  int image = 0;
  int class_id = 0;
  Box box;
  double confidence = 0.0;
};

struct GtObject {
  int image = 0;
  int class_id = 0;
  Box box;
};

struct ApResult {
  std::map<int, double> per_class;  // classes with at least one GT object
  double mean = 0.0;
};

/// All-points interpolated AP for a single class list; detections are taken
/// in descending confidence (input order breaks ties) and matched greedily.
double average_precision(std::vector<DetResult> dets, const std::vector<GtObject>& gts, double iou_thresh = 0.5);
ApResult detection_ap(const std::vector<DetResult>& dets, const std::vector<GtObject>& gts, double iou_thresh = 0.5);

/// Sum over rows of the symmetric KL divergence between row-normalized,
/// epsilon-smoothed confusion rows.
double symmetric_kl_rows(const ConfusionMatrix& a, const ConfusionMatrix& b, double eps = 1e-6);

/// Weighted fraction of items with pred == gt; items with gt < 0 are skipped.
double weighted_accuracy(const std::vector<int>& pred, const std::vector<int>& gt, const std::vector<double>& weights);

/// Accuracy of taking A's label where A is right and B's otherwise.
double oracle_combination(const std::vector<int>& pred_a, const std::vector<int>& pred_b, const std::vector<int>& gt,
                          const std::vector<double>& weights);

/// Mean 1-based rank of the gt label under descending potential; equal
/// values are ordered by class index. Rows with gt < 0 are skipped; with
/// `restrict_to_misclassified` only rows whose argmax is wrong count.
/// Returns 0 when no row counts.
double mean_rank_of_truth(const std::vector<std::vector<double>>& potentials, const std::vector<int>& gt,
                          bool restrict_to_misclassified);

}  // namespace hscrf
