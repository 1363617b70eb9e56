#include "hscrf/eval_metrics.hpp"

#include <numeric>

namespace hscrf {

double ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  if (o.num_classes != num_classes) throw std::invalid_argument("confusion matrices differ in size");
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  return *this;
}

ConfusionMatrix segment_confusion(const SceneInstance& inst, const std::vector<int>& seg_labels, int C) {
  if (seg_labels.size() != inst.segments.size()) throw std::invalid_argument("one label per segment required");
  ConfusionMatrix cm(C);
  for (size_t s = 0; s < inst.segments.size(); ++s)
    for (int p : inst.segments[s].pixels) {
      const int g = inst.gt_pixel_labels[p];
      if (g >= 0) cm.at(g, seg_labels[s]) += 1.0;
    }
  return cm;
}

RecallResult per_class_recall(const ConfusionMatrix& cm) {
  const int C = cm.num_classes;
  RecallResult r;
  r.per_class.assign(C, 0.0);
  r.counted.assign(C, false);
  int n = 0;
  for (int c = 0; c < C; ++c) {
    double row = 0.0;
    for (int j = 0; j < C; ++j) row += cm.at(c, j);
    if (row <= 0) continue;
    r.per_class[c] = cm.at(c, c) / row;
    r.counted[c] = true;
    r.average += r.per_class[c];
    ++n;
  }
  if (n == 0) throw std::invalid_argument("per_class_recall: confusion matrix is empty");
  r.average /= n;
  return r;
}

double global_recall(const ConfusionMatrix& cm) {
  const double total = cm.total();
  if (total <= 0) throw std::invalid_argument("global_recall: confusion matrix is empty");
  double diag = 0.0;
  for (int c = 0; c < cm.num_classes; ++c) diag += cm.at(c, c);
  return diag / total;
}

double average_precision(std::vector<DetResult> dets, const std::vector<GtObject>& gts, double iou_thresh) {
  if (gts.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const DetResult& a, const DetResult& b) { return a.confidence > b.confidence; });
  std::vector<char> used(gts.size(), 0);
  std::vector<double> prec, rec;
  int tp = 0, fp = 0;
  for (const auto& d : dets) {
    double best = -1.0;
    int hit = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].image != d.image || gts[g].class_id != d.class_id) continue;
      const double o = iou(d.box, gts[g].box);
      if (o > best) {
        best = o;
        hit = static_cast<int>(g);
      }
    }
    if (hit >= 0 && best >= iou_thresh && !used[hit]) {
      used[hit] = 1;
      ++tp;
    } else {
      ++fp;
    }
    prec.push_back(double(tp) / double(tp + fp));
    rec.push_back(double(tp) / double(gts.size()));
  }
  // Precision envelope, then area under the step curve.
  for (int i = static_cast<int>(prec.size()) - 2; i >= 0; --i) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0, prev_r = 0.0;
  for (size_t i = 0; i < prec.size(); ++i) {
    ap += (rec[i] - prev_r) * prec[i];
    prev_r = rec[i];
  }
  return ap;
}

ApResult detection_ap(const std::vector<DetResult>& dets, const std::vector<GtObject>& gts, double iou_thresh) {
  std::map<int, std::vector<DetResult>> by_d;
  std::map<int, std::vector<GtObject>> by_g;
  for (const auto& d : dets) by_d[d.class_id].push_back(d);
  for (const auto& g : gts) by_g[g.class_id].push_back(g);
  ApResult r;
  for (const auto& [c, list] : by_g) {
    r.per_class[c] = average_precision(by_d[c], list, iou_thresh);
    r.mean += r.per_class[c];
  }
  if (!r.per_class.empty()) r.mean /= double(r.per_class.size());
  return r;
}

namespace {

std::vector<double> smoothed_row(const ConfusionMatrix& m, int r, double eps) {
  const int C = m.num_classes;
  std::vector<double> p(C);
  double s = 0.0;
  for (int j = 0; j < C; ++j) s += m.at(r, j);
  for (int j = 0; j < C; ++j) p[j] = s > 0 ? m.at(r, j) / s : 1.0 / C;
  for (double& x : p) x = (x + eps) / (1.0 + C * eps);
  return p;
}

}  // namespace

double symmetric_kl_rows(const ConfusionMatrix& a, const ConfusionMatrix& b, double eps) {
  if (a.num_classes != b.num_classes) throw std::invalid_argument("symmetric_kl_rows: sizes differ");
  double d = 0.0;
  for (int r = 0; r < a.num_classes; ++r) {
    const auto p = smoothed_row(a, r, eps);
    const auto q = smoothed_row(b, r, eps);
    for (int j = 0; j < a.num_classes; ++j) d += (p[j] - q[j]) * (std::log(p[j]) - std::log(q[j]));
  }
  return std::max(d, 0.0);
}

double weighted_accuracy(const std::vector<int>& pred, const std::vector<int>& gt, const std::vector<double>& weights) {
  if (pred.size() != gt.size() || gt.size() != weights.size())
    throw std::invalid_argument("weighted_accuracy: sizes differ");
  double ok = 0.0, total = 0.0;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0) continue;
    total += weights[i];
    if (pred[i] == gt[i]) ok += weights[i];
  }
  return total > 0 ? ok / total : 0.0;
}

double oracle_combination(const std::vector<int>& pred_a, const std::vector<int>& pred_b, const std::vector<int>& gt,
                          const std::vector<double>& weights) {
  if (pred_a.size() != pred_b.size()) throw std::invalid_argument("oracle_combination: sizes differ");
  std::vector<int> combined(pred_a.size());
  for (size_t i = 0; i < pred_a.size(); ++i) combined[i] = pred_a[i] == gt[i] ? pred_a[i] : pred_b[i];
  return weighted_accuracy(combined, gt, weights);
}

double mean_rank_of_truth(const std::vector<std::vector<double>>& potentials, const std::vector<int>& gt,
                          bool restrict_to_misclassified) {
  if (potentials.size() != gt.size()) throw std::invalid_argument("mean_rank_of_truth: sizes differ");
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] < 0) continue;
    const auto& row = potentials[i];
    if (restrict_to_misclassified && argmax(row) == gt[i]) continue;
    const double v = row[gt[i]];
    int rank = 1;
    for (int c = 0; c < static_cast<int>(row.size()); ++c)
      if (row[c] > v || (row[c] == v && c < gt[i])) ++rank;
    sum += rank;
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace hscrf
