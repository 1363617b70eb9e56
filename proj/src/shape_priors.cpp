#include "hscrf/shape_priors.hpp"

#include <random>
#include <stdexcept>

namespace hscrf {

Mask Mask::zeros(int height, int width) {
  Mask m;
  m.height = height;
  m.width = width;
  m.box = {0, 0, width - 1, height - 1};
  m.values.assign(static_cast<size_t>(height) * width, 0.0);
  return m;
}

Mask Mask::for_box(const Box& box) {
  Mask m = zeros(box.height(), box.width());
  m.box = box;
  return m;
}

namespace {

// weights[t] lists (source index, overlap) pairs for target cell t.
std::vector<std::vector<std::pair<int, double>>> overlap_weights(int src, int dst) {
  std::vector<std::vector<std::pair<int, double>>> w(dst);
  const double scale = double(src) / double(dst);
  for (int t = 0; t < dst; ++t) {
    const double lo = t * scale, hi = (t + 1) * scale;
    for (int s = static_cast<int>(std::floor(lo)); s < src && s < hi; ++s) {
      const double ov = std::min(hi, double(s + 1)) - std::max(lo, double(s));
      if (ov > 1e-12) w[t].push_back({s, ov});
    }
  }
  return w;
}

}  // namespace

Mask resample(const Mask& m, int height, int width) {
  if (m.height <= 0 || m.width <= 0) throw std::invalid_argument("resample: empty mask");
  Mask out = Mask::zeros(height, width);
  out.box = m.box;
  const auto wr = overlap_weights(m.height, height);
  const auto wc = overlap_weights(m.width, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double acc = 0.0, norm = 0.0;
      for (auto [i, a] : wr[r])
        for (auto [j, b] : wc[c]) {
          acc += a * b * m.at(i, j);
          norm += a * b;
        }
      out.at(r, c) = acc / norm;
    }
  return out;
}

Mask binarize(const Mask& m, double threshold) {
  Mask out = m;
  for (double& v : out.values) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

Mask complement(const Mask& m) {
  Mask out = m;
  for (double& v : out.values) v = 1.0 - v;
  return out;
}

Mask average_component_mask(const std::vector<Mask>& masks) {
  if (masks.empty()) throw std::invalid_argument("average_component_mask: empty mask list");
  Mask out = Mask::zeros(masks[0].height, masks[0].width);
  for (const auto& m : masks) {
    if (!m.same_raster(masks[0])) throw std::invalid_argument("average_component_mask: rasters differ");
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += m.values[i];
  }
  for (double& v : out.values) v /= double(masks.size());
  return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

struct LloydRun {
  std::vector<std::vector<double>> centers;
  std::vector<int> assignment;
  double sse = 0.0;
};

LloydRun lloyd(const std::vector<std::vector<double>>& pts, int K, std::mt19937_64& rng) {
  const int n = static_cast<int>(pts.size());
  LloydRun run;
  // k-means++ seeding
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  int first = static_cast<int>(unit(rng) * n) % n;
  run.centers.push_back(pts[first]);
  chosen[first] = 1;
  while (static_cast<int>(run.centers.size()) < K) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(pts[i], run.centers.back()));
      total += d2[i];
    }
    int pick = -1;
    if (total > 0) {
      double r = unit(rng) * total;
      for (int i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0 && d2[i] > 0) {
          pick = i;
          break;
        }
      }
    }
    if (pick < 0)
      for (int i = 0; i < n && pick < 0; ++i)
        if (!chosen[i]) pick = i;
    chosen[pick] = 1;
    run.centers.push_back(pts[pick]);
  }

  run.assignment.assign(n, -1);
  const size_t dim = pts[0].size();
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(pts[i], run.centers[0]);
      for (int k = 1; k < K; ++k) {
        const double d = sq_dist(pts[i], run.centers[k]);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (run.assignment[i] != best) {
        run.assignment[i] = best;
        changed = true;
      }
    }
    std::vector<std::vector<double>> sums(K, std::vector<double>(dim, 0.0));
    std::vector<int> counts(K, 0);
    for (int i = 0; i < n; ++i) {
      ++counts[run.assignment[i]];
      for (size_t d = 0; d < dim; ++d) sums[run.assignment[i]][d] += pts[i][d];
    }
    for (int k = 0; k < K; ++k) {
      if (counts[k] == 0) {
        // Re-seed an empty cluster with the point farthest from its center.
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d = sq_dist(pts[i], run.centers[run.assignment[i]]);
          if (d > fd && counts[run.assignment[i]] > 1) {
            fd = d;
            far = i;
          }
        }
        --counts[run.assignment[far]];
        run.assignment[far] = k;
        run.centers[k] = pts[far];
        counts[k] = 1;
        changed = true;
        continue;
      }
      for (size_t d = 0; d < dim; ++d) run.centers[k][d] = sums[k][d] / counts[k];
    }
    if (!changed) break;
  }
  run.sse = 0.0;
  for (int i = 0; i < n; ++i) run.sse += sq_dist(pts[i], run.centers[run.assignment[i]]);
  return run;
}

}  // namespace

ClusterResult cluster_masks(const std::vector<Mask>& masks, int K, std::uint64_t seed) {
  if (K <= 0) throw std::invalid_argument("cluster_masks: K must be positive");
  const int n = static_cast<int>(masks.size());
  if (n < K) throw std::invalid_argument("cluster_masks: fewer masks than clusters");
  std::vector<std::vector<double>> pts;
  for (const auto& m : masks) pts.push_back(resample(m, kCommonRaster, kCommonRaster).values);

  ClusterResult res;
  if (K == n) {
    for (int i = 0; i < n; ++i) {
      res.representatives.push_back(i);
      res.centers.push_back(pts[i]);
      res.assignment.push_back(i);
    }
    return res;
  }
  std::mt19937_64 rng(seed);
  LloydRun best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 20; ++restart) {
    LloydRun run = lloyd(pts, K, rng);
    if (run.sse < best.sse) best = std::move(run);
  }
  res.centers = best.centers;
  res.assignment = best.assignment;
  res.sse = best.sse;
  for (int k = 0; k < K; ++k) {
    int rep = -1;
    double rd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (res.assignment[i] != k) continue;
      const double d = sq_dist(pts[i], res.centers[k]);
      if (d < rd) {
        rd = d;
        rep = i;
      }
    }
    res.representatives.push_back(rep);
  }
  return res;
}

namespace {

// Squared-distance lower envelope transform of one line (Felzenszwalb & Huttenlocher).
void dt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  d.resize(n);
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const Mask& edges) {
  const int h = edges.height, w = edges.width;
  constexpr double kFar = 1e20;
  std::vector<double> grid(static_cast<size_t>(h) * w);
  bool any = false;
  for (size_t i = 0; i < grid.size(); ++i) {
    grid[i] = edges.values[i] > 0.5 ? 0.0 : kFar;
    any = any || edges.values[i] > 0.5;
  }
  if (!any) return std::vector<double>(grid.size(), std::numeric_limits<double>::infinity());
  std::vector<double> f, d;
  for (int c = 0; c < w; ++c) {
    f.resize(h);
    for (int r = 0; r < h; ++r) f[r] = grid[static_cast<size_t>(r) * w + c];
    dt_1d(f, d);
    for (int r = 0; r < h; ++r) grid[static_cast<size_t>(r) * w + c] = d[r];
  }
  for (int r = 0; r < h; ++r) {
    f.assign(grid.begin() + static_cast<long>(r) * w, grid.begin() + static_cast<long>(r + 1) * w);
    dt_1d(f, d);
    for (int c = 0; c < w; ++c) grid[static_cast<size_t>(r) * w + c] = std::sqrt(d[c]);
  }
  return grid;
}

std::vector<int> inner_boundary(const Mask& m) {
  std::vector<int> cells;
  auto fg = [&](int r, int c) { return r >= 0 && c >= 0 && r < m.height && c < m.width && m.at(r, c) >= 0.5; };
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (fg(r, c) && (!fg(r - 1, c) || !fg(r + 1, c) || !fg(r, c - 1) || !fg(r, c + 1)))
        cells.push_back(r * m.width + c);
  return cells;
}

DtSelection distance_transform_select(const Mask& edges, const std::vector<Mask>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("distance_transform_select: no candidates");
  const auto dt = distance_transform(edges);
  DtSelection sel;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (!candidates[i].same_raster(edges)) throw std::invalid_argument("distance_transform_select: rasters differ");
    const auto boundary = inner_boundary(candidates[i]);
    if (boundary.empty())
      throw std::invalid_argument("distance_transform_select: candidate " + std::to_string(i) + " has no boundary");
    double s = 0.0;
    for (int cell : boundary) s += dt[cell];
    s /= double(boundary.size());
    sel.scores.push_back(s);
    if (i == 0 || s < sel.score) {
      sel.score = s;
      sel.index = i;
    }
  }
  return sel;
}

std::vector<int> naive_box_prior(const Box& box, const std::vector<Segment>& segments, int grid_width) {
  std::vector<int> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) {
    bool inside = true;
    for (int p : seg.pixels)
      if (!box.contains(p % grid_width, p / grid_width)) {
        inside = false;
        break;
      }
    out.push_back(inside ? 1 : 0);
  }
  return out;
}

Mask naive_box_mask(const Box& box, const std::vector<Segment>& segments, int grid_width) {
  Mask m = Mask::for_box(box);
  const auto on = naive_box_prior(box, segments, grid_width);
  for (size_t s = 0; s < segments.size(); ++s) {
    if (!on[s]) continue;
    for (int p : segments[s].pixels) m.at(p / grid_width - box.y0, p % grid_width - box.x0) = 1.0;
  }
  return m;
}

Mask snap_mask_to_segments(const Mask& gt, const std::vector<Segment>& segments, int grid_width) {
  const Box& box = gt.box;
  Mask out = Mask::for_box(box);
  for (const auto& seg : segments) {
    int fg = 0, bg = 0;
    for (int p : seg.pixels) {
      const int x = p % grid_width, y = p / grid_width;
      if (!box.contains(x, y)) continue;
      (gt.at(y - box.y0, x - box.x0) >= 0.5 ? fg : bg)++;
    }
    if (fg <= bg) continue;
    for (int p : seg.pixels) {
      const int x = p % grid_width, y = p / grid_width;
      if (box.contains(x, y)) out.at(y - box.y0, x - box.x0) = 1.0;
    }
  }
  return out;
}

MaskAccuracy normalized_mask_accuracy(const Mask& pred, const Mask& gt) {
  if (!pred.same_raster(gt)) throw std::invalid_argument("normalized_mask_accuracy: rasters differ");
  long tp = 0, fn = 0, tn = 0, fp = 0;
  for (size_t i = 0; i < gt.values.size(); ++i) {
    const bool p = pred.values[i] >= 0.5, g = gt.values[i] >= 0.5;
    if (g) (p ? tp : fn)++;
    else (p ? fp : tn)++;
  }
  const long P = tp + fn, N = tn + fp;
  MaskAccuracy acc;
  if (P > 0 && N > 0) {
    acc.value = (double(tp) * double(N) + double(tn) * double(P)) / (2.0 * double(P) * double(N));
  } else {
    acc.degenerate = true;
    if (P > 0) acc.value = double(tp) / double(P);
    else if (N > 0) acc.value = double(tn) / double(N);
  }
  return acc;
}

double pixel_accuracy(const Mask& pred, const Mask& gt) {
  if (!pred.same_raster(gt)) throw std::invalid_argument("pixel_accuracy: rasters differ");
  if (gt.values.empty()) return 0.0;
  long agree = 0;
  for (size_t i = 0; i < gt.values.size(); ++i) agree += (pred.values[i] >= 0.5) == (gt.values[i] >= 0.5);
  return double(agree) / double(gt.values.size());
}

OracleChoice oracle_best(const std::vector<Mask>& candidates, const Mask& gt) {
  if (candidates.empty()) throw std::invalid_argument("oracle_best: no candidates");
  OracleChoice best{0, -1.0};
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const double a = normalized_mask_accuracy(candidates[i], gt).value;
    if (a > best.accuracy) best = {i, a};
  }
  return best;
}

Mask gt_object_mask(const SceneInstance& inst, int class_id, const Box& box) {
  Mask m = Mask::for_box(box);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x)
      if (inst.gt_pixel_labels[static_cast<size_t>(y) * inst.width + x] == class_id) m.at(y - box.y0, x - box.x0) = 1.0;
  return m;
}

MaskLibrary::MaskLibrary(int num_classes, std::map<int, std::vector<TrainingMask>> masks, std::uint64_t seed)
    : num_classes_(num_classes), masks_(std::move(masks)) {
  for (const auto& [cls, list] : masks_) {
    std::map<int, std::vector<Mask>> by_component;
    std::map<int, std::vector<double>> log_aspects;
    std::vector<Mask> all;
    for (const auto& tm : list) {
      by_component[tm.component].push_back(resample(tm.mask, kCommonRaster, kCommonRaster));
      log_aspects[tm.component].push_back(std::log(double(tm.mask.height) / double(tm.mask.width)));
      all.push_back(tm.mask);
    }
    for (auto& [comp, ms] : by_component) averages_[{cls, comp}] = average_component_mask(ms);
    for (auto& [comp, la] : log_aspects) {
      double s = 0.0;
      for (double x : la) s += x;
      aspects_[{cls, comp}] = s / double(la.size());
    }
    const int K = std::min(num_components(cls), static_cast<int>(all.size()));
    if (K > 0) {
      const auto cr = hscrf::cluster_masks(all, K, seed + static_cast<std::uint64_t>(cls));
      for (int rep : cr.representatives) clusters_[cls].push_back(all[rep]);
    }
  }
}

int MaskLibrary::num_components(int class_id) const {
  auto it = masks_.find(class_id);
  if (it == masks_.end()) return 0;
  int k = 0;
  for (const auto& tm : it->second) k = std::max(k, tm.component + 1);
  return k;
}

const std::vector<TrainingMask>& MaskLibrary::training_masks(int class_id) const {
  static const std::vector<TrainingMask> none;
  auto it = masks_.find(class_id);
  return it == masks_.end() ? none : it->second;
}

const Mask& MaskLibrary::average_mask(int class_id, int component) const {
  auto it = averages_.find({class_id, component});
  return it == averages_.end() ? empty_mask_ : it->second;
}

const std::vector<Mask>& MaskLibrary::cluster_masks(int class_id) const {
  static const std::vector<Mask> none;
  auto it = clusters_.find(class_id);
  return it == clusters_.end() ? none : it->second;
}

int MaskLibrary::component_for_box(int class_id, const Box& box) const {
  const double a = std::log(double(box.height()) / double(box.width()));
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (const auto& [key, asp] : aspects_) {
    if (key.first != class_id) continue;
    const double d = std::abs(asp - a);
    if (d < bd) {
      bd = d;
      best = key.second;
    }
  }
  return best;
}

}  // namespace hscrf
