#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hscrf {

/// Label value for unlabeled pixels. Excluded from every accuracy metric.
inline constexpr int kVoid = -1;

/// Probabilities are floored at this value before taking logs.
inline constexpr double kProbFloor = 1e-6;

// Error hierarchy. The CLI maps these onto exit codes 1/2/3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in pixel coordinates, both corners inclusive.
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool valid() const { return x0 < x1 && y0 < y1; }
  bool within(int grid_h, int grid_w) const {
    return x0 >= 0 && y0 >= 0 && x1 < grid_w && y1 < grid_h;
  }
  bool operator==(const Box&) const = default;
};

/// Intersection over union with the inclusive-pixel convention.
inline double iou(const Box& a, const Box& b) {
  const int ix0 = std::max(a.x0, b.x0), iy0 = std::max(a.y0, b.y0);
  const int ix1 = std::min(a.x1, b.x1), iy1 = std::min(a.y1, b.y1);
  if (ix1 < ix0 || iy1 < iy0) return 0.0;
  const double inter = double(ix1 - ix0 + 1) * double(iy1 - iy0 + 1);
  return inter / (double(a.area()) + double(b.area()) - inter);
}

/// One run of a row-major run-length encoding: `length` pixels starting at
/// flat index `start` all carry `value`.
struct Run {
  int start = 0;
  int length = 0;
  int value = 0;
  bool operator==(const Run&) const = default;
};

/// Decodes runs onto a grid of `size` cells; cells not covered keep `fill`.
/// Throws DataError on runs that leave the grid.
std::vector<int> decode_runs(const std::vector<Run>& runs, int size, int fill);

/// Encodes a grid, skipping cells equal to `skip`.
std::vector<Run> encode_runs(const std::vector<int>& grid, int skip);

/// Encodes a sorted list of flat pixel indices as runs with value 1.
std::vector<Run> encode_pixel_set(const std::vector<int>& sorted_pixels);

/// Expands runs into the sorted list of flat pixel indices they cover.
std::vector<int> pixels_of_runs(const std::vector<Run>& runs);

inline double sigmoid(double r) {
  if (std::isinf(r)) return r > 0 ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-r));
}

inline double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

/// Index of the largest element; ties go to the lowest index.
template <typename Range>
int argmax(const Range& values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(std::size(values)); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

/// Worker count used when callers pass 0.
int default_jobs();

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots by the caller; scheduling order is irrelevant.
/// The first exception thrown by any task is rethrown.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// 64-bit FNV-1a, used for stable digests and per-instance seeds.
std::uint64_t fnv1a(const std::string& text, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Fixed-format number rendering shared by every text output.
std::string format_fixed(double v, int decimals = 6);

}  // namespace hscrf
