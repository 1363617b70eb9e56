#include "hscrf/common.hpp"

#include <cstdio>
#include <exception>
#include <mutex>

namespace hscrf {

std::vector<int> decode_runs(const std::vector<Run>& runs, int size, int fill) {
  std::vector<int> grid(static_cast<size_t>(size), fill);
  for (const Run& r : runs) {
    if (r.start < 0 || r.length < 0 || r.start + r.length > size)
      throw DataError("run [" + std::to_string(r.start) + ", " + std::to_string(r.length) +
                      "] exceeds grid of " + std::to_string(size) + " pixels");
    std::fill_n(grid.begin() + r.start, r.length, r.value);
  }
  return grid;
}

std::vector<Run> encode_runs(const std::vector<int>& grid, int skip) {
  std::vector<Run> runs;
  const int n = static_cast<int>(grid.size());
  int i = 0;
  while (i < n) {
    if (grid[i] == skip) {
      ++i;
      continue;
    }
    int j = i + 1;
    while (j < n && grid[j] == grid[i]) ++j;
    runs.push_back({i, j - i, grid[i]});
    i = j;
  }
  return runs;
}

std::vector<Run> encode_pixel_set(const std::vector<int>& sorted_pixels) {
  std::vector<Run> runs;
  for (int p : sorted_pixels) {
    if (!runs.empty() && runs.back().start + runs.back().length == p)
      ++runs.back().length;
    else
      runs.push_back({p, 1, 1});
  }
  return runs;
}

std::vector<int> pixels_of_runs(const std::vector<Run>& runs) {
  std::vector<int> pixels;
  for (const Run& r : runs)
    for (int k = 0; k < r.length; ++k) pixels.push_back(r.start + k);
  std::sort(pixels.begin(), pixels.end());
  return pixels;
}

int default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = default_jobs();
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  if (!s.empty() && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace hscrf
