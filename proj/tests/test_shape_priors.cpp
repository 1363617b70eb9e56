#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "hscrf/shape_priors.hpp"
#include "support.hpp"

using namespace hscrf;
using namespace testing;

namespace {

Mask from_rows(const std::vector<std::vector<double>>& rows) {
  Mask m = Mask::zeros(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) m.at(r, c) = rows[r][c];
  return m;
}

Mask random_mask(std::mt19937_64& rng, int h, int w, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Mask m = Mask::zeros(h, w);
  for (auto& v : m.values) v = b(rng);
  return m;
}

Mask rect(int h, int w, int r0, int c0, int r1, int c1) {
  Mask m = Mask::zeros(h, w);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) m.at(r, c) = 1;
  return m;
}

double sq(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Plain Lloyd from K distinct random points.
double lloyd_sse(const std::vector<std::vector<double>>& x, int K, std::mt19937_64& rng) {
  std::vector<int> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<double>> c;
  for (int k = 0; k < K; ++k) c.push_back(x[idx[k]]);
  std::vector<int> asg(x.size(), -1);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (size_t i = 0; i < x.size(); ++i) {
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (sq(x[i], c[k]) < sq(x[i], c[best])) best = k;
      if (best != asg[i]) changed = true;
      asg[i] = best;
    }
    for (int k = 0; k < K; ++k) {
      std::vector<double> s(x[0].size(), 0.0);
      int n = 0;
      for (size_t i = 0; i < x.size(); ++i)
        if (asg[i] == k) {
          for (size_t d = 0; d < s.size(); ++d) s[d] += x[i][d];
          ++n;
        }
      if (n > 0)
        for (auto& v : s) v /= n;
      else
        s = c[k];
      c[k] = s;
    }
    if (!changed) break;
  }
  double sse = 0;
  for (size_t i = 0; i < x.size(); ++i) sse += sq(x[i], c[asg[i]]);
  return sse;
}

// Brute-force mean distance from each boundary cell to the nearest edge cell.
double naive_dt_score(const Mask& edges, const Mask& cand) {
  std::vector<std::pair<int, int>> on;
  for (int r = 0; r < edges.height; ++r)
    for (int c = 0; c < edges.width; ++c)
      if (edges.at(r, c) > 0) on.push_back({r, c});
  double total = 0;
  int count = 0;
  for (int r = 0; r < cand.height; ++r)
    for (int c = 0; c < cand.width; ++c) {
      if (cand.at(r, c) < 0.5) continue;
      bool boundary = false;
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= cand.height || cc >= cand.width || cand.at(rr, cc) < 0.5) boundary = true;
      }
      if (!boundary) continue;
      double best = std::numeric_limits<double>::infinity();
      for (auto [er, ec] : on) best = std::min(best, std::hypot(double(er - r), double(ec - c)));
      total += best;
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("average component mask") {
  const auto a = from_rows({{1, 0}, {1, 0}});
  const auto b = from_rows({{1, 1}, {1, 1}});
  CHECK(average_component_mask({a, b}).values == std::vector<double>{1, 0.5, 1, 0.5});
  CHECK(average_component_mask({a}).values == a.values);
  std::mt19937_64 rng(1);
  std::vector<Mask> ms;
  for (int i = 0; i < 10; ++i) ms.push_back(random_mask(rng, 4, 5));
  const auto avg = average_component_mask(ms);
  for (size_t k = 0; k < avg.values.size(); ++k) {
    double s = 0;
    for (const auto& m : ms) s += m.values[k];
    CHECK(avg.values[k] == doctest::Approx(s / 10));
  }
  CHECK_THROWS_AS(average_component_mask({}), std::invalid_argument);
  CHECK_THROWS_AS(average_component_mask({a, Mask::zeros(3, 2)}), std::invalid_argument);
}

TEST_CASE("resampling preserves mass") {
  std::mt19937_64 rng(2);
  const auto m = random_mask(rng, 7, 13);
  const auto r = resample(m, 10, 10);
  double a = 0, b = 0;
  for (double v : m.values) a += v;
  for (double v : r.values) b += v;
  CHECK(b / 100 == doctest::Approx(a / (7 * 13)));
  CHECK(resample(m, 7, 13).values == m.values);
}

TEST_CASE("clustering with as many clusters as masks") {
  std::mt19937_64 rng(3);
  std::vector<Mask> ms;
  for (int i = 0; i < 4; ++i) ms.push_back(random_mask(rng, 10, 10));
  const auto r = cluster_masks(ms, 4, 1);
  auto reps = r.representatives;
  std::sort(reps.begin(), reps.end());
  CHECK(reps == std::vector<int>{0, 1, 2, 3});
  CHECK(r.sse == doctest::Approx(0.0));
  const auto one = cluster_masks({ms[0], ms[0]}, 1, 1);
  CHECK(ms[one.representatives[0]].values == ms[0].values);
  CHECK_THROWS_AS(cluster_masks(ms, 5, 1), std::invalid_argument);
  CHECK_THROWS_AS(cluster_masks(ms, 0, 1), std::invalid_argument);
}

TEST_CASE("clustering is close to the best of many restarts") {
  std::mt19937_64 rng(4);
  const Mask protos[3] = {rect(10, 10, 1, 1, 8, 4), rect(10, 10, 2, 2, 7, 7), rect(10, 10, 0, 5, 9, 9)};
  std::vector<Mask> ms;
  std::bernoulli_distribution flip(0.15);
  for (int i = 0; i < 50; ++i) {
    Mask m = protos[i % 3];
    for (auto& v : m.values)
      if (flip(rng)) v = 1 - v;
    ms.push_back(m);
  }
  const auto r = cluster_masks(ms, 3, 11);
  std::vector<std::vector<double>> x;
  for (const auto& m : ms) x.push_back(m.values);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000; ++t) best = std::min(best, lloyd_sse(x, 3, rng));
  CHECK(r.sse <= 1.05 * best + 1e-9);
}

TEST_CASE("distance transform selection") {
  const Mask cand = rect(12, 12, 3, 3, 8, 8);
  Mask edges = Mask::zeros(12, 12);
  for (int i : inner_boundary(cand)) edges.values[i] = 1;
  SUBCASE("coinciding boundary scores zero") {
    const auto s = distance_transform_select(edges, {rect(12, 12, 2, 2, 9, 9), cand});
    CHECK(s.index == 1);
    CHECK(s.score == 0.0);
  }
  SUBCASE("shifted candidate scores positive") {
    const auto s = distance_transform_select(edges, {rect(12, 12, 1, 1, 6, 6)});
    CHECK(s.score > 0.0);
  }
  SUBCASE("empty boundary is rejected") {
    CHECK_THROWS_AS(distance_transform_select(edges, {Mask::zeros(12, 12)}), std::invalid_argument);
  }
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(5);
  const Mask edges = random_mask(rng, 15, 11, 0.08);
  const auto dt = distance_transform(edges);
  for (int r = 0; r < 15; ++r)
    for (int c = 0; c < 11; ++c) {
      double best = std::numeric_limits<double>::infinity();
      for (int rr = 0; rr < 15; ++rr)
        for (int cc = 0; cc < 11; ++cc)
          if (edges.at(rr, cc) > 0) best = std::min(best, std::hypot(double(rr - r), double(cc - c)));
      CHECK(dt[r * 11 + c] == doctest::Approx(best).epsilon(1e-12));
    }
  CHECK(std::isinf(distance_transform(Mask::zeros(3, 3))[4]));
}

TEST_CASE("selection among random candidates matches naive scoring") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 5; ++t) {
    const Mask edges = random_mask(rng, 14, 14, 0.06);
    std::vector<Mask> cands;
    for (int i = 0; i < 20; ++i) {
      std::uniform_int_distribution<int> u(0, 13);
      int r0 = u(rng), r1 = u(rng), c0 = u(rng), c1 = u(rng);
      cands.push_back(rect(14, 14, std::min(r0, r1), std::min(c0, c1), std::max(r0, r1), std::max(c0, c1)));
    }
    int best = 0;
    double best_score = naive_dt_score(edges, cands[0]);
    for (int i = 1; i < 20; ++i) {
      const double s = naive_dt_score(edges, cands[i]);
      if (s < best_score - 1e-12) {
        best = i;
        best_score = s;
      }
    }
    const auto sel = distance_transform_select(edges, cands);
    CHECK(sel.index == best);
    CHECK(sel.score == doctest::Approx(best_score));
  }
}

TEST_CASE("naive box prior") {
  // 4x4 grid, four 2x2 quadrant segments.
  std::vector<int> seg(16);
  for (int p = 0; p < 16; ++p) seg[p] = (p / 4 / 2) * 2 + (p % 4) / 2;
  const auto inst = grid_instance(4, 4, seg, std::vector<int>(16, 0), {0, 0, 0, 0}, 2);
  const auto on = naive_box_prior(Box{0, 0, 2, 3}, inst.segments, 4);
  CHECK(on == std::vector<int>{1, 0, 1, 0});
  CHECK(naive_box_prior(Box{0, 0, 1, 1}, inst.segments, 4) == std::vector<int>{1, 0, 0, 0});
}

TEST_CASE("snapping to segments") {
  // 1x20 grid: a 10px segment then a 10px segment.
  std::vector<int> seg(20);
  for (int p = 0; p < 20; ++p) seg[p] = p < 10 ? 0 : 1;
  const auto inst = grid_instance(1, 20, seg, std::vector<int>(20, 0), {0, 0}, 2);
  Mask gt = Mask::for_box(Box{0, 0, 19, 0});
  for (int p = 0; p < 10; ++p) gt.values[p] = 1;
  for (int p = 10; p < 14; ++p) gt.values[p] = 1;
  const auto s = snap_mask_to_segments(gt, inst.segments, 20);
  for (int p = 0; p < 10; ++p) CHECK(s.values[p] == 1);
  for (int p = 10; p < 20; ++p) CHECK(s.values[p] == 0);
}

TEST_CASE("normalized mask accuracy") {
  std::mt19937_64 rng(7);
  Mask gt = random_mask(rng, 6, 6);
  gt.values[0] = 1;
  gt.values[1] = 0;
  CHECK(normalized_mask_accuracy(gt, gt).value == 1.0);
  CHECK(normalized_mask_accuracy(complement(gt), gt).value == 0.0);
  Mask all = Mask::zeros(6, 6);
  for (auto& v : all.values) v = 1;
  CHECK(normalized_mask_accuracy(all, gt).value == 0.5);
  CHECK(normalized_mask_accuracy(all, all).degenerate);
  CHECK(pixel_accuracy(gt, gt) == 1.0);
}

TEST_CASE("oracle choice") {
  std::mt19937_64 rng(8);
  const Mask gt = random_mask(rng, 5, 5);
  std::vector<Mask> c;
  for (int i = 0; i < 10; ++i) c.push_back(random_mask(rng, 5, 5));
  int best = 0;
  for (int i = 1; i < 10; ++i)
    if (normalized_mask_accuracy(c[i], gt).value > normalized_mask_accuracy(c[best], gt).value) best = i;
  CHECK(oracle_best(c, gt).index == best);
  CHECK(oracle_best({c[3]}, gt).index == 0);
  c.push_back(gt);
  const auto o = oracle_best(c, gt);
  CHECK(o.index == 10);
  CHECK(o.accuracy == 1.0);
}

TEST_CASE("mask library statistics") {
  std::map<int, std::vector<TrainingMask>> masks;
  masks[1].push_back({rect(4, 8, 0, 0, 3, 7), 0, "a"});
  masks[1].push_back({rect(4, 8, 1, 1, 2, 6), 0, "b"});
  masks[1].push_back({rect(9, 3, 0, 0, 8, 2), 1, "c"});
  const MaskLibrary lib(2, masks, 0);
  CHECK(lib.num_components(1) == 2);
  CHECK(lib.num_components(0) == 0);
  CHECK(lib.component_for_box(1, Box{0, 0, 9, 3}) == 0);
  CHECK(lib.component_for_box(1, Box{0, 0, 2, 9}) == 1);
  CHECK(lib.cluster_masks(1).size() == 2);
  CHECK(lib.average_mask(1, 0).height == kCommonRaster);
}
