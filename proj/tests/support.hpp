#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hscrf/factor_graph.hpp"
#include "hscrf/potentials.hpp"
#include "hscrf/scene_data.hpp"
#include "hscrf/synth_gen.hpp"

namespace testing {

using namespace hscrf;

// C classes named c0..; the last one is a thing and the only detector class.
inline LabelSpace tiny_label_space(int C, int scenes = 2) {
  LabelSpace ls;
  for (int c = 0; c < C; ++c) {
    ls.classes.push_back("c" + std::to_string(c));
    ls.is_thing.push_back(c == C - 1);
  }
  for (int s = 0; s < scenes; ++s) ls.scene_types.push_back("s" + std::to_string(s));
  ls.detector_classes = {C - 1};
  return ls;
}

// Builds an instance from a per-pixel segment id grid and a per-pixel label grid.
inline SceneInstance grid_instance(int h, int w, const std::vector<int>& seg_of_pixel, const std::vector<int>& labels,
                                   const std::vector<int>& seg_parent, int C, const std::string& id = "inst") {
  SceneInstance inst;
  inst.id = id;
  inst.split = "train";
  inst.height = h;
  inst.width = w;
  inst.gt_pixel_labels = labels;
  int nseg = 0;
  for (int s : seg_of_pixel) nseg = std::max(nseg, s + 1);
  inst.segments.resize(nseg);
  for (int p = 0; p < h * w; ++p) inst.segments[seg_of_pixel[p]].pixels.push_back(p);
  for (auto& s : inst.segments) {
    s.runs = encode_pixel_set(s.pixels);
    s.area = static_cast<int>(s.pixels.size());
    s.gt_label = majority_label(s.pixels, labels, C);
  }
  inst.seg_parent = seg_parent;
  int nss = 0;
  for (int p : seg_parent) nss = std::max(nss, p + 1);
  inst.supersegments.resize(nss);
  inst.link_hierarchy();
  for (auto& ss : inst.supersegments) {
    std::vector<int> px;
    for (int c : ss.children) px.insert(px.end(), inst.segments[c].pixels.begin(), inst.segments[c].pixels.end());
    std::sort(px.begin(), px.end());
    ss.gt_label = majority_label(px, labels, C);
  }
  return inst;
}

// Random graph over at most max_vars variables with unary and pairwise Custom factors.
inline FactorGraph random_graph(std::mt19937_64& rng, int max_vars, int max_labels, bool tree = false) {
  std::uniform_int_distribution<int> nv(2, max_vars), nl(2, max_labels);
  std::normal_distribution<double> val(0.0, 1.0);
  FactorGraph g;
  const int n = nv(rng);
  for (int i = 0; i < n; ++i) g.add_variable(VariableKind::Segment, nl(rng), i);
  auto table = [&](int size) {
    std::vector<double> t(size);
    for (auto& x : t) x = val(rng);
    return t;
  };
  for (int i = 0; i < n; ++i) g.add_unary(Template::Custom, i, table(g.variables()[i].domain));
  for (int i = 1; i < n; ++i) {
    const int j = std::uniform_int_distribution<int>(0, i - 1)(rng);
    g.add_pairwise(Template::Custom, j, i, table(g.variables()[j].domain * g.variables()[i].domain));
  }
  if (!tree) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    const int extra = std::uniform_int_distribution<int>(1, n)(rng);
    for (int e = 0; e < extra; ++e) {
      const int a = pick(rng), b = pick(rng);
      if (a == b) continue;
      g.add_pairwise(Template::Custom, a, b, table(g.variables()[a].domain * g.variables()[b].domain));
    }
  }
  return g;
}

// Score by direct summation over the factor list, independent of the library scorer.
inline double hand_score(const FactorGraph& g, const std::vector<int>& a) {
  double s = 0.0;
  for (const auto& f : g.factors()) {
    const double w = g.weights()[f.tmpl];
    if (f.arity == 1)
      s += w * f.base[a[f.scope[0]]];
    else
      s += w * f.base[a[f.scope[0]] * g.variables()[f.scope[1]].domain + a[f.scope[1]]];
  }
  return s;
}

// Best score by full enumeration, honouring clamps.
inline double brute_force_best(const FactorGraph& g, std::vector<int>* best_assignment = nullptr) {
  const int n = g.num_variables();
  std::vector<int> a(n, 0);
  for (int i = 0; i < n; ++i)
    if (g.clamps()[i] >= 0) a[i] = g.clamps()[i];
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    const double s = hand_score(g, a);
    if (s > best) {
      best = s;
      if (best_assignment) *best_assignment = a;
    }
    int i = n - 1;
    for (; i >= 0; --i) {
      if (g.clamps()[i] >= 0) continue;
      if (++a[i] < g.variables()[i].domain) break;
      a[i] = 0;
    }
    if (i < 0) break;
  }
  return best;
}

inline GeneratorConfig small_generator(int train, int test, std::uint64_t seed = 7) {
  GeneratorConfig c;
  c.seed = seed;
  c.train = train;
  c.test = test;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("hscrf_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testing
