// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
// usage: acceptance <path to hscrf> <configs dir>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "../support.hpp"
#include "hscrf/harness.hpp"

using namespace hscrf;
using namespace testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double secs(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string pct(double x) { return format_fixed(100.0 * x, 2); }

int failures = 0;

void report(const std::string& id, const Verdict& v, const std::string& summary) {
  std::cout << id << " " << (v.pass ? "PASS" : "FAIL") << "  " << summary;
  if (!v.pass) std::cout << "  [" << v.detail << "]";
  std::cout << std::endl;
  failures += !v.pass;
}

// --- AC1 -------------------------------------------------------------------

void ac1() {
  const auto t0 = Clock::now();
  Verdict v;
  std::mt19937_64 rng(20240601);
  int exact_ok = 0, loopy_ok = 0;
  for (int t = 0; t < 100; ++t) {
    const auto g = random_graph(rng, 10, 4);
    const double best = brute_force_best(g);
    if (std::abs(map_exact(g).score - best) <= 1e-9 * std::max(1.0, std::abs(best))) ++exact_ok;
    if (map_loopy(g).score >= best - 0.02 * std::abs(best)) ++loopy_ok;
  }
  const double s = secs(t0);
  v.require(exact_ok == 100, "exact matched " + std::to_string(exact_ok) + "/100");
  v.require(loopy_ok >= 95, "loopy within 2% on " + std::to_string(loopy_ok) + "/100");
  v.require(s < 10, "took " + format_fixed(s, 2) + " s");
  report("AC1", v,
         "exact " + std::to_string(exact_ok) + "/100, loopy within 2% " + std::to_string(loopy_ok) + "/100, " +
             format_fixed(s, 2) + " s");
}

// --- AC2 -------------------------------------------------------------------

double mi_cells(double pi, double pj, double pij) {
  double cell[4] = {1 - pi - pj + pij, pj - pij, pi - pij, pij};
  double s = 0;
  for (double& x : cell) {
    x = std::max(x, kProbFloor);
    s += x;
  }
  for (double& x : cell) x /= s;
  const double r[2] = {cell[0] + cell[1], cell[2] + cell[3]}, c[2] = {cell[0] + cell[2], cell[1] + cell[3]};
  double mi = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) mi += cell[a * 2 + b] * std::log(cell[a * 2 + b] / (r[a] * c[b]));
  return mi;
}

void ac2() {
  const auto t0 = Clock::now();
  Verdict v;
  std::mt19937_64 rng(515);
  const int C = 5;
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < C; ++a)
    for (int b = a + 1; b < C; ++b) edges.push_back({a, b});
  // Every labeled spanning tree on 5 nodes, as edge bitmasks in ascending order.
  std::vector<int> trees;
  for (int mask = 0; mask < (1 << edges.size()); ++mask) {
    if (__builtin_popcount(mask) != C - 1) continue;
    std::vector<int> parent(C);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    bool ok = true;
    for (size_t e = 0; e < edges.size(); ++e)
      if (mask >> e & 1) {
        const int a = find(edges[e].first), b = find(edges[e].second);
        ok = ok && a != b;
        parent[a] = b;
      }
    if (ok) trees.push_back(mask);
  }
  v.require(trees.size() == 125, "enumerated " + std::to_string(trees.size()) + " trees");
  int match = 0;
  std::uniform_real_distribution<double> u(0.05, 0.95), f(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    // Random presence joint; every tenth one is independent to exercise ties.
    Matrix j(C, std::vector<double>(C));
    for (int a = 0; a < C; ++a) j[a][a] = u(rng);
    for (int a = 0; a < C; ++a)
      for (int b = a + 1; b < C; ++b) {
        const double lo = std::max(0.0, j[a][a] + j[b][b] - 1), hi = std::min(j[a][a], j[b][b]);
        j[a][b] = j[b][a] = t % 10 == 0 ? j[a][a] * j[b][b] : lo + f(rng) * (hi - lo);
      }
    // Best total quantized MI; ties go to the tree whose sorted edge list is
    // lexicographically smallest.
    std::vector<long long> q(edges.size());
    for (size_t e = 0; e < edges.size(); ++e)
      q[e] = std::llround(mi_cells(j[edges[e].first][edges[e].first], j[edges[e].second][edges[e].second],
                                   j[edges[e].first][edges[e].second]) *
                          1e12);
    long long best = std::numeric_limits<long long>::min();
    std::vector<std::pair<int, int>> best_tree;
    for (int mask : trees) {
      long long total = 0;
      std::vector<std::pair<int, int>> tree;
      for (size_t e = 0; e < edges.size(); ++e)
        if (mask >> e & 1) {
          total += q[e];
          tree.push_back(edges[e]);
        }
      if (total > best || (total == best && tree < best_tree)) {
        best = total;
        best_tree = tree;
      }
    }
    auto got = chow_liu_tree(j);
    std::sort(got.begin(), got.end());
    match += got == best_tree;
  }
  const double s = secs(t0);
  v.require(match == 200, "matched " + std::to_string(match) + "/200");
  v.require(s < 5, "took " + format_fixed(s, 2) + " s");
  report("AC2", v, "Chow-Liu equals enumeration on " + std::to_string(match) + "/200 joints, " + format_fixed(s, 2) + " s");
}

// --- AC3 -------------------------------------------------------------------

void ac3() {
  Verdict v;
  std::mt19937_64 rng(33);
  std::bernoulli_distribution coin(0.5);
  auto random_mask = [&](int h, int w) {
    Mask m = Mask::zeros(h, w);
    for (auto& x : m.values) x = coin(rng);
    return m;
  };
  // The three fixed cases.
  Mask gt = random_mask(8, 8);
  gt.values[0] = 1;
  gt.values[1] = 0;
  Mask all = Mask::zeros(8, 8);
  for (auto& x : all.values) x = 1;
  v.require(normalized_mask_accuracy(gt, gt).value == 1.0, "pred = gt");
  v.require(normalized_mask_accuracy(complement(gt), gt).value == 0.0, "pred = complement");
  v.require(normalized_mask_accuracy(all, gt).value == 0.5, "pred = all foreground");

  // Chance level.
  double sum = 0;
  int used = 0;
  while (used < 1000) {
    const Mask g = random_mask(10, 10), p = random_mask(10, 10);
    const auto a = normalized_mask_accuracy(p, g);
    if (a.degenerate) continue;
    sum += a.value;
    ++used;
  }
  const double chance = sum / used;
  v.require(std::abs(chance - 0.5) <= 0.02, "chance accuracy " + format_fixed(chance, 4));

  // Snapping is the best segment-constant mask.
  int snap_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const int h = 6 + static_cast<int>(rng() % 5), w = 6 + static_cast<int>(rng() % 5);
    const int k = 2 + static_cast<int>(rng() % 9);
    std::vector<int> seg_of(h * w);
    for (int p = 0; p < h * w; ++p) seg_of[p] = p < k ? p : static_cast<int>(rng() % k);
    std::vector<Segment> segs(k);
    for (int p = 0; p < h * w; ++p) segs[seg_of[p]].pixels.push_back(p);
    for (auto& s : segs) s.area = static_cast<int>(s.pixels.size());
    Mask g = random_mask(h, w);
    g.box = Box{0, 0, w - 1, h - 1};
    const Mask snapped = snap_mask_to_segments(g, segs, w);
    const double acc = pixel_accuracy(snapped, g);
    bool best = true;
    for (int on = 0; on < (1 << k); ++on) {
      Mask m = Mask::zeros(h, w);
      for (int p = 0; p < h * w; ++p) m.values[p] = on >> seg_of[p] & 1;
      if (pixel_accuracy(m, g) > acc + 1e-12) best = false;
    }
    snap_ok += best;
  }
  v.require(snap_ok == 50, "snap optimal on " + std::to_string(snap_ok) + "/50");
  report("AC3", v, "fixed cases exact, chance " + format_fixed(chance, 4) + ", snap optimal " + std::to_string(snap_ok) + "/50");
}

// --- shared synthetic benchmark ---------------------------------------------

struct Bench {
  fs::path dir;
  Dataset ds;
  ProviderStores stores;
};

ExperimentConfig config(const std::string& name, std::initializer_list<std::pair<Component, Source>> parts) {
  ExperimentConfig c;
  c.name = name;
  for (auto [comp, src] : parts) c.sources[static_cast<int>(comp)] = src;
  return c;
}

// --- AC4 -------------------------------------------------------------------

void ac4(const Bench& b, std::map<std::string, ExperimentResult>& cache) {
  const auto t0 = Clock::now();
  Verdict v;
  v.require(b.ds.test.size() >= 200, "test split too small");
  v.require(b.ds.label_space.num_classes() >= 8, "too few classes");
  auto mixed_nopn = config("mixed-no-pn", {{Component::SupSegUnary, Source::Human}, {Component::Pn, Source::Remove}});
  mixed_nopn.allow_disconnected = true;
  const std::vector<ExperimentConfig> cfgs = {
      config("machine", {}),
      config("human", {{Component::SegUnary, Source::Human}, {Component::SupSegUnary, Source::Human}}),
      config("mixed", {{Component::SupSegUnary, Source::Human}}),
      mixed_nopn,
  };
  for (const auto& c : cfgs) cache[c.name] = run_experiment(c, b.ds, b.stores);
  const double s = secs(t0);
  const double m = cache["machine"].row.avg_recall, h = cache["human"].row.avg_recall;
  const double x = cache["mixed"].row.avg_recall, n = cache["mixed-no-pn"].row.avg_recall;
  v.require(x - m >= 0.02, "mixed vs machine " + pct(x - m));
  v.require(x - h >= 0.02, "mixed vs human " + pct(x - h));
  v.require(x - n >= 0.02, "P^n removal costs " + pct(x - n));
  v.require(s < 180, "took " + format_fixed(s, 1) + " s");
  report("AC4", v,
         "avg recall machine " + pct(m) + ", human " + pct(h) + ", mixed " + pct(x) + ", mixed without P^n " + pct(n) +
             ", " + format_fixed(s, 1) + " s");
}

// --- AC5 -------------------------------------------------------------------

void ac5(const Bench& b) {
  Verdict v;
  const int C = b.ds.label_space.num_classes();
  const auto& gen = b.stores;
  GeneratorConfig gc;
  const auto ctx = contextual_channel(C, synthetic_adjacency(), gc.machine_strength);
  ConfusionMatrix machine(C), human(C), redraw(C);
  std::vector<int> pa, pb, gt;
  std::vector<double> w;
  std::mt19937_64 rng(4242);
  for (const auto& inst : b.ds.test) {
    const auto& mt = gen.machine.at(inst.id).seg_unary;
    std::vector<int> lm, lh, lr;
    const auto fresh = draw_channel(inst, ctx, rng);
    for (size_t i = 0; i < inst.segments.size(); ++i) {
      lm.push_back(argmax(mt[i]));
      const auto& votes = gen.human.votes.at(inst.id).at("segment").at(static_cast<int>(i));
      lh.push_back(argmax(votes));
      lr.push_back(argmax(fresh.seg[i]));
      int n = 0;
      for (int p : inst.segments[i].pixels) n += inst.gt_pixel_labels[p] >= 0;
      gt.push_back(inst.segments[i].gt_label);
      w.push_back(n);
    }
    machine += segment_confusion(inst, lm, C);
    human += segment_confusion(inst, lh, C);
    redraw += segment_confusion(inst, lr, C);
    pa.insert(pa.end(), lm.begin(), lm.end());
    pb.insert(pb.end(), lh.begin(), lh.end());
  }
  const double across = symmetric_kl_rows(machine, human);
  const double within = symmetric_kl_rows(machine, redraw);
  const double acc_a = weighted_accuracy(pa, gt, w), acc_b = weighted_accuracy(pb, gt, w);
  const double oracle = oracle_combination(pa, pb, gt, w);
  v.require(across >= 3 * within, "KL ratio " + format_fixed(across / within, 2));
  v.require(oracle > acc_a && oracle > acc_b, "oracle does not beat both");
  report("AC5", v,
         "KL contextual/visual " + format_fixed(across, 2) + " vs contextual redraw " + format_fixed(within, 2) +
             " (x" + format_fixed(across / within, 1) + "), oracle " + pct(oracle) + " vs " + pct(acc_a) + " / " +
             pct(acc_b));
}

// --- AC6 -------------------------------------------------------------------

void ac6(const Bench& b) {
  Verdict v;
  std::vector<ExperimentConfig> steps;
  ExperimentConfig c = config("machine", {});
  steps.push_back(c);
  c.name = "+gt detection";
  c.sources[static_cast<int>(Component::Detection)] = Source::GT;
  steps.push_back(c);
  c.name = "+gt presence";
  c.sources[static_cast<int>(Component::ClassUnary)] = Source::GT;
  steps.push_back(c);
  c.name = "+gt shape";
  c.sources[static_cast<int>(Component::Shape)] = Source::GT;
  steps.push_back(c);
  c.name = "gt segments";
  c.sources[static_cast<int>(Component::SegUnary)] = Source::GT;
  c.sources[static_cast<int>(Component::SupSegUnary)] = Source::GT;
  steps.push_back(c);
  const auto res = journey(steps, b.ds, b.stores);
  std::string ladder;
  for (size_t i = 0; i < res.size(); ++i) {
    ladder += (i ? " -> " : "") + pct(res[i].row.avg_recall);
    if (i > 0 && res[i].row.avg_recall < res[i - 1].row.avg_recall - 0.005)
      v.require(false, "step " + std::to_string(i) + " drops");
  }
  const double bound = snap_upper_bound(b.ds.test, b.ds.label_space.num_classes());
  const double last = res.back().row.avg_recall;
  v.require(std::abs(last - bound) <= 0.005, "final " + pct(last) + " vs bound " + pct(bound));
  report("AC6", v, "ladder " + ladder + ", snap bound " + pct(bound));
}

// --- AC7 -------------------------------------------------------------------

void ac7(const Bench& b, std::map<std::string, ExperimentResult>& cache) {
  Verdict v;
  auto ones = config("mixed-ones", {{Component::SupSegUnary, Source::Human}});
  ones.learn = false;
  const auto r = run_experiment(ones, b.ds, b.stores);
  const double learned = cache.at("mixed").row.avg_recall;
  v.require(learned - r.row.avg_recall >= 0.01, "learned gain " + pct(learned - r.row.avg_recall));

  // Scaling every weight by the same factor leaves MAP unchanged.
  const WeightVector w = cache.at("mixed").weights;
  int same = 0;
  for (int i = 0; i < 20; ++i) {
    const auto& inst = b.ds.test[i];
    const auto bundle = assemble_bundle(inst, ones.sources, b.stores);
    auto bg = build_graph(inst, b.ds.label_space, bundle, w);
    bg.graph.set_weights(w);
    const auto base = map_loopy(bg.graph).labels;
    bool all = true;
    for (double k : {0.5, 4.0}) {
      WeightVector s = w;
      for (auto& x : s.w) x *= k;
      bg.graph.set_weights(s);
      LoopyOptions o;
      o.tol *= k;
      all = all && map_loopy(bg.graph, o).labels == base;
    }
    same += all;
  }
  v.require(same == 20, "scale invariant on " + std::to_string(same) + "/20");
  report("AC7", v,
         "learned " + pct(learned) + " vs all-ones " + pct(r.row.avg_recall) + ", scale invariant on " +
             std::to_string(same) + "/20 graphs");
}

// --- AC8 / AC9 ---------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" --quiet " + args;
  return std::system(cmd.c_str());
}

// One full CLI pass; returns false when some command fails.
bool cli_pass(const std::string& cli, const fs::path& configs, const fs::path& root, std::string* err) {
  const std::string data = "\"" + (root / "data").string() + "\"";
  const auto out = [&](const char* sub) { return "\"" + (root / "out" / sub).string() + "\""; };
  const auto cfg = [&](const char* f) { return "\"" + (configs / f).string() + "\""; };
  const std::vector<std::string> cmds = {
      "gen --config " + cfg("gen.toml") + " --out " + data,
      "ablate --grid " + cfg("ablation.toml") + " --data " + data + " --out " + out("ablation"),
      "journey --seq " + cfg("journey.toml") + " --data " + data + " --out " + out("journey"),
      "shapes --data " + data + " --out " + out("shapes"),
      "run --config " + cfg("machine.toml") + " --data " + data + " --out " + out("run"),
      "eval --pred \"" + (root / "out" / "run" / "predictions.json").string() + "\" --gt " + data + " --out " +
          out("eval"),
  };
  for (const auto& c : cmds)
    if (run_cli(cli, "--seed 7 " + c) != 0) {
      *err = "command failed: " + c;
      return false;
    }
  return true;
}

void ac8_ac9(const std::string& cli, const fs::path& configs) {
  TempDir a("accA"), b("accB");
  Verdict v8, v9;
  std::string err;
  const auto t0 = Clock::now();
  const bool ok_a = cli_pass(cli, configs, a.path, &err);
  const double first = secs(t0);
  v8.require(ok_a, err);
  v9.require(ok_a, err);
  v9.require(first < 300, "took " + format_fixed(first, 1) + " s");
  const bool ok_b = ok_a && cli_pass(cli, configs, b.path, &err);
  v8.require(ok_b, err);
  int compared = 0;
  if (ok_a && ok_b) {
    for (const auto& e : fs::recursive_directory_iterator(a.path)) {
      if (!e.is_regular_file()) continue;
      const auto ext = e.path().extension();
      if (ext != ".csv" && ext != ".svg" && ext != ".json") continue;
      const auto rel = fs::relative(e.path(), a.path);
      ++compared;
      if (!fs::exists(b.path / rel) || slurp(e.path()) != slurp(b.path / rel)) v8.require(false, rel.string() + " differs");
    }
    v8.require(compared > 0, "no outputs");
  }
  report("AC8", v8, std::to_string(compared) + " output files byte-identical across reruns");
  report("AC9", v9, "gen + 8-config ablation + journey + shapes + run + eval in " + format_fixed(first, 1) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <hscrf> <configs dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path configs = argv[2];
  try {
    ac1();
    ac2();
    ac3();

    TempDir tmp("bench");
    Bench b;
    b.dir = tmp.path;
    GeneratorConfig gc;
    write_generated(generate_dataset(gc), b.dir);
    b.ds = load_dataset(b.dir);
    b.stores = load_stores(b.dir, b.ds, 0);
    std::map<std::string, ExperimentResult> cache;
    ac4(b, cache);
    ac5(b);
    ac6(b);
    ac7(b, cache);
    ac8_ac9(cli, configs);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
