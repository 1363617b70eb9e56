#include "hscrf/synth_gen.hpp"

#include <deque>
#include <set>

namespace hscrf {

using nlohmann::json;
namespace fs = std::filesystem;

GeneratorConfig generator_config_from_json(const nlohmann::json& j, GeneratorConfig c, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + ": expected a table");
  const std::map<std::string, int*> ints = {
      {"height", &c.height},         {"width", &c.width},         {"train", &c.train},
      {"test", &c.test},             {"ss_rows", &c.ss_rows},     {"ss_cols", &c.ss_cols},
      {"seg_split", &c.seg_split},   {"object_min", &c.object_min}, {"object_max", &c.object_max},
      {"subjects", &c.subjects},     {"components", &c.components}, {"min_box_pixels", &c.min_box_pixels}};
  const std::map<std::string, double*> reals = {
      {"potts_beta", &c.potts_beta},
      {"void_rate", &c.void_rate},
      {"machine_strength", &c.machine_strength},
      {"human_strength", &c.human_strength},
      {"machine_scene_flip", &c.machine_scene_flip},
      {"human_scene_flip", &c.human_scene_flip},
      {"tp_rate", &c.tp_rate},
      {"fp_rate", &c.fp_rate},
      {"tp_score_mean", &c.tp_score_mean},
      {"fp_score_mean", &c.fp_score_mean},
      {"score_sigma", &c.score_sigma},
      {"edge_dropout", &c.edge_dropout},
      {"edge_noise", &c.edge_noise}};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "seed") {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw UsageError(where + ": 'seed' must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (auto i = ints.find(k); i != ints.end()) {
      if (!v.is_number_integer()) throw UsageError(where + ": '" + k + "' must be an integer");
      *i->second = v.get<int>();
    } else if (auto r = reals.find(k); r != reals.end()) {
      if (!v.is_number()) throw UsageError(where + ": '" + k + "' must be a number");
      *r->second = v.get<double>();
    } else {
      throw UsageError(where + ": unknown key '" + k + "'");
    }
  }
  validate_generator_config(c);
  return c;
}

namespace {

constexpr double kJitterConcentration = 50.0;

std::mt19937_64 stream(std::uint64_t seed, const std::string& tag) { return std::mt19937_64(fnv1a(tag, seed)); }

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

int draw_from(const std::vector<double>& weights, std::mt19937_64& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
    if (weights[i] <= 0) continue;
    r -= weights[i];
    if (r < 0) return i;
  }
  for (int i = static_cast<int>(weights.size()) - 1; i >= 0; --i)
    if (weights[i] > 0) return i;
  return 0;
}

}  // namespace

ConfusionChannel contextual_channel(int C, const std::vector<std::pair<int, int>>& adjacency, double strength) {
  ConfusionChannel ch{ChannelKind::Contextual, strength, Matrix(C, std::vector<double>(C, 0.0))};
  for (auto [a, b] : adjacency) {
    ch.row.at(a).at(b) = 1.0;
    ch.row.at(b).at(a) = 1.0;
  }
  for (int c = 0; c < C; ++c) {
    auto& r = ch.row[c];
    double s = 0.0;
    for (double x : r) s += x;
    if (s <= 0) throw UsageError("confusion channel: class " + std::to_string(c) + " has nothing to be confused with");
    for (double& x : r) x /= s;
  }
  return ch;
}

ConfusionChannel visual_channel(int C, const std::vector<std::vector<int>>& groups, double strength) {
  std::vector<std::pair<int, int>> pairs;
  for (const auto& g : groups)
    for (size_t i = 0; i < g.size(); ++i)
      for (size_t j = i + 1; j < g.size(); ++j) pairs.push_back({g[i], g[j]});
  ConfusionChannel ch = contextual_channel(C, pairs, strength);
  ch.kind = ChannelKind::Visual;
  return ch;
}

ConfusionChannel uniform_channel(int C, double strength) {
  ConfusionChannel ch{ChannelKind::Contextual, strength, Matrix(C, std::vector<double>(C, 0.0))};
  for (int a = 0; a < C; ++a)
    for (int b = 0; b < C; ++b)
      if (a != b) ch.row[a][b] = 1.0 / (C - 1);
  return ch;
}

std::vector<double> apply_channel(int gt, const ConfusionChannel& ch, std::mt19937_64& rng) {
  const int C = ch.num_classes();
  if (gt < 0 || gt >= C) return std::vector<double>(C, 1.0 / C);
  std::vector<double> base(C);
  for (int c = 0; c < C; ++c) base[c] = ch.strength * ch.row[gt][c] + (c == gt ? 1.0 - ch.strength : 0.0);
  std::vector<double> out(C, 0.0);
  double total = 0.0;
  int support = 0;
  for (int c = 0; c < C; ++c) support += base[c] > 0;
  if (support <= 1) return base;
  for (int c = 0; c < C; ++c) {
    if (base[c] <= 0) continue;
    out[c] = std::gamma_distribution<double>(kJitterConcentration * base[c], 1.0)(rng);
    total += out[c];
  }
  if (total <= 0) return base;
  for (double& x : out) x /= total;
  return out;
}

Matrix expected_channel_matrix(const ConfusionChannel& ch) {
  const int C = ch.num_classes();
  Matrix m(C, std::vector<double>(C));
  for (int a = 0; a < C; ++a)
    for (int b = 0; b < C; ++b) m[a][b] = ch.strength * ch.row[a][b] + (a == b ? 1.0 - ch.strength : 0.0);
  return m;
}

std::vector<int> synth_votes(const std::vector<double>& dist, int n_subjects, std::mt19937_64& rng) {
  std::vector<int> counts(dist.size(), 0);
  for (int i = 0; i < n_subjects; ++i) ++counts[draw_from(dist, rng)];
  return counts;
}

namespace {

// Misreads one label: with probability `strength` the jittered row has its
// true and confuser entries swapped.
std::vector<double> misread(int gt, int confuser, bool flipped, const ConfusionChannel& ch, std::mt19937_64& rng) {
  auto d = apply_channel(gt, ch, rng);
  if (flipped && gt >= 0 && confuser >= 0) std::swap(d[gt], d[confuser]);
  return d;
}

std::vector<double> draw_label(int gt, const ConfusionChannel& ch, std::mt19937_64& rng) {
  const bool flipped = coin(rng, ch.strength);
  const int confuser = flipped && gt >= 0 ? draw_from(ch.row[gt], rng) : -1;
  return misread(gt, confuser, flipped, ch, rng);
}

}  // namespace

ChannelDraw draw_channel(const SceneInstance& inst, const ConfusionChannel& ch, std::mt19937_64& rng) {
  ChannelDraw out;
  out.seg.resize(inst.segments.size());
  out.supseg.resize(inst.supersegments.size());
  for (size_t j = 0; j < inst.supersegments.size(); ++j) {
    const bool flipped = coin(rng, ch.strength);
    std::map<int, int> confuser;
    auto confuser_for = [&](int g) {
      if (!flipped || g < 0) return -1;
      auto it = confuser.find(g);
      if (it != confuser.end()) return it->second;
      const int c = draw_from(ch.row[g], rng);
      confuser[g] = c;
      return c;
    };
    const int g = inst.supersegments[j].gt_label;
    out.supseg[j] = misread(g, confuser_for(g), flipped, ch, rng);
    for (int i : inst.supersegments[j].children) {
      const int gi = inst.segments[i].gt_label;
      out.seg[i] = misread(gi, confuser_for(gi), flipped, ch, rng);
    }
  }
  return out;
}

LabelSpace synthetic_label_space() {
  LabelSpace ls;
  ls.classes = {"grass", "sky", "road", "water", "cow", "car", "bird", "boat"};
  ls.scene_types = {"field", "city", "coast"};
  ls.is_thing = {false, false, false, false, true, true, true, true};
  ls.detector_classes = {4, 5, 6, 7};
  return ls;
}

std::vector<std::pair<int, int>> synthetic_adjacency() { return {{0, 4}, {2, 5}, {1, 6}, {3, 7}, {0, 1}, {2, 3}}; }

std::vector<std::vector<int>> synthetic_visual_groups() { return {{4, 6}, {5, 7}, {1, 3}, {0, 2}}; }

Matrix synthetic_scene_presence() {
  return {
      {0.95, 0.70, 0.20, 0.10, 0.70, 0.15, 0.40, 0.05},
      {0.20, 0.70, 0.95, 0.10, 0.05, 0.75, 0.20, 0.05},
      {0.15, 0.75, 0.15, 0.95, 0.05, 0.10, 0.45, 0.70},
  };
}

void validate_generator_config(const GeneratorConfig& c) {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string(name) + " must be in [0, 1]");
  };
  prob(c.void_rate, "void_rate");
  prob(c.machine_strength, "machine_strength");
  prob(c.human_strength, "human_strength");
  prob(c.machine_scene_flip, "machine_scene_flip");
  prob(c.human_scene_flip, "human_scene_flip");
  prob(c.tp_rate, "tp_rate");
  prob(c.edge_dropout, "edge_dropout");
  prob(c.edge_noise, "edge_noise");
  if (c.fp_rate < 0) throw UsageError("fp_rate must be >= 0");
  if (c.train < 1 || c.test < 1) throw UsageError("train and test must be >= 1");
  if (c.ss_rows < 1 || c.ss_cols < 1 || c.seg_split < 1) throw UsageError("tiling counts must be >= 1");
  if (c.height < c.ss_rows * c.seg_split * 2 || c.width < c.ss_cols * c.seg_split * 2)
    throw UsageError("grid too small for the requested tiling");
  if (c.object_min < 3 || c.object_max < c.object_min) throw UsageError("object size range invalid");
  if (c.object_max + 4 > std::min(c.height, c.width)) throw UsageError("objects do not fit the grid");
  if (c.subjects < 1) throw UsageError("subjects must be >= 1");
  if (c.components < 1) throw UsageError("components must be >= 1");
  if (c.score_sigma < 0) throw UsageError("score_sigma must be >= 0");
}

namespace {

std::vector<int> cut_positions(int n, int parts, std::mt19937_64& rng) {
  std::vector<int> b(parts + 1);
  b[0] = 0;
  b[parts] = n;
  const int step = n / parts, jitter = step / 4;
  for (int k = 1; k < parts; ++k) b[k] = k * n / parts + (jitter > 0 ? uniform_int(rng, -jitter, jitter) : 0);
  for (int k = 1; k < parts; ++k) b[k] = std::clamp(b[k], b[k - 1] + 1, n - (parts - k));
  return b;
}

struct Object {
  int class_id = 0;
  int component = 0;
  std::vector<int> truth;  // flat pixels of the object
};

struct RawInstance {
  SceneInstance inst;
  std::vector<Object> objects;
  std::vector<int> box_object;  // per GT box, index into objects
};

bool inside_shape(int component, double dx, double dy, double a, double b) {
  if (component % 3 == 2) return std::abs(dx) / a + std::abs(dy) / b <= 1.0;
  return (dx * dx) / (a * a) + (dy * dy) / (b * b) <= 1.0;
}

RawInstance make_instance(const GeneratorConfig& cfg, const LabelSpace& ls, const Matrix& presence_p,
                          const std::string& id, const std::string& split) {
  auto rng = stream(cfg.seed, id + "/layout");
  const int H = cfg.height, W = cfg.width, C = ls.num_classes();
  RawInstance raw;
  SceneInstance& inst = raw.inst;
  inst.id = id;
  inst.split = split;
  inst.height = H;
  inst.width = W;
  inst.gt_scene = uniform_int(rng, 0, ls.num_scenes() - 1);

  std::vector<int> present(C, 0);
  for (int k = 0; k < C; ++k) present[k] = coin(rng, presence_p[inst.gt_scene][k]);
  std::vector<int> stuff;
  for (int k = 0; k < C; ++k)
    if (!ls.is_thing[k] && present[k]) stuff.push_back(k);
  if (stuff.empty()) {
    int best = -1;
    for (int k = 0; k < C; ++k)
      if (!ls.is_thing[k] && (best < 0 || presence_p[inst.gt_scene][k] > presence_p[inst.gt_scene][best])) best = k;
    stuff.push_back(best);
  }

  // Super-segment rectangles with Potts-smoothed stuff labels.
  const auto rows = cut_positions(H, cfg.ss_rows, rng);
  const auto cols = cut_positions(W, cfg.ss_cols, rng);
  const int R = cfg.ss_rows, Q = cfg.ss_cols;
  std::vector<int> ss_label(R * Q);
  for (int& l : ss_label) l = stuff[uniform_int(rng, 0, static_cast<int>(stuff.size()) - 1)];
  for (int sweep = 0; sweep < 5; ++sweep)
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < Q; ++c) {
        std::vector<double> wts(stuff.size());
        for (size_t s = 0; s < stuff.size(); ++s) {
          int same = 0;
          if (r > 0) same += ss_label[(r - 1) * Q + c] == stuff[s];
          if (r + 1 < R) same += ss_label[(r + 1) * Q + c] == stuff[s];
          if (c > 0) same += ss_label[r * Q + c - 1] == stuff[s];
          if (c + 1 < Q) same += ss_label[r * Q + c + 1] == stuff[s];
          wts[s] = std::exp(cfg.potts_beta * same);
        }
        ss_label[r * Q + c] = stuff[draw_from(wts, rng)];
      }

  std::vector<int> label(H * W), seg_of(H * W);
  std::vector<int> parent;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < Q; ++c) {
      const int ss = r * Q + c;
      const int h = rows[r + 1] - rows[r], w = cols[c + 1] - cols[c];
      const auto sr = cut_positions(h, std::min(cfg.seg_split, h), rng);
      const auto sc = cut_positions(w, std::min(cfg.seg_split, w), rng);
      for (size_t a = 0; a + 1 < sr.size(); ++a)
        for (size_t b = 0; b + 1 < sc.size(); ++b) {
          const int seg = static_cast<int>(parent.size());
          parent.push_back(ss);
          for (int y = rows[r] + sr[a]; y < rows[r] + sr[a + 1]; ++y)
            for (int x = cols[c] + sc[b]; x < cols[c] + sc[b + 1]; ++x) {
              label[y * W + x] = ss_label[ss];
              seg_of[y * W + x] = seg;
            }
        }
    }
  int num_ss = R * Q;

  // Thing objects, placed on their contextual partner where possible.
  const auto adjacency = synthetic_adjacency();
  std::vector<std::array<int, 4>> taken;  // x0, y0, x1, y1 with margin
  for (int k = 0; k < C; ++k) {
    if (!ls.is_thing[k] || !present[k]) continue;
    const int comp = uniform_int(rng, 0, cfg.components - 1);
    const double d = uniform_int(rng, cfg.object_min, cfg.object_max);
    const double a = comp % 3 == 1 ? d / 3.2 : d / 2.0;
    const double b = comp % 3 == 0 ? d / 3.2 : d / 2.0;
    std::vector<int> partner_ss;
    for (auto [p, q] : adjacency) {
      const int partner = p == k ? q : (q == k ? p : -1);
      if (partner < 0 || ls.is_thing[partner]) continue;
      for (int s = 0; s < R * Q; ++s)
        if (ss_label[s] == partner) partner_ss.push_back(s);
    }
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      double cx, cy;
      if (!partner_ss.empty() && attempt < 10) {
        const int s = partner_ss[uniform_int(rng, 0, static_cast<int>(partner_ss.size()) - 1)];
        cx = uniform_int(rng, cols[s % Q], cols[s % Q + 1] - 1);
        cy = uniform_int(rng, rows[s / Q], rows[s / Q + 1] - 1);
      } else {
        cx = uniform_int(rng, 0, W - 1);
        cy = uniform_int(rng, 0, H - 1);
      }
      cx = std::clamp(cx, std::ceil(a) + 1, W - 2 - std::ceil(a));
      cy = std::clamp(cy, std::ceil(b) + 1, H - 2 - std::ceil(b));
      const std::array<int, 4> rect{static_cast<int>(cx - a) - 3, static_cast<int>(cy - b) - 3,
                                    static_cast<int>(cx + a) + 3, static_cast<int>(cy + b) + 3};
      bool clash = false;
      for (const auto& t : taken)
        if (!(rect[2] < t[0] || t[2] < rect[0] || rect[3] < t[1] || t[3] < rect[1])) clash = true;
      if (clash) continue;
      Object obj{k, comp, {}};
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          if (inside_shape(comp, x - cx, y - cy, a, b)) obj.truth.push_back(y * W + x);
      if (static_cast<int>(obj.truth.size()) < cfg.min_box_pixels) continue;
      taken.push_back(rect);
      placed = true;

      // Segments follow a one-pixel perturbation of the true outline.
      std::vector<char> in_truth(H * W, 0), in_seg(H * W, 0);
      for (int p : obj.truth) in_truth[p] = in_seg[p] = 1;
      auto on = [&](int x, int y) { return x >= 0 && y >= 0 && x < W && y < H && in_truth[y * W + x]; };
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int n_on = on(x - 1, y) + on(x + 1, y) + on(x, y - 1) + on(x, y + 1);
          if (in_truth[y * W + x] && n_on < 4 && coin(rng, 0.3)) in_seg[y * W + x] = 0;
          if (!in_truth[y * W + x] && n_on > 0 && coin(rng, 0.3)) in_seg[y * W + x] = 1;
        }
      for (int p : obj.truth) label[p] = k;
      const int ss = num_ss++;
      std::map<int, int> quadrant_seg;
      for (int p = 0; p < H * W; ++p) {
        if (!in_seg[p]) continue;
        const int qd = (p % W >= cx ? 1 : 0) + (p / W >= cy ? 2 : 0);
        auto it = quadrant_seg.find(qd);
        if (it == quadrant_seg.end()) {
          it = quadrant_seg.emplace(qd, static_cast<int>(parent.size())).first;
          parent.push_back(ss);
        }
        seg_of[p] = it->second;
      }
      raw.objects.push_back(std::move(obj));
    }
  }

  // Void strip along a super-segment cut, on stuff pixels only.
  if (coin(rng, cfg.void_rate) && (R > 1 || Q > 1)) {
    const bool horizontal = R > 1 && (Q == 1 || coin(rng, 0.5));
    const int line = horizontal ? rows[uniform_int(rng, 1, R - 1)] : cols[uniform_int(rng, 1, Q - 1)];
    const int extent = horizontal ? W : H;
    const int len = uniform_int(rng, std::min(5, extent), std::min(15, extent));
    const int start = uniform_int(rng, 0, extent - len);
    for (int t = start; t < start + len; ++t) {
      const int p = horizontal ? line * W + t : t * W + line;
      if (label[p] >= 0 && !ls.is_thing[label[p]]) label[p] = kVoid;
    }
  }

  // Compact segment and super-segment ids.
  std::vector<std::vector<int>> seg_pixels(parent.size());
  for (int p = 0; p < H * W; ++p) seg_pixels[seg_of[p]].push_back(p);
  std::vector<int> ss_map(num_ss, -1);
  int next_ss = 0;
  for (size_t s = 0; s < parent.size(); ++s) {
    if (seg_pixels[s].empty()) continue;
    if (ss_map[parent[s]] < 0) ss_map[parent[s]] = next_ss++;
  }
  inst.gt_pixel_labels = label;
  inst.supersegments.assign(next_ss, {});
  for (size_t s = 0; s < parent.size(); ++s) {
    if (seg_pixels[s].empty()) continue;
    Segment seg;
    seg.pixels = seg_pixels[s];
    seg.runs = encode_pixel_set(seg.pixels);
    seg.area = static_cast<int>(seg.pixels.size());
    seg.gt_label = majority_label(seg.pixels, label, C);
    inst.segments.push_back(std::move(seg));
    inst.seg_parent.push_back(ss_map[parent[s]]);
  }
  inst.link_hierarchy();
  for (auto& ss : inst.supersegments) {
    std::vector<int> px;
    for (int i : ss.children) px.insert(px.end(), inst.segments[i].pixels.begin(), inst.segments[i].pixels.end());
    ss.gt_label = majority_label(px, label, C);
  }

  // GT boxes from connected components of thing labels.
  std::vector<int> obj_of(H * W, -1);
  for (size_t o = 0; o < raw.objects.size(); ++o)
    for (int p : raw.objects[o].truth) obj_of[p] = static_cast<int>(o);
  std::vector<char> seen(H * W, 0);
  for (int p0 = 0; p0 < H * W; ++p0) {
    const int k = label[p0];
    if (seen[p0] || k < 0 || !ls.is_thing[k]) continue;
    std::deque<int> q{p0};
    seen[p0] = 1;
    Box box{W, H, -1, -1};
    int n = 0;
    while (!q.empty()) {
      const int p = q.front();
      q.pop_front();
      ++n;
      const int x = p % W, y = p / W;
      box = {std::min(box.x0, x), std::min(box.y0, y), std::max(box.x1, x), std::max(box.y1, y)};
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& v : nb) {
        if (v[0] < 0 || v[1] < 0 || v[0] >= W || v[1] >= H) continue;
        const int np = v[1] * W + v[0];
        if (!seen[np] && label[np] == k) {
          seen[np] = 1;
          q.push_back(np);
        }
      }
    }
    if (n < cfg.min_box_pixels || !box.valid()) continue;
    inst.gt_boxes.push_back({k, box});
    raw.box_object.push_back(obj_of[p0]);
  }

  // Detector output: jittered true boxes plus false positives.
  auto drng = stream(cfg.seed, id + "/detector");
  std::normal_distribution<double> tp_score(cfg.tp_score_mean, cfg.score_sigma), fp_score(cfg.fp_score_mean, cfg.score_sigma);
  for (size_t b = 0; b < inst.gt_boxes.size(); ++b) {
    if (!coin(drng, cfg.tp_rate)) continue;
    const Box& g = inst.gt_boxes[b].box;
    Box j{g.x0 + uniform_int(drng, -1, 1), g.y0 + uniform_int(drng, -1, 1), g.x1 + uniform_int(drng, -1, 1),
          g.y1 + uniform_int(drng, -1, 1)};
    j = {std::max(0, j.x0), std::max(0, j.y0), std::min(W - 1, j.x1), std::min(H - 1, j.y1)};
    if (!j.valid()) j = g;
    const int comp = raw.box_object[b] >= 0 ? raw.objects[raw.box_object[b]].component : 0;
    inst.detections.push_back({inst.gt_boxes[b].class_id, tp_score(drng), j, comp});
  }
  const int n_fp = std::poisson_distribution<int>(cfg.fp_rate)(drng);
  for (int f = 0; f < n_fp; ++f) {
    const int cls = ls.detector_classes[uniform_int(drng, 0, static_cast<int>(ls.detector_classes.size()) - 1)];
    const int bw = uniform_int(drng, 6, 14), bh = uniform_int(drng, 6, 14);
    const int x0 = uniform_int(drng, 0, W - bw), y0 = uniform_int(drng, 0, H - bh);
    inst.detections.push_back({cls, fp_score(drng), {x0, y0, x0 + bw - 1, y0 + bh - 1},
                               uniform_int(drng, 0, cfg.components - 1)});
  }
  return raw;
}

Mask edge_map(const SceneInstance& inst, double dropout, double noise, std::mt19937_64& rng) {
  const int H = inst.height, W = inst.width;
  Mask m = Mask::zeros(H, W);
  const auto& L = inst.gt_pixel_labels;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int l = L[y * W + x];
      const bool edge = (x + 1 < W && L[y * W + x + 1] != l) || (y + 1 < H && L[(y + 1) * W + x] != l) ||
                        (x > 0 && L[y * W + x - 1] != l) || (y > 0 && L[(y - 1) * W + x] != l);
      bool on = edge && !coin(rng, dropout);
      if (coin(rng, noise)) on = !on;
      m.at(y, x) = on ? 1.0 : 0.0;
    }
  return m;
}

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (const auto& r : m) a.push_back(r);
  return a;
}

Matrix argmax_confusion(const std::vector<const SceneInstance*>& insts, const std::vector<const Matrix*>& tables,
                        bool supersegments, int C) {
  Matrix cm(C, std::vector<double>(C, 0.0));
  for (size_t n = 0; n < insts.size(); ++n) {
    const auto& inst = *insts[n];
    const Matrix& t = *tables[n];
    for (size_t i = 0; i < t.size(); ++i) {
      const int g = supersegments ? inst.supersegments[i].gt_label : inst.segments[i].gt_label;
      if (g >= 0) cm[g][argmax(t[i])] += 1.0;
    }
  }
  return cm;
}

json mask_json(const Mask& m, const std::string& cls, int component, const std::string& source) {
  std::vector<int> grid(m.values.size());
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = m.values[i] >= 0.5 ? 1 : 0;
  return {{"class", cls},           {"component", component}, {"height", m.height},
          {"width", m.width},       {"runs", runs_to_json(encode_runs(grid, 0))},
          {"source", source}};
}

}  // namespace

GeneratedData generate_dataset(const GeneratorConfig& cfg, int jobs) {
  validate_generator_config(cfg);
  const LabelSpace ls = synthetic_label_space();
  const int C = ls.num_classes(), S = ls.num_scenes();
  const Matrix presence = synthetic_scene_presence();
  const auto machine_ch = contextual_channel(C, synthetic_adjacency(), cfg.machine_strength);
  const auto human_ch = visual_channel(C, synthetic_visual_groups(), cfg.human_strength);
  const auto machine_scene = uniform_channel(S, cfg.machine_scene_flip);
  const auto human_scene = uniform_channel(S, cfg.human_scene_flip);

  const int n = cfg.train + cfg.test;
  std::vector<std::string> ids(n);
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04d", i < cfg.train ? "train" : "test", i < cfg.train ? i : i - cfg.train);
    ids[i] = buf;
  }

  struct Slot {
    RawInstance raw;
    MachineTables machine;
    Matrix human_seg, human_ss;  // vote-normalized, for the report
    std::vector<VoteRecord> votes;
    Mask edges;
  };
  std::vector<Slot> slots(n);
  parallel_for(n, jobs, [&](int i) {
    Slot& s = slots[i];
    s.raw = make_instance(cfg, ls, presence, ids[i], i < cfg.train ? "train" : "test");
    const SceneInstance& inst = s.raw.inst;
    auto mrng = stream(cfg.seed, ids[i] + "/machine");
    auto md = draw_channel(inst, machine_ch, mrng);
    s.machine = {std::move(md.seg), std::move(md.supseg), draw_label(inst.gt_scene, machine_scene, mrng)};
    auto hrng = stream(cfg.seed, ids[i] + "/human");
    const auto hd = draw_channel(inst, human_ch, hrng);
    for (size_t k = 0; k < hd.seg.size(); ++k) {
      auto counts = synth_votes(hd.seg[k], cfg.subjects, hrng);
      s.human_seg.push_back(human_unary_from_votes(counts, 0, 1));
      s.votes.push_back({ids[i], "segment", static_cast<int>(k), std::move(counts)});
    }
    for (size_t k = 0; k < hd.supseg.size(); ++k) {
      auto counts = synth_votes(hd.supseg[k], cfg.subjects, hrng);
      s.human_ss.push_back(human_unary_from_votes(counts, 0, 1));
      s.votes.push_back({ids[i], "supersegment", static_cast<int>(k), std::move(counts)});
    }
    s.votes.push_back({ids[i], "scene", 0, synth_votes(draw_label(inst.gt_scene, human_scene, hrng), cfg.subjects, hrng)});
    auto erng = stream(cfg.seed, ids[i] + "/edges");
    s.edges = edge_map(inst, cfg.edge_dropout, cfg.edge_noise, erng);
  });

  GeneratedData out;
  out.dataset.label_space = ls;
  for (int i = 0; i < n; ++i) {
    Slot& s = slots[i];
    const auto& inst = s.raw.inst;
    if (i < cfg.train)
      for (size_t b = 0; b < inst.gt_boxes.size(); ++b) {
        const auto& g = inst.gt_boxes[b];
        const int comp = s.raw.box_object[b] >= 0 ? s.raw.objects[s.raw.box_object[b]].component : 0;
        out.masks[g.class_id].push_back({gt_object_mask(inst, g.class_id, g.box), comp, inst.id});
      }
    out.machine[inst.id] = s.machine;
    out.edges[inst.id] = s.edges;
    for (auto& v : s.votes) out.votes.push_back(std::move(v));
  }

  // Pairwise preference answers simulated from training statistics.
  std::vector<SceneInstance> train_insts;
  for (int i = 0; i < cfg.train; ++i) train_insts.push_back(slots[i].raw.inst);
  const Matrix joint = cooccurrence_from_counts(train_insts, C, 1.0);
  const Matrix scene_class = scene_class_from_counts(train_insts, ls, 1.0);
  auto prng = stream(cfg.seed, "preferences");
  Matrix pair_counts(C, std::vector<double>(C, 0.0));
  for (int i = 0; i < C; ++i) {
    std::vector<double> w(C, 0.0);
    for (int j = 0; j < C; ++j)
      if (j != i) w[j] = joint[i][j] / joint[i][i];
    for (int t = 0; t < cfg.subjects * (C - 1); ++t) pair_counts[i][draw_from(w, prng)] += 1;
  }
  const int trials = 2 * cfg.subjects;
  std::vector<double> occ_wins(C), occ_trials(C, trials);
  for (int k = 0; k < C; ++k) occ_wins[k] = std::binomial_distribution<int>(trials, joint[k][k])(prng);
  Matrix sc_wins(S, std::vector<double>(C)), sc_trials(S, std::vector<double>(C, trials));
  for (int s = 0; s < S; ++s)
    for (int k = 0; k < C; ++k) sc_wins[s][k] = std::binomial_distribution<int>(trials, scene_class[s][k])(prng);
  out.preferences = {{"class_pair_counts", matrix_json(pair_counts)},
                     {"occurrence_wins", occ_wins},
                     {"occurrence_trials", occ_trials},
                     {"scene_class_wins", matrix_json(sc_wins)},
                     {"scene_class_trials", matrix_json(sc_trials)}};

  std::vector<const SceneInstance*> insts;
  std::vector<const Matrix*> mseg, mss, hseg, hss;
  for (auto& s : slots) {
    insts.push_back(&s.raw.inst);
    mseg.push_back(&s.machine.seg_unary);
    mss.push_back(&s.machine.supseg_unary);
    hseg.push_back(&s.human_seg);
    hss.push_back(&s.human_ss);
  }
  double min_cov = 1.0;
  int segs = 0, sss = 0, dets = 0;
  for (auto* p : insts) {
    min_cov = std::min(min_cov, coverage_stats(*p, 0).fraction);
    segs += static_cast<int>(p->segments.size());
    sss += static_cast<int>(p->supersegments.size());
    dets += static_cast<int>(p->detections.size());
  }
  out.report = {{"seed", cfg.seed},
                {"train", cfg.train},
                {"test", cfg.test},
                {"classes", ls.classes},
                {"segments", segs},
                {"supersegments", sss},
                {"detections", dets},
                {"min_coverage", min_cov},
                {"machine_strength", cfg.machine_strength},
                {"human_strength", cfg.human_strength},
                {"expected_machine", matrix_json(expected_channel_matrix(machine_ch))},
                {"expected_human", matrix_json(expected_channel_matrix(human_ch))},
                {"machine_seg_confusion", matrix_json(argmax_confusion(insts, mseg, false, C))},
                {"machine_supseg_confusion", matrix_json(argmax_confusion(insts, mss, true, C))},
                {"human_seg_confusion", matrix_json(argmax_confusion(insts, hseg, false, C))},
                {"human_supseg_confusion", matrix_json(argmax_confusion(insts, hss, true, C))}};

  for (int i = 0; i < n; ++i) {
    auto& inst = slots[i].raw.inst;
    (i < cfg.train ? out.dataset.train : out.dataset.test).push_back(std::move(inst));
  }
  return out;
}

void write_generated(const GeneratedData& data, const fs::path& dir) {
  save_dataset(data.dataset, dir);
  for (const auto& [id, t] : data.machine)
    write_json_file(dir / "machine_potentials" / (id + ".json"),
                    {{"seg_unary", matrix_json(t.seg_unary)},
                     {"supseg_unary", matrix_json(t.supseg_unary)},
                     {"scene_unary", t.scene_unary}});
  write_json_file(dir / "votes.json", votes_to_json(data.votes));
  write_json_file(dir / "preferences.json", data.preferences);
  const auto& ls = data.dataset.label_space;
  for (const auto& [cls, list] : data.masks)
    for (size_t k = 0; k < list.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "%04zu.json", k);
      write_json_file(dir / "masks" / ls.classes[cls] / name,
                      mask_json(list[k].mask, ls.classes[cls], list[k].component, list[k].source));
    }
  for (const auto& [id, m] : data.edges) {
    std::vector<int> grid(m.values.size());
    for (size_t i = 0; i < grid.size(); ++i) grid[i] = m.values[i] >= 0.5 ? 1 : 0;
    write_json_file(dir / "edges" / (id + ".json"),
                    {{"height", m.height}, {"width", m.width}, {"runs", runs_to_json(encode_runs(grid, 0))}});
  }
  write_json_file(dir / "gen-report.json", data.report);
}

}  // namespace hscrf
