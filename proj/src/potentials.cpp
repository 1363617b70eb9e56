#include "hscrf/potentials.hpp"

#include <numeric>
#include <tuple>

namespace hscrf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSourceNames[] = {"machine", "human", "gt", "remove"};
constexpr const char* kComponentNames[] = {"seg_unary",   "supseg_unary", "pn",    "class_unary", "class_tree",
                                           "detection",   "shape",        "scene_unary", "scene_class"};

// Human detection candidates get this confidence.
constexpr double kHumanDetectionConfidence = 0.988;

std::vector<double> one_hot(int n, int label) {
  if (label < 0 || label >= n) return std::vector<double>(n, 1.0 / n);
  std::vector<double> v(n, 0.0);
  v[label] = 1.0;
  return v;
}

}  // namespace

const char* source_name(Source s) { return kSourceNames[static_cast<int>(s)]; }

Source source_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i)
    if (name == kSourceNames[i]) return static_cast<Source>(i);
  throw UsageError("unknown source '" + name + "' (expected machine, human, gt or remove)");
}

const char* component_name(Component c) { return kComponentNames[static_cast<int>(c)]; }

Component component_from_name(const std::string& name) {
  for (int i = 0; i < kNumComponents; ++i)
    if (name == kComponentNames[i]) return static_cast<Component>(i);
  throw UsageError("unknown component '" + name + "'");
}

std::vector<double> human_unary_from_votes(const std::vector<int>& counts, int min_area, int area) {
  const int C = static_cast<int>(counts.size());
  if (C < 2) throw std::invalid_argument("vote record needs at least 2 classes");
  long total = 0;
  for (int c : counts) {
    if (c < 0) throw DataError("negative vote count");
    total += c;
  }
  if (area < min_area || total == 0) return std::vector<double>(C, 1.0 / C);
  std::vector<double> p(C);
  for (int c = 0; c < C; ++c) p[c] = double(counts[c]) / double(total);
  return p;
}

PotentialBundle gt_potentials(const SceneInstance& inst, const LabelSpace& ls) {
  if (inst.gt_pixel_labels.empty()) throw DataError("instance " + inst.id + ": missing ground truth");
  const int C = ls.num_classes();
  PotentialBundle b;
  b.sources.fill(Source::GT);
  Matrix seg, ss;
  for (const auto& s : inst.segments) seg.push_back(one_hot(C, s.gt_label));
  for (const auto& s : inst.supersegments) ss.push_back(one_hot(C, s.gt_label));
  b.seg_unary = std::move(seg);
  b.supseg_unary = std::move(ss);
  std::vector<double> z;
  for (int p : inst.gt_presence(C)) z.push_back(p);
  b.class_unary = std::move(z);
  std::vector<DetectionCandidate> dets;
  std::vector<Mask> masks;
  for (const auto& g : inst.gt_boxes) {
    dets.push_back({g.class_id, std::numeric_limits<double>::infinity(), g.box, 0});
    masks.push_back(gt_object_mask(inst, g.class_id, g.box));
  }
  b.detections = std::move(dets);
  b.shape_masks = std::move(masks);
  b.scene_unary = one_hot(ls.num_scenes(), inst.gt_scene);
  return b;
}

Matrix cooccurrence_from_counts(const std::vector<SceneInstance>& images, int C, double alpha) {
  const double N = static_cast<double>(images.size());
  Matrix n(C, std::vector<double>(C, 0.0));
  for (const auto& inst : images) {
    const auto z = inst.gt_presence(C);
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < C; ++j) n[i][j] += z[i] && z[j];
  }
  Matrix joint(C, std::vector<double>(C));
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < C; ++j)
      joint[i][j] = i == j ? (n[i][i] + 2 * alpha) / (N + 4 * alpha) : (n[i][j] + alpha) / (N + 4 * alpha);
  return joint;
}

Matrix preference_conditional(const PairPreferenceAnswers& p) {
  const int C = static_cast<int>(p.pair_counts.size());
  Matrix cond(C, std::vector<double>(C, 0.0));
  for (int i = 0; i < C; ++i) {
    double total = 0.0;
    for (int j = 0; j < C; ++j) {
      if (j == i) continue;
      if (p.pair_counts[i][j] < 0) throw DataError("negative preference count");
      total += p.pair_counts[i][j];
    }
    if (total <= 0) throw DataError("class " + std::to_string(i) + " has no preference answers");
    for (int j = 0; j < C; ++j)
      if (j != i) cond[i][j] = p.pair_counts[i][j] / total;
  }
  return cond;
}

Matrix cooccurrence_from_preferences(const PairPreferenceAnswers& p) {
  const int C = static_cast<int>(p.pair_counts.size());
  if (static_cast<int>(p.marginals.size()) != C) throw DataError("preference marginals size differs from classes");
  const Matrix cond = preference_conditional(p);
  Matrix joint(C, std::vector<double>(C));
  for (int i = 0; i < C; ++i)
    for (int j = 0; j < C; ++j)
      joint[i][j] = i == j ? p.marginals[i] : 0.5 * (cond[i][j] * p.marginals[i] + cond[j][i] * p.marginals[j]);
  return joint;
}

std::array<double, 4> presence_table(const Matrix& joint, int i, int j) {
  const double pi = joint[i][i], pj = joint[j][j], p11 = joint[i][j];
  std::array<double, 4> t{1.0 - pi - pj + p11, pj - p11, pi - p11, p11};
  double s = 0.0;
  for (double& x : t) {
    x = std::max(x, kProbFloor);
    s += x;
  }
  for (double& x : t) x /= s;
  return t;
}

double mutual_information(const Matrix& joint, int i, int j) {
  const auto t = presence_table(joint, i, j);
  const double r[2] = {t[0] + t[1], t[2] + t[3]};
  const double c[2] = {t[0] + t[2], t[1] + t[3]};
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) mi += t[a * 2 + b] * std::log(t[a * 2 + b] / (r[a] * c[b]));
  return mi;
}

std::vector<std::pair<int, int>> chow_liu_tree(const Matrix& joint) {
  const int C = static_cast<int>(joint.size());
  if (C < 2) throw std::invalid_argument("chow_liu_tree needs at least 2 classes");
  // Quantized MI so that round-off never reorders ties.
  std::vector<std::tuple<long long, int, int>> cand;
  for (int i = 0; i < C; ++i)
    for (int j = i + 1; j < C; ++j) {
      const double mi = mutual_information(joint, i, j);
      if (!std::isfinite(mi)) throw DataError("non-finite mutual information for classes " + std::to_string(i) +
                                              " and " + std::to_string(j));
      cand.emplace_back(-std::llround(mi * 1e12), i, j);
    }
  std::sort(cand.begin(), cand.end());
  std::vector<int> parent(C);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::pair<int, int>> edges;
  for (auto [q, i, j] : cand) {
    const int a = find(i), b = find(j);
    if (a == b) continue;
    parent[a] = b;
    edges.push_back({i, j});
    if (static_cast<int>(edges.size()) == C - 1) break;
  }
  return edges;
}

std::vector<TreeEdge> tree_potentials(const Matrix& joint, const std::vector<std::pair<int, int>>& edges) {
  std::vector<TreeEdge> out;
  for (auto [i, k] : edges) {
    const auto t = presence_table(joint, i, k);
    const double r[2] = {t[0] + t[1], t[2] + t[3]};
    const double c[2] = {t[0] + t[2], t[1] + t[3]};
    TreeEdge e{i, k, {}};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) e.table[a * 2 + b] = std::log(t[a * 2 + b]) - std::log(r[a]) - std::log(c[b]);
    out.push_back(e);
  }
  return out;
}

Matrix scene_class_from_counts(const std::vector<SceneInstance>& images, const LabelSpace& ls, double alpha) {
  const int C = ls.num_classes(), S = ls.num_scenes();
  Matrix n(S, std::vector<double>(C, 0.0));
  std::vector<double> ns(S, 0.0);
  for (const auto& inst : images) {
    ns[inst.gt_scene] += 1;
    const auto z = inst.gt_presence(C);
    for (int k = 0; k < C; ++k) n[inst.gt_scene][k] += z[k];
  }
  Matrix out(S, std::vector<double>(C));
  for (int s = 0; s < S; ++s)
    for (int k = 0; k < C; ++k) out[s][k] = (n[s][k] + alpha) / (ns[s] + 2 * alpha);
  return out;
}

TrainStats compute_train_stats(const Dataset& ds) {
  TrainStats t;
  const int C = ds.label_space.num_classes();
  t.joint = cooccurrence_from_counts(ds.train, C, 1.0);
  t.tree = chow_liu_tree(t.joint);
  t.tree_tables = tree_potentials(t.joint, t.tree);
  t.scene_class = scene_class_from_counts(ds.train, ds.label_space, 1.0);
  return t;
}

// --- stores --------------------------------------------------------------

std::vector<VoteRecord> votes_from_json(const json& j) {
  std::vector<VoteRecord> out;
  try {
    for (const auto& r : j.at("records")) {
      VoteRecord v{r.at("instance").get<std::string>(), r.at("level").get<std::string>(), r.at("index").get<int>(),
                   r.at("counts").get<std::vector<int>>()};
      if (v.level != "segment" && v.level != "supersegment" && v.level != "scene")
        throw DataError("vote record level '" + v.level + "' unknown");
      for (int c : v.counts)
        if (c < 0) throw DataError("vote record for " + v.instance + " has a negative count");
      out.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("votes: ") + e.what());
  }
  return out;
}

json votes_to_json(const std::vector<VoteRecord>& votes) {
  json recs = json::array();
  for (const auto& v : votes)
    recs.push_back({{"instance", v.instance}, {"level", v.level}, {"index", v.index}, {"counts", v.counts}});
  return {{"records", recs}};
}

namespace {

Matrix matrix_from_json(const json& j) {
  Matrix m;
  for (const auto& row : j) m.push_back(row.get<std::vector<double>>());
  return m;
}

Mask mask_from_json(const json& j) {
  const int h = j.at("height").get<int>(), w = j.at("width").get<int>();
  Mask m = Mask::zeros(h, w);
  const auto grid = decode_runs(runs_from_json(j.at("runs")), h * w, 0);
  for (int i = 0; i < h * w; ++i) m.values[i] = grid[i] != 0 ? 1.0 : 0.0;
  return m;
}

}  // namespace

ProviderStores load_stores(const fs::path& dir, const Dataset& ds, int human_min_area) {
  ProviderStores st;
  st.label_space = ds.label_space;
  st.human_min_area = human_min_area;
  st.train = compute_train_stats(ds);
  const int C = ds.label_space.num_classes();

  if (fs::is_directory(dir / "machine_potentials")) {
    for (const auto& e : fs::directory_iterator(dir / "machine_potentials")) {
      if (e.path().extension() != ".json") continue;
      const json j = read_json_file(e.path());
      try {
        MachineTables t{matrix_from_json(j.at("seg_unary")), matrix_from_json(j.at("supseg_unary")),
                        j.at("scene_unary").get<std::vector<double>>()};
        st.machine[e.path().stem().string()] = std::move(t);
      } catch (const json::exception& ex) {
        throw DataError(e.path().string() + ": " + ex.what());
      }
    }
  }
  if (fs::exists(dir / "votes.json"))
    for (auto& v : votes_from_json(read_json_file(dir / "votes.json")))
      st.human.votes[v.instance][v.level][v.index] = std::move(v.counts);
  if (fs::exists(dir / "preferences.json")) {
    const json j = read_json_file(dir / "preferences.json");
    try {
      st.human.class_pair_counts = matrix_from_json(j.at("class_pair_counts"));
      st.human.occurrence_wins = j.at("occurrence_wins").get<std::vector<double>>();
      st.human.occurrence_trials = j.at("occurrence_trials").get<std::vector<double>>();
      st.human.scene_class_wins = matrix_from_json(j.at("scene_class_wins"));
      st.human.scene_class_trials = matrix_from_json(j.at("scene_class_trials"));
    } catch (const json::exception& ex) {
      throw DataError("preferences.json: " + std::string(ex.what()));
    }
    if (static_cast<int>(st.human.class_pair_counts.size()) != C || static_cast<int>(st.human.occurrence_wins.size()) != C)
      throw DataError("preferences.json: tables do not match the class count");
    st.human.has_preferences = true;
  }
  std::map<int, std::vector<TrainingMask>> masks;
  if (fs::is_directory(dir / "masks")) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir / "masks"))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const json j = read_json_file(f);
      try {
        const int cls = ds.label_space.class_index(j.at("class").get<std::string>());
        masks[cls].push_back({mask_from_json(j), j.at("component").get<int>(), j.value("source", std::string())});
      } catch (const json::exception& ex) {
        throw DataError(f.string() + ": " + ex.what());
      }
    }
  }
  st.masks = MaskLibrary(C, std::move(masks), 0);
  if (fs::is_directory(dir / "edges")) {
    for (const auto& e : fs::directory_iterator(dir / "edges")) {
      if (e.path().extension() != ".json") continue;
      try {
        st.edges[e.path().stem().string()] = mask_from_json(read_json_file(e.path()));
      } catch (const json::exception& ex) {
        throw DataError(e.path().string() + ": " + ex.what());
      }
    }
  }
  return st;
}

namespace {

const MachineTables& machine_tables(const ProviderStores& st, const std::string& id) {
  auto it = st.machine.find(id);
  if (it == st.machine.end()) throw DataError("no machine potentials for instance " + id);
  return it->second;
}

std::vector<double> human_row(const ProviderStores& st, const std::string& id, const char* level, int index,
                              int area, int min_area, int C) {
  std::vector<int> counts(C, 0);
  if (auto i = st.human.votes.find(id); i != st.human.votes.end())
    if (auto l = i->second.find(level); l != i->second.end())
      if (auto r = l->second.find(index); r != l->second.end()) counts = r->second;
  if (static_cast<int>(counts.size()) != C)
    throw DataError("vote record for " + id + " " + level + " " + std::to_string(index) + " has wrong class count");
  return human_unary_from_votes(counts, min_area, area);
}

void require_preferences(const ProviderStores& st, const char* what) {
  if (!st.human.has_preferences) throw DataError(std::string("human ") + what + " needs preferences.json");
}

std::vector<DetectionCandidate> boxes_as_detections(const SceneInstance& inst, const MaskLibrary& lib, double score) {
  std::vector<DetectionCandidate> dets;
  for (const auto& g : inst.gt_boxes) dets.push_back({g.class_id, score, g.box, lib.component_for_box(g.class_id, g.box)});
  return dets;
}

}  // namespace

PotentialBundle assemble_bundle(const SceneInstance& inst, const ComponentSources& cfg, const ProviderStores& st) {
  const LabelSpace& ls = st.label_space;
  const int C = ls.num_classes(), S = ls.num_scenes();
  PotentialBundle b;
  b.sources = cfg;
  auto src = [&](Component c) { return cfg[static_cast<int>(c)]; };
  auto reject = [&](Component c) {
    throw UsageError(std::string(component_name(c)) + " has no " + source_name(src(c)) + " source");
  };

  switch (src(Component::SegUnary)) {
    case Source::Machine: b.seg_unary = machine_tables(st, inst.id).seg_unary; break;
    case Source::Human: {
      Matrix m;
      for (int i = 0; i < static_cast<int>(inst.segments.size()); ++i)
        m.push_back(human_row(st, inst.id, "segment", i, inst.segments[i].area, st.human_min_area, C));
      b.seg_unary = std::move(m);
      break;
    }
    case Source::GT: {
      Matrix m;
      for (const auto& s : inst.segments) m.push_back(one_hot(C, s.gt_label));
      b.seg_unary = std::move(m);
      break;
    }
    case Source::Remove: break;
  }

  switch (src(Component::SupSegUnary)) {
    case Source::Machine: b.supseg_unary = machine_tables(st, inst.id).supseg_unary; break;
    case Source::Human: {
      Matrix m;
      for (int j = 0; j < static_cast<int>(inst.supersegments.size()); ++j)
        m.push_back(human_row(st, inst.id, "supersegment", j, inst.supersegments[j].area, st.human_min_area, C));
      b.supseg_unary = std::move(m);
      break;
    }
    case Source::GT: {
      Matrix m;
      for (const auto& s : inst.supersegments) m.push_back(one_hot(C, s.gt_label));
      b.supseg_unary = std::move(m);
      break;
    }
    case Source::Remove: break;
  }

  switch (src(Component::Pn)) {
    case Source::Machine: b.pn = true; break;
    case Source::Remove: b.pn = false; break;
    default: reject(Component::Pn);
  }

  switch (src(Component::ClassUnary)) {
    case Source::Machine: {
      std::vector<double> p(C);
      for (int k = 0; k < C; ++k) p[k] = st.train.joint[k][k];
      b.class_unary = std::move(p);
      break;
    }
    case Source::Human: {
      require_preferences(st, "class_unary");
      std::vector<double> p(C);
      for (int k = 0; k < C; ++k) p[k] = (st.human.occurrence_wins[k] + 1.0) / (st.human.occurrence_trials[k] + 2.0);
      b.class_unary = std::move(p);
      break;
    }
    case Source::GT: {
      std::vector<double> p;
      for (int z : inst.gt_presence(C)) p.push_back(z);
      b.class_unary = std::move(p);
      break;
    }
    case Source::Remove: break;
  }

  switch (src(Component::ClassTree)) {
    case Source::Machine: b.class_tree = st.train.tree_tables; break;
    case Source::Human: {
      require_preferences(st, "class_tree");
      PairPreferenceAnswers pa{st.human.class_pair_counts, {}};
      for (int k = 0; k < C; ++k) pa.marginals.push_back(st.train.joint[k][k]);
      const Matrix joint = cooccurrence_from_preferences(pa);
      b.class_tree = tree_potentials(joint, chow_liu_tree(joint));
      break;
    }
    case Source::GT: reject(Component::ClassTree);
    case Source::Remove: break;
  }

  switch (src(Component::Detection)) {
    case Source::Machine: b.detections = inst.detections; break;
    case Source::Human:
      b.detections = boxes_as_detections(
          inst, st.masks, std::log(kHumanDetectionConfidence / (1.0 - kHumanDetectionConfidence)));
      break;
    case Source::GT: b.detections = boxes_as_detections(inst, st.masks, std::numeric_limits<double>::infinity()); break;
    case Source::Remove: break;
  }

  if (b.detections) {
    switch (src(Component::Shape)) {
      case Source::Machine: {
        std::vector<Mask> masks;
        for (const auto& d : *b.detections) {
          const Mask& avg = st.masks.average_mask(d.class_id, d.component);
          Mask m = resample(avg, d.box.height(), d.box.width());
          m.box = d.box;
          masks.push_back(std::move(m));
        }
        b.shape_masks = std::move(masks);
        break;
      }
      case Source::GT: {
        std::vector<Mask> masks;
        for (const auto& d : *b.detections) masks.push_back(gt_object_mask(inst, d.class_id, d.box));
        b.shape_masks = std::move(masks);
        break;
      }
      case Source::Human: reject(Component::Shape);
      case Source::Remove: break;
    }
  }

  switch (src(Component::SceneUnary)) {
    case Source::Machine: b.scene_unary = machine_tables(st, inst.id).scene_unary; break;
    case Source::Human: b.scene_unary = human_row(st, inst.id, "scene", 0, 0, 0, S); break;
    case Source::GT: b.scene_unary = one_hot(S, inst.gt_scene); break;
    case Source::Remove: break;
  }

  switch (src(Component::SceneClass)) {
    case Source::Machine: b.scene_class = st.train.scene_class; break;
    case Source::Human: {
      require_preferences(st, "scene_class");
      Matrix m(S, std::vector<double>(C));
      for (int s = 0; s < S; ++s)
        for (int k = 0; k < C; ++k)
          m[s][k] = (st.human.scene_class_wins.at(s).at(k) + 1.0) / (st.human.scene_class_trials.at(s).at(k) + 2.0);
      b.scene_class = std::move(m);
      break;
    }
    case Source::GT: reject(Component::SceneClass);
    case Source::Remove: break;
  }
  return b;
}

std::vector<int> gt_detection_labels(const SceneInstance& inst, const std::vector<DetectionCandidate>& dets) {
  std::vector<int> out;
  for (const auto& d : dets) {
    int hit = 0;
    for (const auto& g : inst.gt_boxes)
      if (g.class_id == d.class_id && iou(g.box, d.box) >= 0.5) hit = 1;
    out.push_back(hit);
  }
  return out;
}

std::vector<double> shape_overlap(const Mask& mask, const std::vector<Segment>& segments, int grid_width) {
  std::vector<double> out(segments.size(), 0.0);
  const Box& box = mask.box;
  for (size_t s = 0; s < segments.size(); ++s) {
    double acc = 0.0;
    for (int p : segments[s].pixels) {
      const int x = p % grid_width, y = p / grid_width;
      if (box.contains(x, y)) acc += mask.at(y - box.y0, x - box.x0);
    }
    if (segments[s].area > 0) out[s] = acc / segments[s].area;
  }
  return out;
}

namespace {

void check_rows(const Matrix& m, size_t rows, size_t cols, const std::string& what, const std::string& id) {
  if (m.size() != rows) throw DataError("instance " + id + ": " + what + " has " + std::to_string(m.size()) +
                                        " rows, expected " + std::to_string(rows));
  for (const auto& r : m)
    if (r.size() != cols) throw DataError("instance " + id + ": " + what + " row has wrong length");
}

std::vector<double> log_row(const std::vector<double>& p) {
  std::vector<double> out(p.size());
  for (size_t i = 0; i < p.size(); ++i) out[i] = floored_log(p[i]);
  return out;
}

}  // namespace

BuiltGraph build_graph(const SceneInstance& inst, const LabelSpace& ls, const PotentialBundle& bundle,
                       const WeightVector& w, const ClampOptions& clamps) {
  const int C = ls.num_classes(), S = ls.num_scenes();
  const int nseg = static_cast<int>(inst.segments.size()), nss = static_cast<int>(inst.supersegments.size());
  const std::vector<DetectionCandidate> no_dets;
  const auto& dets = bundle.detections ? *bundle.detections : no_dets;

  BuiltGraph out;
  GraphLayout& L = out.layout;
  L = {nseg, nss, static_cast<int>(dets.size()), C};
  FactorGraph& g = out.graph;
  for (int i = 0; i < nseg; ++i) g.add_variable(VariableKind::Segment, C, i);
  for (int j = 0; j < nss; ++j) g.add_variable(VariableKind::SuperSegment, C, j);
  for (int d = 0; d < L.num_det; ++d) g.add_variable(VariableKind::Detection, 2, d);
  for (int k = 0; k < C; ++k) g.add_variable(VariableKind::ClassPresence, 2, k);
  g.add_variable(VariableKind::Scene, S, 0);
  g.set_weights(w);

  out.gt.assign(L.size(), 0);
  for (int i = 0; i < nseg; ++i) out.gt[L.seg(i)] = inst.segments[i].gt_label;
  for (int j = 0; j < nss; ++j) out.gt[L.ss(j)] = inst.supersegments[j].gt_label;
  const auto bgt = gt_detection_labels(inst, dets);
  for (int d = 0; d < L.num_det; ++d) out.gt[L.det(d)] = bgt[d];
  const auto z = inst.gt_presence(C);
  for (int k = 0; k < C; ++k) out.gt[L.presence(k)] = z[k];
  out.gt[L.scene()] = inst.gt_scene;

  if (bundle.seg_unary) {
    check_rows(*bundle.seg_unary, nseg, C, "seg_unary", inst.id);
    for (int i = 0; i < nseg; ++i) g.add_unary(Template::SegUnary, L.seg(i), log_row((*bundle.seg_unary)[i]));
  }
  if (bundle.supseg_unary) {
    check_rows(*bundle.supseg_unary, nss, C, "supseg_unary", inst.id);
    for (int j = 0; j < nss; ++j) g.add_unary(Template::SupSegUnary, L.ss(j), log_row((*bundle.supseg_unary)[j]));
  }
  if (bundle.pn) {
    std::vector<double> agree(static_cast<size_t>(C) * C, 0.0);
    for (int c = 0; c < C; ++c) agree[static_cast<size_t>(c) * C + c] = 1.0;
    for (int i = 0; i < nseg; ++i) g.add_pairwise(Template::PnConsistency, L.seg(i), L.ss(inst.seg_parent[i]), agree);
  }
  if (bundle.class_unary) {
    if (static_cast<int>(bundle.class_unary->size()) != C) throw DataError("class_unary has wrong length");
    for (int k = 0; k < C; ++k) {
      const double p = (*bundle.class_unary)[k];
      g.add_unary(Template::ClassUnary, L.presence(k), {floored_log(1.0 - p), floored_log(p)});
    }
  }
  if (bundle.class_tree)
    for (const auto& e : *bundle.class_tree)
      g.add_pairwise(Template::ClassClassTree, L.presence(e.i), L.presence(e.k),
                     std::vector<double>(e.table.begin(), e.table.end()));
  for (int d = 0; d < L.num_det; ++d) {
    g.add_unary(Template::DetUnary, L.det(d), {0.0, sigmoid(dets[d].score)});
    if (dets[d].class_id < 0 || dets[d].class_id >= C) throw DataError("detection class out of range");
    g.add_pairwise(Template::DetClassConsistency, L.det(d), L.presence(dets[d].class_id), {0.0, 0.0, -1.0, 0.0});
  }
  if (bundle.shape_masks) {
    if (bundle.shape_masks->size() != dets.size()) throw DataError("shape masks do not match detections");
    for (int d = 0; d < L.num_det; ++d) {
      const auto m = shape_overlap((*bundle.shape_masks)[d], inst.segments, inst.width);
      for (int i = 0; i < nseg; ++i) {
        if (m[i] <= 0) continue;
        std::vector<double> t(static_cast<size_t>(2) * C, 0.0);
        t[C + dets[d].class_id] = m[i];
        g.add_pairwise(Template::Shape, L.det(d), L.seg(i), std::move(t));
      }
    }
  }
  for (int j = 0; j < nss; ++j)
    for (int k = 0; k < C; ++k) {
      std::vector<double> t(static_cast<size_t>(C) * 2, 0.0);
      t[static_cast<size_t>(k) * 2] = -1.0;
      g.add_pairwise(Template::SupSegClassConsistency, L.ss(j), L.presence(k), std::move(t));
    }
  if (bundle.scene_unary) {
    if (static_cast<int>(bundle.scene_unary->size()) != S) throw DataError("scene_unary has wrong length");
    g.add_unary(Template::SceneUnary, L.scene(), log_row(*bundle.scene_unary));
  }
  if (bundle.scene_class) {
    check_rows(*bundle.scene_class, S, C, "scene_class", inst.id);
    for (int k = 0; k < C; ++k) {
      std::vector<double> t(static_cast<size_t>(S) * 2);
      for (int s = 0; s < S; ++s) {
        const double p = (*bundle.scene_class)[s][k];
        t[static_cast<size_t>(s) * 2] = floored_log(1.0 - p);
        t[static_cast<size_t>(s) * 2 + 1] = floored_log(p);
      }
      g.add_pairwise(Template::SceneClass, L.scene(), L.presence(k), std::move(t));
    }
  }
  if (clamps.z)
    for (int k = 0; k < C; ++k) g.clamp(L.presence(k), z[k]);
  if (clamps.s) g.clamp(L.scene(), inst.gt_scene);
  if (clamps.b)
    for (int d = 0; d < L.num_det; ++d) g.clamp(L.det(d), bgt[d]);
  return out;
}

}  // namespace hscrf
