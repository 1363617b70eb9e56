#include "hscrf/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hscrf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_key(const std::string& where, const std::string& key) {
  throw UsageError(where + ": unknown key '" + key + "'");
}

bool as_bool(const json& v, const std::string& where, const std::string& key) {
  if (!v.is_boolean()) throw UsageError(where + ": '" + key + "' must be true or false");
  return v.get<bool>();
}

long long as_int(const json& v, const std::string& where, const std::string& key, long long lo) {
  if (!v.is_number_integer()) throw UsageError(where + ": '" + key + "' must be an integer");
  const long long x = v.get<long long>();
  if (x < lo) throw UsageError(where + ": '" + key + "' must be >= " + std::to_string(lo));
  return x;
}

double as_real(const json& v, const std::string& where, const std::string& key) {
  if (!v.is_number()) throw UsageError(where + ": '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < 0) throw UsageError(where + ": '" + key + "' must be finite and >= 0");
  return x;
}

std::string as_string(const json& v, const std::string& where, const std::string& key) {
  if (!v.is_string()) throw UsageError(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

void apply_learn(const json& j, ExperimentConfig& cfg, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + ": [learn] must be a table");
  static const std::map<std::string, VariableKind> loss_keys = {
      {"loss_segment", VariableKind::Segment},       {"loss_supersegment", VariableKind::SuperSegment},
      {"loss_detection", VariableKind::Detection},   {"loss_presence", VariableKind::ClassPresence},
      {"loss_scene", VariableKind::Scene}};
  auto& o = cfg.learn_opts;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    const std::string w = where + " [learn]";
    if (k == "enabled") cfg.learn = as_bool(v, w, k);
    else if (k == "epochs") o.epochs = static_cast<int>(as_int(v, w, k, 1));
    else if (k == "eta0") o.eta0 = as_real(v, w, k);
    else if (k == "lambda") o.lambda = as_real(v, w, k);
    else if (k == "damping") {
      o.inference.damping = as_real(v, w, k);
      if (o.inference.damping >= 1.0) throw UsageError(w + ": 'damping' must be < 1");
    } else if (k == "max_iters") o.inference.max_iters = static_cast<int>(as_int(v, w, k, 1));
    else if (k == "tol") o.inference.tol = as_real(v, w, k);
    else if (auto lk = loss_keys.find(k); lk != loss_keys.end())
      o.loss.w[static_cast<int>(lk->second)] = as_real(v, w, k);
    else bad_key(w, k);
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j, ExperimentConfig cfg, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + ": expected a table");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "name") cfg.name = as_string(v, where, k);
    else if (k == "output") cfg.output = as_string(v, where, k);
    else if (k == "data") cfg.data = as_string(v, where, k);
    else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(as_int(v, where, k, 0));
    else if (k == "allow_disconnected") cfg.allow_disconnected = as_bool(v, where, k);
    else if (k == "human_min_area") cfg.human_min_area = static_cast<int>(as_int(v, where, k, 0));
    else if (k == "clamp_z") cfg.clamps.z = as_bool(v, where, k);
    else if (k == "clamp_s") cfg.clamps.s = as_bool(v, where, k);
    else if (k == "clamp_b") cfg.clamps.b = as_bool(v, where, k);
    else if (k == "learn") apply_learn(v, cfg, where);
    else if (k == "components") {
      if (!v.is_object()) throw UsageError(where + ": [components] must be a table");
      for (auto c = v.begin(); c != v.end(); ++c) {
        const Component comp = component_from_name(c.key());
        cfg.sources[static_cast<int>(comp)] = source_from_name(as_string(c.value(), where, c.key()));
      }
    } else bad_key(where, k);
  }
  return cfg;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  for (int c = 0; c < kNumComponents; ++c)
    s << component_name(static_cast<Component>(c)) << '=' << source_name(sources[c]) << ';';
  s << "clamp=" << clamps.z << clamps.s << clamps.b << ';';
  s << "learn=" << learn << ';' << learn_opts.epochs << ';' << format_fixed(learn_opts.eta0, 9) << ';'
    << format_fixed(learn_opts.lambda, 9) << ';';
  for (double x : learn_opts.loss.w) s << format_fixed(x, 9) << ',';
  s << ';' << format_fixed(learn_opts.inference.damping, 9) << ';' << learn_opts.inference.max_iters << ';'
    << format_fixed(learn_opts.inference.tol, 12) << ';';
  s << "disc=" << allow_disconnected << ";min_area=" << human_min_area << ";seed=" << seed;
  return s.str();
}

std::string ExperimentConfig::digest() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

// --- running ---------------------------------------------------------------

ReportRow evaluate_predictions(const std::string& name, const std::vector<InstancePrediction>& preds,
                               const std::vector<SceneInstance>& test, int C, ConfusionMatrix* confusion) {
  if (preds.size() != test.size()) throw DataError("predictions cover " + std::to_string(preds.size()) +
                                                   " instances, the test split has " + std::to_string(test.size()));
  ConfusionMatrix cm(C);
  std::vector<DetResult> dets;
  std::vector<GtObject> gts;
  int scene_ok = 0;
  for (size_t n = 0; n < test.size(); ++n) {
    cm += segment_confusion(test[n], preds[n].segments, C);
    for (const auto& d : preds[n].detections) dets.push_back({static_cast<int>(n), d.class_id, d.box, d.confidence});
    for (const auto& g : test[n].gt_boxes) gts.push_back({static_cast<int>(n), g.class_id, g.box});
    scene_ok += preds[n].scene == test[n].gt_scene;
  }
  ReportRow row;
  row.config = name;
  if (cm.total() > 0) {
    row.avg_recall = per_class_recall(cm).average;
    row.global_recall = global_recall(cm);
  }
  row.mAP = detection_ap(dets, gts).mean;
  row.scene_acc = test.empty() ? 0.0 : double(scene_ok) / double(test.size());
  if (confusion) *confusion = cm;
  return row;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds, const ProviderStores& stores,
                                int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  const ProviderStores* st = &stores;
  ProviderStores local;
  if (cfg.human_min_area != stores.human_min_area) {
    local = stores;
    local.human_min_area = cfg.human_min_area;
    st = &local;
  }
  const int C = ds.label_space.num_classes();
  const auto& test = ds.test;
  const int n = static_cast<int>(test.size());

  if (!cfg.allow_disconnected && cfg.sources[static_cast<int>(Component::Pn)] == Source::Remove)
    throw DisconnectedGraph(cfg.name + ": removing pn would result in the CRF being disconnected");

  std::vector<PotentialBundle> bundles(n);
  std::vector<BuiltGraph> graphs(n);
  parallel_for(n, jobs, [&](int i) {
    bundles[i] = assemble_bundle(test[i], cfg.sources, *st);
    graphs[i] = build_graph(test[i], ds.label_space, bundles[i], WeightVector::ones(), cfg.clamps);
  });
  if (!cfg.allow_disconnected)
    for (int i = 0; i < n; ++i)
      if (!graphs[i].graph.connected())
        throw DisconnectedGraph(cfg.name + ": instance " + test[i].id +
                                " would result in the CRF being disconnected");

  ExperimentResult res;
  res.weights = cfg.learn ? learn_weights(ds.train, cfg.sources, *st, cfg.clamps, cfg.learn_opts)
                          : WeightVector::ones();

  res.predictions.resize(n);
  parallel_for(n, jobs, [&](int i) {
    BuiltGraph& bg = graphs[i];
    bg.graph.set_weights(res.weights);
    const InferenceResult r = map_loopy(bg.graph, cfg.learn_opts.inference);
    const GraphLayout& L = bg.layout;
    InstancePrediction& p = res.predictions[i];
    p.id = test[i].id;
    for (int s = 0; s < L.num_seg; ++s) p.segments.push_back(r.labels[L.seg(s)]);
    for (int s = 0; s < L.num_ss; ++s) p.supersegments.push_back(r.labels[L.ss(s)]);
    for (int k = 0; k < C; ++k) p.presence.push_back(r.labels[L.presence(k)]);
    p.scene = r.labels[L.scene()];
    if (bundles[i].detections) {
      for (int d = 0; d < L.num_det; ++d) {
        const auto& b = r.beliefs[L.det(d)];
        const auto& det = (*bundles[i].detections)[d];
        p.detections.push_back({i, det.class_id, det.box, sigmoid(b[1] - b[0])});
      }
    } else {
      for (const auto& det : test[i].detections) p.detections.push_back({i, det.class_id, det.box, sigmoid(det.score)});
    }
  });
  res.row = evaluate_predictions(cfg.name, res.predictions, test, C, &res.confusion);
  res.row.weights_digest = res.weights.digest();
  res.row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

json predictions_to_json(const std::string& config, const std::vector<InstancePrediction>& preds) {
  json insts = json::array();
  for (const auto& p : preds) {
    json dets = json::array();
    for (const auto& d : p.detections)
      dets.push_back({{"class", d.class_id}, {"box", box_to_json(d.box)}, {"confidence", d.confidence}});
    insts.push_back({{"id", p.id},
                     {"segments", p.segments},
                     {"supersegments", p.supersegments},
                     {"presence", p.presence},
                     {"scene", p.scene},
                     {"detections", dets}});
  }
  return {{"config", config}, {"instances", insts}};
}

std::vector<InstancePrediction> predictions_from_json(const json& j, const std::vector<SceneInstance>& test) {
  std::map<std::string, InstancePrediction> by_id;
  try {
    for (const auto& r : j.at("instances")) {
      InstancePrediction p;
      p.id = r.at("id").get<std::string>();
      p.segments = r.at("segments").get<std::vector<int>>();
      p.supersegments = r.value("supersegments", std::vector<int>{});
      p.presence = r.value("presence", std::vector<int>{});
      p.scene = r.at("scene").get<int>();
      for (const auto& d : r.value("detections", json::array()))
        p.detections.push_back({0, d.at("class").get<int>(), box_from_json(d.at("box")), d.at("confidence").get<double>()});
      by_id[p.id] = std::move(p);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("predictions: ") + e.what());
  }
  std::vector<InstancePrediction> out;
  for (size_t n = 0; n < test.size(); ++n) {
    auto it = by_id.find(test[n].id);
    if (it == by_id.end()) throw DataError("predictions: no record for instance " + test[n].id);
    InstancePrediction p = it->second;
    if (p.segments.size() != test[n].segments.size())
      throw DataError("predictions: instance " + test[n].id + " has the wrong number of segment labels");
    for (auto& d : p.detections) d.image = static_cast<int>(n);
    out.push_back(std::move(p));
  }
  return out;
}

double snap_upper_bound(const std::vector<SceneInstance>& test, int C) {
  ConfusionMatrix cm(C);
  for (const auto& inst : test) {
    std::vector<int> labels;
    for (const auto& s : inst.segments) labels.push_back(s.gt_label >= 0 ? s.gt_label : 0);
    cm += segment_confusion(inst, labels, C);
  }
  return per_class_recall(cm).average;
}

// --- suites ----------------------------------------------------------------

std::vector<ExperimentConfig> grid_from_json(const json& j, const ExperimentConfig& defaults,
                                             const std::string& where) {
  ExperimentConfig base = defaults;
  std::vector<ExperimentConfig> out;
  json top = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "config" || k == "sweep" || k == "base") continue;
    if (k == "output" || k == "data" || k == "seed" || k == "name") top[k] = it.value();
    else bad_key(where, k);
  }
  base = config_from_json(top, base, where);
  if (j.contains("base")) base = config_from_json(j.at("base"), base, where + " [base]");
  if (j.contains("config")) {
    if (!j.at("config").is_array()) throw UsageError(where + ": 'config' must be an array of tables");
    int idx = 0;
    for (const auto& c : j.at("config")) {
      ExperimentConfig cfg = base;
      cfg.name = "config" + std::to_string(idx);
      cfg = config_from_json(c, cfg, where + " [[config]] #" + std::to_string(idx++));
      out.push_back(cfg);
    }
  }
  if (j.contains("sweep")) {
    if (!j.at("sweep").is_array()) throw UsageError(where + ": 'sweep' must be a list of components");
    for (const auto& c : j.at("sweep")) {
      const Component comp = component_from_name(as_string(c, where, "sweep"));
      for (Source s : {Source::Machine, Source::Human, Source::GT, Source::Remove}) {
        ExperimentConfig cfg = base;
        cfg.sources[static_cast<int>(comp)] = s;
        cfg.name = std::string(component_name(comp)) + "=" + source_name(s);
        out.push_back(cfg);
      }
    }
  }
  if (out.empty()) throw UsageError(where + ": the grid defines no configuration");
  return out;
}

namespace {

bool is_baseline(const ExperimentConfig& c) {
  for (Source s : c.sources)
    if (s != Source::Machine) return false;
  return !c.clamps.z && !c.clamps.s && !c.clamps.b;
}

}  // namespace

SuiteResult run_ablation_suite(std::vector<ExperimentConfig> grid, const Dataset& ds, const ProviderStores& stores,
                               int jobs) {
  if (grid.empty()) throw UsageError("ablation suite needs at least one configuration");
  std::vector<ExperimentConfig> uniq;
  std::set<std::string> seen;
  for (auto& c : grid)
    if (seen.insert(c.digest()).second) uniq.push_back(std::move(c));
  bool has_base = false;
  for (const auto& c : uniq) has_base = has_base || is_baseline(c);
  if (!has_base) {
    ExperimentConfig b = uniq.front();
    b.sources.fill(Source::Machine);
    b.clamps = {};
    b.name = "machine";
    uniq.insert(uniq.begin(), b);
  }

  const int n = static_cast<int>(uniq.size());
  const int outer = std::max(1, jobs);
  const int inner = outer > 1 ? 1 : jobs;
  std::vector<std::optional<ExperimentResult>> results(n);
  std::vector<std::string> errors(n);
  parallel_for(n, outer, [&](int i) {
    try {
      results[i] = run_experiment(uniq[i], ds, stores, inner);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  SuiteResult out;
  int base_row = -1;
  for (int i = 0; i < n; ++i) {
    if (!results[i]) {
      out.errors.push_back({uniq[i].name, errors[i]});
      continue;
    }
    if (base_row < 0 && is_baseline(uniq[i])) base_row = static_cast<int>(out.rows.size());
    out.rows.push_back(results[i]->row);
    out.results.push_back(std::move(*results[i]));
  }
  out.baseline = std::max(base_row, 0);
  return out;
}

std::vector<ExperimentConfig> journey_from_json(const json& j, const ExperimentConfig& defaults,
                                                const std::string& where) {
  ExperimentConfig cur = defaults;
  json top = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "step") continue;
    if (k == "output" || k == "data" || k == "seed" || k == "name" || k == "learn" || k == "human_min_area" ||
        k == "allow_disconnected")
      top[k] = it.value();
    else
      bad_key(where, k);
  }
  cur = config_from_json(top, cur, where);
  if (!j.contains("step") || !j.at("step").is_array() || j.at("step").empty())
    throw UsageError(where + ": the sequence needs at least one [[step]]");
  std::vector<ExperimentConfig> steps;
  int idx = 0;
  for (const auto& s : j.at("step")) {
    cur.name = "step" + std::to_string(idx);
    cur = config_from_json(s, cur, where + " [[step]] #" + std::to_string(idx++));
    steps.push_back(cur);
  }
  return steps;
}

std::vector<ExperimentResult> journey(const std::vector<ExperimentConfig>& steps, const Dataset& ds,
                                      const ProviderStores& stores, int jobs) {
  if (steps.empty()) throw UsageError("journey needs at least one step");
  std::vector<ExperimentResult> out;
  for (const auto& s : steps) out.push_back(run_experiment(s, ds, stores, jobs));
  return out;
}

// --- reports ---------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string report_csv(const std::vector<ReportRow>& rows, bool timing) {
  std::string out = "config,avg_recall,global_recall,mAP,scene_acc,seconds\n";
  for (const auto& r : rows)
    out += csv_field(r.config) + "," + format_fixed(r.avg_recall) + "," + format_fixed(r.global_recall) + "," +
           format_fixed(r.mAP) + "," + format_fixed(r.scene_acc) + "," + (timing ? format_fixed(r.seconds, 3) : "") +
           "\n";
  return out;
}

std::string journey_csv(const std::vector<ReportRow>& rows) {
  std::string out = "config,avg_recall,global_recall,mAP,scene_acc,d_avg_recall,d_global_recall,d_mAP,d_scene_acc\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const ReportRow& p = i == 0 ? r : rows[i - 1];
    out += csv_field(r.config) + "," + format_fixed(r.avg_recall) + "," + format_fixed(r.global_recall) + "," +
           format_fixed(r.mAP) + "," + format_fixed(r.scene_acc) + "," + format_fixed(r.avg_recall - p.avg_recall) +
           "," + format_fixed(r.global_recall - p.global_recall) + "," + format_fixed(r.mAP - p.mAP) + "," +
           format_fixed(r.scene_acc - p.scene_acc) + "\n";
  }
  return out;
}

std::string report_svg(const std::vector<ReportRow>& rows, int baseline) {
  struct Panel {
    const char* metric;
    const char* title;
    double ReportRow::*field;
  };
  const Panel panels[] = {{"avg_recall", "Segmentation: average recall", &ReportRow::avg_recall},
                          {"mAP", "Detection: mean AP", &ReportRow::mAP},
                          {"scene_acc", "Scene accuracy", &ReportRow::scene_acc}};
  const int n = static_cast<int>(rows.size());
  const int bar = 22, gap = 8, left = 40, top = 30, plot_h = 200, bottom = 120;
  const int panel_w = left + n * (bar + gap) + gap + 10;
  const int width = 3 * panel_w, height = top + plot_h + bottom;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  for (int p = 0; p < 3; ++p) {
    const int x0 = p * panel_w;
    const int y_axis = top + plot_h;
    s << "<g class=\"panel\" data-metric=\"" << panels[p].metric << "\">\n";
    s << "<text x=\"" << x0 + left << "\" y=\"16\" font-size=\"12\">" << panels[p].title << "</text>\n";
    s << "<line x1=\"" << x0 + left << "\" y1=\"" << top << "\" x2=\"" << x0 + left << "\" y2=\"" << y_axis
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << x0 + left << "\" y1=\"" << y_axis << "\" x2=\"" << x0 + panel_w - 10 << "\" y2=\""
      << y_axis << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = t * 0.25;
      const double y = y_axis - v * plot_h;
      s << "<text x=\"" << x0 + left - 4 << "\" y=\"" << format_fixed(y + 3, 1) << "\" text-anchor=\"end\">"
        << format_fixed(v, 2) << "</text>\n";
    }
    for (int i = 0; i < n; ++i) {
      const double v = rows[i].*(panels[p].field);
      const double h = std::clamp(v, 0.0, 1.0) * plot_h;
      const int bx = x0 + left + gap + i * (bar + gap);
      s << "<rect class=\"bar\" data-config=\"" << xml_escape(rows[i].config) << "\" data-value=\""
        << format_fixed(v) << "\" x=\"" << bx << "\" y=\"" << format_fixed(y_axis - h, 2) << "\" width=\"" << bar
        << "\" height=\"" << format_fixed(h, 2) << "\" fill=\"" << (i == baseline ? "#777777" : "#4a78b5")
        << "\"/>\n";
      s << "<text transform=\"translate(" << bx + bar / 2 << "," << y_axis + 6 << ") rotate(60)\">"
        << xml_escape(rows[i].config) << "</text>\n";
    }
    if (baseline >= 0 && baseline < n) {
      const double v = rows[baseline].*(panels[p].field);
      const double y = y_axis - std::clamp(v, 0.0, 1.0) * plot_h;
      s << "<line class=\"baseline\" data-value=\"" << format_fixed(v) << "\" x1=\"" << x0 + left << "\" y1=\""
        << format_fixed(y, 2) << "\" x2=\"" << x0 + panel_w - 10 << "\" y2=\"" << format_fixed(y, 2)
        << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError(path.string() + ": cannot write");
  out << text;
  if (!out) throw RuntimeError(path.string() + ": write failed");
}

void emit_report(const std::vector<ReportRow>& rows, const fs::path& outdir, int baseline, bool timing) {
  if (rows.empty()) throw UsageError("nothing to report");
  write_text_file(outdir / "report.csv", report_csv(rows, timing));
  write_text_file(outdir / "report.svg", report_svg(rows, baseline));
}

// --- shapes ----------------------------------------------------------------

std::vector<ShapeRow> shape_table(const Dataset& ds, const ProviderStores& stores) {
  const char* names[] = {"Detector", "TrainingMask-oracle", "Cluster-oracle", "Detector-auto",
                         "DistTr",   "Naive",               "GT-snap"};
  std::vector<ShapeRow> rows;
  for (const char* n : names) rows.push_back({n, 0.0, 0.0, 0});
  const MaskLibrary& lib = stores.masks;
  auto add = [&](int r, const Mask& pred, const Mask& gt) {
    rows[r].normalized_acc += normalized_mask_accuracy(pred, gt).value;
    rows[r].pixel_acc += pixel_accuracy(pred, gt);
    ++rows[r].count;
  };
  auto fit = [](const Mask& m, const Box& box) {
    Mask out = binarize(resample(m, box.height(), box.width()));
    out.box = box;
    return out;
  };
  for (const auto& inst : ds.test) {
    for (const auto& g : inst.gt_boxes) {
      const Box& box = g.box;
      const Mask gt = gt_object_mask(inst, g.class_id, box);
      const int K = lib.num_components(g.class_id);
      if (K > 0) {
        std::vector<Mask> comps;
        for (int k = 0; k < K; ++k) comps.push_back(fit(lib.average_mask(g.class_id, k), box));
        add(0, comps[oracle_best(comps, gt).index], gt);
        add(3, comps[std::min(lib.component_for_box(g.class_id, box), K - 1)], gt);
      }
      std::vector<Mask> train;
      for (const auto& tm : lib.training_masks(g.class_id)) train.push_back(fit(tm.mask, box));
      if (!train.empty()) add(1, train[oracle_best(train, gt).index], gt);
      std::vector<Mask> clusters;
      for (const auto& cm : lib.cluster_masks(g.class_id)) clusters.push_back(fit(cm, box));
      if (!clusters.empty()) add(2, clusters[oracle_best(clusters, gt).index], gt);
      if (auto e = stores.edges.find(inst.id); e != stores.edges.end() && !train.empty()) {
        Mask edges = Mask::for_box(box);
        for (int y = box.y0; y <= box.y1; ++y)
          for (int x = box.x0; x <= box.x1; ++x) edges.at(y - box.y0, x - box.x0) = e->second.at(y, x);
        std::vector<Mask> usable;
        for (const auto& m : train)
          if (!inner_boundary(m).empty()) usable.push_back(m);
        if (!usable.empty()) add(4, usable[distance_transform_select(edges, usable).index], gt);
      }
      add(5, naive_box_mask(box, inst.segments, inst.width), gt);
      add(6, snap_mask_to_segments(gt, inst.segments, inst.width), gt);
    }
  }
  for (auto& r : rows)
    if (r.count > 0) {
      r.normalized_acc /= r.count;
      r.pixel_acc /= r.count;
    }
  return rows;
}

std::string shapes_csv(const std::vector<ShapeRow>& rows) {
  std::string out = "prior,normalized_acc,pixel_acc,count\n";
  for (const auto& r : rows)
    out += r.prior + "," + format_fixed(r.normalized_acc) + "," + format_fixed(r.pixel_acc) + "," +
           std::to_string(r.count) + "\n";
  return out;
}

}  // namespace hscrf
