#include "hscrf/scene_data.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hscrf {

using nlohmann::json;
namespace fs = std::filesystem;

bool LabelSpace::is_detector_class(int c) const {
  return std::binary_search(detector_classes.begin(), detector_classes.end(), c);
}

int LabelSpace::class_index(const std::string& name) const {
  for (int c = 0; c < num_classes(); ++c)
    if (classes[c] == name) return c;
  throw DataError("unknown class '" + name + "'");
}

std::vector<std::string> LabelSpace::violations() const {
  std::vector<std::string> out;
  if (num_classes() < 2) out.push_back("label space needs at least 2 classes");
  if (num_scenes() < 1) out.push_back("label space needs at least 1 scene type");
  std::set<std::string> seen;
  for (const auto& c : classes)
    if (!seen.insert(c).second) out.push_back("duplicate class name '" + c + "'");
  if (is_thing.size() != classes.size()) out.push_back("is_thing length differs from classes");
  for (int d : detector_classes)
    if (d < 0 || d >= num_classes()) out.push_back("detector class " + std::to_string(d) + " not in classes");
  return out;
}

std::vector<int> SceneInstance::gt_presence(int num_classes) const {
  std::vector<int> z(num_classes, 0);
  for (int l : gt_pixel_labels)
    if (l >= 0 && l < num_classes) z[l] = 1;
  return z;
}

void SceneInstance::link_hierarchy() {
  for (auto& ss : supersegments) {
    ss.children.clear();
    ss.area = 0;
  }
  for (int i = 0; i < static_cast<int>(seg_parent.size()) && i < static_cast<int>(segments.size()); ++i) {
    const int p = seg_parent[i];
    if (p < 0 || p >= static_cast<int>(supersegments.size())) continue;
    supersegments[p].children.push_back(i);
    supersegments[p].area += segments[i].area;
  }
}

int majority_label(const std::vector<int>& pixels, const std::vector<int>& label_grid,
                   int num_classes) {
  std::vector<int> counts(num_classes, 0);
  bool any = false;
  for (int p : pixels) {
    const int l = label_grid[p];
    if (l >= 0 && l < num_classes) {
      ++counts[l];
      any = true;
    }
  }
  return any ? argmax(counts) : kVoid;
}

std::vector<std::string> validate_instance(const SceneInstance& inst, const LabelSpace& ls) {
  std::vector<std::string> v;
  const int C = ls.num_classes();
  if (inst.height <= 0 || inst.width <= 0) {
    v.push_back("grid must have positive height and width");
    return v;
  }
  const int n = inst.num_pixels();
  if (static_cast<int>(inst.gt_pixel_labels.size()) != n) {
    v.push_back("gt label grid has " + std::to_string(inst.gt_pixel_labels.size()) +
                " pixels, expected " + std::to_string(n));
    return v;
  }
  for (int l : inst.gt_pixel_labels)
    if (l != kVoid && (l < 0 || l >= C)) {
      v.push_back("gt label " + std::to_string(l) + " out of range");
      break;
    }

  std::vector<int> owner(n, -1);
  for (int s = 0; s < static_cast<int>(inst.segments.size()); ++s) {
    const Segment& seg = inst.segments[s];
    const std::string name = "segment " + std::to_string(s);
    if (seg.pixels.empty()) {
      v.push_back(name + " has an empty pixel set");
      continue;
    }
    if (seg.area != static_cast<int>(seg.pixels.size()))
      v.push_back(name + " area " + std::to_string(seg.area) + " differs from decoded pixel count " +
                  std::to_string(seg.pixels.size()));
    bool reported = false;
    for (int p : seg.pixels) {
      if (p < 0 || p >= n) {
        v.push_back(name + " has pixels outside the grid");
        reported = true;
        break;
      }
      if (owner[p] >= 0 && !reported) {
        v.push_back("segments " + std::to_string(owner[p]) + " and " + std::to_string(s) +
                    " overlap at pixel (" + std::to_string(p % inst.width) + "," +
                    std::to_string(p / inst.width) + ")");
        reported = true;
      }
      if (owner[p] < 0) owner[p] = s;
    }
    if (!reported) {
      const int maj = majority_label(seg.pixels, inst.gt_pixel_labels, C);
      if (maj != seg.gt_label)
        v.push_back(name + " gt_label " + std::to_string(seg.gt_label) + " differs from pixel majority " +
                    std::to_string(maj));
    }
  }

  const int nss = static_cast<int>(inst.supersegments.size());
  for (int s = 0; s < static_cast<int>(inst.segments.size()); ++s) {
    if (s >= static_cast<int>(inst.seg_parent.size()) || inst.seg_parent[s] < 0)
      v.push_back("segment " + std::to_string(s) + " has no parent");
    else if (inst.seg_parent[s] >= nss)
      v.push_back("segment " + std::to_string(s) + " has parent " + std::to_string(inst.seg_parent[s]) +
                  " out of range");
  }
  if (inst.seg_parent.size() > inst.segments.size())
    v.push_back("seg_parent lists more entries than there are segments");
  for (int j = 0; j < nss; ++j) {
    const SuperSegment& ss = inst.supersegments[j];
    if (ss.children.empty()) {
      v.push_back("super-segment " + std::to_string(j) + " has no segments");
      continue;
    }
    std::vector<int> pixels;
    for (int c : ss.children) pixels.insert(pixels.end(), inst.segments[c].pixels.begin(), inst.segments[c].pixels.end());
    const int maj = majority_label(pixels, inst.gt_pixel_labels, C);
    if (maj != ss.gt_label)
      v.push_back("super-segment " + std::to_string(j) + " gt_label " + std::to_string(ss.gt_label) +
                  " differs from pixel majority " + std::to_string(maj));
  }

  for (int d = 0; d < static_cast<int>(inst.detections.size()); ++d) {
    const auto& det = inst.detections[d];
    const std::string name = "detection " + std::to_string(d);
    if (!ls.is_detector_class(det.class_id))
      v.push_back(name + " class " + std::to_string(det.class_id) + " is not a detector class");
    if (!det.box.valid()) v.push_back(name + " box is degenerate");
    if (!det.box.within(inst.height, inst.width)) v.push_back(name + " box leaves the grid");
    if (det.component < 0) v.push_back(name + " has a negative component id");
    if (!std::isfinite(det.score)) v.push_back(name + " score is not finite");
  }
  for (int b = 0; b < static_cast<int>(inst.gt_boxes.size()); ++b) {
    const auto& g = inst.gt_boxes[b];
    const std::string name = "gt box " + std::to_string(b);
    if (g.class_id < 0 || g.class_id >= C) v.push_back(name + " class out of range");
    if (!g.box.valid()) v.push_back(name + " is degenerate");
    if (!g.box.within(inst.height, inst.width)) v.push_back(name + " leaves the grid");
  }
  if (inst.gt_scene < 0 || inst.gt_scene >= ls.num_scenes())
    v.push_back("gt_scene " + std::to_string(inst.gt_scene) + " out of range");
  return v;
}

CoverageStats coverage_stats(const SceneInstance& inst, int min_area) {
  CoverageStats out;
  long labeled = 0;
  for (int l : inst.gt_pixel_labels)
    if (l != kVoid) ++labeled;
  long covered = 0;
  for (const auto& seg : inst.segments) {
    if (seg.area < min_area) continue;
    ++out.segment_count;
    for (int p : seg.pixels)
      if (inst.gt_pixel_labels[p] != kVoid) ++covered;
  }
  out.fraction = labeled > 0 ? double(covered) / double(labeled) : 0.0;
  return out;
}

// --- JSON -----------------------------------------------------------------

json runs_to_json(const std::vector<Run>& runs) {
  json a = json::array();
  for (const auto& r : runs) a.push_back({r.start, r.length, r.value});
  return a;
}

std::vector<Run> runs_from_json(const json& a) {
  std::vector<Run> runs;
  for (const auto& r : a) {
    if (!r.is_array() || r.size() != 3) throw DataError("run must be [start, length, value]");
    runs.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>()});
  }
  return runs;
}

json box_to_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

Box box_from_json(const json& a) {
  if (!a.is_array() || a.size() != 4) throw DataError("box must be [x0, y0, x1, y1]");
  return {a[0].get<int>(), a[1].get<int>(), a[2].get<int>(), a[3].get<int>()};
}

json to_json(const LabelSpace& ls) {
  json det = json::array();
  for (int d : ls.detector_classes) det.push_back(ls.classes[d]);
  json thing = json::array();
  for (bool t : ls.is_thing) thing.push_back(t);
  return {{"classes", ls.classes}, {"scene_types", ls.scene_types}, {"is_thing", thing}, {"detector_classes", det}};
}

LabelSpace label_space_from_json(const json& j) {
  LabelSpace ls;
  try {
    ls.classes = j.at("classes").get<std::vector<std::string>>();
    ls.scene_types = j.at("scene_types").get<std::vector<std::string>>();
    for (const auto& t : j.at("is_thing")) ls.is_thing.push_back(t.get<bool>());
    for (const auto& d : j.at("detector_classes")) ls.detector_classes.push_back(ls.class_index(d.get<std::string>()));
  } catch (const json::exception& e) {
    throw DataError(std::string("labelspace: ") + e.what());
  }
  std::sort(ls.detector_classes.begin(), ls.detector_classes.end());
  ls.detector_classes.erase(std::unique(ls.detector_classes.begin(), ls.detector_classes.end()),
                            ls.detector_classes.end());
  return ls;
}

json to_json(const SceneInstance& inst) {
  json segs = json::array();
  for (const auto& s : inst.segments)
    segs.push_back({{"runs", runs_to_json(s.runs)}, {"area", s.area}, {"gt_label", s.gt_label}});
  json sss = json::array();
  for (const auto& s : inst.supersegments) sss.push_back({{"gt_label", s.gt_label}});
  json dets = json::array();
  for (const auto& d : inst.detections)
    dets.push_back({{"class", d.class_id}, {"score", d.score}, {"box", box_to_json(d.box)}, {"component", d.component}});
  json gtb = json::array();
  for (const auto& g : inst.gt_boxes) gtb.push_back({{"class", g.class_id}, {"box", box_to_json(g.box)}});
  return {{"id", inst.id},
          {"split", inst.split},
          {"height", inst.height},
          {"width", inst.width},
          {"gt_labels", runs_to_json(encode_runs(inst.gt_pixel_labels, kVoid))},
          {"segments", segs},
          {"seg_parent", inst.seg_parent},
          {"supersegments", sss},
          {"detections", dets},
          {"gt_boxes", gtb},
          {"gt_scene", inst.gt_scene}};
}

SceneInstance instance_from_json(const json& j) {
  SceneInstance inst;
  try {
    inst.id = j.at("id").get<std::string>();
    inst.split = j.value("split", std::string("train"));
    inst.height = j.at("height").get<int>();
    inst.width = j.at("width").get<int>();
    if (inst.height <= 0 || inst.width <= 0) throw DataError("instance " + inst.id + ": grid must be positive");
    inst.gt_pixel_labels = decode_runs(runs_from_json(j.at("gt_labels")), inst.num_pixels(), kVoid);
    for (const auto& s : j.at("segments")) {
      Segment seg;
      seg.runs = runs_from_json(s.at("runs"));
      seg.pixels = pixels_of_runs(seg.runs);
      seg.area = s.at("area").get<int>();
      seg.gt_label = s.at("gt_label").get<int>();
      inst.segments.push_back(std::move(seg));
    }
    inst.seg_parent = j.at("seg_parent").get<std::vector<int>>();
    for (const auto& s : j.at("supersegments")) {
      SuperSegment ss;
      ss.gt_label = s.at("gt_label").get<int>();
      inst.supersegments.push_back(ss);
    }
    for (const auto& d : j.value("detections", json::array()))
      inst.detections.push_back({d.at("class").get<int>(), d.at("score").get<double>(), box_from_json(d.at("box")),
                                 d.value("component", 0)});
    for (const auto& g : j.value("gt_boxes", json::array()))
      inst.gt_boxes.push_back({g.at("class").get<int>(), box_from_json(g.at("box"))});
    inst.gt_scene = j.at("gt_scene").get<int>();
  } catch (const json::exception& e) {
    throw DataError("instance " + (inst.id.empty() ? std::string("?") : inst.id) + ": " + e.what());
  }
  inst.link_hierarchy();
  return inst;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const size_t upto = std::min(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError(path.string() + ": cannot write");
  out << j.dump(1, ' ') << '\n';
  if (!out) throw RuntimeError(path.string() + ": write failed");
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.label_space = label_space_from_json(read_json_file(dir / "labelspace.json"));
  if (auto v = ds.label_space.violations(); !v.empty()) throw DataError("labelspace.json: " + v.front());
  const fs::path inst_dir = dir / "instances";
  if (!fs::is_directory(inst_dir)) throw DataError(inst_dir.string() + ": missing instances directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(inst_dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::set<std::string> ids;
  for (const auto& f : files) {
    SceneInstance inst = instance_from_json(read_json_file(f));
    if (auto v = validate_instance(inst, ds.label_space); !v.empty())
      throw DataError("instance " + inst.id + ": " + v.front());
    if (!ids.insert(inst.id).second) throw DataError("instance " + inst.id + ": duplicate id");
    if (inst.split == "train")
      ds.train.push_back(std::move(inst));
    else if (inst.split == "test")
      ds.test.push_back(std::move(inst));
    else
      throw DataError("instance " + inst.id + ": unknown split '" + inst.split + "'");
  }
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  write_json_file(dir / "labelspace.json", to_json(ds.label_space));
  for (const auto* split : {&ds.train, &ds.test})
    for (const auto& inst : *split) write_json_file(dir / "instances" / (inst.id + ".json"), to_json(inst));
}

}  // namespace hscrf
