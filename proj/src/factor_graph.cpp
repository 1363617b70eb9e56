#include "hscrf/factor_graph.hpp"

#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace hscrf {

using nlohmann::json;

namespace {

constexpr const char* kTemplateNames[] = {
    "seg_unary", "supseg_unary", "pn",    "class_unary",  "class_tree",  "det_unary",
    "det_class", "shape",        "supseg_class", "scene_unary", "scene_class", "custom",
};

}  // namespace

const char* kind_name(VariableKind k) {
  switch (k) {
    case VariableKind::Segment: return "segment";
    case VariableKind::SuperSegment: return "supersegment";
    case VariableKind::Detection: return "detection";
    case VariableKind::ClassPresence: return "class_presence";
    case VariableKind::Scene: return "scene";
  }
  return "?";
}

const char* template_name(Template t) { return kTemplateNames[static_cast<int>(t)]; }

Template template_from_name(const std::string& name) {
  for (int t = 0; t < kNumTemplates; ++t)
    if (name == kTemplateNames[t]) return static_cast<Template>(t);
  throw UsageError("unknown template '" + name + "'");
}

WeightVector WeightVector::ones() {
  WeightVector v;
  v.w.fill(1.0);
  return v;
}

json WeightVector::to_json() const {
  json j = json::object();
  for (int t = 0; t < kNumTemplates; ++t) j[kTemplateNames[t]] = w[t];
  return j;
}

WeightVector WeightVector::from_json(const json& j) {
  WeightVector v = ones();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const Template t = template_from_name(it.key());
    if (t == Template::Custom) throw UsageError("'custom' is not a learned template");
    const double x = it.value().get<double>();
    if (!std::isfinite(x) || x < 0) throw DataError("weight '" + it.key() + "' must be finite and >= 0");
    v.at(t) = x;
  }
  return v;
}

std::string WeightVector::digest() const {
  std::string text;
  for (double x : w) text += format_fixed(x, 9) + ";";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return std::string(buf).substr(0, 12);
}

int FactorGraph::add_variable(VariableKind kind, int domain, int ref) {
  if (domain < 1) throw std::invalid_argument("variable domain must be >= 1");
  vars_.push_back({kind, domain, ref});
  clamps_.push_back(-1);
  return static_cast<int>(vars_.size()) - 1;
}

int FactorGraph::add_unary(Template t, int var, std::vector<double> base) {
  if (var < 0 || var >= num_variables()) throw std::invalid_argument("unary factor scope out of range");
  if (static_cast<int>(base.size()) != vars_[var].domain)
    throw std::invalid_argument("unary table size differs from domain");
  for (double x : base)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite entry in ") + template_name(t));
  factors_.push_back({t, 1, {var, -1}, std::move(base)});
  return static_cast<int>(factors_.size()) - 1;
}

int FactorGraph::add_pairwise(Template t, int a, int b, std::vector<double> base) {
  if (a < 0 || b < 0 || a >= num_variables() || b >= num_variables() || a == b)
    throw std::invalid_argument("pairwise factor scope invalid");
  if (static_cast<long>(base.size()) != static_cast<long>(vars_[a].domain) * vars_[b].domain)
    throw std::invalid_argument("pairwise table size differs from domain product");
  for (double x : base)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite entry in ") + template_name(t));
  factors_.push_back({t, 2, {a, b}, std::move(base)});
  return static_cast<int>(factors_.size()) - 1;
}

void FactorGraph::clamp(int var, int label) {
  if (var < 0 || var >= num_variables()) throw std::invalid_argument("clamp variable out of range");
  if (label < 0 || label >= vars_[var].domain) throw std::invalid_argument("clamp label out of domain");
  clamps_[var] = label;
}

double FactorGraph::factor_value(int f, int la, int lb) const {
  const Factor& fac = factors_[f];
  const double w = weights_[fac.tmpl];
  if (fac.arity == 1) return w * fac.base[la];
  return w * fac.base[static_cast<size_t>(la) * vars_[fac.scope[1]].domain + lb];
}

bool FactorGraph::connected() const {
  const int n = num_variables();
  if (n <= 1) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n;
  for (const auto& f : factors_) {
    if (f.arity != 2) continue;
    const int a = find(f.scope[0]), b = find(f.scope[1]);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

json FactorGraph::to_json() const {
  json vars = json::array();
  for (int v = 0; v < num_variables(); ++v)
    vars.push_back({{"kind", kind_name(vars_[v].kind)}, {"domain", vars_[v].domain}, {"ref", vars_[v].ref},
                    {"clamp", clamps_[v]}});
  json facs = json::array();
  for (const auto& f : factors_) {
    json scope = json::array({f.scope[0]});
    if (f.arity == 2) scope.push_back(f.scope[1]);
    facs.push_back({{"template", template_name(f.tmpl)}, {"scope", scope}, {"base", f.base}});
  }
  return {{"variables", vars}, {"factors", facs}, {"weights", weights_.to_json()}};
}

double score(const FactorGraph& g, const Assignment& a) {
  if (static_cast<int>(a.size()) != g.num_variables())
    throw std::invalid_argument("assignment size differs from variable count");
  for (int v = 0; v < g.num_variables(); ++v)
    if (a[v] < 0 || a[v] >= g.variables()[v].domain)
      throw std::out_of_range("label " + std::to_string(a[v]) + " out of domain for variable " + std::to_string(v));
  double s = 0.0;
  const auto& fs = g.factors();
  for (int f = 0; f < static_cast<int>(fs.size()); ++f)
    s += fs[f].arity == 1 ? g.factor_value(f, a[fs[f].scope[0]]) : g.factor_value(f, a[fs[f].scope[0]], a[fs[f].scope[1]]);
  return s;
}

std::array<double, kNumTemplates> features(const FactorGraph& g, const Assignment& a) {
  std::array<double, kNumTemplates> phi{};
  for (const auto& f : g.factors()) {
    if (f.tmpl == Template::Custom) continue;
    const double v = f.arity == 1
                         ? f.base[a[f.scope[0]]]
                         : f.base[static_cast<size_t>(a[f.scope[0]]) * g.variables()[f.scope[1]].domain + a[f.scope[1]]];
    phi[static_cast<int>(f.tmpl)] += v;
  }
  return phi;
}

}  // namespace hscrf
