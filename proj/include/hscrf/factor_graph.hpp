#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hscrf/common.hpp"
#include "json.hpp"

namespace hscrf {

enum class VariableKind { Segment, SuperSegment, Detection, ClassPresence, Scene };
inline constexpr int kNumVariableKinds = 5;

const char* kind_name(VariableKind k);

/// Factor templates of the holistic model. `Custom` carries unit weight and is
/// used for test graphs and loss augmentation; it is not a learned template.
enum class Template {
  SegUnary,
  SupSegUnary,
  PnConsistency,
  ClassUnary,
  ClassClassTree,
  DetUnary,
  DetClassConsistency,
  Shape,
  SupSegClassConsistency,
  SceneUnary,
  SceneClass,
  Custom,
};
inline constexpr int kNumTemplates = 11;

const char* template_name(Template t);
/// Throws UsageError for unknown names.
Template template_from_name(const std::string& name);

/// One non-negative weight per learned template.
struct WeightVector {
  std::array<double, kNumTemplates> w{};

  static WeightVector ones();
  double operator[](Template t) const { return t == Template::Custom ? 1.0 : w[static_cast<int>(t)]; }
  double& at(Template t) { return w.at(static_cast<int>(t)); }
  bool operator==(const WeightVector&) const = default;

  nlohmann::json to_json() const;
  static WeightVector from_json(const nlohmann::json& j);
  /// Short stable hex digest of the canonical text form.
  std::string digest() const;
};

struct Variable {
  VariableKind kind;
  int domain = 0;
  int ref = 0;  // index within its kind (segment index, detection index, class k, ...)
};

/// A factor over one or two variables. `base` is the unweighted log-score
/// table, row-major over the scope (first variable is the slow index).
struct Factor {
  Template tmpl = Template::Custom;
  int arity = 1;
  std::array<int, 2> scope{-1, -1};
  std::vector<double> base;
};

class FactorGraph {
 public:
  int add_variable(VariableKind kind, int domain, int ref);
  /// Adds a factor; validates the scope and table size and that every entry
  /// is finite. Throws std::invalid_argument.
  int add_unary(Template t, int var, std::vector<double> base);
  int add_pairwise(Template t, int var_a, int var_b, std::vector<double> base);

  void clamp(int var, int label);
  void set_weights(const WeightVector& w) { weights_ = w; }

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Factor>& factors() const { return factors_; }
  const std::vector<int>& clamps() const { return clamps_; }  // -1 = free
  const WeightVector& weights() const { return weights_; }
  int num_variables() const { return static_cast<int>(vars_.size()); }

  /// Weighted log-score of factor f at the given labels.
  double factor_value(int f, int la, int lb = 0) const;
  /// True when every variable is reachable from every other through factors.
  bool connected() const;

  nlohmann::json to_json() const;

 private:
  std::vector<Variable> vars_;
  std::vector<Factor> factors_;
  std::vector<int> clamps_;
  WeightVector weights_ = WeightVector::ones();
};

using Assignment = std::vector<int>;

struct InferenceResult {
  Assignment labels;
  double score = 0.0;
  bool converged = true;
  int iterations = 0;
  /// Per-variable max-marginal log-beliefs (filled by map_loopy only).
  std::vector<std::vector<double>> beliefs;
};

/// Sum of weighted factor log-scores. Throws std::out_of_range for labels
/// outside a domain and std::invalid_argument for a wrong-sized assignment.
double score(const FactorGraph& g, const Assignment& a);

/// Per-template sums of unweighted base entries at `a` (the joint feature map).
std::array<double, kNumTemplates> features(const FactorGraph& g, const Assignment& a);

struct GraphTooLarge : RuntimeError {
  using RuntimeError::RuntimeError;
};

inline constexpr double kMaxExactStates = 1e7;

/// Exhaustive MAP. Among assignments whose scores agree to 1e-12 relative,
/// returns the lexicographically smallest. Respects clamps.
InferenceResult map_exact(const FactorGraph& g);

struct LoopyOptions {
  double damping = 0.5;
  int max_iters = 200;
  double tol = 1e-5;
  bool polish = true;  // greedy coordinate ascent after decoding
};

/// Damped synchronous max-product in log space, followed by sequential
/// decoding along a breadth-first order (exact on forests) and optional
/// coordinate-ascent polishing. Deterministic; non-convergence is reported.
InferenceResult map_loopy(const FactorGraph& g, const LoopyOptions& opts = {});

}  // namespace hscrf
