#pragma once

#include <cstdint>
#include <vector>

#include "hscrf/factor_graph.hpp"
#include "hscrf/potentials.hpp"

namespace hscrf {

/// Per-kind weights of the Hamming loss.
struct LossWeights {
  std::array<double, kNumVariableKinds> w{1.0, 1.0, 1.0, 1.0, 1.0};
  double of(VariableKind k) const { return w[static_cast<int>(k)]; }
  static LossWeights zeros() { return {{0.0, 0.0, 0.0, 0.0, 0.0}}; }
};

struct LearnOptions {
  int epochs = 30;
  double eta0 = 0.1;  // step size eta_t = eta0 / sqrt(t)
  double lambda = 1e-3;
  LossWeights loss;
  std::uint64_t seed = 0;
  int jobs = 0;
  LoopyOptions inference;
};

/// Weighted count of mismatches. Variables whose gt is negative (void) are
/// skipped.
double hamming_loss(const FactorGraph& g, const Assignment& a, const Assignment& gt, const LossWeights& lw);

/// Copy of `g` with a unit-weight unary reward lw(kind) on every non-gt label.
FactorGraph loss_augmented_graph(const FactorGraph& g, const Assignment& gt, const LossWeights& lw);

/// argmax of score + loss, by loopy inference or enumeration.
InferenceResult loss_augmented_map(const FactorGraph& g, const Assignment& gt, const LossWeights& lw,
                                   bool exact = false, const LoopyOptions& opts = {});

/// Fills void entries of `gt` one at a time with the label that scores best
/// given every other label.
Assignment complete_ground_truth(const FactorGraph& g, const Assignment& gt);

struct LearnTrace {
  std::vector<double> objective;  // at the weights used in each epoch
  std::vector<double> best;       // best-so-far objective after each epoch
};

/// Projected subgradient descent on the L2-regularized structured hinge,
/// averaged over instances with each hinge divided by its loss-variable
/// count. Starts from all-ones and returns the best weights seen. Throws
/// RuntimeError when the objective stops being finite.
WeightVector learn_from_graphs(const std::vector<BuiltGraph>& graphs, const LearnOptions& opts,
                               LearnTrace* trace = nullptr);

/// Builds one graph per training instance under `cfg` and learns weights.
WeightVector learn_weights(const std::vector<SceneInstance>& train, const ComponentSources& cfg,
                           const ProviderStores& stores, const ClampOptions& clamps, const LearnOptions& opts,
                           LearnTrace* trace = nullptr);

}  // namespace hscrf
