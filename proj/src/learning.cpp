#include "hscrf/learning.hpp"

#include <sstream>

namespace hscrf {

double hamming_loss(const FactorGraph& g, const Assignment& a, const Assignment& gt, const LossWeights& lw) {
  if (a.size() != gt.size() || static_cast<int>(a.size()) != g.num_variables())
    throw std::invalid_argument("hamming_loss: assignment sizes differ");
  double loss = 0.0;
  for (int v = 0; v < g.num_variables(); ++v)
    if (gt[v] >= 0 && a[v] != gt[v]) loss += lw.of(g.variables()[v].kind);
  return loss;
}

FactorGraph loss_augmented_graph(const FactorGraph& g, const Assignment& gt, const LossWeights& lw) {
  FactorGraph aug = g;
  for (int v = 0; v < g.num_variables(); ++v) {
    const double r = lw.of(g.variables()[v].kind);
    if (gt[v] < 0 || r == 0.0) continue;
    std::vector<double> t(g.variables()[v].domain, r);
    t[gt[v]] = 0.0;
    aug.add_unary(Template::Custom, v, std::move(t));
  }
  return aug;
}

InferenceResult loss_augmented_map(const FactorGraph& g, const Assignment& gt, const LossWeights& lw, bool exact,
                                   const LoopyOptions& opts) {
  const FactorGraph aug = loss_augmented_graph(g, gt, lw);
  InferenceResult r = exact ? map_exact(aug) : map_loopy(aug, opts);
  r.score = score(g, r.labels);
  return r;
}

namespace {

// Sum of weighted factor values touching v at label l, others fixed by a.
double local_score(const FactorGraph& g, const std::vector<std::vector<int>>& touching, const Assignment& a, int v,
                   int l) {
  double s = 0.0;
  for (int f : touching[v]) {
    const auto& fac = g.factors()[f];
    if (fac.arity == 1) {
      s += g.factor_value(f, l);
    } else {
      const int la = fac.scope[0] == v ? l : a[fac.scope[0]];
      const int lb = fac.scope[1] == v ? l : a[fac.scope[1]];
      s += g.factor_value(f, la, lb);
    }
  }
  return s;
}

std::vector<std::vector<int>> touching_factors(const FactorGraph& g) {
  std::vector<std::vector<int>> t(g.num_variables());
  for (int f = 0; f < static_cast<int>(g.factors().size()); ++f) {
    const auto& fac = g.factors()[f];
    t[fac.scope[0]].push_back(f);
    if (fac.arity == 2) t[fac.scope[1]].push_back(f);
  }
  return t;
}

}  // namespace

Assignment complete_ground_truth(const FactorGraph& g, const Assignment& gt) {
  Assignment a = gt;
  std::vector<int> open;
  for (int v = 0; v < g.num_variables(); ++v)
    if (a[v] < 0) {
      open.push_back(v);
      a[v] = g.clamps()[v] >= 0 ? g.clamps()[v] : 0;
    }
  if (open.empty()) return a;
  const auto touching = touching_factors(g);
  for (int v : open) {
    if (g.clamps()[v] >= 0) continue;
    int best = 0;
    double bs = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < g.variables()[v].domain; ++l) {
      const double s = local_score(g, touching, a, v, l);
      if (s > bs) {
        bs = s;
        best = l;
      }
    }
    a[v] = best;
  }
  return a;
}

WeightVector learn_from_graphs(const std::vector<BuiltGraph>& graphs, const LearnOptions& opts, LearnTrace* trace) {
  if (opts.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (opts.lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  const int n = static_cast<int>(graphs.size());

  struct Item {
    FactorGraph aug;
    double norm = 1.0;
  };
  std::vector<Item> items(n);
  parallel_for(n, opts.jobs, [&](int i) {
    const auto& bg = graphs[i];
    items[i].aug = loss_augmented_graph(bg.graph, bg.gt, opts.loss);
    double norm = 0.0;
    for (int v = 0; v < bg.graph.num_variables(); ++v)
      if (bg.gt[v] >= 0) norm += opts.loss.of(bg.graph.variables()[v].kind);
    items[i].norm = std::max(norm, 1.0);
  });

  WeightVector w = WeightVector::ones();
  WeightVector best = w;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<std::array<double, kNumTemplates>> grads(n);
  std::vector<double> hinges(n);

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    parallel_for(n, opts.jobs, [&](int i) {
      const BuiltGraph& bg = graphs[i];
      Item& it = items[i];
      it.aug.set_weights(w);
      FactorGraph plain = bg.graph;
      plain.set_weights(w);
      const Assignment gt = complete_ground_truth(plain, bg.gt);
      const InferenceResult r = map_loopy(it.aug, opts.inference);
      const double aug_score = score(it.aug, r.labels);
      const double gt_score = score(plain, gt);
      grads[i].fill(0.0);
      hinges[i] = 0.0;
      if (aug_score > gt_score) {
        hinges[i] = (aug_score - gt_score) / it.norm;
        const auto fa = features(plain, r.labels);
        const auto fg = features(plain, gt);
        for (int t = 0; t < kNumTemplates; ++t) grads[i][t] = (fa[t] - fg[t]) / it.norm;
      }
    });
    // Reduce in instance order so that the sum is reproducible.
    double obj = 0.0, sq = 0.0;
    std::array<double, kNumTemplates> grad{};
    for (int i = 0; i < n; ++i) {
      obj += hinges[i];
      for (int t = 0; t < kNumTemplates; ++t) grad[t] += grads[i][t];
    }
    if (n > 0) {
      obj /= n;
      for (double& gv : grad) gv /= n;
    }
    for (int t = 0; t < kNumTemplates; ++t) {
      sq += w.w[t] * w.w[t];
      grad[t] += opts.lambda * w.w[t];
    }
    obj += 0.5 * opts.lambda * sq;
    if (!std::isfinite(obj)) {
      std::ostringstream msg;
      msg << "learning diverged at epoch " << epoch << ": objective " << obj << ", weights";
      for (double x : w.w) msg << ' ' << x;
      throw RuntimeError(msg.str());
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = w;
    }
    if (trace) {
      trace->objective.push_back(obj);
      trace->best.push_back(best_obj);
    }
    const double eta = opts.eta0 / std::sqrt(double(epoch));
    for (int t = 0; t < kNumTemplates; ++t) w.w[t] = std::max(0.0, w.w[t] - eta * grad[t]);
  }
  return best;
}

WeightVector learn_weights(const std::vector<SceneInstance>& train, const ComponentSources& cfg,
                           const ProviderStores& stores, const ClampOptions& clamps, const LearnOptions& opts,
                           LearnTrace* trace) {
  if (train.empty()) throw UsageError("learning needs at least one training instance");
  std::vector<BuiltGraph> graphs(train.size());
  parallel_for(static_cast<int>(train.size()), opts.jobs, [&](int i) {
    graphs[i] = build_graph(train[i], stores.label_space, assemble_bundle(train[i], cfg, stores),
                            WeightVector::ones(), clamps);
  });
  return learn_from_graphs(graphs, opts, trace);
}

}  // namespace hscrf
