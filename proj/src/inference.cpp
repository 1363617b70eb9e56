#include <algorithm>
#include <functional>
#include <deque>
#include <stdexcept>

#include "hscrf/factor_graph.hpp"

namespace hscrf {

namespace {

constexpr double kForbidden = -1e30;

bool improves(double candidate, double best) {
  return candidate > best + 1e-12 * std::max(1.0, std::abs(best));
}

}  // namespace

InferenceResult map_exact(const FactorGraph& g) {
  const int n = g.num_variables();
  const auto& vars = g.variables();
  const auto& clamps = g.clamps();
  double states = 1.0;
  for (int v = 0; v < n; ++v) states *= clamps[v] >= 0 ? 1.0 : vars[v].domain;
  if (states > kMaxExactStates)
    throw GraphTooLarge("map_exact: " + std::to_string(static_cast<long long>(states)) + " joint states exceed " +
                        std::to_string(static_cast<long long>(kMaxExactStates)));

  // Each factor is evaluated at the depth of the last variable in its scope.
  std::vector<std::vector<int>> closing(n);
  double constant = 0.0;
  for (int f = 0; f < static_cast<int>(g.factors().size()); ++f) {
    const auto& fac = g.factors()[f];
    const int last = fac.arity == 1 ? fac.scope[0] : std::max(fac.scope[0], fac.scope[1]);
    closing[last].push_back(f);
  }

  InferenceResult res;
  Assignment cur(n, 0), best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> partial(n + 1, 0.0);
  partial[0] = constant;

  // Iterative depth-first odometer in lexicographic order.
  int depth = 0;
  std::vector<int> next_label(n, 0);
  if (n == 0) {
    res.score = 0.0;
    return res;
  }
  while (depth >= 0) {
    if (depth == n) {
      if (best.empty() || improves(partial[n], best_score)) {
        best_score = partial[n];
        best = cur;
      }
      --depth;
      continue;
    }
    const int lo = clamps[depth] >= 0 ? clamps[depth] : 0;
    const int hi = clamps[depth] >= 0 ? clamps[depth] + 1 : vars[depth].domain;
    if (next_label[depth] < lo) next_label[depth] = lo;
    if (next_label[depth] >= hi) {
      next_label[depth] = 0;
      --depth;
      continue;
    }
    const int l = next_label[depth]++;
    cur[depth] = l;
    double s = partial[depth];
    for (int f : closing[depth]) {
      const auto& fac = g.factors()[f];
      s += fac.arity == 1 ? g.factor_value(f, cur[fac.scope[0]]) : g.factor_value(f, cur[fac.scope[0]], cur[fac.scope[1]]);
    }
    partial[depth + 1] = s;
    ++depth;
  }
  res.labels = best;
  res.score = score(g, best);
  res.iterations = 1;
  return res;
}

InferenceResult map_loopy(const FactorGraph& g, const LoopyOptions& opts) {
  if (!(opts.damping >= 0.0 && opts.damping < 1.0)) throw std::invalid_argument("damping must be in [0, 1)");
  if (opts.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");

  const int n = g.num_variables();
  const auto& vars = g.variables();
  const auto& clamps = g.clamps();
  const auto& fs = g.factors();

  // Unary evidence per variable; clamped variables forbid every other label.
  std::vector<std::vector<double>> unary(n);
  for (int v = 0; v < n; ++v) {
    unary[v].assign(vars[v].domain, 0.0);
    if (clamps[v] >= 0)
      for (int l = 0; l < vars[v].domain; ++l)
        if (l != clamps[v]) unary[v][l] = kForbidden;
  }
  struct Edge {
    int a, b, da, db;
    std::vector<double> table;  // weighted, row-major (a slow)
  };
  std::vector<Edge> edges;
  for (int f = 0; f < static_cast<int>(fs.size()); ++f) {
    const auto& fac = fs[f];
    const double w = g.weights()[fac.tmpl];
    if (fac.arity == 1) {
      auto& u = unary[fac.scope[0]];
      for (size_t l = 0; l < u.size(); ++l) u[l] += w * fac.base[l];
      continue;
    }
    Edge e{fac.scope[0], fac.scope[1], vars[fac.scope[0]].domain, vars[fac.scope[1]].domain, fac.base};
    for (double& x : e.table) x *= w;
    edges.push_back(std::move(e));
  }
  const int m = static_cast<int>(edges.size());

  // incident[v] = list of (edge, side) with side 0 when v is the edge's `a`.
  std::vector<std::vector<std::pair<int, int>>> incident(n);
  for (int e = 0; e < m; ++e) {
    incident[edges[e].a].push_back({e, 0});
    incident[edges[e].b].push_back({e, 1});
  }

  // msg[e][side]: factor-to-variable message towards that side's variable.
  std::vector<std::array<std::vector<double>, 2>> msg(m), fresh(m);
  for (int e = 0; e < m; ++e) {
    msg[e][0].assign(edges[e].da, 0.0);
    msg[e][1].assign(edges[e].db, 0.0);
    fresh[e] = msg[e];
  }
  std::vector<std::vector<double>> belief(n);
  auto compute_beliefs = [&] {
    for (int v = 0; v < n; ++v) {
      belief[v] = unary[v];
      for (auto [e, side] : incident[v]) {
        const auto& in = msg[e][side];
        for (size_t l = 0; l < in.size(); ++l) belief[v][l] += in[l];
      }
    }
  };

  InferenceResult res;
  res.converged = false;
  std::vector<double> to_a, to_b;
  for (int it = 1; it <= opts.max_iters; ++it) {
    compute_beliefs();
    double delta = 0.0;
    for (int e = 0; e < m; ++e) {
      const Edge& E = edges[e];
      // Variable-to-factor messages exclude this factor's own contribution.
      to_a.resize(E.da);
      to_b.resize(E.db);
      for (int l = 0; l < E.da; ++l) to_a[l] = belief[E.a][l] - msg[e][0][l];
      for (int l = 0; l < E.db; ++l) to_b[l] = belief[E.b][l] - msg[e][1][l];
      auto& out_a = fresh[e][0];
      auto& out_b = fresh[e][1];
      std::fill(out_a.begin(), out_a.end(), -std::numeric_limits<double>::infinity());
      std::fill(out_b.begin(), out_b.end(), -std::numeric_limits<double>::infinity());
      for (int la = 0; la < E.da; ++la) {
        const double* row = &E.table[static_cast<size_t>(la) * E.db];
        for (int lb = 0; lb < E.db; ++lb) {
          const double t = row[lb];
          out_a[la] = std::max(out_a[la], t + to_b[lb]);
          out_b[lb] = std::max(out_b[lb], t + to_a[la]);
        }
      }
      for (int side = 0; side < 2; ++side) {
        auto& out = fresh[e][side];
        const double mx = *std::max_element(out.begin(), out.end());
        for (size_t l = 0; l < out.size(); ++l) {
          const double normalized = out[l] - mx;
          const double damped = (1.0 - opts.damping) * normalized + opts.damping * msg[e][side][l];
          // Entries pinned by a clamp on the sending side stay at the floor; they
          // do not count towards convergence.
          if (normalized > kForbidden / 2) delta = std::max(delta, std::abs(damped - msg[e][side][l]));
          out[l] = damped;
        }
      }
    }
    std::swap(msg, fresh);
    res.iterations = it;
    if (delta < opts.tol) {
      res.converged = true;
      break;
    }
  }
  if (m == 0) res.converged = true;
  compute_beliefs();

  auto local_score = [&](int v, const Assignment& labels, std::vector<double>& local) {
    local = unary[v];
    for (auto [e, side] : incident[v]) {
      const Edge& E = edges[e];
      const int other = side == 0 ? E.b : E.a;
      for (int l = 0; l < vars[v].domain; ++l)
        local[l] += side == 0 ? E.table[static_cast<size_t>(l) * E.db + labels[other]]
                              : E.table[static_cast<size_t>(labels[other]) * E.db + l];
    }
  };

  // Sequential decoding along a breadth-first order of each connected
  // component, starting from `first`.
  auto decode = [&](int first) {
    Assignment labels(n, -1);
    std::vector<char> queued(n, 0);
    std::deque<int> queue;
    for (int k = 0; k < n; ++k) {
      const int root = (first + k) % n;
      if (queued[root]) continue;
      queued[root] = 1;
      queue.push_back(root);
      while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        std::vector<double> local = unary[v];
        for (auto [e, side] : incident[v]) {
          const Edge& E = edges[e];
          const int other = side == 0 ? E.b : E.a;
          if (labels[other] >= 0) {
            for (int l = 0; l < vars[v].domain; ++l)
              local[l] += side == 0 ? E.table[static_cast<size_t>(l) * E.db + labels[other]]
                                    : E.table[static_cast<size_t>(labels[other]) * E.db + l];
          } else {
            for (int l = 0; l < vars[v].domain; ++l) local[l] += msg[e][side][l];
          }
        }
        labels[v] = argmax(local);
        for (auto [e, side] : incident[v]) {
          const int other = side == 0 ? edges[e].b : edges[e].a;
          if (!queued[other]) {
            queued[other] = 1;
            queue.push_back(other);
          }
        }
      }
    }
    return labels;
  };

  // Coordinate ascent over single variables, then over both ends of each edge.
  std::vector<double> local, la_score, lb_score;
  auto polish = [&](Assignment& labels) {
    for (int sweep = 0; sweep < 50; ++sweep) {
      bool changed = false;
      for (int v = 0; v < n; ++v) {
        if (clamps[v] >= 0) continue;
        local_score(v, labels, local);
        const int best = argmax(local);
        if (best != labels[v] && improves(local[best], local[labels[v]])) {
          labels[v] = best;
          changed = true;
        }
      }
      for (int e = 0; e < m && !changed; ++e) {
        const Edge& E = edges[e];
        if (clamps[E.a] >= 0 || clamps[E.b] >= 0 || E.a == E.b) continue;
        // Contributions of everything except this edge.
        auto partial = [&](int v, int skip, std::vector<double>& out) {
          out = unary[v];
          for (auto [f, side] : incident[v]) {
            if (f == skip) continue;
            const Edge& F = edges[f];
            const int other = side == 0 ? F.b : F.a;
            if (other == E.a || other == E.b) {
              // A parallel edge between the same pair is scored jointly below.
              continue;
            }
            for (int l = 0; l < vars[v].domain; ++l)
              out[l] += side == 0 ? F.table[static_cast<size_t>(l) * F.db + labels[other]]
                                  : F.table[static_cast<size_t>(labels[other]) * F.db + l];
          }
        };
        partial(E.a, e, la_score);
        partial(E.b, e, lb_score);
        auto pair_value = [&](int a, int b) {
          double s = la_score[a] + lb_score[b];
          for (auto [f, side] : incident[E.a]) {
            const Edge& F = edges[f];
            if (side == 0 && F.b == E.b) s += F.table[static_cast<size_t>(a) * F.db + b];
            if (side == 1 && F.a == E.b) s += F.table[static_cast<size_t>(b) * F.db + a];
          }
          return s;
        };
        const double cur = pair_value(labels[E.a], labels[E.b]);
        double best = cur;
        int ba = labels[E.a], bb = labels[E.b];
        for (int a = 0; a < E.da; ++a)
          for (int b = 0; b < E.db; ++b) {
            const double s = pair_value(a, b);
            if (s > best) {
              best = s;
              ba = a;
              bb = b;
            }
          }
        if (improves(best, cur)) {
          labels[E.a] = ba;
          labels[E.b] = bb;
          changed = true;
        }
      }
      if (!changed) break;
    }
  };

  // Decode from a few roots and keep the best polished assignment. Roots are
  // variable 0 plus the variables whose beliefs are least decided.
  std::vector<int> roots = {0};
  if (n > 1) {
    std::vector<std::pair<double, int>> margin;
    for (int v = 1; v < n; ++v) {
      if (belief[v].size() < 2 || clamps[v] >= 0) continue;
      std::vector<double> b = belief[v];
      std::partial_sort(b.begin(), b.begin() + 2, b.end(), std::greater<double>());
      margin.push_back({b[0] - b[1], v});
    }
    std::sort(margin.begin(), margin.end());
    for (size_t k = 0; k < margin.size() && roots.size() < 4; ++k) roots.push_back(margin[k].second);
  }
  Assignment labels;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int root : roots) {
    Assignment cand = decode(root);
    if (opts.polish) polish(cand);
    const double s = n == 0 ? 0.0 : score(g, cand);
    if (labels.empty() || improves(s, best_score)) {
      labels = std::move(cand);
      best_score = s;
    }
  }

  for (int v = 0; v < n; ++v) {
    const double mx = *std::max_element(belief[v].begin(), belief[v].end());
    for (double& b : belief[v]) b = std::max(b - mx, kForbidden);
  }
  res.beliefs = std::move(belief);
  res.labels = std::move(labels);
  res.score = score(g, res.labels);
  return res;
}

}  // namespace hscrf
