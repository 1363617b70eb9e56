#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "support.hpp"

using namespace hscrf;
using namespace testing;

TEST_CASE("single variable takes the argmax") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 3, 0);
  g.add_unary(Template::Custom, 0, {0.2, 0.7, 0.1});
  CHECK(map_exact(g).labels == Assignment{1});
  CHECK(map_loopy(g).labels == Assignment{1});
}

TEST_CASE("symmetric agreement ties resolve lexicographically") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 2, 0);
  g.add_variable(VariableKind::Segment, 2, 1);
  g.add_unary(Template::Custom, 0, {0.0, 0.0});
  g.add_unary(Template::Custom, 1, {0.0, 0.0});
  g.add_pairwise(Template::Custom, 0, 1, {1.0, 0.0, 0.0, 1.0});
  const auto r = map_exact(g);
  CHECK(r.labels == Assignment{0, 0});
  CHECK(r.score == 1.0);
}

TEST_CASE("score of an empty graph is zero") {
  FactorGraph g;
  CHECK(score(g, {}) == 0.0);
}

TEST_CASE("score of a single unary") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 3, 0);
  g.add_unary(Template::SegUnary, 0, {0.5, -1.0, 2.5});
  CHECK(score(g, {2}) == 2.5);
}

TEST_CASE("score equals hand summation on random graphs") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    auto g = random_graph(rng, 8, 4);
    Assignment a(g.num_variables());
    for (int i = 0; i < g.num_variables(); ++i) a[i] = static_cast<int>(rng() % g.variables()[i].domain);
    CHECK(score(g, a) == doctest::Approx(hand_score(g, a)).epsilon(1e-12));
  }
}

TEST_CASE("score rejects bad assignments") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 2, 0);
  CHECK_THROWS_AS(score(g, {2}), std::out_of_range);
  CHECK_THROWS_AS(score(g, {0, 0}), std::invalid_argument);
}

TEST_CASE("factor validation") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 2, 0);
  CHECK_THROWS_AS(g.add_unary(Template::Custom, 0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(g.add_unary(Template::Custom, 0, {1.0, NAN}), std::invalid_argument);
  CHECK_THROWS_AS(g.add_pairwise(Template::Custom, 0, 0, {0, 0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(g.clamp(0, 2), std::invalid_argument);
}

TEST_CASE("exact MAP matches brute force on random graphs") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 100; ++t) {
    auto g = random_graph(rng, 10, 4);
    std::vector<int> oracle;
    const double best = brute_force_best(g, &oracle);
    const auto r = map_exact(g);
    CHECK(r.score == doctest::Approx(best).epsilon(1e-9));
    CHECK(hand_score(g, r.labels) == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("loopy MAP is exact on trees") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto g = random_graph(rng, 10, 4, true);
    const auto r = map_loopy(g);
    CHECK(r.score == doctest::Approx(map_exact(g).score).epsilon(1e-9));
  }
}

TEST_CASE("loopy MAP stays close to the optimum") {
  std::mt19937_64 rng(77);
  int close = 0;
  for (int t = 0; t < 100; ++t) {
    auto g = random_graph(rng, 10, 4);
    const double best = brute_force_best(g);
    const double got = map_loopy(g).score;
    CHECK(got <= best + 1e-9);
    if (got >= best - 0.02 * std::abs(best)) ++close;
  }
  CHECK(close >= 95);
}

TEST_CASE("clamps are respected by both solvers") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    auto g = random_graph(rng, 8, 3);
    g.clamp(0, 1);
    CHECK(map_exact(g).labels[0] == 1);
    CHECK(map_loopy(g).labels[0] == 1);
    CHECK(map_exact(g).score == doctest::Approx(brute_force_best(g)));
  }
}

TEST_CASE("exact MAP refuses huge state spaces") {
  FactorGraph g;
  for (int i = 0; i < 30; ++i) g.add_variable(VariableKind::Segment, 4, i);
  CHECK_THROWS_AS(map_exact(g), GraphTooLarge);
}

TEST_CASE("MAP is invariant to global weight scaling") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    FactorGraph g;
    const int n = 6;
    for (int i = 0; i < n; ++i) g.add_variable(VariableKind::Segment, 3, i);
    std::normal_distribution<double> v(0, 1);
    for (int i = 0; i < n; ++i) g.add_unary(Template::SegUnary, i, {v(rng), v(rng), v(rng)});
    for (int i = 1; i < n; ++i) {
      std::vector<double> t9(9);
      for (auto& x : t9) x = v(rng);
      g.add_pairwise(Template::PnConsistency, i - 1, i, t9);
    }
    WeightVector w = WeightVector::ones();
    w.at(Template::SegUnary) = 0.7;
    w.at(Template::PnConsistency) = 1.3;
    g.set_weights(w);
    const auto a = map_exact(g).labels;
    for (auto& x : w.w) x *= 3.5;
    g.set_weights(w);
    CHECK(map_exact(g).labels == a);
  }
}

TEST_CASE("connectivity") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 2, 0);
  g.add_variable(VariableKind::Segment, 2, 1);
  g.add_unary(Template::Custom, 0, {0, 0});
  CHECK_FALSE(g.connected());
  g.add_pairwise(Template::Custom, 0, 1, {0, 0, 0, 0});
  CHECK(g.connected());
}

TEST_CASE("weight vector json round trip and validation") {
  WeightVector w = WeightVector::ones();
  w.at(Template::Shape) = 0.25;
  CHECK(WeightVector::from_json(w.to_json()) == w);
  CHECK(WeightVector::from_json(w.to_json()).digest() == w.digest());
  auto j = w.to_json();
  j["shape"] = -1.0;
  CHECK_THROWS(WeightVector::from_json(j));
}

TEST_CASE("features sum base entries per template") {
  FactorGraph g;
  g.add_variable(VariableKind::Segment, 2, 0);
  g.add_variable(VariableKind::SuperSegment, 2, 0);
  g.add_unary(Template::SegUnary, 0, {1.0, 2.0});
  g.add_unary(Template::SupSegUnary, 1, {3.0, 4.0});
  g.add_pairwise(Template::PnConsistency, 0, 1, {1, 0, 0, 1});
  WeightVector w = WeightVector::ones();
  w.at(Template::SegUnary) = 2.0;
  g.set_weights(w);
  const auto f = features(g, {1, 1});
  CHECK(f[static_cast<int>(Template::SegUnary)] == 2.0);
  CHECK(f[static_cast<int>(Template::SupSegUnary)] == 4.0);
  CHECK(f[static_cast<int>(Template::PnConsistency)] == 1.0);
  CHECK(score(g, {1, 1}) == 2.0 * 2.0 + 4.0 + 1.0);
}
