#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "support.hpp"

using namespace hscrf;
using namespace testing;

namespace {

std::string dump_dataset(const GeneratedData& d) {
  std::string s;
  for (const auto& i : d.dataset.train) s += to_json(i).dump();
  for (const auto& i : d.dataset.test) s += to_json(i).dump();
  for (const auto& [id, t] : d.machine) s += id + nlohmann::json(t.seg_unary).dump() + nlohmann::json(t.supseg_unary).dump();
  s += votes_to_json(d.votes).dump() + d.preferences.dump() + d.report.dump();
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate_dataset(small_generator(6, 6, 3), 1);
  const auto b = generate_dataset(small_generator(6, 6, 3), 0);
  const auto c = generate_dataset(small_generator(6, 6, 4), 1);
  CHECK(dump_dataset(a) == dump_dataset(b));
  CHECK(dump_dataset(a) != dump_dataset(c));
}

TEST_CASE("written datasets are byte identical and loadable") {
  TempDir t1("gen1"), t2("gen2");
  const auto a = generate_dataset(small_generator(4, 4), 1);
  write_generated(a, t1.path);
  write_generated(generate_dataset(small_generator(4, 4), 1), t2.path);
  for (const auto& e : std::filesystem::recursive_directory_iterator(t1.path)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), t1.path);
    std::ifstream x(e.path()), y(t2.path / rel);
    std::stringstream sx, sy;
    sx << x.rdbuf();
    sy << y.rdbuf();
    CHECK(sx.str() == sy.str());
  }
  const auto ds = load_dataset(t1.path);
  CHECK(ds.train.size() == 4);
  CHECK(ds.test.size() == 4);
  const auto st = load_stores(t1.path, ds, 0);
  CHECK(st.machine.size() == 8);
  CHECK(st.human.has_preferences);
}

TEST_CASE("zero strength channels give one-hot unaries") {
  auto cfg = small_generator(5, 5);
  cfg.machine_strength = 0.0;
  const auto d = generate_dataset(cfg, 1);
  for (const auto& inst : d.dataset.test) {
    const auto& t = d.machine.at(inst.id);
    for (size_t i = 0; i < inst.segments.size(); ++i) {
      if (inst.segments[i].gt_label < 0) continue;
      for (int c = 0; c < 8; ++c) CHECK(t.seg_unary[i][c] == (c == inst.segments[i].gt_label ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("channel rows are distributions with the configured mean") {
  const auto ch = contextual_channel(8, synthetic_adjacency(), 0.3);
  const auto expect = expected_channel_matrix(ch);
  std::mt19937_64 rng(1);
  for (int g = 0; g < 8; ++g) {
    std::vector<double> mean(8, 0.0);
    const int n = 1250;
    for (int t = 0; t < n; ++t) {
      const auto p = apply_channel(g, ch, rng);
      double s = 0;
      for (int c = 0; c < 8; ++c) {
        s += p[c];
        mean[c] += p[c] / n;
        if (expect[g][c] == 0.0) CHECK(p[c] == 0.0);
      }
      CHECK(s == doctest::Approx(1.0));
    }
    for (int c = 0; c < 8; ++c) CHECK(std::abs(mean[c] - expect[g][c]) <= 0.03);
  }
}

TEST_CASE("contextual confusions stay on adjacent pairs") {
  const auto ch = contextual_channel(8, synthetic_adjacency(), 0.3);
  std::set<std::pair<int, int>> adj;
  for (auto [a, b] : synthetic_adjacency()) {
    adj.insert({a, b});
    adj.insert({b, a});
  }
  const auto d = generate_dataset(small_generator(1, 200), 1);
  std::mt19937_64 rng(2);
  int total = 0, wrong = 0;
  for (const auto& inst : d.dataset.test) {
    const auto draw = draw_channel(inst, ch, rng);
    for (size_t i = 0; i < inst.segments.size(); ++i) {
      const int g = inst.segments[i].gt_label;
      if (g < 0) continue;
      const int p = argmax(draw.seg[i]);
      ++total;
      if (p != g) {
        ++wrong;
        CHECK(adj.count({g, p}) == 1);
      }
    }
  }
  CHECK(total >= 5000);
  CHECK(std::abs(double(wrong) / total - 0.3) <= 0.03);
}

TEST_CASE("full strength spreads evenly over the confusable set") {
  const auto ch = visual_channel(5, {{0, 1, 2}, {3, 4}}, 1.0);
  std::mt19937_64 rng(3);
  std::vector<double> mean(5, 0.0);
  for (int t = 0; t < 400; ++t) {
    const auto p = apply_channel(0, ch, rng);
    for (int c = 0; c < 5; ++c) mean[c] += p[c] / 400;
  }
  CHECK(mean[0] == 0.0);
  CHECK(std::abs(mean[1] - 0.5) <= 0.05);
  CHECK(std::abs(mean[2] - 0.5) <= 0.05);
  CHECK(mean[3] == 0.0);
  CHECK_THROWS_AS(visual_channel(4, {{0, 1, 2}}, 0.5), UsageError);
}

TEST_CASE("votes") {
  std::mt19937_64 rng(4);
  CHECK(synth_votes({0, 0, 1, 0}, 10, rng) == std::vector<int>{0, 0, 10, 0});
  std::mt19937_64 r1(5), r2(5);
  const std::vector<double> dist = {0.5, 0.3, 0.2};
  CHECK(synth_votes(dist, 10, r1) == synth_votes(dist, 10, r2));
  std::vector<double> freq(3, 0.0);
  const int draws = 1000, n = 10;
  for (int t = 0; t < draws; ++t) {
    const auto v = synth_votes(dist, n, rng);
    for (int c = 0; c < 3; ++c) freq[c] += v[c];
  }
  for (int c = 0; c < 3; ++c) {
    const double p = freq[c] / (draws * n);
    const double sigma = std::sqrt(dist[c] * (1 - dist[c]) / (draws * n));
    CHECK(std::abs(p - dist[c]) <= 3 * sigma);
  }
}

TEST_CASE("generator configuration") {
  nlohmann::json j = {{"train", 3}, {"machine_strength", 0.1}};
  const auto c = generator_config_from_json(j, {}, "gen");
  CHECK(c.train == 3);
  CHECK(c.machine_strength == 0.1);
  CHECK_THROWS_AS(generator_config_from_json({{"trian", 3}}, {}, "gen"), UsageError);
  CHECK_THROWS_AS(generator_config_from_json({{"void_rate", 1.5}}, {}, "gen"), UsageError);
}

TEST_CASE("scene instances are consistent") {
  const auto d = generate_dataset(small_generator(10, 10), 1);
  const auto& ls = d.dataset.label_space;
  for (const auto& inst : d.dataset.test) {
    CHECK(validate_instance(inst, ls).empty());
    for (const auto& b : inst.gt_boxes) CHECK(ls.is_thing[b.class_id]);
  }
  CHECK(d.masks.size() >= 1);
}
