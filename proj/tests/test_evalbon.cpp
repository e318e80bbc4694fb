#include <doctest.h>

#include <cmath>
#include <memory>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"
#include "cyclepref/evalbon/evalbon.hpp"

using namespace cyclepref;
using namespace cyclepref::evalbon;
using namespace cyclepref::mappings;

namespace {

std::vector<Sample> text_pool(int n, const std::string& tag = "c") {
  std::vector<Sample> pool;
  for (int i = 0; i < n; ++i) pool.push_back(Sample::text(tag + std::to_string(i)));
  return pool;
}

}  // namespace

TEST_SUITE("evalbon") {
  TEST_CASE("single candidate wins and empty pools are rejected") {
    auto pool = text_pool(1);
    CHECK(best_of_n_from_scores(pool, {-3.0}).winner == 0);
    CHECK_THROWS_AS(best_of_n_from_scores({}, {}), InvalidInput);
    CHECK_THROWS_AS(best_of_n_from_scores(pool, {1.0, 2.0}), InvalidInput);
  }

  TEST_CASE("ties break toward the smaller content hash") {
    auto pool = text_pool(3);
    auto r = best_of_n_from_scores(pool, {0.2, 0.9, 0.9});
    const std::size_t expect = pool[1].content_hash() < pool[2].content_hash() ? 1 : 2;
    CHECK(r.winner == expect);
    CHECK(r.ranking.back() == 0);
    CHECK(r.winner_sample.content_hash() == pool[expect].content_hash());
  }

  TEST_CASE("winner is invariant under increasing transforms") {
    core::Rng rng(31);
    for (int t = 0; t < 100; ++t) {
      const int n = 1 + static_cast<int>(rng.below(20));
      auto pool = text_pool(n, "p" + std::to_string(t) + "_");
      std::vector<double> s, affine, cubic;
      for (int i = 0; i < n; ++i) {
        s.push_back(static_cast<double>(rng.below(8)) - 4.0);
        affine.push_back(3.0 * s.back() + 7.0);
        cubic.push_back(s.back() * s.back() * s.back());
      }
      const auto w = best_of_n_from_scores(pool, s).winner;
      CHECK(best_of_n_from_scores(pool, affine).winner == w);
      CHECK(best_of_n_from_scores(pool, cubic).winner == w);
    }
  }

  TEST_CASE("winner score never drops over nested pools") {
    core::Rng rng(37);
    auto pool = text_pool(40);
    std::vector<double> s;
    for (int i = 0; i < 40; ++i) s.push_back(rng.uniform());
    double prev = -INFINITY;
    for (std::size_t n = 1; n <= pool.size(); ++n) {
      std::vector<Sample> sub(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
      std::vector<double> ss(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
      auto r = best_of_n_from_scores(sub, ss);
      CHECK(ss[r.winner] >= prev);
      prev = ss[r.winner];
    }
  }

  TEST_CASE("verifiers score pools and check modalities") {
    BitGridBackend backend;
    auto metrics = similarity::MetricRegistry::with_builtins();
    cyclescore::ScorerConfig cfg;
    cfg.backward.model_id = BitGridWorld{4, 1.0, 0.0, FillRule::zeros}.model_id();
    cfg.backward.direction = Direction::t2i;
    cfg.metric_id = similarity::kBitgridHammingSim;
    auto v = Verifier::raw_cycle(cfg, backend, metrics);
    CHECK(v.kind() == Verifier::Kind::raw_cycle);
    auto x = make_image(parse_bits("1010"));
    std::vector<Sample> pool{Sample::text("{0:1}"), Sample::text("{0:1,1:0,2:1,3:0}"), Sample::text("{}")};
    auto r = best_of_n(v, x, pool, 2);
    CHECK(r.winner == 1);
    CHECK(r.scores == std::vector<double>{0.75, 1.0, 0.5});
    CHECK_THROWS_AS(v.score(Sample::text("{}"), Sample::text("{}")), InvalidInput);

    reward::ModelConfig mc;
    mc.bits = 4;
    auto rm = Verifier::reward_model(std::make_shared<reward::RewardModel>(mc), Direction::i2t);
    CHECK(std::isfinite(rm.score(x, pool[0])));
    CHECK_THROWS_AS(rm.score(pool[0], x), InvalidInput);
  }

  TEST_CASE("pairwise accuracy worked examples") {
    CHECK(pairwise_accuracy({{"a", 3}, {"b", 2}, {"c", 1}}, {{"a", 3}, {"b", 1}, {"c", 2}}) == 2.0 / 3.0);
    CHECK(pairwise_accuracy({{"a", 3}, {"b", 2}, {"c", 1}}, {{"a", 30}, {"b", 20}, {"c", 10}}) == 1.0);
    CHECK(pairwise_accuracy({{"a", 0}, {"b", 0}, {"c", 0}}, {{"a", 3}, {"b", 1}, {"c", 2}}) == 0.5);
    CHECK_THROWS_AS(pairwise_accuracy({{"a", 1}}, {{"a", 1}}), UndefinedMetric);
    CHECK_THROWS_AS(pairwise_accuracy({{"a", 1}, {"b", 2}}, {{"a", 1}, {"b", 1}}), UndefinedMetric);
    CHECK_THROWS_AS(pairwise_accuracy({{"a", 1}, {"b", 2}}, {{"a", 1}, {"c", 2}}), InvalidInput);
  }

  TEST_CASE("agreement of a verifier with its own preferences is one") {
    core::Rng rng(41);
    auto score = [](const Sample& c, const Sample& y) {
      return static_cast<double>((c.content_hash().prefix64() ^ y.content_hash().prefix64()) % 1000000007);
    };
    auto v = Verifier::function(score, Direction::t2i);
    std::vector<LabeledPair> own, coin;
    for (int i = 0; i < 1000; ++i) {
      auto c = Sample::text("cond" + std::to_string(i));
      Bits ba(16), bb(16);
      for (auto& x : ba) x = rng.bernoulli(0.5);
      for (auto& x : bb) x = rng.bernoulli(0.5);
      auto a = make_image(ba);
      auto b = make_image(bb);
      own.push_back({c, a, b, score(c, a) >= score(c, b) ? Choice::a : Choice::b});
      coin.push_back({c, a, b, rng.bernoulli(0.5) ? Choice::a : Choice::b});
    }
    CHECK(agreement_rate(v, own) == 1.0);
    const double rate = agreement_rate(v, coin, 2);
    CHECK(rate >= 0.45);
    CHECK(rate <= 0.55);
  }

  TEST_CASE("trend report") {
    std::vector<TrendPoint> linear;
    for (int i = 0; i < 20; ++i) linear.push_back({static_cast<double>(i), 2.5 * i - 1.0});
    auto r = trend_report(linear);
    CHECK(std::abs(r.pearson_r - 1.0) < 1e-9);
    CHECK(r.slope == doctest::Approx(2.5));
    CHECK(r.intercept == doctest::Approx(-1.0));
    CHECK(r.table.size() == 20);

    core::Rng rng(43);
    std::vector<TrendPoint> noise;
    for (int i = 0; i < 1000; ++i) noise.push_back({rng.uniform(), rng.uniform()});
    CHECK(std::abs(trend_report(noise).pearson_r) < 0.1);

    CHECK_THROWS_AS(trend_report(std::vector<TrendPoint>{{0, 1}, {1, 2}}), UndefinedMetric);
    CHECK_THROWS_AS(trend_report(std::vector<TrendPoint>{{1, 1}, {1, 2}, {1, 3}}), UndefinedMetric);
  }

  TEST_CASE("trend report through a verifier") {
    auto v = Verifier::function([](const Sample&, const Sample& y) { return static_cast<double>(y.text_value().size()); },
                                Direction::i2t);
    std::vector<TrendItem> items;
    for (int i = 1; i <= 5; ++i) items.push_back({make_image(parse_bits("1")), Sample::text(std::string(i, 'x')), 10.0 * i});
    CHECK(std::abs(trend_report(v, items).pearson_r - 1.0) < 1e-9);
  }
}
