#include <doctest.h>

#include <cmath>
#include <map>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/similarity/registry.hpp"

using namespace cyclepref;
using namespace cyclepref::mappings;
using core::Direction;
using core::Sample;

namespace {

MappingSpec spec(const BitGridWorld& w, Direction d, std::int64_t seed = 0) {
  MappingSpec s;
  s.model_id = w.model_id();
  s.direction = d;
  s.decoding.seed = seed;
  return s;
}

Bits bits_of(std::uint64_t v, int k) {
  Bits b(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) b[static_cast<std::size_t>(i)] = (v >> i) & 1;
  return b;
}

}  // namespace

TEST_SUITE("mappings") {
  TEST_CASE("perfect forward mapping asserts every bit") {
    BitGridBackend be;
    auto out = apply_mapping(be, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t), make_image(parse_bits("1010")));
    CHECK(out.text_value() == "{0:1,1:0,2:1,3:0}");
  }

  TEST_CASE("backward mapping fills unasserted bits with zeros") {
    BitGridBackend be;
    auto out = apply_mapping(be, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::t2i), Sample::text("{0:1}"));
    CHECK(bits_to_string(image_bits(out)) == "1000");
  }

  TEST_CASE("same input and seed give byte-identical outputs") {
    BitGridBackend be;
    auto s = spec({12, 0.5, 0.2, FillRule::seeded_uniform}, Direction::i2t, 9);
    auto x = make_image(parse_bits("101100111010"));
    CHECK(apply_mapping(be, s, x).payload() == apply_mapping(be, s, x).payload());
    auto g = spec({12, 0.5, 0.2, FillRule::seeded_uniform}, Direction::t2i, 9);
    auto y = Sample::text("{0:1,5:0}");
    CHECK(apply_mapping(be, g, y).payload() == apply_mapping(be, g, y).payload());
  }

  TEST_CASE("model ids round trip") {
    BitGridWorld w{10, 0.75, 0.125, FillRule::seeded_uniform};
    CHECK(w.model_id() == "bitgrid:k=10,rho=0.75,eps=0.125,fill=seeded_uniform");
    CHECK(BitGridWorld::from_model_id(w.model_id()) == w);
    CHECK_THROWS_AS(BitGridWorld::from_model_id("bitgrid:k=4,rho=2,eps=0,fill=zeros"), InvalidInput);
    CHECK_THROWS_AS(BitGridWorld::from_model_id("llava"), InvalidInput);
  }

  TEST_CASE("assertion parsing is strict") {
    CHECK(parse_assertions("{}", 4).empty());
    CHECK(parse_assertions("{1:0,3:1}", 4) == Assertions{{1, 0}, {3, 1}});
    CHECK_THROWS_AS(parse_assertions("{3:1,1:0}", 4), InvalidInput);
    CHECK_THROWS_AS(parse_assertions("{4:1}", 4), InvalidInput);
    CHECK_THROWS_AS(parse_assertions("{0:2}", 4), InvalidInput);
    CHECK_THROWS_AS(parse_assertions("0:1", 4), InvalidInput);
  }

  TEST_CASE("apply_mapping validates modality and decoding") {
    BitGridBackend be;
    auto f = spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t);
    CHECK_THROWS_AS(apply_mapping(be, f, Sample::text("{0:1}")), InvalidInput);
    f.decoding.max_tokens = 5000;
    CHECK_THROWS_AS(apply_mapping(be, f, make_image(parse_bits("1010"))), InvalidInput);
    auto g = spec({4, 1.0, 0.0, FillRule::zeros}, Direction::t2i);
    g.decoding.top_p = 0.0;
    CHECK_THROWS_AS(apply_mapping(be, g, Sample::text("{0:1}")), InvalidInput);
  }

  TEST_CASE("backend refuses malformed inputs with a generation error") {
    BitGridBackend be;
    CHECK_THROWS_AS(apply_mapping(be, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::t2i), Sample::text("a cat")), GenerationError);
    CHECK_THROWS_AS(apply_mapping(be, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t), make_image(parse_bits("10101"))),
                    GenerationError);
  }

  TEST_CASE("caption respects max_tokens") {
    BitGridBackend be;
    auto f = spec({8, 1.0, 0.0, FillRule::zeros}, Direction::i2t);
    f.decoding.max_tokens = 3;
    auto out = apply_mapping(be, f, make_image(parse_bits("11110000")));
    CHECK(parse_assertions(out.text_value(), 8).size() == 3);
  }

  TEST_CASE("four specs times three seeds give twelve candidates") {
    BitGridBackend be;
    std::vector<MappingSpec> specs;
    for (double rho : {1.0, 0.75, 0.5, 0.25}) specs.push_back(spec({16, rho, 0.0, FillRule::seeded_uniform}, Direction::t2i));
    auto pool = generate_candidate_pool(be, Sample::text("{0:1,3:0,7:1}"), specs, 3);
    CHECK(pool.complete());
    REQUIRE(pool.candidates.size() == 12);
    CHECK(pool.candidates[0].model_id == specs[0].model_id);
    CHECK(pool.candidates[1].seed == 1);
    CHECK(pool.candidates[3].model_id == specs[1].model_id);
  }

  TEST_CASE("identical deterministic specs collapse to one candidate") {
    BitGridBackend be;
    auto a = spec({6, 1.0, 0.0, FillRule::zeros}, Direction::i2t);
    auto pool = generate_candidate_pool(be, make_image(parse_bits("101010")), {a, a}, 1);
    CHECK(pool.candidates.size() == 1);
  }

  TEST_CASE("duplicate attribution goes to the smallest model id and seed") {
    BitGridBackend be;
    auto hi = spec({6, 1.0, 0.0, FillRule::zeros}, Direction::i2t, 5);
    hi.model_id = "bitgrid:k=6,rho=1,eps=0,fill=zeros";
    auto lo = hi;
    lo.model_id = "bitgrid:k=6,rho=1,eps=0,fill=seeded_uniform";
    auto pool = generate_candidate_pool(be, make_image(parse_bits("101010")), {hi, lo}, 2);
    REQUIRE(pool.candidates.size() == 1);
    CHECK(pool.candidates[0].model_id == lo.model_id);
    CHECK(pool.candidates[0].seed == 5);
  }

  TEST_CASE("failing specs produce a partial pool") {
    BitGridBackend be;
    auto good = spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t);
    auto bad = spec({5, 1.0, 0.0, FillRule::zeros}, Direction::i2t);
    auto pool = generate_candidate_pool(be, make_image(parse_bits("1010")), {good, bad}, 2);
    CHECK(pool.candidates.size() == 1);
    CHECK(pool.errors.size() == 2);
    CHECK_FALSE(pool.complete());
  }

  TEST_CASE("parallel pool generation matches sequential order") {
    BitGridBackend be;
    std::vector<MappingSpec> specs;
    for (double rho : {0.9, 0.6, 0.3}) specs.push_back(spec({12, rho, 0.1, FillRule::zeros}, Direction::i2t));
    auto x = make_image(parse_bits("110010101101"));
    auto a = generate_candidate_pool(be, x, specs, 5, 1);
    auto b = generate_candidate_pool(be, x, specs, 5, 4);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) CHECK(a.candidates[i].sample == b.candidates[i].sample);
  }

  TEST_CASE("mean assertion count tracks coverage") {
    BitGridBackend be;
    auto x = make_image(parse_bits("10110010"));
    double prev = 1e9;
    for (double rho : {1.0, 0.5, 0.1}) {
      double total = 0.0;
      for (int seed = 0; seed < 1000; ++seed) {
        auto out = apply_mapping(be, spec({8, rho, 0.0, FillRule::zeros}, Direction::i2t, seed), x);
        total += static_cast<double>(parse_assertions(out.text_value(), 8).size());
      }
      const double mean = total / 1000.0;
      const double se = std::sqrt(8 * rho * (1 - rho) / 1000.0);
      CHECK(std::abs(mean - 8 * rho) <= 4 * se + 1e-12);
      CHECK(mean < prev);
      prev = mean;
    }
  }

  TEST_CASE("enumeration of a deterministic world is a point mass") {
    auto t = enumerate_conditional({6, 1.0, 0.0, FillRule::zeros}, make_image(parse_bits("011001")));
    REQUIRE(t.entries.size() == 1);
    CHECK(t.entries[0].payload == "{0:0,1:1,2:1,3:0,4:0,5:1}");
    CHECK(t.entries[0].probability == 1.0);
  }

  TEST_CASE("empty caption probability at half coverage") {
    auto t = enumerate_conditional({2, 0.5, 0.0, FillRule::zeros}, make_image(parse_bits("11")));
    CHECK(t.probability_of("{}") == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(t.entries.size() == 4);
  }

  TEST_CASE("enumerated tables are normalized and agree with closed forms") {
    core::Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
      BitGridWorld w{1 + static_cast<int>(rng.below(8)), rng.uniform(), rng.uniform() * 0.5,
                     rng.bernoulli(0.5) ? FillRule::zeros : FillRule::seeded_uniform};
      auto x = make_image(bits_of(rng.next(), w.bits));
      auto tf = enumerate_conditional(w, x);
      CHECK(std::abs(tf.total() - 1.0) < 1e-12);
      for (const auto& e : tf.entries) {
        CHECK(forward_probability(w, image_bits(x), parse_assertions(e.payload, w.bits)) == doctest::Approx(e.probability).epsilon(1e-12));
      }
      auto y = make_text(parse_assertions(tf.entries.front().payload, w.bits));
      auto tg = enumerate_conditional(w, y);
      CHECK(std::abs(tg.total() - 1.0) < 1e-12);
      for (const auto& e : tg.entries) {
        CHECK(backward_probability(w, text_assertions(y, w.bits), parse_bits(e.payload)) ==
              doctest::Approx(e.probability).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("enumeration refuses worlds beyond the capacity limit") {
    BitGridWorld w{13, 0.5, 0.0, FillRule::zeros};
    CHECK_THROWS_AS(enumerate_conditional(w, make_image(bits_of(5, 13))), CapacityError);
  }

  TEST_CASE("enumerated marginals match sampling frequencies") {
    BitGridBackend be;
    for (auto d : {Direction::i2t, Direction::t2i}) {
      BitGridWorld w{3, 0.6, 0.2, FillRule::seeded_uniform};
      Sample input = d == Direction::i2t ? make_image(parse_bits("101")) : Sample::text("{0:1,2:0}");
      auto table = enumerate_conditional(w, input);
      std::map<std::string, int> counts;
      const int n = 10000;
      for (int seed = 0; seed < n; ++seed) counts[apply_mapping(be, spec(w, d, seed), input).payload()]++;
      for (const auto& e : table.entries) {
        const double sigma = std::sqrt(n * e.probability * (1 - e.probability));
        CHECK(std::abs(counts[e.payload] - n * e.probability) <= 3 * sigma + 1);
      }
      int covered = 0;
      for (const auto& [payload, c] : counts) covered += table.probability_of(payload) > 0 ? c : 0;
      CHECK(covered == n);
    }
  }

  TEST_CASE("perfect world reproduces every image through the cycle") {
    BitGridBackend be;
    BitGridWorld w{6, 1.0, 0.0, FillRule::zeros};
    auto metrics = similarity::MetricRegistry::with_builtins();
    for (std::uint64_t v = 0; v < 64; ++v) {
      auto x = make_image(bits_of(v, 6));
      auto y = apply_mapping(be, spec(w, Direction::i2t), x);
      auto xr = apply_mapping(be, spec(w, Direction::t2i), y);
      CHECK(metrics.sim(similarity::kBitgridHammingSim, x, xr) == 1.0);
    }
  }

  TEST_CASE("expected cycle score degrades with flips and improves with coverage") {
    BitGridBackend be;
    auto metrics = similarity::MetricRegistry::with_builtins();
    const int n = 1000;
    const double rhos[] = {0.25, 0.5, 1.0};
    const double epss[] = {0.0, 0.1, 0.3};
    double mean[3][3], se[3][3];
    auto x = make_image(parse_bits("1011001110"));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        BitGridWorld w{10, rhos[i], epss[j], FillRule::seeded_uniform};
        double s = 0, s2 = 0;
        for (int seed = 0; seed < n; ++seed) {
          auto y = apply_mapping(be, spec(w, Direction::i2t, seed), x);
          auto xr = apply_mapping(be, spec(w, Direction::t2i, seed + 7919), y);
          const double v = metrics.sim(similarity::kBitgridHammingSim, x, xr);
          s += v;
          s2 += v * v;
        }
        mean[i][j] = s / n;
        se[i][j] = std::sqrt((s2 / n - mean[i][j] * mean[i][j]) / n);
      }
    }
    auto tol = [&](int a, int b, int c, int d) { return 2 * std::hypot(se[a][b], se[c][d]); };
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j + 1 < 3; ++j) CHECK(mean[i][j] + tol(i, j, i, j + 1) >= mean[i][j + 1]);
    }
    for (int j = 0; j < 3; ++j) {
      for (int i = 0; i + 1 < 3; ++i) CHECK(mean[i + 1][j] + tol(i + 1, j, i, j) >= mean[i][j]);
    }
  }
}
