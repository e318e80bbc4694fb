#include <doctest.h>

#include <cmath>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/similarity/embedding.hpp"
#include "cyclepref/similarity/registry.hpp"

using namespace cyclepref;
using namespace cyclepref::similarity;
using core::Sample;
using mappings::make_image;
using mappings::parse_bits;

namespace {

Sample random_image(core::Rng& rng, int k) {
  mappings::Bits b(static_cast<std::size_t>(k));
  for (auto& x : b) x = rng.bernoulli(0.5) ? 1 : 0;
  return make_image(b);
}

Sample random_text(core::Rng& rng, int k) {
  mappings::Assertions a;
  for (int i = 0; i < k; ++i) {
    if (rng.bernoulli(0.5)) a.push_back({i, static_cast<std::uint8_t>(rng.bernoulli(0.5))});
  }
  return mappings::make_text(a);
}

// Embeds bit-grid images as +-1 vectors scaled by a per-call factor.
class ScaledEmbedding final : public EmbeddingBackend {
 public:
  explicit ScaledEmbedding(double scale) : scale_(scale) {}
  std::vector<std::vector<double>> embed(const std::string&, Modality, const std::vector<Sample>& inputs) const override {
    std::vector<std::vector<double>> out;
    for (const auto& s : inputs) {
      std::vector<double> v;
      for (auto b : mappings::image_bits(s)) v.push_back(scale_ * (b ? 1.0 : -1.0));
      out.push_back(v);
    }
    ++calls;
    return out;
  }
  mutable int calls = 0;

 private:
  double scale_;
};

}  // namespace

TEST_SUITE("similarity") {
  TEST_CASE("hamming similarity counts matching positions") {
    auto r = MetricRegistry::with_builtins();
    CHECK(r.sim(kBitgridHammingSim, make_image(parse_bits("1010")), make_image(parse_bits("1000"))) == 0.75);
  }

  TEST_CASE("text jaccard over assertion sets") {
    auto r = MetricRegistry::with_builtins();
    CHECK(r.sim(kBitgridJaccard, Sample::text("{0:1}"), Sample::text("{0:1,1:0}")) == 0.5);
    CHECK(r.sim(kBitgridJaccard, Sample::text("{}"), Sample::text("{}")) == 1.0);
  }

  TEST_CASE("other image metrics") {
    auto r = MetricRegistry::with_builtins();
    CHECK(r.sim(kBitgridL2Sim, make_image(parse_bits("1111")), make_image(parse_bits("0000"))) == doctest::Approx(0.0));
    CHECK(r.sim(kBitgridL2Sim, make_image(parse_bits("1111")), make_image(parse_bits("0111"))) == doctest::Approx(0.5));
    CHECK(r.sim(kBitgridOnesJaccard, make_image(parse_bits("1100")), make_image(parse_bits("0110"))) == doctest::Approx(1.0 / 3.0));
    CHECK(r.sim(kBitgridOnesJaccard, make_image(parse_bits("0000")), make_image(parse_bits("0000"))) == 1.0);
  }

  TEST_CASE("distance wrapper maps zero distance to one") {
    auto fn = distance_to_similarity([](const Sample&, const Sample&) { return 0.0; });
    auto x = make_image(parse_bits("1"));
    CHECK(fn(x, x) == 1.0);
    auto half = distance_to_similarity([](const Sample&, const Sample&) { return 2.0; }, 4.0);
    CHECK(half(x, x) == 0.5);
  }

  TEST_CASE("registration round trip and duplicate rejection") {
    MetricRegistry r;
    r.register_metric({"bitgrid-hamming-sim", Modality::image, 0.0, 1.0}, bitgrid_hamming_similarity);
    CHECK(r.contains("bitgrid-hamming-sim"));
    CHECK(r.sim("bitgrid-hamming-sim", make_image(parse_bits("11")), make_image(parse_bits("11"))) == 1.0);
    CHECK_THROWS_AS(r.register_metric({"bitgrid-hamming-sim", Modality::image, 0.0, 1.0}, bitgrid_hamming_similarity), RegistrationError);
    CHECK_THROWS_AS(r.register_metric({"bad", Modality::image, 1.0, 0.0}, bitgrid_hamming_similarity), RegistrationError);
    CHECK_THROWS_AS(r.register_metric({"inf", Modality::image, 0.0, INFINITY}, bitgrid_hamming_similarity), RegistrationError);
  }

  TEST_CASE("modality mismatch and unknown metric are invalid input") {
    auto r = MetricRegistry::with_builtins();
    CHECK_THROWS_AS(r.sim(kBitgridHammingSim, Sample::text("{}"), Sample::text("{}")), InvalidInput);
    CHECK_THROWS_AS(r.sim("nope", Sample::text("{}"), Sample::text("{}")), InvalidInput);
  }

  TEST_CASE("self similarity is maximal, metrics are symmetric and bounded") {
    auto r = MetricRegistry::with_builtins();
    core::Rng rng(11);
    for (const auto& id : r.ids()) {
      const auto& info = r.info(id);
      for (int t = 0; t < 1000; ++t) {
        const int k = 1 + static_cast<int>(rng.below(12));
        Sample a = info.modality == Modality::image ? random_image(rng, k) : random_text(rng, k);
        Sample b = info.modality == Modality::image ? random_image(rng, k) : random_text(rng, k);
        CHECK(r.sim(id, a, a) == info.hi);
        const double ab = r.sim(id, a, b);
        CHECK(std::abs(ab - r.sim(id, b, a)) <= 1e-9);
        CHECK(ab >= info.lo);
        CHECK(ab <= info.hi);
      }
    }
  }

  TEST_CASE("embedding cosine declares its range and ignores positive scaling") {
    MetricRegistry r;
    auto small = std::make_shared<ScaledEmbedding>(0.5);
    auto big = std::make_shared<ScaledEmbedding>(40.0);
    register_embedding_cosine(r, "cos-small", Modality::image, small);
    register_embedding_cosine(r, "cos-big", Modality::image, big);
    CHECK(r.info("cos-small").lo == -1.0);
    CHECK(r.info("cos-small").hi == 1.0);
    auto a = make_image(parse_bits("1100"));
    auto b = make_image(parse_bits("1010"));
    CHECK(r.sim("cos-small", a, b) == doctest::Approx(r.sim("cos-big", a, b)).epsilon(1e-12));
    CHECK(r.sim("cos-small", a, b) == doctest::Approx(0.0));
    CHECK(r.sim("cos-small", a, make_image(parse_bits("0011"))) == doctest::Approx(-1.0));
    const int before = small->calls;
    r.sim("cos-small", a, b);
    CHECK(small->calls == before);
  }

  TEST_CASE("cosine helper") {
    CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine({1, 2}, {2, 4}) == doctest::Approx(1.0));
    CHECK_THROWS(cosine({1, 0}, {1}));
  }
}
