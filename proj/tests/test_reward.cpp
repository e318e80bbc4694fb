#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/reward/checkpoint.hpp"
#include "cyclepref/reward/losses.hpp"
#include "cyclepref/reward/train.hpp"

using namespace cyclepref;
using namespace cyclepref::reward;
using namespace cyclepref::mappings;
using core::Direction;

namespace {

constexpr int kBits = 6;

Bits random_bits(core::Rng& rng) {
  Bits b(kBits);
  for (auto& v : b) v = rng.bernoulli(0.5);
  return b;
}

Assertions caption_of(const Bits& b, int upto) {
  Assertions a;
  for (int i = 0; i < upto; ++i) a.push_back({i, b[static_cast<std::size_t>(i)]});
  return a;
}

ComparisonPair make_pair(Sample cond, Sample pref, Sample rej, Direction d) {
  return ComparisonPair{.condition = std::move(cond),
                        .preferred = std::move(pref),
                        .rejected = std::move(rej),
                        .direction = d,
                        .score_preferred = 1.0,
                        .score_rejected = 0.5,
                        .margin = 0.5,
                        .provenance = {},
                        .split = core::Split::train};
}

// Full captions beat truncated ones; images matching the text beat noisy ones.
TrainData toy_data(std::uint64_t seed, int n) {
  core::Rng rng(seed);
  TrainData d;
  for (int i = 0; i < n; ++i) {
    auto b = random_bits(rng);
    const int cut = static_cast<int>(rng.below(kBits));
    auto p = make_pair(make_image(b), make_text(caption_of(b, kBits)), make_text(caption_of(b, cut)), Direction::i2t);
    (i % 5 == 0 ? d.i2t_val : d.i2t_train).push_back(p);
    auto noisy = b;
    noisy[rng.below(kBits)] ^= 1;
    auto q = make_pair(make_text(caption_of(b, kBits)), make_image(b), make_image(noisy), Direction::t2i);
    (i % 5 == 0 ? d.t2i_val : d.t2i_train).push_back(q);
  }
  return d;
}

ModelConfig small_model(double freeze = 0.0) {
  ModelConfig m;
  m.bits = kBits;
  m.image_encoder_widths = {6, 5};
  m.text_encoder_widths = {6, 5};
  m.head_hidden_widths = {7, 5, 4, 3};
  m.freeze_fraction = freeze;
  m.init_seed = 9;
  return m;
}

TrainConfig quick(Objective o, int epochs = 3) {
  auto c = TrainConfig::desk(o);
  c.epochs = epochs;
  c.batch_size = 16;
  c.seed = 4;
  return c;
}

TrainData i2t_only(TrainData d) {
  d.t2i_train.clear();
  d.t2i_val.clear();
  return d;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

// Batch loss of the model on (image, text preferred / rejected) feature columns.
double batch_bt(const RewardModel& m, const MatrixXd& ip, const MatrixXd& tp, const MatrixXd& ir, const MatrixXd& tr) {
  return bt_loss(m.forward(ip, tp), m.forward(ir, tr)).loss;
}

}  // namespace

TEST_SUITE("reward") {
  TEST_CASE("Bradley-Terry loss values") {
    VectorXd z(1), one(1), twenty(1), zero(1);
    z << 0.3;
    one << 1.3;
    twenty << 20.3;
    zero << 0.3;
    CHECK(std::abs(bt_loss(z, zero).loss - std::log(2.0)) < 1e-9);
    CHECK(std::abs(bt_loss(one, zero).loss - std::log1p(std::exp(-1.0))) < 1e-9);
    CHECK(bt_loss(one, zero).loss == doctest::Approx(0.313262).epsilon(1e-6));
    CHECK(bt_loss(twenty, zero).loss < 1e-8);
    CHECK_THROWS_AS(bt_loss(VectorXd(0), VectorXd(0)), InvalidInput);
    CHECK_THROWS_AS(bt_loss(VectorXd::Zero(2), VectorXd::Zero(3)), InvalidInput);
  }

  TEST_CASE("Bradley-Terry loss is shift invariant and decreasing in the margin") {
    core::Rng rng(8);
    double prev = INFINITY;
    for (int i = -40; i <= 40; ++i) {
      VectorXd a(1), b(1);
      a << 0.25 * i;
      b << 0.0;
      const double l = bt_loss(a, b).loss;
      CHECK(l < prev);
      prev = l;
      const double c = 10.0 * (rng.uniform() - 0.5);
      VectorXd as(1), bs(1);
      as << a(0) + c;
      bs << c;
      CHECK(std::abs(bt_loss(as, bs).loss - l) < 1e-12);
    }
  }

  TEST_CASE("joint and regression loss values") {
    CHECK(joint_loss(0.5, 0.3, 1.0).loss == doctest::Approx(0.8));
    CHECK(joint_loss(0.5, 0.3, 0.0).loss == doctest::Approx(0.5));
    CHECK(joint_loss(0.2, 0.4, 2.0).loss == doctest::Approx(1.0));
    CHECK(joint_loss(0.2, 0.4, 2.0).d_img == 2.0);
    VectorXd r(2), t(2);
    r << 0, 0;
    t << 1, -1;
    CHECK(mse_loss(r, t).loss == doctest::Approx(1.0));
    CHECK(mse_loss(t, t).loss == 0.0);
    VectorXd one(1), half(1);
    one << 1.0;
    half << 0.5;
    CHECK(mse_loss(one, half).loss == doctest::Approx(0.25));
    CHECK_THROWS_AS(mse_loss(VectorXd(0), VectorXd(0)), InvalidInput);
  }

  TEST_CASE("loss gradients match central differences") {
    core::Rng rng(21);
    const double h = 1e-6;
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const int n = 1 + static_cast<int>(rng.below(6));
      VectorXd a(n), b(n), y(n);
      for (int i = 0; i < n; ++i) {
        a(i) = 4 * rng.uniform() - 2;
        b(i) = 4 * rng.uniform() - 2;
        y(i) = rng.uniform();
      }
      auto bt = bt_loss(a, b);
      auto mse = mse_loss(a, y);
      for (int i = 0; i < n; ++i) {
        VectorXd ap = a, am = a, bp = b, bm = b;
        ap(i) += h;
        am(i) -= h;
        bp(i) += h;
        bm(i) -= h;
        worst = std::max(worst, rel_err(bt.d_preferred(i), (bt_loss(ap, b).loss - bt_loss(am, b).loss) / (2 * h)));
        worst = std::max(worst, rel_err(bt.d_rejected(i), (bt_loss(a, bp).loss - bt_loss(a, bm).loss) / (2 * h)));
        worst = std::max(worst, rel_err(mse.d_rewards(i), (mse_loss(ap, y).loss - mse_loss(am, y).loss) / (2 * h)));
      }
      const double lt = rng.uniform(), li = rng.uniform(), lam = 3 * rng.uniform();
      auto j = joint_loss(lt, li, lam);
      worst = std::max(worst, rel_err(j.d_text, (joint_loss(lt + h, li, lam).loss - joint_loss(lt - h, li, lam).loss) / (2 * h)));
      worst = std::max(worst, rel_err(j.d_img, (joint_loss(lt, li + h, lam).loss - joint_loss(lt, li - h, lam).loss) / (2 * h)));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("model parameter gradients match central differences") {
    for (auto fusion : {Fusion::concat, Fusion::concat_product}) {
      auto cfg = small_model();
      cfg.fusion = fusion;
      RewardModel m(cfg);
      auto data = toy_data(2, 5);
      const auto n = static_cast<Eigen::Index>(data.i2t_train.size());
      MatrixXd ip(kBits, n), tp(2 * kBits, n), ir(kBits, n), tr(2 * kBits, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = data.i2t_train[static_cast<std::size_t>(i)];
        ip.col(i) = m.image_features(p.condition);
        ir.col(i) = m.image_features(p.condition);
        tp.col(i) = m.text_features(p.preferred);
        tr.col(i) = m.text_features(p.rejected);
      }
      ForwardCache cp, cr;
      auto loss = bt_loss(m.forward(ip, tp, &cp), m.forward(ir, tr, &cr));
      auto grads = m.zero_gradients();
      m.backward(cp, loss.d_preferred, grads);
      m.backward(cr, loss.d_rejected, grads);
      const auto analytic = RewardModel::flatten(grads);
      auto params = m.flat_parameters();
      REQUIRE(analytic.size() == params.size());
      const double h = 1e-6;
      double worst = 0.0;
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto pp = params, pm = params;
        pp[k] += h;
        pm[k] -= h;
        RewardModel a = m, b = m;
        a.set_flat_parameters(pp);
        b.set_flat_parameters(pm);
        const double numeric = (batch_bt(a, ip, tp, ir, tr) - batch_bt(b, ip, tp, ir, tr)) / (2 * h);
        if (std::abs(analytic[k]) + std::abs(numeric) > 1e-7) worst = std::max(worst, rel_err(analytic[k], numeric));
      }
      CHECK(worst < 1e-4);
    }
  }

  TEST_CASE("reward is finite and deterministic") {
    RewardModel m(small_model());
    core::Rng rng(1);
    for (int i = 0; i < 50; ++i) {
      auto b = random_bits(rng);
      auto x = make_image(b);
      auto y = make_text(caption_of(b, static_cast<int>(rng.below(kBits + 1))));
      const double r = m.reward(x, y);
      CHECK(std::isfinite(r));
      CHECK(m.reward(x, y) == r);
    }
    CHECK_THROWS_AS(m.reward(make_image(parse_bits("1")), Sample::text("{}")), InferenceError);
    CHECK_THROWS_AS(m.reward(make_image(Bits(kBits, 0)), Sample::text("not a caption")), InferenceError);
  }

  TEST_CASE("head depth and freeze arithmetic") {
    ModelConfig m;
    CHECK(m.head_layers() == 5);
    CHECK(m.freeze_fraction == 0.7);
    CHECK(m.frozen_layers(10) == 7);
    CHECK(m.frozen_layers(2) == 1);
    CHECK(m.frozen_layers(3) == 2);
    RewardModel model(m);
    int frozen = 0;
    for (const auto* g : model.groups()) frozen += g->frozen;
    CHECK(frozen == 2);
    CHECK(model.head().layers().size() == 5);
  }

  TEST_CASE("training leaves frozen groups bit-identical") {
    RewardModel init(small_model(0.7));
    auto result = train(init, toy_data(3, 60), quick(Objective::joint));
    auto before = init.groups();
    auto after = result.last.groups();
    bool any_trainable_changed = false;
    for (std::size_t g = 0; g < before.size(); ++g) {
      const bool same = before[g]->weight == after[g]->weight && before[g]->bias == after[g]->bias;
      if (before[g]->frozen) CHECK(same);
      else any_trainable_changed |= !same;
    }
    CHECK(any_trainable_changed);
  }

  TEST_CASE("full freeze trains only the head") {
    RewardModel init(small_model(1.0));
    auto result = train(init, toy_data(3, 60), quick(Objective::joint));
    const auto ni = init.image_encoder().layers().size() + init.text_encoder().layers().size();
    auto before = init.groups();
    auto after = result.last.groups();
    for (std::size_t g = 0; g < before.size(); ++g) {
      const bool same = before[g]->weight == after[g]->weight && before[g]->bias == after[g]->bias;
      CHECK(same == (g < ni));
    }
  }

  TEST_CASE("zero epochs is a no-op") {
    RewardModel init(small_model());
    auto result = train(init, i2t_only(toy_data(3, 20)), quick(Objective::bradley_terry_i2t, 0));
    CHECK(result.best.flat_parameters() == init.flat_parameters());
    CHECK(result.last.flat_parameters() == init.flat_parameters());
  }

  TEST_CASE("training is deterministic for a fixed seed") {
    RewardModel init(small_model(0.5));
    auto data = toy_data(5, 80);
    auto a = train(init, data, quick(Objective::joint));
    auto b = train(init, data, quick(Objective::joint));
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.best.flat_parameters() == b.best.flat_parameters());
  }

  TEST_CASE("training learns the toy ordering and flipping inverts it") {
    ModelConfig mc;
    mc.bits = kBits;
    mc.fusion = Fusion::concat_product;
    RewardModel init(mc);
    auto data = toy_data(6, 300);
    auto cfg = quick(Objective::joint, 30);
    auto result = train(init, data, cfg);
    const double acc = preference_accuracy(result.best, data.i2t_val);
    CHECK(acc >= 0.9);
    CHECK(preference_accuracy(result.best, data.t2i_val) >= 0.9);
    std::size_t exact_wins = 0;
    for (const auto& p : data.i2t_val) exact_wins += result.best.reward(p.condition, p.preferred) > result.best.reward(p.condition, Sample::text("{}"));
    CHECK(static_cast<double>(exact_wins) >= 0.9 * static_cast<double>(data.i2t_val.size()));

    auto flipped = data;
    for (auto* v : {&flipped.i2t_train, &flipped.t2i_train, &flipped.i2t_val, &flipped.t2i_val}) {
      for (auto& p : *v) {
        std::swap(p.preferred, p.rejected);
        std::swap(p.score_preferred, p.score_rejected);
        p.margin = p.score_preferred - p.score_rejected;
      }
    }
    auto inverted = train(init, flipped, cfg);
    CHECK(std::abs(preference_accuracy(inverted.best, data.i2t_val) - (1.0 - acc)) <= 0.05);
  }

  TEST_CASE("mse objective trains on scored candidates") {
    RewardModel init(small_model());
    auto data = i2t_only(toy_data(7, 100));
    auto result = train(init, data, quick(Objective::mse_regression, 5));
    CHECK(!result.log.empty());
    CHECK(std::isfinite(result.log.back().loss));
  }

  TEST_CASE("objective and data must agree") {
    RewardModel init(small_model());
    auto data = toy_data(3, 20);
    auto only_i2t = i2t_only(data);
    CHECK(!check_train_data(quick(Objective::joint), only_i2t).empty());
    CHECK_THROWS_AS(train(init, only_i2t, quick(Objective::joint)), InvalidInput);
    CHECK(!check_train_data(quick(Objective::bradley_terry_i2t), data).empty());
    CHECK(check_train_data(quick(Objective::bradley_terry_i2t), only_i2t).empty());
    auto wrong = only_i2t;
    wrong.i2t_train.front().direction = Direction::t2i;
    CHECK(!check_train_data(quick(Objective::bradley_terry_i2t), wrong).empty());
  }

  TEST_CASE("non-finite loss aborts with a diagnostic") {
    RewardModel init(small_model());
    auto params = init.flat_parameters();
    params.back() = std::nan("");
    init.set_flat_parameters(params);
    try {
      train(init, i2t_only(toy_data(3, 20)), quick(Objective::bradley_terry_i2t));
      FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
      CHECK(e.step() == 1);
      CHECK(!e.batch_ids().empty());
    }
  }

  TEST_CASE("checkpoint round trip is exact") {
    auto cfg = small_model(0.7);
    cfg.fusion = Fusion::concat_product;
    RewardModel init(cfg);
    auto trained = train(init, toy_data(3, 40), quick(Objective::joint, 2)).best;
    Checkpoint ck{trained, quick(Objective::joint, 2), {{"dataset_manifest_hash", "abc"}}};
    auto dir = std::filesystem::temp_directory_path() / "cyclepref_test_ckpt";
    std::filesystem::remove_all(dir);
    save_checkpoint(dir, ck);
    auto back = load_checkpoint(dir);
    CHECK(back.model.config() == cfg);
    CHECK(back.train_config == ck.train_config);
    CHECK(back.metadata.at("dataset_manifest_hash") == "abc");
    CHECK(back.model.flat_parameters() == trained.flat_parameters());
    auto groups = back.model.groups();
    CHECK(groups.front()->frozen);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("optimizer presets") {
    auto d = TrainConfig::desk();
    CHECK(d.batch_size == 64);
    CHECK(d.learning_rate == 1e-3);
    CHECK(d.epochs == 20);
    CHECK(d.lambda == 1.0);
    auto t = TrainConfig::paper(Objective::bradley_terry_t2i);
    CHECK(t.batch_size == 2048);
    CHECK(t.epochs == 2);
    CHECK(t.learning_rate == 3e-5);
    CHECK(t.weight_decay == 1e-4);
    auto i = TrainConfig::paper(Objective::bradley_terry_i2t);
    CHECK(i.learning_rate == 2e-5);
    CHECK(i.weight_decay == 0.0);
    CHECK(TrainConfig::paper(Objective::joint).learning_rate == 2e-5);
    CHECK(TrainConfig::from_json(t.to_json()) == t);
    CHECK(parse_objective(to_string(Objective::mse_regression)) == Objective::mse_regression);
    CHECK_THROWS_AS(parse_objective("hinge"), InvalidInput);
  }
}
