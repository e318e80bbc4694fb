#include "cyclepref/reward/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"
#include "cyclepref/reward/losses.hpp"

namespace cyclepref::reward {

using nlohmann::json;

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::bradley_terry_i2t: return "bradley_terry_i2t";
    case Objective::bradley_terry_t2i: return "bradley_terry_t2i";
    case Objective::joint: return "joint";
    case Objective::mse_regression: return "mse_regression";
  }
  return "joint";
}

Objective parse_objective(std::string_view s) {
  if (s == "bradley_terry_i2t") return Objective::bradley_terry_i2t;
  if (s == "bradley_terry_t2i") return Objective::bradley_terry_t2i;
  if (s == "joint") return Objective::joint;
  if (s == "mse_regression" || s == "mse") return Objective::mse_regression;
  throw InvalidInput("unknown objective '" + std::string(s) + "'");
}

TrainConfig TrainConfig::desk(Objective o) {
  TrainConfig c;
  c.objective = o;
  c.batch_size = 64;
  c.learning_rate = 1e-3;
  c.epochs = 20;
  return c;
}

TrainConfig TrainConfig::paper(Objective o) {
  TrainConfig c;
  c.objective = o;
  c.batch_size = 2048;
  c.epochs = 2;
  c.lambda = 1.0;
  if (o == Objective::bradley_terry_t2i) {
    c.learning_rate = 3e-5;
    c.weight_decay = 1e-4;
  } else {
    c.learning_rate = 2e-5;
    c.weight_decay = 0.0;
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidInput("weight_decay must be >= 0");
  if (batch_size < 1) throw InvalidInput("batch_size must be positive");
  if (epochs < 0) throw InvalidInput("epochs must be >= 0");
}

json TrainConfig::to_json() const {
  return json{{"objective", to_string(objective)}, {"lambda", lambda},       {"learning_rate", learning_rate},
              {"weight_decay", weight_decay},      {"batch_size", batch_size}, {"epochs", epochs},
              {"seed", seed},                      {"beta1", beta1},           {"beta2", beta2},
              {"epsilon", epsilon}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.objective = parse_objective(j.at("objective").get<std::string>());
  c.lambda = j.value("lambda", c.lambda);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.validate();
  return c;
}

std::vector<std::string> check_train_data(const TrainConfig& cfg, const TrainData& data) {
  std::vector<std::string> v;
  const bool has_i2t = !data.i2t_train.empty();
  const bool has_t2i = !data.t2i_train.empty();
  switch (cfg.objective) {
    case Objective::joint:
      if (!has_i2t || !has_t2i) v.emplace_back("joint objective needs both an i2t and a t2i dataset");
      if (data.i2t_val.empty() && data.t2i_val.empty()) v.emplace_back("no validation pairs");
      break;
    case Objective::bradley_terry_i2t:
      if (!has_i2t || has_t2i) v.emplace_back("bradley_terry_i2t needs exactly one (i2t) dataset");
      if (data.i2t_val.empty()) v.emplace_back("no i2t validation pairs");
      break;
    case Objective::bradley_terry_t2i:
      if (!has_t2i || has_i2t) v.emplace_back("bradley_terry_t2i needs exactly one (t2i) dataset");
      if (data.t2i_val.empty()) v.emplace_back("no t2i validation pairs");
      break;
    case Objective::mse_regression:
      if (has_i2t == has_t2i) v.emplace_back("mse_regression needs exactly one dataset");
      if ((has_i2t && data.i2t_val.empty()) || (has_t2i && data.t2i_val.empty())) v.emplace_back("no validation pairs");
      break;
  }
  auto check_dir = [&](const std::vector<ComparisonPair>& ps, core::Direction d, const char* what) {
    for (const auto& p : ps) {
      if (p.direction != d) {
        v.emplace_back(std::string(what) + " contains a pair with the wrong direction");
        return;
      }
    }
  };
  check_dir(data.i2t_train, core::Direction::i2t, "i2t_train");
  check_dir(data.i2t_val, core::Direction::i2t, "i2t_val");
  check_dir(data.t2i_train, core::Direction::t2i, "t2i_train");
  check_dir(data.t2i_val, core::Direction::t2i, "t2i_val");
  return v;
}

namespace {

// Pairs as feature columns: preferred side and rejected side.
struct Encoded {
  MatrixXd img_p, txt_p, img_r, txt_r;
  VectorXd score_p, score_r;
  std::size_t size() const { return static_cast<std::size_t>(img_p.cols()); }
};

Encoded encode(const RewardModel& m, const std::vector<ComparisonPair>& pairs) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Encoded e{MatrixXd(m.image_feature_dim(), n), MatrixXd(m.text_feature_dim(), n), MatrixXd(m.image_feature_dim(), n),
            MatrixXd(m.text_feature_dim(), n),  VectorXd(n),                         VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    if (p.direction == core::Direction::i2t) {
      auto img = m.image_features(p.condition);
      e.img_p.col(i) = img;
      e.img_r.col(i) = img;
      e.txt_p.col(i) = m.text_features(p.preferred);
      e.txt_r.col(i) = m.text_features(p.rejected);
    } else {
      auto txt = m.text_features(p.condition);
      e.txt_p.col(i) = txt;
      e.txt_r.col(i) = txt;
      e.img_p.col(i) = m.image_features(p.preferred);
      e.img_r.col(i) = m.image_features(p.rejected);
    }
    e.score_p[i] = p.score_preferred;
    e.score_r[i] = p.score_rejected;
  }
  return e;
}

MatrixXd gather(const MatrixXd& m, const std::vector<std::size_t>& idx) {
  MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

VectorXd gather(const VectorXd& v, const std::vector<std::size_t>& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[static_cast<Eigen::Index>(idx[k])];
  return out;
}

double accuracy(const RewardModel& m, const Encoded& e) {
  if (e.size() == 0) return 0.0;
  VectorXd rp = m.forward(e.img_p, e.txt_p);
  VectorXd rr = m.forward(e.img_r, e.txt_r);
  double credit = 0.0;
  for (Eigen::Index i = 0; i < rp.size(); ++i) credit += rp[i] > rr[i] ? 1.0 : (rp[i] == rr[i] ? 0.5 : 0.0);
  return credit / static_cast<double>(rp.size());
}

// Shuffled index stream that reshuffles whenever it runs out.
class Stream {
 public:
  Stream(std::size_t n, core::Rng& rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle();
  }

  std::vector<std::size_t> take(std::size_t count) {
    std::vector<std::size_t> out;
    while (out.size() < count && !order_.empty()) {
      if (pos_ == order_.size()) shuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    pos_ = 0;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  core::Rng& rng_;
};

class AdamW {
 public:
  AdamW(const RewardModel& m, const TrainConfig& cfg) : cfg_(cfg), m_(m.zero_gradients()), v_(m.zero_gradients()) {}

  void step(RewardModel& model, const Gradients& g) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double lr = cfg_.learning_rate;
    auto groups = model.groups();
    for (std::size_t k = 0; k < groups.size(); ++k) {
      auto& p = *groups[k];
      if (p.frozen) continue;
      update(p.weight.array(), g[k].weight.array(), m_[k].weight.array(), v_[k].weight.array(), lr, bc1, bc2);
      update(p.bias.array(), g[k].bias.array(), m_[k].bias.array(), v_[k].bias.array(), lr, bc1, bc2);
    }
  }

 private:
  template <typename P, typename G, typename M, typename V>
  void update(P&& p, const G& g, M&& m, V&& v, double lr, double bc1, double bc2) {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.square();
    p -= lr * cfg_.weight_decay * p;
    p -= lr * (m / bc1) / ((v / bc2).sqrt() + cfg_.epsilon);
  }

  TrainConfig cfg_;
  Gradients m_;
  Gradients v_;
  std::size_t t_ = 0;
};

// Adds the BT gradient for one batch scaled by `weight`; returns the loss.
double bt_step(const RewardModel& model, const Encoded& e, const std::vector<std::size_t>& idx, double weight, Gradients& grads) {
  ForwardCache cp, cr;
  VectorXd rp = model.forward(gather(e.img_p, idx), gather(e.txt_p, idx), &cp);
  VectorXd rr = model.forward(gather(e.img_r, idx), gather(e.txt_r, idx), &cr);
  auto l = bt_loss(rp, rr);
  if (std::isfinite(l.loss) && weight != 0.0) {
    model.backward(cp, weight * l.d_preferred, grads);
    model.backward(cr, weight * l.d_rejected, grads);
  }
  return l.loss;
}

}  // namespace

double pair_reward(const RewardModel& model, const ComparisonPair& p, bool preferred) {
  const auto& cand = preferred ? p.preferred : p.rejected;
  return p.direction == core::Direction::i2t ? model.reward(p.condition, cand) : model.reward(cand, p.condition);
}

double preference_accuracy(const RewardModel& model, const std::vector<ComparisonPair>& pairs) {
  return accuracy(model, encode(model, pairs));
}

TrainResult train(const RewardModel& init, const TrainData& data, const TrainConfig& cfg) {
  cfg.validate();
  if (auto v = check_train_data(cfg, data); !v.empty()) throw InvalidInput("training data does not fit the objective: " + v.front());

  const auto i2t = encode(init, data.i2t_train);
  const auto t2i = encode(init, data.t2i_train);
  std::vector<ComparisonPair> val_pairs;
  if (cfg.objective != Objective::bradley_terry_t2i && !(cfg.objective == Objective::mse_regression && i2t.size() == 0)) {
    val_pairs.insert(val_pairs.end(), data.i2t_val.begin(), data.i2t_val.end());
  }
  if (cfg.objective != Objective::bradley_terry_i2t && !(cfg.objective == Objective::mse_regression && t2i.size() == 0)) {
    val_pairs.insert(val_pairs.end(), data.t2i_val.begin(), data.t2i_val.end());
  }
  const auto val = encode(init, val_pairs);

  // Regression points: both sides of every training pair.
  const Encoded& reg_src = i2t.size() > 0 ? i2t : t2i;
  MatrixXd reg_img(init.image_feature_dim(), 2 * static_cast<Eigen::Index>(reg_src.size()));
  MatrixXd reg_txt(init.text_feature_dim(), reg_img.cols());
  VectorXd reg_target(reg_img.cols());
  if (cfg.objective == Objective::mse_regression) {
    reg_img << reg_src.img_p, reg_src.img_r;
    reg_txt << reg_src.txt_p, reg_src.txt_r;
    reg_target << reg_src.score_p, reg_src.score_r;
  }

  const auto B = static_cast<std::size_t>(cfg.batch_size);
  auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  std::size_t steps_per_epoch = 0;
  switch (cfg.objective) {
    case Objective::bradley_terry_i2t: steps_per_epoch = ceil_div(i2t.size(), B); break;
    case Objective::bradley_terry_t2i: steps_per_epoch = ceil_div(t2i.size(), B); break;
    case Objective::joint: steps_per_epoch = ceil_div(std::max(i2t.size(), t2i.size()), B); break;
    case Objective::mse_regression: steps_per_epoch = ceil_div(static_cast<std::size_t>(reg_target.size()), B); break;
  }

  core::Rng rng(cfg.seed);
  Stream s_i2t(i2t.size(), rng);
  Stream s_t2i(t2i.size(), rng);
  Stream s_reg(static_cast<std::size_t>(reg_target.size()), rng);

  RewardModel model = init;
  AdamW opt(model, cfg);
  TrainResult result{init, init, {}, 0, accuracy(init, val)};
  std::size_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      ++step;
      Gradients grads = model.zero_gradients();
      double loss = 0.0;
      std::vector<std::size_t> batch_ids;
      switch (cfg.objective) {
        case Objective::bradley_terry_i2t: {
          batch_ids = s_i2t.take(B);
          loss = bt_step(model, i2t, batch_ids, 1.0, grads);
          break;
        }
        case Objective::bradley_terry_t2i: {
          batch_ids = s_t2i.take(B);
          loss = bt_step(model, t2i, batch_ids, 1.0, grads);
          break;
        }
        case Objective::joint: {
          auto ids_img = s_i2t.take(B);
          auto ids_text = s_t2i.take(B);
          const double l_img = bt_step(model, i2t, ids_img, cfg.lambda, grads);
          const double l_text = bt_step(model, t2i, ids_text, 1.0, grads);
          loss = joint_loss(l_text, l_img, cfg.lambda).loss;
          batch_ids = ids_img;
          batch_ids.insert(batch_ids.end(), ids_text.begin(), ids_text.end());
          break;
        }
        case Objective::mse_regression: {
          batch_ids = s_reg.take(B);
          ForwardCache cache;
          VectorXd r = model.forward(gather(reg_img, batch_ids), gather(reg_txt, batch_ids), &cache);
          auto l = mse_loss(r, gather(reg_target, batch_ids));
          loss = l.loss;
          if (std::isfinite(loss)) model.backward(cache, l.d_rewards, grads);
          break;
        }
      }
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("non-finite loss at step " + std::to_string(step), step, batch_ids);
      }
      opt.step(model, grads);
      const double acc = accuracy(model, val);
      result.log.push_back({step, epoch, loss, acc});
      if (acc > result.best_val_accuracy) {
        result.best_val_accuracy = acc;
        result.best_step = step;
        result.best = model;
      }
    }
  }
  result.last = std::move(model);
  return result;
}

}  // namespace cyclepref::reward
