#include "cyclepref/reward/losses.hpp"

#include <cmath>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::reward {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

PairLoss bt_loss(const Eigen::VectorXd& rewards_preferred, const Eigen::VectorXd& rewards_rejected) {
  if (rewards_preferred.size() == 0) throw InvalidInput("bt_loss needs a non-empty batch");
  if (rewards_preferred.size() != rewards_rejected.size()) throw InvalidInput("bt_loss needs equal-length reward vectors");
  const auto n = rewards_preferred.size();
  PairLoss out;
  out.d_preferred.resize(n);
  out.d_rejected.resize(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = rewards_preferred[i] - rewards_rejected[i];
    total += softplus(-m);
    // d softplus(-m) / dm = -sigmoid(-m)
    const double g = -sigmoid(-m) / static_cast<double>(n);
    out.d_preferred[i] = g;
    out.d_rejected[i] = -g;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

RegressionLoss mse_loss(const Eigen::VectorXd& rewards, const Eigen::VectorXd& targets) {
  if (rewards.size() == 0) throw InvalidInput("mse_loss needs a non-empty batch");
  if (rewards.size() != targets.size()) throw InvalidInput("mse_loss needs equal-length vectors");
  const double n = static_cast<double>(rewards.size());
  Eigen::VectorXd diff = rewards - targets;
  return RegressionLoss{diff.squaredNorm() / n, 2.0 * diff / n};
}

JointLoss joint_loss(double loss_text, double loss_img, double lambda) {
  return JointLoss{loss_text + lambda * loss_img, 1.0, lambda};
}

}  // namespace cyclepref::reward
