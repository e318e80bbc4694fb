#pragma once

#include <Eigen/Dense>

namespace cyclepref::reward {

// log(1 + e^x) without overflow.
double softplus(double x);
double sigmoid(double x);

struct PairLoss {
  double loss = 0.0;
  Eigen::VectorXd d_preferred;  // dL / d r_preferred
  Eigen::VectorXd d_rejected;   // dL / d r_rejected
};

// Bradley-Terry: mean over the batch of softplus(-(r_p - r_r)), which equals
// -log sigmoid(r_p - r_r). Throws InvalidInput on empty or unequal batches.
PairLoss bt_loss(const Eigen::VectorXd& rewards_preferred, const Eigen::VectorXd& rewards_rejected);

struct RegressionLoss {
  double loss = 0.0;
  Eigen::VectorXd d_rewards;
};

// Mean squared error against the cycle scores.
RegressionLoss mse_loss(const Eigen::VectorXd& rewards, const Eigen::VectorXd& targets);

struct JointLoss {
  double loss = 0.0;
  double d_text = 1.0;
  double d_img = 0.0;
};

// L_text + lambda * L_img. L_text is the text-conditioned (t2i pairs) loss,
// L_img the image-conditioned (i2t pairs) loss.
JointLoss joint_loss(double loss_text, double loss_img, double lambda);

}  // namespace cyclepref::reward
