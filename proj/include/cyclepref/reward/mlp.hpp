#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cyclepref/core/rng.hpp"

namespace cyclepref::reward {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { identity, tanh };

// One parameter group: y = W x + b.
struct Dense {
  std::string name;
  MatrixXd weight;  // out x in
  VectorXd bias;
  bool frozen = false;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

struct DenseGrad {
  MatrixXd weight;
  VectorXd bias;
};

// Stack of Dense layers. Batches are column-major: one sample per column.
class Mlp {
 public:
  struct Cache {
    std::vector<MatrixXd> inputs;   // input to each layer
    std::vector<MatrixXd> outputs;  // post-activation output of each layer
  };

  Mlp() = default;
  // Xavier-uniform weights, zero biases. Every layer but the last uses
  // `hidden`; the last uses `output`.
  Mlp(const std::string& name, int input_dim, const std::vector<int>& widths, Activation hidden, Activation output,
      core::Rng& rng);

  MatrixXd forward(const MatrixXd& x, Cache* cache = nullptr) const;

  // Accumulates parameter gradients into `grads` (resized on first use) and
  // returns the gradient with respect to the input.
  MatrixXd backward(const Cache& cache, const MatrixXd& grad_output, std::vector<DenseGrad>& grads) const;

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  // Rebuilds from explicit layers (checkpoint loading).
  static Mlp from_layers(std::vector<Dense> layers, Activation hidden, Activation output);

 private:
  Activation activation_for(std::size_t layer) const { return layer + 1 == layers_.size() ? output_ : hidden_; }

  std::vector<Dense> layers_;
  Activation hidden_ = Activation::tanh;
  Activation output_ = Activation::identity;
};

}  // namespace cyclepref::reward
