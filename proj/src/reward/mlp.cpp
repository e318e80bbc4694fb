#include "cyclepref/reward/mlp.hpp"

#include <cmath>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::reward {

namespace {

MatrixXd activate(const MatrixXd& z, Activation a) {
  if (a == Activation::identity) return z;
  return z.array().tanh().matrix();
}

// Derivative expressed through the activation output.
MatrixXd activation_grad(const MatrixXd& out, Activation a) {
  if (a == Activation::identity) return MatrixXd::Ones(out.rows(), out.cols());
  return (1.0 - out.array().square()).matrix();
}

}  // namespace

Mlp::Mlp(const std::string& name, int input_dim, const std::vector<int>& widths, Activation hidden, Activation output,
         core::Rng& rng)
    : hidden_(hidden), output_(output) {
  if (input_dim < 1 || widths.empty()) throw InvalidInput("mlp '" + name + "' needs a positive input size and at least one layer");
  int in = input_dim;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    int out = widths[l];
    if (out < 1) throw InvalidInput("mlp '" + name + "' has a non-positive layer width");
    Dense d;
    d.name = name + "." + std::to_string(l);
    d.weight.resize(out, in);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index c = 0; c < d.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < d.weight.rows(); ++r) d.weight(r, c) = (2.0 * rng.uniform() - 1.0) * a;
    }
    d.bias = VectorXd::Zero(out);
    layers_.push_back(std::move(d));
    in = out;
  }
}

Mlp Mlp::from_layers(std::vector<Dense> layers, Activation hidden, Activation output) {
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l].in_dim() != layers[l - 1].out_dim()) throw InvalidInput("mlp layer shapes do not chain");
  }
  for (const auto& d : layers) {
    if (d.bias.size() != d.weight.rows()) throw InvalidInput("mlp bias size does not match weight rows");
  }
  Mlp m;
  m.layers_ = std::move(layers);
  m.hidden_ = hidden;
  m.output_ = output;
  return m;
}

MatrixXd Mlp::forward(const MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) throw InvalidInput("mlp input has the wrong feature size");
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& d = layers_[l];
    MatrixXd z = d.weight * h;
    z.colwise() += d.bias;
    MatrixXd out = activate(z, activation_for(l));
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(out);
    }
    h = std::move(out);
  }
  return h;
}

MatrixXd Mlp::backward(const Cache& cache, const MatrixXd& grad_output, std::vector<DenseGrad>& grads) const {
  if (grads.size() != layers_.size()) {
    grads.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      grads[l].weight = MatrixXd::Zero(layers_[l].weight.rows(), layers_[l].weight.cols());
      grads[l].bias = VectorXd::Zero(layers_[l].bias.size());
    }
  }
  MatrixXd g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    MatrixXd dz = (g.array() * activation_grad(cache.outputs[l], activation_for(l)).array()).matrix();
    grads[l].weight.noalias() += dz * cache.inputs[l].transpose();
    grads[l].bias += dz.rowwise().sum();
    g = layers_[l].weight.transpose() * dz;
  }
  return g;
}

}  // namespace cyclepref::reward
