#pragma once

// Fully connected network used by the FFNN classifier and the auto-encoder.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "json.hpp"

namespace netpois {

enum class Activation { identity, relu, sigmoid, tanh };

/// Binary cross-entropy applied to a single identity-activated logit, or mean
/// squared error against the target matrix.
enum class LossKind { bce_logits, mse };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::relu;
};

class DenseNet {
 public:
  DenseNet() = default;
  /// `sizes` lists layer widths from input to output; hidden layers use
  /// `hidden`, the last layer `output`. He-style initialization from `seed`.
  DenseNet(const std::vector<int>& sizes, Activation hidden, Activation output, std::uint64_t seed);

  /// Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  /// Output of layer `upto` (exclusive end), e.g. the encoder half.
  Eigen::MatrixXd forward_prefix(const Eigen::MatrixXd& x, std::size_t upto) const;

  struct Gradient {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
  };

  /// Mean (sample-weighted) loss over the batch and its gradient.
  double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target, const Eigen::VectorXd& weights,
                           LossKind loss, Gradient* grad) const;

  std::size_t parameter_count() const;
  double& parameter(std::size_t flat_index);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& j);

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const DenseNet& net, AdamParams params);
  void step(DenseNet& net, const DenseNet::Gradient& grad);

 private:
  AdamParams params_;
  long t_ = 0;
  DenseNet::Gradient m_, v_;
};

}  // namespace netpois
