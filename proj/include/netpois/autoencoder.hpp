#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "netpois/dense_net.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

struct AutoEncoderParams {
  std::vector<int> encoder_hidden;  // widths between input and bottleneck
  int bottleneck = 32;
  int epochs = 10;
  int batch_size = 256;
  double learning_rate = 1e-3;
};

/// Symmetric auto-encoder trained on reconstruction MSE. Inputs are expected
/// in [0, 1]; the decoder ends in a sigmoid, the bottleneck is tanh.
class AutoEncoder {
 public:
  Matrix encode(const Matrix& x) const;
  std::vector<double> encode(std::span<const double> row) const;
  Matrix reconstruct(const Matrix& x) const;
  double reconstruction_mse(const Matrix& x) const;

  int bottleneck() const { return bottleneck_; }
  /// Training-set MSE before training followed by the mean batch loss of
  /// every epoch.
  const std::vector<double>& loss_history() const { return history_; }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  nlohmann::json to_json() const;
  static AutoEncoder from_json(const nlohmann::json& j);

  friend AutoEncoder train_autoencoder(const Matrix&, const AutoEncoderParams&, std::uint64_t);

 private:
  DenseNet net_;
  std::size_t encoder_layers_ = 0;
  int bottleneck_ = 0;
  std::vector<double> history_;
};

AutoEncoder train_autoencoder(const Matrix& blocks, const AutoEncoderParams& params, std::uint64_t seed);

}  // namespace netpois
