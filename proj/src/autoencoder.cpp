#include "netpois/autoencoder.hpp"

#include <algorithm>
#include <numeric>

#include "netpois/common.hpp"

namespace netpois {

namespace {

Eigen::MatrixXd columns(const Matrix& x, std::size_t start, std::size_t count) {
  Eigen::MatrixXd out(x.cols(), count);
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t f = 0; f < x.cols(); ++f) out(f, k) = x(start + k, f);
  return out;
}

Matrix rows_of(const Eigen::MatrixXd& m) {
  Matrix out(m.cols(), m.rows());
  for (Eigen::Index k = 0; k < m.cols(); ++k)
    for (Eigen::Index f = 0; f < m.rows(); ++f) out(k, f) = m(f, k);
  return out;
}

constexpr std::size_t kChunk = 2048;

}  // namespace

AutoEncoder train_autoencoder(const Matrix& blocks, const AutoEncoderParams& params, std::uint64_t seed) {
  if (params.bottleneck < 1 || params.epochs < 0 || params.batch_size < 1)
    throw ConfigError("auto-encoder: invalid hyperparameters");
  if (blocks.rows() == 0) throw ConfigError("auto-encoder: no training blocks");

  AutoEncoder ae;
  ae.bottleneck_ = params.bottleneck;
  const int in = static_cast<int>(blocks.cols());
  std::vector<int> sizes = {in};
  sizes.insert(sizes.end(), params.encoder_hidden.begin(), params.encoder_hidden.end());
  sizes.push_back(params.bottleneck);
  ae.encoder_layers_ = sizes.size() - 1;
  for (auto it = params.encoder_hidden.rbegin(); it != params.encoder_hidden.rend(); ++it) sizes.push_back(*it);
  sizes.push_back(in);
  ae.net_ = DenseNet(sizes, Activation::relu, Activation::sigmoid, seed);
  ae.net_.layers()[ae.encoder_layers_ - 1].activation = Activation::tanh;

  ae.history_.push_back(ae.reconstruction_mse(blocks));
  AdamOptimizer opt(ae.net_, {params.learning_rate});
  Rng rng(derive_seed(seed, 31));
  std::vector<std::size_t> order(blocks.rows());
  std::iota(order.begin(), order.end(), 0);
  DenseNet::Gradient grad;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t b = std::min<std::size_t>(params.batch_size, order.size() - start);
      Eigen::MatrixXd bx(blocks.cols(), b);
      for (std::size_t k = 0; k < b; ++k) {
        auto row = blocks.row(order[start + k]);
        for (std::size_t f = 0; f < row.size(); ++f) bx(f, k) = row[f];
      }
      total += ae.net_.loss_and_gradient(bx, bx, Eigen::VectorXd::Ones(b), LossKind::mse, &grad) * b;
      opt.step(ae.net_, grad);
    }
    ae.history_.push_back(total / static_cast<double>(order.size()));
  }
  return ae;
}

Matrix AutoEncoder::encode(const Matrix& x) const {
  Matrix out(x.rows(), static_cast<std::size_t>(bottleneck_));
  for (std::size_t start = 0; start < x.rows(); start += kChunk) {
    const std::size_t b = std::min(kChunk, x.rows() - start);
    const Eigen::MatrixXd z = net_.forward_prefix(columns(x, start, b), encoder_layers_);
    for (std::size_t k = 0; k < b; ++k)
      for (Eigen::Index f = 0; f < z.rows(); ++f) out(start + k, f) = z(f, k);
  }
  return out;
}

std::vector<double> AutoEncoder::encode(std::span<const double> row) const {
  Eigen::MatrixXd col = Eigen::Map<const Eigen::VectorXd>(row.data(), row.size());
  const Eigen::MatrixXd z = net_.forward_prefix(col, encoder_layers_);
  return {z.data(), z.data() + z.size()};
}

Matrix AutoEncoder::reconstruct(const Matrix& x) const { return rows_of(net_.forward(columns(x, 0, x.rows()))); }

double AutoEncoder::reconstruction_mse(const Matrix& x) const {
  if (x.rows() == 0) return 0.0;
  double total = 0;
  for (std::size_t start = 0; start < x.rows(); start += kChunk) {
    const std::size_t b = std::min(kChunk, x.rows() - start);
    const Eigen::MatrixXd in = columns(x, start, b);
    total += (net_.forward(in) - in).squaredNorm();
  }
  return total / static_cast<double>(x.rows() * x.cols());
}

nlohmann::json AutoEncoder::to_json() const {
  return {{"format", "netpois-autoencoder"}, {"version", 1},         {"bottleneck", bottleneck_},
          {"encoder_layers", encoder_layers_}, {"history", history_}, {"net", net_.to_json()}};
}

AutoEncoder AutoEncoder::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "netpois-autoencoder" || j.value("version", 0) != 1)
    throw FormatError("not a netpois auto-encoder container (or unsupported version)");
  AutoEncoder ae;
  ae.bottleneck_ = j.at("bottleneck").get<int>();
  ae.encoder_layers_ = j.at("encoder_layers").get<std::size_t>();
  ae.history_ = j.at("history").get<std::vector<double>>();
  ae.net_ = DenseNet::from_json(j.at("net"));
  return ae;
}

}  // namespace netpois
