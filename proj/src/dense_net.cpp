#include "netpois/dense_net.hpp"

#include <cmath>
#include <random>

#include "netpois/common.hpp"

namespace netpois {

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
  }
}

// d(activation)/dz expressed through the activation output `a`.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& out, Activation a) {
  switch (a) {
    case Activation::identity: return Eigen::MatrixXd::Ones(out.rows(), out.cols());
    case Activation::relu: return (out.array() > 0.0).cast<double>().matrix();
    case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    case Activation::tanh: return (1.0 - out.array().square()).matrix();
  }
  return {};
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw FormatError("unknown activation '" + s + "'");
}

}  // namespace

DenseNet::DenseNet(const std::vector<int>& sizes, Activation hidden, Activation output, std::uint64_t seed) {
  if (sizes.size() < 2) throw ConfigError("network needs at least an input and an output size");
  Rng rng(derive_seed(seed, 21));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] < 1 || sizes[l + 1] < 1) throw ConfigError("layer widths must be positive");
    DenseLayer layer;
    const bool last = l + 2 == sizes.size();
    layer.activation = last ? output : hidden;
    const double scale = std::sqrt((layer.activation == Activation::relu ? 2.0 : 1.0) / sizes[l]);
    std::normal_distribution<double> normal(0.0, scale);
    layer.weight.resize(sizes[l + 1], sizes[l]);
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = normal(rng);
    layer.bias = Eigen::VectorXd::Zero(sizes[l + 1]);
    layers_.push_back(std::move(layer));
  }
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& x) const { return forward_prefix(x, layers_.size()); }

Eigen::MatrixXd DenseNet::forward_prefix(const Eigen::MatrixXd& x, std::size_t upto) const {
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < upto && l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    activate(z, layers_[l].activation);
    a = std::move(z);
  }
  return a;
}

double DenseNet::loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                                   const Eigen::VectorXd& weights, LossKind loss, Gradient* grad) const {
  const std::size_t L = layers_.size();
  std::vector<Eigen::MatrixXd> acts(L + 1);
  acts[0] = x;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = layers_[l].weight * acts[l];
    z.colwise() += layers_[l].bias;
    activate(z, layers_[l].activation);
    acts[l + 1] = std::move(z);
  }
  const Eigen::MatrixXd& out = acts[L];
  const double wsum = weights.sum();
  if (!(wsum > 0)) throw ConfigError("sample weights must have a positive sum");

  // delta = dLoss/dz for the last layer
  Eigen::MatrixXd delta;
  double value = 0.0;
  if (loss == LossKind::bce_logits) {
    if (layers_.back().activation != Activation::identity || out.rows() != 1)
      throw ConfigError("logit loss needs a single identity output");
    delta.resize(1, out.cols());
    for (Eigen::Index i = 0; i < out.cols(); ++i) {
      const double z = out(0, i), yv = target(0, i);
      const double lse = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      value += weights(i) * (lse - yv * z);
      const double p = 1.0 / (1.0 + std::exp(-z));
      delta(0, i) = weights(i) * (p - yv) / wsum;
    }
  } else {
    const Eigen::MatrixXd diff = out - target;
    const double per_dim = 1.0 / static_cast<double>(out.rows());
    for (Eigen::Index i = 0; i < out.cols(); ++i) value += weights(i) * diff.col(i).squaredNorm() * per_dim;
    delta = (2.0 * per_dim / wsum) * (diff * weights.asDiagonal());
    delta = delta.cwiseProduct(activation_slope(out, layers_.back().activation));
  }
  value /= wsum;
  if (!grad) return value;

  grad->weight.resize(L);
  grad->bias.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    grad->weight[l] = delta * acts[l].transpose();
    grad->bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    delta = (layers_[l].weight.transpose() * delta).cwiseProduct(activation_slope(acts[l], layers_[l - 1].activation));
  }
  return value;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

double& DenseNet::parameter(std::size_t flat_index) {
  for (auto& l : layers_) {
    if (flat_index < static_cast<std::size_t>(l.weight.size())) return l.weight.data()[flat_index];
    flat_index -= l.weight.size();
    if (flat_index < static_cast<std::size_t>(l.bias.size())) return l.bias.data()[flat_index];
    flat_index -= l.bias.size();
  }
  throw std::out_of_range("parameter index out of range");
}

nlohmann::json DenseNet::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    std::vector<double> w(l.weight.data(), l.weight.data() + l.weight.size());
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"activation", activation_name(l.activation)},
                      {"weight", w},
                      {"bias", b}});
  }
  return layers;
}

DenseNet DenseNet::from_json(const nlohmann::json& j) {
  DenseNet net;
  for (const auto& jl : j) {
    DenseLayer l;
    const auto rows = jl.at("rows").get<Eigen::Index>(), cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
      throw FormatError("layer shape mismatch");
    l.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    l.activation = parse_activation(jl.at("activation").get<std::string>());
    net.layers_.push_back(std::move(l));
  }
  return net;
}

AdamOptimizer::AdamOptimizer(const DenseNet& net, AdamParams params) : params_(params) {
  for (const auto& l : net.layers()) {
    m_.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    v_.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    m_.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    v_.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
}

void AdamOptimizer::step(DenseNet& net, const DenseNet::Gradient& grad) {
  ++t_;
  const double b1 = params_.beta1, b2 = params_.beta2;
  const double lr_t =
      params_.learning_rate * std::sqrt(1.0 - std::pow(b2, static_cast<double>(t_))) / (1.0 - std::pow(b1, static_cast<double>(t_)));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    param.array() -= lr_t * m.array() / (v.array().sqrt() + params_.epsilon);
  };
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, m_.weight[l], v_.weight[l], grad.weight[l]);
    update(layers[l].bias, m_.bias[l], v_.bias[l], grad.bias[l]);
  }
}

}  // namespace netpois
