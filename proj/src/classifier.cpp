#include "netpois/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "netpois/common.hpp"

namespace netpois {

namespace {

constexpr std::string_view kFormat = "netpois-model";
constexpr int kFormatVersion = 1;

double signed_log1p(double v) { return v >= 0 ? std::log1p(v) : -std::log1p(-v); }

std::vector<std::string> default_schema(std::size_t cols, std::vector<std::string> schema) {
  if (!schema.empty()) {
    if (schema.size() != cols) throw ConfigError("schema length does not match feature count");
    return schema;
  }
  for (std::size_t i = 0; i < cols; ++i) schema.push_back("f" + std::to_string(i));
  return schema;
}

// Degenerate model for single-class training data.
std::optional<double> constant_probability(std::span<const int> y) {
  if (y.empty()) throw ConfigError("cannot train on an empty dataset");
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos != 0 && static_cast<std::size_t>(pos) != y.size()) return std::nullopt;
  return std::clamp(static_cast<double>(pos) / static_cast<double>(y.size()), 0.01, 0.99);
}

}  // namespace

std::string_view to_string(ModelKind k) { return k == ModelKind::gbdt ? "gb" : "ffnn"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "gb" || s == "gbdt") return ModelKind::gbdt;
  if (s == "ffnn" || s == "mlp") return ModelKind::ffnn;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean_.assign(x.cols(), 0.0);
  s.scale_.assign(x.cols(), 1.0);
  if (x.rows() == 0) return s;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    double sum = 0, sq = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double v = signed_log1p(x(i, f));
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(x.rows());
    const double mean = sum / n;
    const double var = std::max(0.0, sq / n - mean * mean);
    s.mean_[f] = mean;
    s.scale_[f] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::transform(const Matrix& x) const {
  Eigen::MatrixXd out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) transform_row(x.row(i), out.col(i));
  return out;
}

void Standardizer::transform_row(std::span<const double> row, Eigen::Ref<Eigen::VectorXd> out) const {
  for (std::size_t f = 0; f < row.size(); ++f) out(f) = (signed_log1p(row[f]) - mean_[f]) / scale_[f];
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean_}, {"scale", scale_}}; }

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  s.mean_ = j.at("mean").get<std::vector<double>>();
  s.scale_ = j.at("scale").get<std::vector<double>>();
  return s;
}

MlpModel MlpModel::fit(const Matrix& x, std::span<const int> y, const MlpParams& params, std::uint64_t seed) {
  if (params.epochs < 0 || params.batch_size < 1) throw ConfigError("mlp: invalid hyperparameters");
  MlpModel m;
  m.standardizer_ = Standardizer::fit(x);
  std::vector<int> sizes = {static_cast<int>(x.cols())};
  sizes.insert(sizes.end(), params.hidden.begin(), params.hidden.end());
  sizes.push_back(1);
  m.net_ = DenseNet(sizes, Activation::relu, Activation::identity, seed);

  const Eigen::MatrixXd data = m.standardizer_.transform(x);
  const auto w = class_weights(y, params.class_weighted);
  AdamOptimizer opt(m.net_, {params.learning_rate});
  Rng rng(derive_seed(seed, 22));
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  DenseNet::Gradient grad;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t b = std::min<std::size_t>(params.batch_size, order.size() - start);
      Eigen::MatrixXd bx(data.rows(), b), by(1, b);
      Eigen::VectorXd bw(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto i = order[start + k];
        bx.col(k) = data.col(i);
        by(0, k) = y[i];
        bw(k) = w[i];
      }
      m.net_.loss_and_gradient(bx, by, bw, LossKind::bce_logits, &grad);
      opt.step(m.net_, grad);
    }
  }
  return m;
}

std::vector<double> MlpModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  constexpr std::size_t kChunk = 4096;
  Eigen::MatrixXd chunk;
  for (std::size_t start = 0; start < x.rows(); start += kChunk) {
    const std::size_t b = std::min(kChunk, x.rows() - start);
    chunk.resize(x.cols(), b);
    for (std::size_t k = 0; k < b; ++k) standardizer_.transform_row(x.row(start + k), chunk.col(k));
    const Eigen::MatrixXd z = net_.forward(chunk);
    for (std::size_t k = 0; k < b; ++k) out[start + k] = 1.0 / (1.0 + std::exp(-z(0, k)));
  }
  return out;
}

double MlpModel::predict_proba(std::span<const double> row) const {
  Eigen::MatrixXd col(row.size(), 1);
  standardizer_.transform_row(row, col.col(0));
  return 1.0 / (1.0 + std::exp(-net_.forward(col)(0, 0)));
}

nlohmann::json MlpModel::to_json() const {
  return {{"standardizer", standardizer_.to_json()}, {"net", net_.to_json()}};
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
  MlpModel m;
  m.standardizer_ = Standardizer::from_json(j.at("standardizer"));
  m.net_ = DenseNet::from_json(j.at("net"));
  return m;
}

void BinaryClassifier::check_width(std::size_t cols) const {
  if (cols != schema_.size())
    throw ConfigError("input has " + std::to_string(cols) + " features, model expects " +
                      std::to_string(schema_.size()));
}

double BinaryClassifier::predict_proba(std::span<const double> row) const {
  check_width(row.size());
  if (constant_) return *constant_;
  if (auto* g = gbdt()) return g->predict_proba(row);
  return std::get<MlpModel>(model_).predict_proba(row);
}

std::vector<double> BinaryClassifier::predict_proba(const Matrix& x) const {
  if (x.rows() == 0) return {};
  check_width(x.cols());
  if (constant_) return std::vector<double>(x.rows(), *constant_);
  if (auto* m = mlp()) return m->predict_proba(x);
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = gbdt()->predict_proba(x.row(i));
  return out;
}

std::vector<int> BinaryClassifier::predict(const Matrix& x) const {
  const auto p = predict_proba(x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] >= 0.5 ? 1 : 0;
  return out;
}

nlohmann::json BinaryClassifier::to_json() const {
  nlohmann::json j = {{"format", kFormat},  {"version", kFormatVersion}, {"kind", to_string(kind_)},
                      {"schema", schema_},  {"seed", seed_},            {"degenerate", degenerate()}};
  if (constant_) j["constant"] = *constant_;
  if (auto* g = gbdt()) j["model"] = g->to_json();
  if (auto* m = mlp()) j["model"] = m->to_json();
  return j;
}

BinaryClassifier BinaryClassifier::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kFormat || j.value("version", 0) != kFormatVersion)
    throw FormatError("not a netpois model container (or unsupported version)");
  BinaryClassifier c;
  c.kind_ = parse_model_kind(j.at("kind").get<std::string>());
  c.schema_ = j.at("schema").get<std::vector<std::string>>();
  c.seed_ = j.at("seed").get<std::uint64_t>();
  if (j.contains("constant")) c.constant_ = j.at("constant").get<double>();
  if (j.contains("model")) {
    if (c.kind_ == ModelKind::gbdt) c.model_ = GbdtModel::from_json(j.at("model"));
    else c.model_ = MlpModel::from_json(j.at("model"));
  }
  return c;
}

void BinaryClassifier::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model to " + path);
  out << to_json().dump() << '\n';
}

BinaryClassifier BinaryClassifier::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read model from " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model container: ") + e.what());
  }
}

BinaryClassifier train_gbdt(const Matrix& x, std::span<const int> y, const GbdtParams& params, std::uint64_t seed,
                            std::vector<std::string> schema) {
  BinaryClassifier c;
  c.kind_ = ModelKind::gbdt;
  c.schema_ = default_schema(x.cols(), std::move(schema));
  c.seed_ = seed;
  c.constant_ = constant_probability(y);
  if (!c.constant_) c.model_ = GbdtModel::fit(x, y, params, seed);
  return c;
}

BinaryClassifier train_mlp(const Matrix& x, std::span<const int> y, const MlpParams& params, std::uint64_t seed,
                           std::vector<std::string> schema) {
  BinaryClassifier c;
  c.kind_ = ModelKind::ffnn;
  c.schema_ = default_schema(x.cols(), std::move(schema));
  c.seed_ = seed;
  c.constant_ = constant_probability(y);
  if (!c.constant_) c.model_ = MlpModel::fit(x, y, params, seed);
  return c;
}

}  // namespace netpois
