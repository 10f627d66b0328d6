#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "netpois/dense_net.hpp"
#include "netpois/gbdt.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

enum class ModelKind { gbdt, ffnn };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

/// Per-feature signed log1p followed by standardization with training
/// statistics.
class Standardizer {
 public:
  static Standardizer fit(const Matrix& x);
  /// Transposed into samples-as-columns layout for the network.
  Eigen::MatrixXd transform(const Matrix& x) const;
  void transform_row(std::span<const double> row, Eigen::Ref<Eigen::VectorXd> out) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);

 private:
  std::vector<double> mean_, scale_;
};

struct MlpParams {
  std::vector<int> hidden = {64, 32};
  int epochs = 30;
  int batch_size = 256;
  double learning_rate = 1e-3;
  bool class_weighted = true;
};

class MlpModel {
 public:
  static MlpModel fit(const Matrix& x, std::span<const int> y, const MlpParams& params, std::uint64_t seed);
  std::vector<double> predict_proba(const Matrix& x) const;
  double predict_proba(std::span<const double> row) const;

  const DenseNet& net() const { return net_; }
  nlohmann::json to_json() const;
  static MlpModel from_json(const nlohmann::json& j);

 private:
  Standardizer standardizer_;
  DenseNet net_;
};

/// Trained binary classifier; positive class (1) is the nontarget class.
class BinaryClassifier {
 public:
  ModelKind kind() const { return kind_; }
  const std::vector<std::string>& schema() const { return schema_; }
  std::uint64_t seed() const { return seed_; }
  /// Set when training saw a single class; predictions are then constant.
  bool degenerate() const { return constant_.has_value(); }

  double predict_proba(std::span<const double> row) const;
  std::vector<double> predict_proba(const Matrix& x) const;
  int predict(std::span<const double> row) const { return predict_proba(row) >= 0.5 ? 1 : 0; }
  std::vector<int> predict(const Matrix& x) const;

  const GbdtModel* gbdt() const { return std::get_if<GbdtModel>(&model_); }
  const MlpModel* mlp() const { return std::get_if<MlpModel>(&model_); }

  nlohmann::json to_json() const;
  static BinaryClassifier from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static BinaryClassifier load(const std::string& path);

  friend BinaryClassifier train_gbdt(const Matrix&, std::span<const int>, const GbdtParams&, std::uint64_t,
                                     std::vector<std::string>);
  friend BinaryClassifier train_mlp(const Matrix&, std::span<const int>, const MlpParams&, std::uint64_t,
                                    std::vector<std::string>);

 private:
  void check_width(std::size_t cols) const;

  ModelKind kind_ = ModelKind::gbdt;
  std::vector<std::string> schema_;
  std::uint64_t seed_ = 0;
  std::optional<double> constant_;
  std::variant<std::monostate, GbdtModel, MlpModel> model_;
};

/// `schema` names the input columns; when empty, columns are named f0..fN.
BinaryClassifier train_gbdt(const Matrix& x, std::span<const int> y, const GbdtParams& params, std::uint64_t seed,
                            std::vector<std::string> schema = {});
BinaryClassifier train_mlp(const Matrix& x, std::span<const int> y, const MlpParams& params, std::uint64_t seed,
                           std::vector<std::string> schema = {});

}  // namespace netpois
