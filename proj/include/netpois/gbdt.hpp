#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

struct GbdtParams {
  int n_trees = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  double l2 = 1.0;                 // leaf weight regularization
  double min_child_hessian = 1e-3;
  int max_bins = 255;
  double row_subsample = 1.0;      // fraction of rows per tree, drawn with the seed
  bool class_weighted = true;      // inverse class frequency
};

/// Gradient-boosted regression trees under logistic loss, grown depth-wise on
/// quantile histograms with second-order (Newton) leaf values.
class GbdtModel {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0.0;  // go left when value <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;      // leaf output, already scaled by the learning rate
  };
  using Tree = std::vector<Node>;

  static GbdtModel fit(const Matrix& x, std::span<const int> y, const GbdtParams& params, std::uint64_t seed);

  double raw_score(std::span<const double> row) const;
  /// Raw score using only the first `stages` trees.
  double raw_score(std::span<const double> row, std::size_t stages) const;
  double predict_proba(std::span<const double> row) const;

  std::size_t stage_count() const { return trees_.size(); }
  double base_score() const { return base_; }

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);

 private:
  double base_ = 0.0;
  std::vector<Tree> trees_;
};

std::vector<double> class_weights(std::span<const int> y, bool balanced);
double logistic_loss(std::span<const double> raw, std::span<const int> y, std::span<const double> weights);

}  // namespace netpois
