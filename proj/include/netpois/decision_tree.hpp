#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "netpois/matrix.hpp"

namespace netpois {

enum class Criterion { gini, entropy };

struct ProxyTreeParams {
  Criterion criterion = Criterion::entropy;
  int max_depth = 0;  // 0 = grow until pure
  std::size_t min_samples_split = 2;
};

/// Unweighted CART classification tree fit on the adversary's data. Feature
/// importance is the total weighted impurity decrease a feature contributes,
/// normalized to sum to one. Ties between candidate splits go to the lower
/// feature index, then the lower threshold.
class ProxyTree {
 public:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double positive_fraction = 0.0;
    std::size_t samples = 0;
  };

  static ProxyTree fit(const Matrix& x, std::span<const int> y, const ProxyTreeParams& params = {});

  double predict_proba(std::span<const double> row) const;
  const std::vector<double>& importances() const { return importances_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t split_count() const;

 private:
  std::vector<Node> nodes_;
  std::vector<double> importances_;
};

double impurity(Criterion c, double positives, double total);

}  // namespace netpois
