#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "netpois/matrix.hpp"

namespace netpois {

struct IsolationForestParams {
  int trees = 100;
  std::size_t subsample = 256;
};

/// Isolation Forest anomaly scorer. score() is 2^(-E[h(x)] / c(psi)), so
/// higher means more anomalous.
class IsolationForest {
 public:
  static IsolationForest fit(const Matrix& clean, const IsolationForestParams& params, std::uint64_t seed);

  double score(std::span<const double> row) const;
  std::vector<double> score(const Matrix& x) const;
  double expected_path_length(std::span<const double> row) const;

 private:
  struct Node {
    int feature = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;  // leaf population
  };
  using Tree = std::vector<Node>;

  std::vector<Tree> trees_;
  double normalizer_ = 1.0;
};

/// Average unsuccessful-search path length in a BST of n nodes.
double average_path_length(std::size_t n);

}  // namespace netpois
