#include "netpois/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netpois/common.hpp"

namespace netpois {

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  constexpr double kEulerGamma = 0.5772156649015329;
  return 2.0 * (std::log(m - 1.0) + kEulerGamma) - 2.0 * (m - 1.0) / m;
}

namespace {

struct TreeBuilder {
  const Matrix& x;
  Rng& rng;
  int height_limit;

  int build(std::vector<std::size_t>& idx, int depth, std::vector<std::vector<double>>& ranges,
            std::vector<int>& feats, std::vector<std::tuple<int, double, int, int, std::size_t>>& out) {
    const int id = static_cast<int>(out.size());
    out.emplace_back(-1, 0.0, -1, -1, idx.size());
    if (depth >= height_limit || idx.size() <= 1) return id;

    feats.clear();
    for (std::size_t f = 0; f < x.cols(); ++f) {
      double lo = x(idx[0], f), hi = lo;
      for (auto i : idx) {
        lo = std::min(lo, x(i, f));
        hi = std::max(hi, x(i, f));
      }
      ranges[f] = {lo, hi};
      if (hi > lo) feats.push_back(static_cast<int>(f));
    }
    if (feats.empty()) return id;
    const int f = feats[std::uniform_int_distribution<std::size_t>(0, feats.size() - 1)(rng)];
    double split = std::uniform_real_distribution<double>(ranges[f][0], ranges[f][1])(rng);
    if (!(split > ranges[f][0])) split = ranges[f][0] + (ranges[f][1] - ranges[f][0]) / 2;
    std::vector<std::size_t> left, right;
    for (auto i : idx) (x(i, f) < split ? left : right).push_back(i);
    std::get<0>(out[id]) = f;
    std::get<1>(out[id]) = split;
    const int l = build(left, depth + 1, ranges, feats, out);
    const int r = build(right, depth + 1, ranges, feats, out);
    std::get<2>(out[id]) = l;
    std::get<3>(out[id]) = r;
    return id;
  }
};

}  // namespace

IsolationForest IsolationForest::fit(const Matrix& clean, const IsolationForestParams& params, std::uint64_t seed) {
  if (params.trees < 1 || params.subsample < 1) throw ConfigError("isolation forest: invalid parameters");
  if (clean.rows() == 0) throw ConfigError("isolation forest: no training rows");
  IsolationForest forest;
  const std::size_t psi = std::min(params.subsample, clean.rows());
  forest.normalizer_ = std::max(average_path_length(psi), 1e-12);
  const int limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(psi, 2)))));
  Rng rng(derive_seed(seed, 41));
  std::vector<std::size_t> all(clean.rows());
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<double>> ranges(clean.cols());
  std::vector<int> feats;
  for (int t = 0; t < params.trees; ++t) {
    std::vector<std::size_t> sample;
    std::sample(all.begin(), all.end(), std::back_inserter(sample), psi, rng);
    std::vector<std::tuple<int, double, int, int, std::size_t>> raw;
    TreeBuilder b{clean, rng, limit};
    b.build(sample, 0, ranges, feats, raw);
    Tree tree;
    for (auto& [f, s, l, r, n] : raw) tree.push_back({f, s, l, r, n});
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

double IsolationForest::expected_path_length(std::span<const double> row) const {
  double total = 0;
  for (const auto& tree : trees_) {
    int n = 0;
    int depth = 0;
    while (tree[n].feature >= 0) {
      const auto& node = tree[n];
      n = row[node.feature] < node.split ? node.left : node.right;
      ++depth;
    }
    total += depth + average_path_length(tree[n].size);
  }
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> row) const {
  return std::pow(2.0, -expected_path_length(row) / normalizer_);
}

std::vector<double> IsolationForest::score(const Matrix& x) const {
  std::vector<double> s(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) s[i] = score(x.row(i));
  return s;
}

}  // namespace netpois
