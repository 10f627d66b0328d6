#include "netpois/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netpois/common.hpp"

namespace netpois {

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// Per-feature cut points; bin b holds values in (cut[b-1], cut[b]], the last
// bin everything above the final cut.
struct Binner {
  std::vector<std::vector<double>> cuts;

  static Binner fit(const Matrix& x, int max_bins) {
    Binner b;
    b.cuts.resize(x.cols());
    std::vector<double> col(x.rows());
    for (std::size_t f = 0; f < x.cols(); ++f) {
      for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x(i, f);
      std::sort(col.begin(), col.end());
      std::vector<double> distinct;
      std::unique_copy(col.begin(), col.end(), std::back_inserter(distinct));
      auto& c = b.cuts[f];
      if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t k = 0; k + 1 < distinct.size(); ++k) c.push_back(distinct[k] + (distinct[k + 1] - distinct[k]) / 2);
      } else {
        for (int q = 1; q < max_bins; ++q) {
          const double v = col[static_cast<std::size_t>(static_cast<double>(q) / max_bins * (col.size() - 1))];
          if (c.empty() || v > c.back()) c.push_back(v);
        }
        if (!c.empty() && c.back() >= distinct.back()) c.pop_back();
      }
    }
    return b;
  }

  std::uint8_t bin(std::size_t f, double v) const {
    const auto& c = cuts[f];
    return static_cast<std::uint8_t>(std::lower_bound(c.begin(), c.end(), v) - c.begin());
  }
};

struct Hist {
  double g = 0, h = 0;
};

class TreeGrower {
 public:
  TreeGrower(const std::vector<std::uint8_t>& bins, std::size_t n_features, const Binner& binner,
             const GbdtParams& params)
      : bins_(bins), d_(n_features), binner_(binner), params_(params) {}

  GbdtModel::Tree grow(std::vector<std::size_t> rows, const std::vector<double>& g, const std::vector<double>& h) {
    GbdtModel::Tree tree;
    grow_node(tree, std::move(rows), g, h, 0);
    return tree;
  }

 private:
  int grow_node(GbdtModel::Tree& tree, std::vector<std::size_t> rows, const std::vector<double>& g,
                const std::vector<double>& h, int depth) {
    double G = 0, H = 0;
    for (auto i : rows) {
      G += g[i];
      H += h[i];
    }
    const int id = static_cast<int>(tree.size());
    tree.push_back({});
    tree[id].value = -G / (H + params_.l2) * params_.learning_rate;
    if (depth >= params_.max_depth || rows.size() < 2) return id;

    const double parent = G * G / (H + params_.l2);
    double best_gain = 1e-12;
    int best_f = -1;
    int best_bin = -1;
    std::vector<Hist> hist;
    for (std::size_t f = 0; f < d_; ++f) {
      const std::size_t nb = binner_.cuts[f].size() + 1;
      if (nb < 2) continue;
      hist.assign(nb, {});
      for (auto i : rows) {
        auto& cell = hist[bins_[i * d_ + f]];
        cell.g += g[i];
        cell.h += h[i];
      }
      double gl = 0, hl = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hist[b].g;
        hl += hist[b].h;
        const double gr = G - gl, hr = H - hl;
        if (hl < params_.min_child_hessian || hr < params_.min_child_hessian) continue;
        const double gain = gl * gl / (hl + params_.l2) + gr * gr / (hr + params_.l2) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_bin = static_cast<int>(b);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : rows) (bins_[i * d_ + best_f] <= best_bin ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    tree[id].feature = best_f;
    tree[id].threshold = binner_.cuts[best_f][best_bin];
    const int l = grow_node(tree, std::move(left), g, h, depth + 1);
    const int r = grow_node(tree, std::move(right), g, h, depth + 1);
    tree[id].left = l;
    tree[id].right = r;
    return id;
  }

  const std::vector<std::uint8_t>& bins_;
  std::size_t d_;
  const Binner& binner_;
  const GbdtParams& params_;
};

double tree_value(const GbdtModel::Tree& t, std::span<const double> row) {
  int n = 0;
  while (t[n].feature >= 0) n = row[t[n].feature] <= t[n].threshold ? t[n].left : t[n].right;
  return t[n].value;
}

}  // namespace

std::vector<double> class_weights(std::span<const int> y, bool balanced) {
  std::vector<double> w(y.size(), 1.0);
  if (!balanced || y.empty()) return w;
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double neg = static_cast<double>(y.size()) - pos;
  if (pos == 0 || neg == 0) return w;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] ? n / (2 * pos) : n / (2 * neg);
  return w;
}

double logistic_loss(std::span<const double> raw, std::span<const int> y, std::span<const double> weights) {
  double loss = 0, wsum = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    // log(1 + exp(-s z)) with s = +-1, computed stably
    const double z = y[i] ? raw[i] : -raw[i];
    const double l = z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    loss += weights[i] * l;
    wsum += weights[i];
  }
  return wsum > 0 ? loss / wsum : 0.0;
}

GbdtModel GbdtModel::fit(const Matrix& x, std::span<const int> y, const GbdtParams& params, std::uint64_t seed) {
  if (x.rows() != y.size()) throw ConfigError("gbdt: row/label count mismatch");
  if (params.n_trees < 0 || params.max_depth < 1 || !(params.learning_rate > 0))
    throw ConfigError("gbdt: invalid hyperparameters");
  if (params.max_bins < 2 || params.max_bins > 256) throw ConfigError("gbdt: max_bins must lie in [2, 256]");

  GbdtModel model;
  const std::size_t n = x.rows(), d = x.cols();
  const auto w = class_weights(y, params.class_weighted);
  double wp = 0, wn = 0;
  for (std::size_t i = 0; i < n; ++i) (y[i] ? wp : wn) += w[i];
  model.base_ = (wp > 0 && wn > 0) ? std::log(wp / wn) : 0.0;

  const Binner binner = Binner::fit(x, params.max_bins);
  std::vector<std::uint8_t> bins(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < d; ++f) bins[i * d + f] = binner.bin(f, x(i, f));

  std::vector<double> raw(n, model.base_), g(n), h(n);
  Rng rng(derive_seed(seed, 11));
  std::bernoulli_distribution keep(std::clamp(params.row_subsample, 0.0, 1.0));
  TreeGrower grower(bins, d, binner, params);
  for (int t = 0; t < params.n_trees; ++t) {
    std::vector<std::size_t> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      g[i] = w[i] * (p - y[i]);
      h[i] = w[i] * p * (1 - p);
      if (params.row_subsample >= 1.0 || keep(rng)) rows.push_back(i);
    }
    auto tree = grower.grow(std::move(rows), g, h);
    for (std::size_t i = 0; i < n; ++i) raw[i] += tree_value(tree, x.row(i));
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

double GbdtModel::raw_score(std::span<const double> row) const { return raw_score(row, trees_.size()); }

double GbdtModel::raw_score(std::span<const double> row, std::size_t stages) const {
  double s = base_;
  for (std::size_t t = 0; t < std::min(stages, trees_.size()); ++t) s += tree_value(trees_[t], row);
  return s;
}

double GbdtModel::predict_proba(std::span<const double> row) const { return sigmoid(raw_score(row)); }

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  return {{"base", base_}, {"trees", std::move(trees)}};
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  GbdtModel m;
  m.base_ = j.at("base").get<double>();
  for (const auto& t : j.at("trees")) {
    Tree tree;
    for (const auto& n : t)
      tree.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                      n.at(4).get<double>()});
    m.trees_.push_back(std::move(tree));
  }
  return m;
}

}  // namespace netpois
