#include "netpois/decision_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "netpois/common.hpp"

namespace netpois {

double impurity(Criterion c, double positives, double total) {
  if (total <= 0) return 0.0;
  const double p = positives / total;
  const double q = 1.0 - p;
  if (c == Criterion::gini) return 1.0 - p * p - q * q;
  double h = 0.0;
  if (p > 0) h -= p * std::log2(p);
  if (q > 0) h -= q * std::log2(q);
  return h;
}

namespace {

struct Builder {
  const Matrix& x;
  std::span<const int> y;
  ProxyTreeParams params;
  std::vector<ProxyTree::Node>& nodes;
  std::vector<double>& importance;
  double n_total;
  std::vector<std::size_t> order;  // scratch

  int build(std::vector<std::size_t>& idx, int depth) {
    const double n = static_cast<double>(idx.size());
    double pos = 0;
    for (auto i : idx) pos += y[i];
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].positive_fraction = pos / n;
    nodes[id].samples = idx.size();

    const double node_imp = impurity(params.criterion, pos, n);
    if (node_imp <= 0 || idx.size() < params.min_samples_split ||
        (params.max_depth > 0 && depth >= params.max_depth))
      return id;

    int best_f = -1;
    double best_thr = 0.0;
    double best_child = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < x.cols(); ++f) {
      order = idx;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      double left_pos = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_pos += y[order[k]];
        const double v = x(order[k], f);
        const double next = x(order[k + 1], f);
        if (!(v < next)) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = n - nl;
        const double child = (nl * impurity(params.criterion, left_pos, nl) +
                              nr * impurity(params.criterion, pos - left_pos, nr)) / n;
        if (child < best_child) {
          best_child = child;
          best_f = static_cast<int>(f);
          best_thr = v + (next - v) / 2.0;
          if (!(best_thr < next)) best_thr = v;
        }
      }
    }
    if (best_f < 0) return id;

    importance[best_f] += n / n_total * (node_imp - best_child);
    std::vector<std::size_t> left, right;
    for (auto i : idx) (x(i, best_f) <= best_thr ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    nodes[id].feature = best_f;
    nodes[id].threshold = best_thr;
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

}  // namespace

ProxyTree ProxyTree::fit(const Matrix& x, std::span<const int> y, const ProxyTreeParams& params) {
  if (x.rows() != y.size()) throw ConfigError("proxy tree: row/label count mismatch");
  ProxyTree tree;
  tree.importances_.assign(x.cols(), 0.0);
  if (x.rows() == 0) return tree;
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  Builder b{x, y, params, tree.nodes_, tree.importances_, static_cast<double>(x.rows()), {}};
  b.build(idx, 0);
  const double total = std::accumulate(tree.importances_.begin(), tree.importances_.end(), 0.0);
  if (total > 0)
    for (auto& v : tree.importances_) v /= total;
  return tree;
}

double ProxyTree::predict_proba(std::span<const double> row) const {
  int n = 0;
  while (nodes_[n].feature >= 0) n = row[nodes_[n].feature] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
  return nodes_[n].positive_fraction;
}

std::size_t ProxyTree::split_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature >= 0; }));
}

}  // namespace netpois
