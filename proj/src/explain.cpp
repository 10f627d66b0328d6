#include "netpois/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace netpois {

std::string_view to_string(ImportanceStrategy s) {
  switch (s) {
    case ImportanceStrategy::entropy: return "entropy";
    case ImportanceStrategy::gini: return "gini";
    case ImportanceStrategy::shap: return "shap";
    case ImportanceStrategy::random: return "random";
  }
  return "entropy";
}

ImportanceStrategy parse_strategy(std::string_view s) {
  if (s == "entropy") return ImportanceStrategy::entropy;
  if (s == "gini") return ImportanceStrategy::gini;
  if (s == "shap") return ImportanceStrategy::shap;
  if (s == "random") return ImportanceStrategy::random;
  throw ConfigError("unknown importance strategy '" + std::string(s) + "'");
}

nlohmann::json ImportanceScores::to_json(std::span<const std::string_view> feature_names) const {
  nlohmann::json j = {{"strategy", to_string(strategy)},
                      {"scores", scores},
                      {"model_queries", model_queries},
                      {"warnings", warnings}};
  if (!feature_names.empty()) {
    std::vector<std::string> names(feature_names.begin(), feature_names.end());
    j["features"] = names;
  }
  return j;
}

ImportanceScores importance_proxy_tree(const Matrix& x, std::span<const int> y, Criterion criterion) {
  ImportanceScores out;
  out.strategy = criterion == Criterion::gini ? ImportanceStrategy::gini : ImportanceStrategy::entropy;
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || static_cast<std::size_t>(pos) == y.size()) {
    out.scores.assign(x.cols(), 0.0);
    out.warnings.push_back("adversary data holds a single class; importance scores are all zero");
    return out;
  }
  out.scores = ProxyTree::fit(x, y, {criterion}).importances();
  return out;
}

ImportanceScores importance_random(std::size_t dim, std::uint64_t seed) {
  ImportanceScores out;
  out.strategy = ImportanceStrategy::random;
  Rng rng(derive_seed(seed, 51));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.scores.resize(dim);
  for (auto& s : out.scores) s = u(rng);
  return out;
}

std::vector<double> shapley_sampled(const ModelQuery& query, std::span<const double> x, const Matrix& background,
                                    int n_permutations, std::uint64_t seed, std::size_t* queries) {
  if (n_permutations < 1) throw ConfigError("Shapley sampling needs at least one permutation");
  if (background.rows() == 0) throw ConfigError("Shapley sampling needs a non-empty background");
  const std::size_t d = x.size();
  Rng rng(seed);

  std::vector<std::size_t> bg_order(background.rows());
  std::iota(bg_order.begin(), bg_order.end(), 0);
  std::shuffle(bg_order.begin(), bg_order.end(), rng);

  // Row layout per permutation: background row, then one feature switched to x at a time.
  const auto np = static_cast<std::size_t>(n_permutations);
  Matrix batch(np * (d + 1), d);
  std::vector<std::vector<std::size_t>> perms(np);
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t bg = 0;
  for (std::size_t j = 0; j < np; ++j) {
    if (j % 2 == 0) {
      std::shuffle(perm.begin(), perm.end(), rng);
      bg = bg_order[(j / 2) % bg_order.size()];
    } else {
      std::reverse(perm.begin(), perm.end());
    }
    perms[j] = perm;
    auto base = background.row(bg);
    std::vector<double> z(base.begin(), base.end());
    std::size_t r = j * (d + 1);
    std::copy(z.begin(), z.end(), batch.row(r).begin());
    for (std::size_t k = 0; k < d; ++k) {
      z[perm[k]] = x[perm[k]];
      std::copy(z.begin(), z.end(), batch.row(r + k + 1).begin());
    }
  }
  const auto f = query(batch);
  if (queries) *queries += batch.rows();

  std::vector<double> phi(d, 0.0);
  for (std::size_t j = 0; j < np; ++j) {
    const std::size_t r = j * (d + 1);
    for (std::size_t k = 0; k < d; ++k) phi[perms[j][k]] += f[r + k + 1] - f[r + k];
  }
  for (auto& v : phi) v /= static_cast<double>(np);
  return phi;
}

ImportanceScores importance_shapley_sampled(const ModelQuery& query, const Matrix& points, const Matrix& background,
                                            int n_permutations, std::uint64_t seed) {
  if (n_permutations < 1) throw ConfigError("Shapley sampling needs at least one permutation");
  ImportanceScores out;
  out.strategy = ImportanceStrategy::shap;
  out.scores.assign(points.cols(), 0.0);
  if (points.rows() == 0) {
    out.warnings.push_back("no points of the class to misclassify; Shapley scores are all zero");
    return out;
  }
  // Accumulated in point order so results do not depend on scheduling.
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto phi = shapley_sampled(query, points.row(i), background, n_permutations, derive_seed(seed, 1000 + i),
                                     &out.model_queries);
    for (std::size_t f = 0; f < phi.size(); ++f) out.scores[f] += std::abs(phi[f]);
  }
  return out;
}

std::vector<double> shapley_exact_oracle(const ModelQuery& query, std::span<const double> x, const Matrix& background) {
  const std::size_t d = x.size();
  if (d > kMaxExactShapleyDim)
    throw ConfigError("exact Shapley enumeration refused for dimension " + std::to_string(d));
  if (background.rows() == 0) throw ConfigError("exact Shapley needs a non-empty background");
  const std::size_t n_sets = std::size_t{1} << d;
  const std::size_t nb = background.rows();

  Matrix batch(n_sets * nb, d);
  for (std::size_t s = 0; s < n_sets; ++s) {
    for (std::size_t b = 0; b < nb; ++b) {
      auto row = batch.row(s * nb + b);
      auto bg = background.row(b);
      for (std::size_t f = 0; f < d; ++f) row[f] = (s >> f) & 1 ? x[f] : bg[f];
    }
  }
  const auto f = query(batch);
  std::vector<double> value(n_sets, 0.0);
  for (std::size_t s = 0; s < n_sets; ++s) {
    for (std::size_t b = 0; b < nb; ++b) value[s] += f[s * nb + b];
    value[s] /= static_cast<double>(nb);
  }

  // weight(|S|) = |S|! (d - |S| - 1)! / d!
  std::vector<double> weight(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    weight[k] = std::exp(std::lgamma(k + 1.0) + std::lgamma(static_cast<double>(d - k)) - std::lgamma(d + 1.0));
  }
  std::vector<double> phi(d, 0.0);
  for (std::size_t s = 0; s < n_sets; ++s) {
    const auto size = static_cast<std::size_t>(__builtin_popcountll(s));
    for (std::size_t i = 0; i < d; ++i) {
      if ((s >> i) & 1) continue;
      phi[i] += weight[size] * (value[s | (std::size_t{1} << i)] - value[s]);
    }
  }
  return phi;
}

std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace netpois
