#pragma once

// Feature-importance estimation for choosing trigger features.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "netpois/common.hpp"
#include "netpois/decision_tree.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

enum class ImportanceStrategy { entropy, gini, shap, random };
std::string_view to_string(ImportanceStrategy s);
ImportanceStrategy parse_strategy(std::string_view s);

/// Victim-model access: probability of the nontarget class for each row.
using ModelQuery = std::function<std::vector<double>(const Matrix&)>;

struct ImportanceScores {
  ImportanceStrategy strategy = ImportanceStrategy::entropy;
  std::vector<double> scores;
  std::size_t model_queries = 0;  // rows sent to the victim model
  Warnings warnings;

  nlohmann::json to_json(std::span<const std::string_view> feature_names = {}) const;
};

/// Query-free importance from a decision tree fit on the adversary's points.
/// `y` is 1 for nontarget.
ImportanceScores importance_proxy_tree(const Matrix& x, std::span<const int> y, Criterion criterion);

/// Uniform random scores; ranking them selects k features uniformly.
ImportanceScores importance_random(std::size_t dim, std::uint64_t seed);

/// Permutation-sampling Shapley values for one point. Each permutation is
/// paired with one background row (cycled in a seeded order), and every
/// second permutation is the reverse of the previous one.
std::vector<double> shapley_sampled(const ModelQuery& query, std::span<const double> x, const Matrix& background,
                                    int n_permutations, std::uint64_t seed, std::size_t* queries = nullptr);

/// Sum of absolute per-point Shapley values over `points` (the class to be
/// misclassified), marginalizing absent features over `background`.
ImportanceScores importance_shapley_sampled(const ModelQuery& query, const Matrix& points, const Matrix& background,
                                            int n_permutations, std::uint64_t seed);

inline constexpr std::size_t kMaxExactShapleyDim = 12;

/// Exact interventional Shapley values by enumerating all coalitions.
/// Refuses dimensions above kMaxExactShapleyDim.
std::vector<double> shapley_exact_oracle(const ModelQuery& query, std::span<const double> x, const Matrix& background);

/// Indices of the k highest scores in descending score order; ties go to the
/// lower index.
std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k = 8);

}  // namespace netpois
