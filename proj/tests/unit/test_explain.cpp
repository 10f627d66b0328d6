#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "netpois/explain.hpp"

using namespace netpois;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

ModelQuery rowwise(std::function<double(std::span<const double>)> f) {
  return [f](const Matrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = f(x.row(i));
    return out;
  };
}

}  // namespace

TEST(SelectTopK, Examples) {
  EXPECT_EQ(select_top_k(std::vector<double>{0.5, 0.1, 0.4}, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(select_top_k(std::vector<double>(5, 1.0), 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(select_top_k(std::vector<double>{0.1, 0.3, 0.2}, 3), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(ProxyImportance, PerfectSplitRankedFirst) {
  auto x = random_matrix(200, 6, 1);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 0) > 0.3;
  for (auto c : {Criterion::entropy, Criterion::gini}) {
    auto s = importance_proxy_tree(x, y, c);
    EXPECT_EQ(select_top_k(s.scores, 1)[0], 0u);
    EXPECT_EQ(s.model_queries, 0u);
  }
}

TEST(ProxyImportance, RandomLabelsHaveNoStableWinner) {
  std::set<std::size_t> winners;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto x = random_matrix(150, 6, 100 + seed);
    std::mt19937_64 rng(seed);
    std::vector<int> y(150);
    for (auto& v : y) v = static_cast<int>(rng() % 2);
    winners.insert(select_top_k(importance_proxy_tree(x, y, Criterion::entropy).scores, 1)[0]);
  }
  EXPECT_GT(winners.size(), 1u);
}

TEST(ProxyImportance, ColumnPermutationEquivariance) {
  auto x = random_matrix(200, 4, 2);
  std::vector<int> y(200);
  // A single root split separates the classes, so no gain ties arise.
  for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 1) > 0.2;
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  Matrix xp(200, 4);
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t c = 0; c < 4; ++c) xp(i, c) = x(i, perm[c]);
  auto a = importance_proxy_tree(x, y, Criterion::entropy).scores;
  auto b = importance_proxy_tree(xp, y, Criterion::entropy).scores;
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(b[c], a[perm[c]], 1e-12);
}

TEST(RandomImportance, SeededAndUniform) {
  auto a = importance_random(33, 1);
  EXPECT_EQ(a.scores, importance_random(33, 1).scores);
  EXPECT_NE(a.scores, importance_random(33, 2).scores);
  std::vector<int> hits(33, 0);
  for (std::uint64_t s = 0; s < 2000; ++s)
    for (auto f : select_top_k(importance_random(33, s).scores, 8)) ++hits[f];
  for (int h : hits) EXPECT_NEAR(h, 2000 * 8 / 33.0, 120);
}

TEST(ShapleyExact, SinglePlayer) {
  auto f = rowwise([](auto r) { return 3 * r[0] * r[0]; });
  Matrix bg(1, 1, 2.0);
  auto phi = shapley_exact_oracle(f, std::vector<double>{5.0}, bg);
  EXPECT_NEAR(phi[0], 75.0 - 12.0, 1e-12);
}

TEST(ShapleyExact, SymmetricDuplicatesShareEqually) {
  auto f = rowwise([](auto r) { return r[0] * r[1] + r[2]; });
  auto phi = shapley_exact_oracle(f, std::vector<double>{2.0, 2.0, 1.0}, Matrix(1, 3, 0.0));
  EXPECT_NEAR(phi[0], phi[1], 1e-12);
  EXPECT_NEAR(phi[0], 2.0, 1e-12);
  EXPECT_NEAR(phi[2], 1.0, 1e-12);
  EXPECT_THROW(shapley_exact_oracle(f, std::vector<double>(13, 0.0), Matrix(1, 13)), ConfigError);
}

TEST(ShapleySampled, AdditiveModelMatchesExact) {
  auto f = rowwise([](auto r) { return r[0] + r[1]; });
  Matrix bg(4, 2);
  bg(0, 0) = 1;
  bg(1, 0) = -1;
  bg(2, 1) = 2;
  bg(3, 1) = -2;
  const std::vector<double> x = {3.0, -1.5};
  auto exact = shapley_exact_oracle(f, x, bg);
  EXPECT_NEAR(exact[0], 3.0, 1e-12);
  EXPECT_NEAR(exact[1], -1.5, 1e-12);
  auto est = shapley_sampled(f, x, bg, 400, 7);
  EXPECT_NEAR(est[0], 3.0, 0.1);
  EXPECT_NEAR(est[1], -1.5, 0.1);
}

TEST(ShapleySampled, ConstantModelAttributesNothing) {
  auto f = rowwise([](auto) { return 0.7; });
  auto phi = shapley_sampled(f, std::vector<double>{1, 2, 3}, random_matrix(10, 3, 1), 50, 1);
  for (double v : phi) EXPECT_EQ(v, 0.0);
}

TEST(ShapleySampled, EfficiencyAndConvergence) {
  auto f = rowwise([](auto r) { return std::tanh(r[0] * r[1]) + 0.5 * r[2] * r[2] - r[3] + r[4] * r[0]; });
  auto bg = random_matrix(20, 5, 5);
  const std::vector<double> x = {1.0, -0.5, 2.0, 0.3, 1.5};
  auto exact = shapley_exact_oracle(f, x, bg);
  double mean_bg = 0;
  for (double v : f(bg)) mean_bg += v / 20.0;
  Matrix xm;
  xm.append_row(x);
  const double fx = f(xm)[0];
  EXPECT_NEAR(std::accumulate(exact.begin(), exact.end(), 0.0), fx - mean_bg, 1e-9);

  std::size_t queries = 0;
  auto est = shapley_sampled(f, x, bg, 4000, 3, &queries);
  EXPECT_GT(queries, 0u);
  const double range = *std::max_element(exact.begin(), exact.end()) - *std::min_element(exact.begin(), exact.end());
  double err = 0;
  for (std::size_t i = 0; i < 5; ++i) err += std::abs(est[i] - exact[i]) / 5;
  EXPECT_LT(err, 0.05 * range);
  EXPECT_LT(std::abs(std::accumulate(est.begin(), est.end(), 0.0) - (fx - mean_bg)), 0.05 * range);
}

TEST(ShapleyImportance, SumsAbsoluteValuesAndCountsQueries) {
  auto f = rowwise([](auto r) { return 2 * r[1]; });
  auto pts = random_matrix(6, 3, 8);
  auto bg = random_matrix(8, 3, 9);
  auto s = importance_shapley_sampled(f, pts, bg, 20, 1);
  EXPECT_EQ(s.strategy, ImportanceStrategy::shap);
  EXPECT_EQ(select_top_k(s.scores, 1)[0], 1u);
  EXPECT_NEAR(s.scores[0], 0.0, 1e-12);
  EXPECT_GT(s.model_queries, 0u);
}

TEST(Strategy, ParseRoundTrip) {
  for (auto s : {ImportanceStrategy::entropy, ImportanceStrategy::gini, ImportanceStrategy::shap,
                 ImportanceStrategy::random})
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_THROW(parse_strategy("lime"), ConfigError);
}
