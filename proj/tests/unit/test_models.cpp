#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "netpois/autoencoder.hpp"
#include "netpois/common.hpp"
#include "netpois/classifier.hpp"
#include "netpois/decision_tree.hpp"
#include "netpois/isolation_forest.hpp"

using namespace netpois;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

double accuracy(const BinaryClassifier& c, const Matrix& x, const std::vector<int>& y) {
  auto p = c.predict(x);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += p[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

// Exhaustive check that some axis-aligned or diagonal threshold separates y.
bool separable_by_line(const Matrix& x, const std::vector<int>& y) {
  double max0 = -1e300, min1 = 1e300;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double s = x(i, 0) + x(i, 1);
    if (y[i]) min1 = std::min(min1, s);
    else max0 = std::max(max0, s);
  }
  return max0 < min1;
}

}  // namespace

TEST(Impurity, KnownValues) {
  EXPECT_DOUBLE_EQ(impurity(Criterion::gini, 5, 10), 0.5);
  EXPECT_DOUBLE_EQ(impurity(Criterion::entropy, 5, 10), 1.0);
  EXPECT_DOUBLE_EQ(impurity(Criterion::entropy, 0, 10), 0.0);
  EXPECT_NEAR(impurity(Criterion::gini, 1, 4), 0.375, 1e-12);
}

TEST(ProxyTree, SinglePerfectFeature) {
  auto x = random_matrix(200, 6, 1);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 3) > 0.2;
  for (auto c : {Criterion::gini, Criterion::entropy}) {
    auto t = ProxyTree::fit(x, y, {c});
    EXPECT_EQ(t.split_count(), 1u);
    EXPECT_DOUBLE_EQ(t.importances()[3], 1.0);
    for (std::size_t f = 0; f < 6; ++f)
      if (f != 3) EXPECT_EQ(t.importances()[f], 0.0);
  }
}

TEST(ProxyTree, PureLabelsGiveNoSplits) {
  auto x = random_matrix(50, 4, 2);
  std::vector<int> y(50, 1);
  auto t = ProxyTree::fit(x, y);
  EXPECT_EQ(t.split_count(), 0u);
  for (double v : t.importances()) EXPECT_EQ(v, 0.0);
}

TEST(ProxyTree, DuplicateColumnsTieToLowerIndex) {
  auto x = random_matrix(100, 3, 3);
  for (std::size_t i = 0; i < 100; ++i) x(i, 2) = x(i, 1);
  std::vector<int> y(100);
  for (std::size_t i = 0; i < 100; ++i) y[i] = x(i, 1) > 0;
  auto t = ProxyTree::fit(x, y);
  EXPECT_DOUBLE_EQ(t.importances()[1], 1.0);
  EXPECT_EQ(t.importances()[2], 0.0);
}

TEST(ProxyTree, ImportancesNormalizedAndPredictionsMatchLeaves) {
  auto x = random_matrix(300, 5, 4);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = (x(i, 0) > 0) != (x(i, 4) > 0.5);
  auto t = ProxyTree::fit(x, y);
  double s = 0;
  for (double v : t.importances()) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(t.predict_proba(x.row(i)) >= 0.5, y[i] == 1);
}

TEST(Gbdt, SeparableToySetReachesFullAccuracy) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix x(200, 2);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y[i] = x(i, 0) + x(i, 1) > 0.1;
  }
  ASSERT_TRUE(separable_by_line(x, y));
  auto c = train_gbdt(x, y, {}, 0);
  EXPECT_FALSE(c.degenerate());
  EXPECT_EQ(accuracy(c, x, y), 1.0);
}

TEST(Gbdt, StagedTrainingLossDecreases) {
  auto x = random_matrix(300, 4, 6);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = x(i, 0) * x(i, 1) > 0;
  GbdtParams p;
  p.n_trees = 30;
  p.class_weighted = false;
  auto m = GbdtModel::fit(x, y, p, 1);
  ASSERT_EQ(m.stage_count(), 30u);
  const std::vector<double> w(300, 1.0);
  double prev = 1e300;
  for (std::size_t s = 0; s <= 30; s += 5) {
    std::vector<double> raw(300);
    for (std::size_t i = 0; i < 300; ++i) raw[i] = m.raw_score(x.row(i), s);
    const double loss = logistic_loss(raw, y, w);
    EXPECT_LT(loss, prev);
    prev = loss;
  }
}

TEST(Gbdt, DeterministicAndSerializable) {
  auto x = random_matrix(200, 5, 7);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 2) > 0.3;
  GbdtParams p;
  p.row_subsample = 0.7;
  p.n_trees = 20;
  auto a = train_gbdt(x, y, p, 9);
  auto b = train_gbdt(x, y, p, 9);
  EXPECT_EQ(a.predict_proba(x), b.predict_proba(x));
  auto c = BinaryClassifier::from_json(a.to_json());
  EXPECT_EQ(c.predict_proba(x), a.predict_proba(x));
  EXPECT_EQ(c.kind(), ModelKind::gbdt);
}

TEST(Gbdt, ClassWeights) {
  std::vector<int> y = {1, 0, 0, 0};
  auto w = class_weights(y, true);
  EXPECT_DOUBLE_EQ(w[0] * 1, w[1] * 3);
  auto u = class_weights(y, false);
  EXPECT_EQ(u, std::vector<double>(4, 1.0));
}

TEST(Classifier, ConstantLabelsAreDegenerate) {
  auto x = random_matrix(20, 3, 8);
  std::vector<int> y(20, 0);
  auto c = train_gbdt(x, y, {}, 0);
  EXPECT_TRUE(c.degenerate());
  for (double p : c.predict_proba(x)) EXPECT_DOUBLE_EQ(p, 0.01);
  auto m = train_mlp(x, std::vector<int>(20, 1), {}, 0);
  EXPECT_TRUE(m.degenerate());
  EXPECT_DOUBLE_EQ(m.predict_proba(x.row(0)), 0.99);
}

TEST(Classifier, SchemaWidthIsEnforced) {
  auto x = random_matrix(40, 3, 9);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = x(i, 0) > 0;
  auto c = train_gbdt(x, y, {}, 0, {"a", "b", "c"});
  EXPECT_EQ(c.schema().size(), 3u);
  EXPECT_THROW(c.predict_proba(random_matrix(2, 4, 1)), ConfigError);
}

TEST(Mlp, LearnsXor) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0, 0.05);
  Matrix x(200, 2);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    const int a = static_cast<int>(i % 2), b = static_cast<int>((i / 2) % 2);
    x(i, 0) = a + n(rng);
    x(i, 1) = b + n(rng);
    y[i] = a ^ b;
  }
  MlpParams p;
  p.hidden = {8};
  p.epochs = 300;
  p.batch_size = 32;
  p.learning_rate = 0.02;
  auto c = train_mlp(x, y, p, 3);
  EXPECT_GE(accuracy(c, x, y), 0.95);
  auto back = BinaryClassifier::from_json(c.to_json());
  EXPECT_EQ(back.predict_proba(x), c.predict_proba(x));
}

TEST(Mlp, UntrainedOutputsAreProbabilities) {
  DenseNet net({5, 16, 1}, Activation::relu, Activation::sigmoid, 1);
  auto x = random_matrix(100, 5, 11);
  Eigen::MatrixXd xt = Eigen::Map<const Eigen::MatrixXd>(x.data().data(), 5, 100);
  auto out = net.forward(xt * 1000.0);
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    EXPECT_GE(out(0, i), 0.0);
    EXPECT_LE(out(0, i), 1.0);
  }
}

TEST(GradientCheck, ClassifierNetwork) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DenseNet net({4, 6, 5, 1}, Activation::tanh, Activation::identity, seed);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
    Eigen::MatrixXd y(1, 7);
    for (int i = 0; i < 7; ++i) y(0, i) = i % 2;
    EXPECT_LT(testkit::gradient_check(net, x, y, LossKind::bce_logits, 5, seed), 1e-4);
  }
}

TEST(GradientCheck, ReluNetwork) {
  DenseNet net({3, 8, 1}, Activation::relu, Activation::identity, 4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 6);
  Eigen::MatrixXd y = Eigen::MatrixXd::Ones(1, 6);
  EXPECT_LT(testkit::gradient_check(net, x, y, LossKind::bce_logits, 20, 2), 1e-4);
}

TEST(GradientCheck, AutoEncoderNetwork) {
  Matrix blocks(20, 6);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : blocks.data()) v = u(rng);
  AutoEncoderParams p;
  p.encoder_hidden = {5};
  p.bottleneck = 3;
  p.epochs = 2;
  auto ae = train_autoencoder(blocks, p, 2);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 5).cwiseAbs();
  EXPECT_LT(testkit::gradient_check(ae.net(), x, x, LossKind::mse, 10, 3), 1e-4);
}

TEST(Adam, ReducesLoss) {
  DenseNet net({2, 4, 1}, Activation::tanh, Activation::identity, 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 32);
  Eigen::MatrixXd y(1, 32);
  for (int i = 0; i < 32; ++i) y(0, i) = x(0, i) > 0;
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(32);
  AdamOptimizer opt(net, {0.05});
  const double before = net.loss_and_gradient(x, y, w, LossKind::bce_logits, nullptr);
  for (int it = 0; it < 100; ++it) {
    DenseNet::Gradient g;
    net.loss_and_gradient(x, y, w, LossKind::bce_logits, &g);
    opt.step(net, g);
  }
  EXPECT_LT(net.loss_and_gradient(x, y, w, LossKind::bce_logits, nullptr), before);
}

TEST(AutoEncoder, IdentityCapacityReducesMse) {
  Matrix blocks(50, 8);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : blocks.data()) v = u(rng);
  AutoEncoderParams p;
  p.bottleneck = 8;
  p.epochs = 50;
  p.batch_size = 10;
  p.learning_rate = 0.01;
  auto ae = train_autoencoder(blocks, p, 1);
  ASSERT_EQ(ae.loss_history().size(), 51u);
  EXPECT_LT(ae.reconstruction_mse(blocks), ae.loss_history().front());
  auto z = ae.encode(blocks);
  EXPECT_EQ(z.cols(), 8u);
  EXPECT_EQ(z.rows(), 50u);
  EXPECT_EQ(ae.encode(blocks.row(0)).size(), 8u);
  auto back = AutoEncoder::from_json(ae.to_json());
  EXPECT_EQ(back.encode(blocks), z);
}

TEST(IsolationForest, FarOutlierScoresHighest) {
  auto x = random_matrix(300, 4, 12);
  for (std::size_t c = 0; c < 4; ++c) x(17, c) = 100.0;
  auto f = IsolationForest::fit(x, {}, 3);
  auto s = f.score(x);
  EXPECT_EQ(std::max_element(s.begin(), s.end()) - s.begin(), 17);
  for (double v : s) EXPECT_TRUE(std::isfinite(v));
}

TEST(IsolationForest, RepeatedPointScoresEqual) {
  Matrix x(64, 3, 2.5);
  auto f = IsolationForest::fit(x, {}, 1);
  auto s = f.score(x);
  for (double v : s) EXPECT_EQ(v, s[0]);
}

TEST(IsolationForest, DeterministicGivenSeed) {
  auto x = random_matrix(500, 3, 13);
  EXPECT_EQ(IsolationForest::fit(x, {}, 5).score(x), IsolationForest::fit(x, {}, 5).score(x));
  EXPECT_NE(IsolationForest::fit(x, {}, 5).score(x), IsolationForest::fit(x, {}, 6).score(x));
}

TEST(IsolationForest, AveragePathLength) {
  EXPECT_EQ(average_path_length(1), 0.0);
  EXPECT_EQ(average_path_length(2), 1.0);
  const double h = std::log(255.0) + 0.5772156649;
  EXPECT_NEAR(average_path_length(256), 2 * h - 2 * 255.0 / 256.0, 1e-9);
}
