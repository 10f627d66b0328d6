#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "netpois/dense_net.hpp"

namespace netpois::testkit {

/// Largest relative error between analytic gradients and central finite
/// differences over `samples` randomly chosen parameters.
inline double gradient_check(DenseNet net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target, LossKind loss,
                             std::size_t samples, std::uint64_t seed, double eps = 1e-6) {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(x.cols());
  DenseNet::Gradient g;
  net.loss_and_gradient(x, target, w, loss, &g);
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    flat.insert(flat.end(), g.weight[l].data(), g.weight[l].data() + g.weight[l].size());
    flat.insert(flat.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
  double worst = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = pick(rng);
    double& p = net.parameter(i);
    const double orig = p;
    p = orig + eps;
    const double up = net.loss_and_gradient(x, target, w, loss, nullptr);
    p = orig - eps;
    const double down = net.loss_and_gradient(x, target, w, loss, nullptr);
    p = orig;
    const double numeric = (up - down) / (2 * eps);
    const double scale = std::max({std::abs(numeric), std::abs(flat[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - flat[i]) / scale);
  }
  return worst;
}

}  // namespace netpois::testkit
