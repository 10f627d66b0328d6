#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "netpois/common.hpp"

namespace netpois {

/// One-dimensional Gaussian kernel density estimate, optionally fit in
/// log1p space and sampled back through expm1.
class GaussianKde {
 public:
  static constexpr std::size_t kMaxSupport = 10000;
  static constexpr double kMinBandwidth = 1e-9;

  GaussianKde() = default;
  /// Explicit bandwidth in the fitted space.
  GaussianKde(std::vector<double> support, double bandwidth, bool log_space);

  /// Silverman's rule of thumb on the (transformed) values. Larger inputs are
  /// thinned to kMaxSupport points by an even stride after sorting.
  static GaussianKde fit(std::span<const double> values, bool log_space = true);

  /// Draw in the original space without clipping.
  double sample_raw(Rng& rng) const;
  /// Draw clipped to the observed range.
  double sample(Rng& rng) const;
  /// Density in the fitted space.
  double density(double z) const;

  double bandwidth() const { return bandwidth_; }
  bool log_space() const { return log_space_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& support() const { return support_; }

  nlohmann::json to_json() const;
  static GaussianKde from_json(const nlohmann::json& j);

 private:
  std::vector<double> support_;  // in the fitted space
  double bandwidth_ = kMinBandwidth;
  bool log_space_ = true;
  double lo_ = 0.0, hi_ = 0.0;   // observed range, original space
};

double silverman_bandwidth(std::span<const double> values);

}  // namespace netpois
