#include "netpois/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace netpois {

double silverman_bandwidth(std::span<const double> values) {
  const auto n = values.size();
  if (n < 2) return GaussianKde::kMinBandwidth;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(n - 1));
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < n ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0)) spread = sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return h > GaussianKde::kMinBandwidth ? h : GaussianKde::kMinBandwidth;
}

GaussianKde::GaussianKde(std::vector<double> support, double bandwidth, bool log_space)
    : support_(std::move(support)), bandwidth_(bandwidth), log_space_(log_space) {
  if (support_.empty()) throw ConfigError("KDE needs at least one support point");
  if (!(bandwidth_ > 0)) throw ConfigError("KDE bandwidth must be positive");
  auto [mn, mx] = std::minmax_element(support_.begin(), support_.end());
  lo_ = log_space_ ? std::expm1(*mn) : *mn;
  hi_ = log_space_ ? std::expm1(*mx) : *mx;
}

GaussianKde GaussianKde::fit(std::span<const double> values, bool log_space) {
  if (values.empty()) throw ConfigError("KDE fit on an empty sample");
  std::vector<double> z;
  z.reserve(values.size());
  for (double x : values) {
    if (log_space && x < 0) throw ConfigError("log-space KDE requires non-negative values");
    z.push_back(log_space ? std::log1p(x) : x);
  }
  const double h = silverman_bandwidth(z);
  std::sort(z.begin(), z.end());
  const double lo = z.front(), hi = z.back();
  if (z.size() > kMaxSupport) {
    std::vector<double> thin(kMaxSupport);
    for (std::size_t i = 0; i < kMaxSupport; ++i) thin[i] = z[i * z.size() / kMaxSupport];
    thin.back() = hi;
    thin.front() = lo;
    z = std::move(thin);
  }
  return GaussianKde(std::move(z), h, log_space);
}

double GaussianKde::sample_raw(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, support_.size() - 1);
  std::normal_distribution<double> noise(0.0, bandwidth_);
  const double z = support_[pick(rng)] + noise(rng);
  return log_space_ ? std::expm1(z) : z;
}

double GaussianKde::sample(Rng& rng) const { return std::clamp(sample_raw(rng), lo_, hi_); }

double GaussianKde::density(double z) const {
  double s = 0;
  for (double c : support_) {
    const double u = (z - c) / bandwidth_;
    s += std::exp(-0.5 * u * u);
  }
  return s / (static_cast<double>(support_.size()) * bandwidth_ * std::sqrt(2 * std::numbers::pi));
}

nlohmann::json GaussianKde::to_json() const {
  return {{"bandwidth", bandwidth_}, {"log_space", log_space_}, {"support", support_}};
}

GaussianKde GaussianKde::from_json(const nlohmann::json& j) {
  return GaussianKde(j.at("support").get<std::vector<double>>(), j.at("bandwidth").get<double>(),
                     j.at("log_space").get<bool>());
}

}  // namespace netpois
