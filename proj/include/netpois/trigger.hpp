#pragma once

// Trigger crafting: ideal assignment, prototype, contiguous problem-space
// trigger and its size reduction.

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "netpois/featurize.hpp"

namespace netpois {

/// Target values for the selected features.
struct Assignment {
  std::vector<std::size_t> features;
  std::vector<double> values;
  double percentile = 95.0;
};

/// Nearest-rank percentile: the ceil(t/100 * n)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, double t);

Assignment compute_assignment(std::span<const FeaturePoint> nontarget_points, std::span<const std::size_t> selected,
                              double percentile = 95.0);
/// Same over the rows of an arbitrary feature matrix.
Assignment compute_assignment(const Matrix& nontarget_rows, std::span<const std::size_t> selected,
                              double percentile = 95.0);

/// Euclidean distance over selected features after min-max scaling fit on
/// the adversary's nontarget points. Zero-range features contribute nothing.
class FeatureNormalizer {
 public:
  static FeatureNormalizer fit(std::span<const FeaturePoint> points, std::span<const std::size_t> selected);
  static FeatureNormalizer fit(const Matrix& rows, std::span<const std::size_t> selected);

  double distance(const FeatureVector& values, std::span<const double> target) const;
  double distance(std::span<const double> selected_values, std::span<const double> target) const;
  /// Distance of a full-width row, picking the selected columns.
  double row_distance(std::span<const double> row, std::span<const double> target) const;
  const std::vector<std::size_t>& features() const { return features_; }

 private:
  std::vector<std::size_t> features_;
  std::vector<double> lo_, range_;
};

struct TriggerProto {
  std::size_t index = 0;  // into the nontarget points
  FeaturePoint point;
  double distance = 0.0;
};

/// Nearest nontarget point to the assignment; ties go to the lowest index.
TriggerProto find_prototype(std::span<const FeaturePoint> nontarget_points, const Assignment& assignment);

enum class TriggerVariant { full, reduced, generated };
std::string_view to_string(TriggerVariant v);
TriggerVariant parse_trigger_variant(std::string_view s);

struct Trigger {
  std::vector<ConnRecord> records;  // in execution order
  TriggerVariant variant = TriggerVariant::full;
  IpAddr source_host;               // host endpoint rewritten on injection
  std::uint16_t key_port = 0;
  std::vector<std::size_t> selected;
  std::vector<double> target;       // prototype values on the selected features
  std::vector<double> achieved;     // trigger's own values on the selected features
  double distance = 0.0;            // normalized distance of `achieved` to `target`
  Warnings warnings;

  nlohmann::json to_json() const;
};

/// Selected-feature values of a record sequence evaluated as one window of
/// `host` keyed on `port`.
std::vector<double> selected_values(std::span<const ConnRecord> records, const IpAddr& host, std::uint16_t port,
                                    std::span<const std::size_t> selected, std::span<const Cidr> subnets);

/// Default search bound: twice the prototype's record count, within [10, 500].
std::size_t default_max_length(const TriggerProto& proto);

/// Scans every contiguous run (up to `max_length`) of each internal host's
/// time-ordered nontarget records in the adversary data and returns the one
/// closest to the prototype. Ties go to the shorter run, then the earlier one.
Trigger extract_full_trigger(const Dataset& adversary, const TriggerProto& proto,
                             std::span<const std::size_t> selected, const FeatureNormalizer& normalizer,
                             std::size_t max_length);

/// Drops records that feed none of the selected features, then keeps the
/// shortest contiguous run of the remainder whose per-feature deviation from
/// the prototype is no worse than the full trigger's.
Trigger reduce_trigger(const Trigger& full, std::span<const Cidr> subnets, const FeatureNormalizer& normalizer);

/// The `length`-record window of `records` with the lowest score; ties go to
/// the earliest window.
std::vector<ConnRecord> best_window(std::span<const ConnRecord> records, std::size_t length,
                                    const std::function<double(std::span<const ConnRecord>)>& score);

}  // namespace netpois
