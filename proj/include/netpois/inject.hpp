#pragma once

// Clean-label trigger injection into training and test traffic.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "netpois/featurize.hpp"
#include "netpois/trigger.hpp"

namespace netpois {

struct InjectionParams {
  double window_seconds = kDefaultWindowSeconds;
  /// Triggers are placed in the trailing part of the window starting here.
  double placement_start = 0.5;
};

struct ManifestEntry {
  AggregationKey key;  // the poisoned point
  std::size_t source_point = 0;
  std::vector<double> timestamps;
  FeatureVector before{};
  FeatureVector after{};
};

struct InjectionResult {
  Dataset dataset;
  std::vector<ManifestEntry> manifest;
  Warnings warnings;
};

/// Trigger records rewritten onto `host` and re-timed into `window`.
std::vector<ConnRecord> place_trigger(const Trigger& trigger, const IpAddr& host, std::int64_t window, Label label,
                                      const InjectionParams& params = {});

/// Number of poisoned points for a rate given in percent of `total_points`.
/// A positive rate always yields at least one.
std::size_t poison_count(std::size_t total_points, double rate_percent);

/// Inserts the trigger into target-class windows of the training data, as
/// many as `rate_percent` of all training points. Labels of existing records are left untouched and injected
/// records carry the target label. A zero rate returns the data unchanged.
InjectionResult inject_training(const Dataset& train, std::span<const FeaturePoint> train_points,
                                const Trigger& trigger, double rate_percent, std::uint64_t seed,
                                const InjectionParams& params = {});

/// Inserts the trigger into up to `count` of the `eligible` test points whose
/// key port equals the trigger port, at most one per (window, host).
InjectionResult inject_test_points(const Dataset& test, std::span<const FeaturePoint> test_points,
                                   std::span<const std::size_t> eligible, const Trigger& trigger,
                                   std::size_t count, std::uint64_t seed, const InjectionParams& params = {});

/// Copies of `records` with the `source` endpoint replaced by `host`
/// (the originator when neither endpoint is `source`).
std::vector<ConnRecord> rehost_records(std::span<const ConnRecord> records, const IpAddr& source, const IpAddr& host);

/// Splices `trigger` into `block` at `offset` with `source` rewritten to
/// `host`, keeping the most recent block.size() records.
std::vector<ConnRecord> splice_block(std::span<const ConnRecord> block, std::span<const ConnRecord> trigger,
                                     const IpAddr& source, const IpAddr& host, std::size_t offset);

/// One JSON object per line.
void write_manifest(std::ostream& out, std::span<const ManifestEntry> manifest,
                    std::span<const std::size_t> selected);

}  // namespace netpois
