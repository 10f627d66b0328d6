#pragma once

// Statistical window features: connections grouped by
// (30 s window, internal IP, destination port), plus two distinct counts
// computed per (window, internal IP).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "netpois/flowlog.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

inline constexpr std::size_t kNumFeatures = 33;
inline constexpr double kDefaultWindowSeconds = 30.0;

namespace feat {
inline constexpr std::size_t kProtoCount = 0;   // +Proto
inline constexpr std::size_t kStateCount = 3;   // +ConnState
inline constexpr std::size_t kOrigPkts = 16;    // sum, min, max
inline constexpr std::size_t kRespPkts = 19;
inline constexpr std::size_t kOrigBytes = 22;
inline constexpr std::size_t kRespBytes = 25;
inline constexpr std::size_t kDuration = 28;
inline constexpr std::size_t kDistinctExternalIps = 31;
inline constexpr std::size_t kDistinctDstPorts = 32;
}  // namespace feat

enum class FeatureKind { count, sum, min, max, distinct };

const std::array<std::string_view, kNumFeatures>& feature_names();
FeatureKind feature_kind(std::size_t index);
/// Count, sum and distinct features grow under insertion of records.
bool is_additive(std::size_t index);

using FeatureVector = std::array<double, kNumFeatures>;

struct AggregationKey {
  std::int64_t window_index = 0;
  IpAddr internal_ip;
  std::uint16_t resp_p = 0;

  auto operator<=>(const AggregationKey&) const = default;
};

struct FeaturePoint {
  AggregationKey key;
  FeatureVector values{};
  Label label = Label::target;
  /// Indices of the records of this point's (window, internal IP) group, in
  /// record order. Port-keyed features use the subset whose resp_p matches
  /// the key; the distinct counts use all of them.
  std::vector<std::size_t> provenance;

  bool operator==(const FeaturePoint&) const = default;
};

std::int64_t window_index(double ts, double window_seconds = kDefaultWindowSeconds);

/// One point per (window, internal IP, resp_p) with at least one connection,
/// sorted by key. Records without an internal endpoint are ignored.
std::vector<FeaturePoint> aggregate_windows(const Dataset& ds, double window_seconds = kDefaultWindowSeconds);

/// Features of `key` computed from `records`, considering only records whose
/// internal endpoint is key.internal_ip. Window membership is not checked, so
/// callers can evaluate arbitrary record sequences as a single window.
/// Provenance indexes into `records`.
FeaturePoint recompute_point(std::span<const ConnRecord> records, const AggregationKey& key,
                             std::span<const Cidr> internal_subnets);

/// Incremental form of recompute_point for records already known to belong to
/// one internal host; used by the contiguous trigger search.
class PointAccumulator {
 public:
  PointAccumulator(std::uint16_t key_port, std::span<const Cidr> internal_subnets);
  void add(const ConnRecord& r);
  void clear();
  FeatureVector values() const;
  std::size_t size() const { return total_; }

 private:
  std::uint16_t key_port_;
  std::span<const Cidr> subnets_;
  std::size_t total_ = 0;
  std::array<double, kNumFeatures> acc_{};
  std::array<bool, 5> seen_{};  // per {sum,min,max} triple
  std::vector<IpAddr> external_ips_;
  std::vector<std::uint16_t> ports_;
};

Matrix to_matrix(std::span<const FeaturePoint> points);
/// 1 for nontarget, 0 otherwise.
std::vector<int> to_labels(std::span<const FeaturePoint> points);

void write_feature_points(std::ostream& out, std::span<const FeaturePoint> points);
std::vector<FeaturePoint> read_feature_points(std::istream& in);

}  // namespace netpois
