#pragma once

// Fixed-size connection blocks for the auto-encoder representation.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "netpois/flowlog.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

inline constexpr std::size_t kDefaultBlockLen = 100;
inline constexpr std::size_t kServiceBuckets = 11;  // top 10 + other

/// Per-connection encoding: six log1p/min-max scaled numerics followed by
/// one-hot proto, conn_state and service bucket.
class BlockEncoder {
 public:
  static constexpr std::size_t kNumerics = 6;  // duration, orig/resp pkts, orig/resp bytes, resp_p
  static constexpr std::size_t kWidth = kNumerics + kNumProtos + kNumConnStates + kServiceBuckets;

  /// Scaling constants and the service vocabulary come from training records only.
  static BlockEncoder fit(std::span<const ConnRecord> training);

  std::size_t service_bucket(const ConnRecord& r) const;
  void encode_record(const ConnRecord& r, std::span<double> out) const;
  std::vector<double> encode(std::span<const ConnRecord> block) const;

  struct Categories {
    Proto proto;
    ConnState state;
    std::size_t service_bucket;
    bool operator==(const Categories&) const = default;
  };
  std::vector<Categories> decode_categories(std::span<const double> encoded) const;

  const std::vector<std::string>& services() const { return services_; }

  nlohmann::json to_json() const;
  static BlockEncoder from_json(const nlohmann::json& j);

 private:
  std::array<double, kNumerics> lo_{};
  std::array<double, kNumerics> hi_{};
  std::vector<std::string> services_;  // at most kServiceBuckets - 1
};

struct BlockPoint {
  IpAddr host;
  std::vector<double> values;           // block_len * BlockEncoder::kWidth
  Label label = Label::target;          // nontarget iff any record is
  std::vector<std::size_t> provenance;  // record indices, time order
};

/// Groups each internal host's time-ordered records into consecutive,
/// non-overlapping blocks; trailing partial blocks are dropped.
std::vector<std::vector<std::size_t>> block_indices(const Dataset& ds, std::size_t block_len = kDefaultBlockLen);

std::vector<BlockPoint> blockize(const Dataset& ds, const BlockEncoder& encoder,
                                 std::size_t block_len = kDefaultBlockLen);

/// Encodes an arbitrary record sequence as a block point for `host`.
BlockPoint make_block(std::span<const ConnRecord> records, const IpAddr& host, const BlockEncoder& encoder);

Matrix to_matrix(std::span<const BlockPoint> blocks);
std::vector<int> to_labels(std::span<const BlockPoint> blocks);

}  // namespace netpois
