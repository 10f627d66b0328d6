#pragma once

// Zeek conn.log ingestion: record model, labeling, and train/test/adversary
// partitioning.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "netpois/common.hpp"
#include "netpois/ip.hpp"

namespace netpois {

enum class Proto : std::uint8_t { tcp = 0, udp = 1, icmp = 2 };
inline constexpr std::size_t kNumProtos = 3;

// The closed set of Zeek connection states.
enum class ConnState : std::uint8_t {
  S0, S1, SF, REJ, S2, S3, RSTO, RSTR, RSTOS0, RSTRH, SH, SHR, OTH
};
inline constexpr std::size_t kNumConnStates = 13;

enum class Label : std::uint8_t { target = 0, nontarget = 1, unlabeled = 2 };

std::string_view to_string(Proto p);
std::string_view to_string(ConnState s);
std::string_view to_string(Label l);
std::optional<Proto> parse_proto(std::string_view s);
std::optional<ConnState> parse_conn_state(std::string_view s);
std::optional<Label> parse_label(std::string_view s);

/// One conn.log row.
struct ConnRecord {
  double ts = 0.0;
  IpAddr orig_ip;
  IpAddr resp_ip;
  std::uint16_t orig_p = 0;
  std::uint16_t resp_p = 0;  // 0 for ICMP
  Proto proto = Proto::tcp;
  std::optional<std::string> service;
  std::optional<double> duration;
  std::optional<std::uint64_t> orig_bytes;
  std::optional<std::uint64_t> resp_bytes;
  std::uint64_t orig_pkts = 0;
  std::uint64_t resp_pkts = 0;
  ConnState conn_state = ConnState::OTH;
  Label label = Label::unlabeled;

  bool operator==(const ConnRecord&) const = default;
};

struct Dataset {
  std::vector<ConnRecord> records;  // sorted by ts, stable on ties
  std::vector<Cidr> internal_subnets;
  std::string scenario_name;

  bool is_internal(const IpAddr& ip) const;
  /// The endpoint that keys aggregation: the originator when it is internal,
  /// else the responder when it is internal.
  std::optional<IpAddr> internal_endpoint(const ConnRecord& r) const;
};

bool is_internal(std::span<const Cidr> subnets, const IpAddr& ip);
std::optional<IpAddr> internal_endpoint(std::span<const Cidr> subnets, const ConnRecord& r);

void sort_by_time(std::vector<ConnRecord>& records);

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct ParseReport {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
  std::vector<RowError> errors;
};

struct ParseResult {
  Dataset dataset;
  ParseReport report;
};

/// Parses Zeek TSV conn.log text. Throws FormatError when no `#fields`
/// header precedes the data. Rows with malformed values are skipped and
/// reported. An optional `label` column is honored.
ParseResult parse_conn_log(std::istream& in);

/// Writes Zeek TSV conn.log text; `with_labels` appends a `label` column.
void write_conn_log(std::ostream& out, const Dataset& ds, bool with_labels = true);

/// Versioned record dump used as an ingestion cache. Carries the scenario
/// name and internal subnets alongside the rows.
void write_record_dump(std::ostream& out, const Dataset& ds);
Dataset read_record_dump(std::istream& in);

struct LabelRule {
  std::set<IpAddr> infected_hosts;
};

/// Records touching an infected host become nontarget, everything else target.
Dataset apply_labels(Dataset ds, const LabelRule& rule);

/// Per-dataset operator configuration (subnets and infected hosts are taken
/// from the dataset's documentation).
struct ScenarioConfig {
  std::string scenario_name;
  std::vector<Cidr> internal_subnets;
  LabelRule labels;
};

ScenarioConfig load_scenario_config(const std::string& path);
ScenarioConfig parse_scenario_config(std::string_view json_text);

struct SplitSpec {
  double test_start_ts = 0.0;        // records at or after this go to the test period
  double adversary_fraction = 0.15;  // of test-period windows
  double window_seconds = 30.0;
  std::uint64_t seed = 0;
};

struct Partition {
  Dataset train;
  Dataset test;
  Dataset adversary;
};

/// Splits by capture period, then moves a seeded random fraction of the
/// test-period time windows into the adversary set.
Partition partition_dataset(const Dataset& ds, const SplitSpec& spec);

}  // namespace netpois
