#include "netpois/flowlog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace netpois {

namespace {

constexpr std::array<std::string_view, kNumProtos> kProtoNames = {"tcp", "udp", "icmp"};
constexpr std::array<std::string_view, kNumConnStates> kStateNames = {
    "S0", "S1", "SF", "REJ", "S2", "S3", "RSTO", "RSTR", "RSTOS0", "RSTRH", "SH", "SHR", "OTH"};
constexpr std::array<std::string_view, 3> kLabelNames = {"target", "nontarget", "unlabeled"};

constexpr std::string_view kUnset = "-";
constexpr std::string_view kEmpty = "(empty)";
constexpr std::string_view kDumpMagic = "#netpois-records";
constexpr int kDumpVersion = 1;

enum Column : int {
  kTs, kOrigIp, kOrigP, kRespIp, kRespP, kProto, kService, kDuration,
  kOrigBytes, kRespBytes, kConnState, kOrigPkts, kRespPkts, kLabel, kNumColumns
};

// Canonical names first; later entries are accepted aliases.
const std::vector<std::pair<std::string_view, Column>>& column_aliases() {
  static const std::vector<std::pair<std::string_view, Column>> aliases = {
      {"ts", kTs},
      {"id.orig_h", kOrigIp}, {"orig_ip", kOrigIp}, {"orig_h", kOrigIp},
      {"id.orig_p", kOrigP}, {"orig_p", kOrigP},
      {"id.resp_h", kRespIp}, {"resp_ip", kRespIp}, {"resp_h", kRespIp},
      {"id.resp_p", kRespP}, {"resp_p", kRespP},
      {"proto", kProto},
      {"service", kService},
      {"duration", kDuration},
      {"orig_bytes", kOrigBytes},
      {"resp_bytes", kRespBytes},
      {"conn_state", kConnState},
      {"orig_pkts", kOrigPkts},
      {"resp_pkts", kRespPkts},
      {"label", kLabel},
  };
  return aliases;
}

void split_tabs(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool is_unset(std::string_view v) { return v == kUnset || v == kEmpty || v.empty(); }

template <typename T>
bool parse_number(std::string_view v, T& out) {
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc() && ptr == v.data() + v.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct ColumnMap {
  std::array<int, kNumColumns> index;
  ColumnMap() { index.fill(-1); }
};

ColumnMap map_columns(const std::vector<std::string_view>& names) {
  ColumnMap map;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (const auto& [alias, col] : column_aliases()) {
      if (names[i] == alias && map.index[col] < 0) map.index[col] = static_cast<int>(i);
    }
  }
  for (int c = 0; c < kNumColumns; ++c) {
    if (c == kLabel || c == kService || c == kDuration || c == kOrigBytes || c == kRespBytes) continue;
    if (map.index[c] < 0) {
      for (const auto& [alias, col] : column_aliases()) {
        if (col == c) throw FormatError("conn.log is missing required column '" + std::string(alias) + "'");
      }
    }
  }
  return map;
}

// Parses one data row; returns an error message on failure.
std::optional<std::string> parse_row(const std::vector<std::string_view>& cells, const ColumnMap& map,
                                     ConnRecord& r) {
  auto cell = [&](Column c) -> std::string_view {
    const int i = map.index[c];
    if (i < 0 || static_cast<std::size_t>(i) >= cells.size()) return kUnset;
    return cells[i];
  };
  auto bad = [](std::string_view field, std::string_view v) {
    return std::optional<std::string>("invalid value '" + std::string(v) + "' in column " + std::string(field));
  };

  r = ConnRecord{};
  const std::size_t needed = static_cast<std::size_t>(*std::max_element(map.index.begin(), map.index.end())) + 1;
  if (cells.size() < needed) return std::optional<std::string>("row has " + std::to_string(cells.size()) +
                                                               " columns, expected " + std::to_string(needed));

  if (!parse_number(cell(kTs), r.ts) || !std::isfinite(r.ts)) return bad("ts", cell(kTs));
  auto oip = IpAddr::parse(cell(kOrigIp));
  if (!oip) return bad("orig_ip", cell(kOrigIp));
  auto rip = IpAddr::parse(cell(kRespIp));
  if (!rip) return bad("resp_ip", cell(kRespIp));
  r.orig_ip = *oip;
  r.resp_ip = *rip;

  auto proto = parse_proto(cell(kProto));
  if (!proto) return bad("proto", cell(kProto));
  r.proto = *proto;

  std::uint32_t port = 0;
  if (!parse_number(cell(kOrigP), port) || port > 65535) return bad("orig_p", cell(kOrigP));
  r.orig_p = static_cast<std::uint16_t>(port);
  if (!parse_number(cell(kRespP), port) || port > 65535) return bad("resp_p", cell(kRespP));
  r.resp_p = r.proto == Proto::icmp ? 0 : static_cast<std::uint16_t>(port);

  if (auto s = cell(kService); !is_unset(s)) r.service = std::string(s);
  if (auto d = cell(kDuration); !is_unset(d)) {
    double v = 0;
    if (!parse_number(d, v) || !(v >= 0.0) || !std::isfinite(v)) return bad("duration", d);
    r.duration = v;
  }
  for (auto [col, field, name] : {std::tuple{kOrigBytes, &r.orig_bytes, "orig_bytes"},
                                  std::tuple{kRespBytes, &r.resp_bytes, "resp_bytes"}}) {
    if (auto v = cell(col); !is_unset(v)) {
      std::uint64_t n = 0;
      if (!parse_number(v, n)) return bad(name, v);
      *field = n;
    }
  }
  if (!parse_number(cell(kOrigPkts), r.orig_pkts)) return bad("orig_pkts", cell(kOrigPkts));
  if (!parse_number(cell(kRespPkts), r.resp_pkts)) return bad("resp_pkts", cell(kRespPkts));

  auto state = parse_conn_state(cell(kConnState));
  if (!state) return bad("conn_state", cell(kConnState));
  r.conn_state = *state;

  if (auto l = cell(kLabel); !is_unset(l)) {
    auto label = parse_label(l);
    if (!label) return bad("label", l);
    r.label = *label;
  }
  return std::nullopt;
}

struct RowParser {
  std::optional<ColumnMap> columns;
  std::vector<std::string_view> cells;
  std::vector<ConnRecord> records;
  ParseReport report;

  // Returns false for header/comment lines that are not `#fields`.
  void feed(std::string_view line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) return;
    if (line.front() == '#') {
      if (line.starts_with("#fields\t")) {
        split_tabs(line.substr(8), cells);
        columns = map_columns(cells);
      }
      return;
    }
    if (!columns) throw FormatError("data row at line " + std::to_string(line_no) + " precedes the #fields header");
    ++report.rows_read;
    split_tabs(line, cells);
    ConnRecord r;
    if (auto err = parse_row(cells, *columns, r)) {
      ++report.rows_skipped;
      report.errors.push_back({line_no, *err});
      return;
    }
    records.push_back(std::move(r));
  }
};

std::string join_subnets(const std::vector<Cidr>& subnets) {
  std::string out;
  for (std::size_t i = 0; i < subnets.size(); ++i) {
    if (i) out += ',';
    out += subnets[i].to_string();
  }
  return out;
}

}  // namespace

std::string_view to_string(Proto p) { return kProtoNames[static_cast<std::size_t>(p)]; }
std::string_view to_string(ConnState s) { return kStateNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Label l) { return kLabelNames[static_cast<std::size_t>(l)]; }

std::optional<Proto> parse_proto(std::string_view s) {
  for (std::size_t i = 0; i < kProtoNames.size(); ++i)
    if (kProtoNames[i] == s) return static_cast<Proto>(i);
  return std::nullopt;
}

std::optional<ConnState> parse_conn_state(std::string_view s) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i)
    if (kStateNames[i] == s) return static_cast<ConnState>(i);
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i)
    if (kLabelNames[i] == s) return static_cast<Label>(i);
  return std::nullopt;
}

bool is_internal(std::span<const Cidr> subnets, const IpAddr& ip) {
  return std::any_of(subnets.begin(), subnets.end(), [&](const Cidr& c) { return c.contains(ip); });
}

std::optional<IpAddr> internal_endpoint(std::span<const Cidr> subnets, const ConnRecord& r) {
  if (is_internal(subnets, r.orig_ip)) return r.orig_ip;
  if (is_internal(subnets, r.resp_ip)) return r.resp_ip;
  return std::nullopt;
}

bool Dataset::is_internal(const IpAddr& ip) const { return netpois::is_internal(internal_subnets, ip); }

std::optional<IpAddr> Dataset::internal_endpoint(const ConnRecord& r) const {
  return netpois::internal_endpoint(internal_subnets, r);
}

void sort_by_time(std::vector<ConnRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const ConnRecord& a, const ConnRecord& b) { return a.ts < b.ts; });
}

ParseResult parse_conn_log(std::istream& in) {
  RowParser parser;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) parser.feed(line, ++line_no);
  if (!parser.columns) throw FormatError("conn.log has no #fields header");
  ParseResult result;
  sort_by_time(parser.records);
  result.dataset.records = std::move(parser.records);
  result.report = std::move(parser.report);
  return result;
}

namespace {

void write_rows(std::ostream& out, const std::vector<ConnRecord>& records, bool with_labels) {
  std::string line;
  for (const auto& r : records) {
    line.clear();
    line += format_double(r.ts);
    line += '\t';
    line += r.orig_ip.to_string();
    line += '\t';
    line += std::to_string(r.orig_p);
    line += '\t';
    line += r.resp_ip.to_string();
    line += '\t';
    line += std::to_string(r.resp_p);
    line += '\t';
    line += to_string(r.proto);
    line += '\t';
    line += r.service ? *r.service : std::string(kUnset);
    line += '\t';
    line += r.duration ? format_double(*r.duration) : std::string(kUnset);
    line += '\t';
    line += r.orig_bytes ? std::to_string(*r.orig_bytes) : std::string(kUnset);
    line += '\t';
    line += r.resp_bytes ? std::to_string(*r.resp_bytes) : std::string(kUnset);
    line += '\t';
    line += to_string(r.conn_state);
    line += '\t';
    line += std::to_string(r.orig_pkts);
    line += '\t';
    line += std::to_string(r.resp_pkts);
    if (with_labels) {
      line += '\t';
      line += to_string(r.label);
    }
    line += '\n';
    out << line;
  }
}

constexpr std::string_view kFieldsLine =
    "#fields\tts\tid.orig_h\tid.orig_p\tid.resp_h\tid.resp_p\tproto\tservice\tduration\torig_bytes\tresp_bytes"
    "\tconn_state\torig_pkts\tresp_pkts";
constexpr std::string_view kTypesLine =
    "#types\ttime\taddr\tport\taddr\tport\tenum\tstring\tinterval\tcount\tcount\tstring\tcount\tcount";

}  // namespace

void write_conn_log(std::ostream& out, const Dataset& ds, bool with_labels) {
  out << "#separator \\x09\n#set_separator\t,\n#empty_field\t(empty)\n#unset_field\t-\n#path\tconn\n";
  out << kFieldsLine << (with_labels ? "\tlabel\n" : "\n");
  out << kTypesLine << (with_labels ? "\tstring\n" : "\n");
  write_rows(out, ds.records, with_labels);
}

void write_record_dump(std::ostream& out, const Dataset& ds) {
  out << kDumpMagic << '\t' << kDumpVersion << '\n';
  out << "#scenario\t" << ds.scenario_name << '\n';
  out << "#internal_subnets\t" << join_subnets(ds.internal_subnets) << '\n';
  out << kFieldsLine << "\tlabel\n";
  write_rows(out, ds.records, true);
}

Dataset read_record_dump(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(kDumpMagic))
    throw FormatError("not a netpois record dump (missing " + std::string(kDumpMagic) + " header)");
  int version = 0;
  const std::string_view rest = std::string_view(line).substr(kDumpMagic.size());
  if (rest.empty() || !parse_number(rest.substr(1), version) || version != kDumpVersion)
    throw FormatError("unsupported record dump version: " + line);

  Dataset ds;
  RowParser parser;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = line;
    if (v.starts_with("#scenario\t")) {
      ds.scenario_name = std::string(v.substr(10));
    } else if (v.starts_with("#internal_subnets\t")) {
      std::string_view list = v.substr(18);
      while (!list.empty()) {
        const auto comma = list.find(',');
        auto item = list.substr(0, comma);
        auto cidr = Cidr::parse(item);
        if (!cidr) throw FormatError("bad subnet in record dump: " + std::string(item));
        ds.internal_subnets.push_back(*cidr);
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
      }
    } else {
      parser.feed(v, line_no);
    }
  }
  if (!parser.columns) throw FormatError("record dump has no #fields header");
  if (!parser.report.errors.empty())
    throw FormatError("record dump line " + std::to_string(parser.report.errors.front().line) + ": " +
                      parser.report.errors.front().message);
  ds.records = std::move(parser.records);
  sort_by_time(ds.records);
  return ds;
}

Dataset apply_labels(Dataset ds, const LabelRule& rule) {
  for (auto& r : ds.records) {
    const bool infected = rule.infected_hosts.count(r.orig_ip) || rule.infected_hosts.count(r.resp_ip);
    r.label = infected ? Label::nontarget : Label::target;
  }
  return ds;
}

ScenarioConfig parse_scenario_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  ScenarioConfig cfg;
  cfg.scenario_name = j.value("scenario_name", std::string("unnamed"));
  for (const auto& s : j.value("internal_subnets", std::vector<std::string>{})) {
    auto cidr = Cidr::parse(s);
    if (!cidr) throw ConfigError("scenario config: bad subnet '" + s + "'");
    cfg.internal_subnets.push_back(*cidr);
  }
  for (const auto& s : j.value("infected_hosts", std::vector<std::string>{})) {
    auto ip = IpAddr::parse(s);
    if (!ip) throw ConfigError("scenario config: bad infected host '" + s + "'");
    cfg.labels.infected_hosts.insert(*ip);
  }
  if (cfg.internal_subnets.empty()) throw ConfigError("scenario config: internal_subnets must be non-empty");
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str());
}

Partition partition_dataset(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.adversary_fraction > 0.0 && spec.adversary_fraction < 1.0))
    throw ConfigError("adversary fraction must lie in (0, 1)");
  if (!(spec.window_seconds > 0.0)) throw ConfigError("window length must be positive");

  Partition p;
  for (Dataset* part : {&p.train, &p.test, &p.adversary}) {
    part->internal_subnets = ds.internal_subnets;
    part->scenario_name = ds.scenario_name;
  }

  // Distinct test-period windows in time order, then a seeded shuffle.
  std::vector<std::int64_t> windows;
  for (const auto& r : ds.records) {
    if (r.ts < spec.test_start_ts) continue;
    const auto w = static_cast<std::int64_t>(std::floor(r.ts / spec.window_seconds));
    if (windows.empty() || windows.back() != w) windows.push_back(w);
  }
  std::sort(windows.begin(), windows.end());
  windows.erase(std::unique(windows.begin(), windows.end()), windows.end());
  Rng rng(derive_seed(spec.seed, 1));
  std::shuffle(windows.begin(), windows.end(), rng);
  const auto n_adv = static_cast<std::size_t>(std::llround(spec.adversary_fraction * windows.size()));
  std::vector<std::int64_t> adv(windows.begin(), windows.begin() + n_adv);
  std::sort(adv.begin(), adv.end());

  for (const auto& r : ds.records) {
    if (r.ts < spec.test_start_ts) {
      p.train.records.push_back(r);
      continue;
    }
    const auto w = static_cast<std::int64_t>(std::floor(r.ts / spec.window_seconds));
    if (std::binary_search(adv.begin(), adv.end(), w)) {
      p.adversary.records.push_back(r);
    } else {
      p.test.records.push_back(r);
    }
  }
  return p;
}

}  // namespace netpois
