#include "netpois/featurize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace netpois {

namespace {

constexpr std::string_view kMagic = "#netpois-features";
constexpr int kFormatVersion = 1;

// {sum,min,max} triples in feature order and the record field behind each.
constexpr std::array<std::size_t, 5> kTripleBase = {feat::kOrigPkts, feat::kRespPkts, feat::kOrigBytes,
                                                    feat::kRespBytes, feat::kDuration};

std::optional<double> triple_value(const ConnRecord& r, std::size_t triple) {
  switch (triple) {
    case 0: return static_cast<double>(r.orig_pkts);
    case 1: return static_cast<double>(r.resp_pkts);
    case 2: return r.orig_bytes ? std::optional<double>(static_cast<double>(*r.orig_bytes)) : std::nullopt;
    case 3: return r.resp_bytes ? std::optional<double>(static_cast<double>(*r.resp_bytes)) : std::nullopt;
    default: return r.duration;
  }
}

IpAddr other_endpoint(const ConnRecord& r, const IpAddr& host) { return r.orig_ip == host ? r.resp_ip : r.orig_ip; }

struct GroupKey {
  std::int64_t window;
  IpAddr host;
  bool operator==(const GroupKey&) const = default;
};

struct GroupKeyHash {
  std::size_t operator()(const GroupKey& k) const noexcept {
    return IpAddrHash{}(k.host) ^ (static_cast<std::size_t>(k.window) * 0x9e3779b97f4a7c15ULL);
  }
};

// Builds every point of one (window, host) group.
void emit_group(std::span<const ConnRecord> all, const std::vector<std::size_t>& group, std::int64_t window,
                const IpAddr& host, std::span<const Cidr> subnets, std::vector<FeaturePoint>& out) {
  std::unordered_set<IpAddr, IpAddrHash> externals;
  std::unordered_set<std::uint16_t> ports;
  std::map<std::uint16_t, std::vector<std::size_t>> by_port;
  for (auto idx : group) {
    const auto& r = all[idx];
    const IpAddr other = other_endpoint(r, host);
    if (!is_internal(subnets, other)) externals.insert(other);
    if (r.proto != Proto::icmp) ports.insert(r.resp_p);
    by_port[r.resp_p].push_back(idx);
  }
  for (const auto& [port, members] : by_port) {
    FeaturePoint p;
    p.key = {window, host, port};
    std::array<bool, 5> seen{};
    for (auto idx : members) {
      const auto& r = all[idx];
      p.values[feat::kProtoCount + static_cast<std::size_t>(r.proto)] += 1;
      p.values[feat::kStateCount + static_cast<std::size_t>(r.conn_state)] += 1;
      for (std::size_t t = 0; t < 5; ++t) {
        auto v = triple_value(r, t);
        if (!v) continue;
        auto* tr = &p.values[kTripleBase[t]];
        tr[0] += *v;
        tr[1] = seen[t] ? std::min(tr[1], *v) : *v;
        tr[2] = seen[t] ? std::max(tr[2], *v) : *v;
        seen[t] = true;
      }
      if (r.label == Label::nontarget) p.label = Label::nontarget;
    }
    p.values[feat::kDistinctExternalIps] = static_cast<double>(externals.size());
    p.values[feat::kDistinctDstPorts] = static_cast<double>(ports.size());
    p.provenance = group;
    out.push_back(std::move(p));
  }
}

}  // namespace

const std::array<std::string_view, kNumFeatures>& feature_names() {
  static const std::array<std::string_view, kNumFeatures> names = {
      "proto_tcp_count", "proto_udp_count", "proto_icmp_count",
      "state_S0_count", "state_S1_count", "state_SF_count", "state_REJ_count", "state_S2_count",
      "state_S3_count", "state_RSTO_count", "state_RSTR_count", "state_RSTOS0_count", "state_RSTRH_count",
      "state_SH_count", "state_SHR_count", "state_OTH_count",
      "orig_pkts_sum", "orig_pkts_min", "orig_pkts_max",
      "resp_pkts_sum", "resp_pkts_min", "resp_pkts_max",
      "orig_bytes_sum", "orig_bytes_min", "orig_bytes_max",
      "resp_bytes_sum", "resp_bytes_min", "resp_bytes_max",
      "duration_sum", "duration_min", "duration_max",
      "distinct_external_ips", "distinct_dst_ports"};
  return names;
}

FeatureKind feature_kind(std::size_t index) {
  if (index < feat::kOrigPkts) return FeatureKind::count;
  if (index >= feat::kDistinctExternalIps) return FeatureKind::distinct;
  switch ((index - feat::kOrigPkts) % 3) {
    case 0: return FeatureKind::sum;
    case 1: return FeatureKind::min;
    default: return FeatureKind::max;
  }
}

bool is_additive(std::size_t index) {
  const auto k = feature_kind(index);
  return k == FeatureKind::count || k == FeatureKind::sum || k == FeatureKind::distinct;
}

std::int64_t window_index(double ts, double window_seconds) {
  return static_cast<std::int64_t>(std::floor(ts / window_seconds));
}

std::vector<FeaturePoint> aggregate_windows(const Dataset& ds, double window_seconds) {
  if (!(window_seconds > 0.0)) throw ConfigError("window length must be positive");
  std::unordered_map<GroupKey, std::vector<std::size_t>, GroupKeyHash> groups;
  std::vector<GroupKey> order;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    auto host = ds.internal_endpoint(r);
    if (!host) continue;
    GroupKey k{window_index(r.ts, window_seconds), *host};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second.push_back(i);
  }
  std::sort(order.begin(), order.end(), [](const GroupKey& a, const GroupKey& b) {
    return a.window != b.window ? a.window < b.window : a.host < b.host;
  });
  std::vector<FeaturePoint> out;
  out.reserve(order.size());
  for (const auto& k : order) emit_group(ds.records, groups.at(k), k.window, k.host, ds.internal_subnets, out);
  return out;
}

FeaturePoint recompute_point(std::span<const ConnRecord> records, const AggregationKey& key,
                             std::span<const Cidr> internal_subnets) {
  std::vector<std::size_t> group;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto host = internal_endpoint(internal_subnets, records[i]);
    if (host && *host == key.internal_ip) group.push_back(i);
  }
  std::vector<FeaturePoint> pts;
  emit_group(records, group, key.window_index, key.internal_ip, internal_subnets, pts);
  for (auto& p : pts) {
    if (p.key.resp_p == key.resp_p) return std::move(p);
  }
  // No connection on the key port: counts and triples stay zero.
  FeaturePoint p;
  p.key = key;
  p.provenance = std::move(group);
  if (!pts.empty()) {
    p.values[feat::kDistinctExternalIps] = pts.front().values[feat::kDistinctExternalIps];
    p.values[feat::kDistinctDstPorts] = pts.front().values[feat::kDistinctDstPorts];
  }
  return p;
}

PointAccumulator::PointAccumulator(std::uint16_t key_port, std::span<const Cidr> internal_subnets)
    : key_port_(key_port), subnets_(internal_subnets) {}

void PointAccumulator::clear() {
  total_ = 0;
  acc_.fill(0.0);
  seen_.fill(false);
  external_ips_.clear();
  ports_.clear();
}

void PointAccumulator::add(const ConnRecord& r) {
  ++total_;
  auto host = internal_endpoint(subnets_, r);
  const IpAddr other = host ? other_endpoint(r, *host) : r.resp_ip;
  if (!is_internal(subnets_, other)) {
    auto it = std::lower_bound(external_ips_.begin(), external_ips_.end(), other);
    if (it == external_ips_.end() || *it != other) external_ips_.insert(it, other);
  }
  if (r.proto != Proto::icmp) {
    auto it = std::lower_bound(ports_.begin(), ports_.end(), r.resp_p);
    if (it == ports_.end() || *it != r.resp_p) ports_.insert(it, r.resp_p);
  }
  if (r.resp_p != key_port_) return;
  acc_[feat::kProtoCount + static_cast<std::size_t>(r.proto)] += 1;
  acc_[feat::kStateCount + static_cast<std::size_t>(r.conn_state)] += 1;
  for (std::size_t t = 0; t < 5; ++t) {
    auto v = triple_value(r, t);
    if (!v) continue;
    auto* tr = &acc_[kTripleBase[t]];
    tr[0] += *v;
    tr[1] = seen_[t] ? std::min(tr[1], *v) : *v;
    tr[2] = seen_[t] ? std::max(tr[2], *v) : *v;
    seen_[t] = true;
  }
}

FeatureVector PointAccumulator::values() const {
  FeatureVector v = acc_;
  v[feat::kDistinctExternalIps] = static_cast<double>(external_ips_.size());
  v[feat::kDistinctDstPorts] = static_cast<double>(ports_.size());
  return v;
}

Matrix to_matrix(std::span<const FeaturePoint> points) {
  Matrix m(points.size(), kNumFeatures);
  for (std::size_t i = 0; i < points.size(); ++i)
    std::copy(points[i].values.begin(), points[i].values.end(), m.row(i).begin());
  return m;
}

std::vector<int> to_labels(std::span<const FeaturePoint> points) {
  std::vector<int> y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) y[i] = points[i].label == Label::nontarget ? 1 : 0;
  return y;
}

void write_feature_points(std::ostream& out, std::span<const FeaturePoint> points) {
  out << kMagic << '\t' << kFormatVersion << '\n';
  out << "#fields\twindow\tinternal_ip\tresp_p\tlabel";
  for (auto name : feature_names()) out << '\t' << name;
  out << "\tprovenance\n";
  char buf[64];
  for (const auto& p : points) {
    out << p.key.window_index << '\t' << p.key.internal_ip.to_string() << '\t' << p.key.resp_p << '\t'
        << to_string(p.label);
    for (double v : p.values) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << '\t' << std::string_view(buf, end - buf);
    }
    out << '\t';
    if (p.provenance.empty()) out << '-';
    for (std::size_t i = 0; i < p.provenance.size(); ++i) out << (i ? "," : "") << p.provenance[i];
    out << '\n';
  }
}

std::vector<FeaturePoint> read_feature_points(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with(kMagic))
    throw FormatError("not a netpois feature file (missing " + std::string(kMagic) + " header)");
  if (line != std::string(kMagic) + "\t" + std::to_string(kFormatVersion))
    throw FormatError("unsupported feature file version: " + line);
  std::vector<FeaturePoint> points;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& what) {
    throw FormatError("feature file line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    while (true) {
      auto tab = rest.find('\t');
      cells.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (cells.size() != 4 + kNumFeatures + 1) fail("wrong column count");
    FeaturePoint p;
    auto num = [&](std::string_view s, auto& out) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad number '" + std::string(s) + "'");
    };
    num(cells[0], p.key.window_index);
    auto ip = IpAddr::parse(cells[1]);
    if (!ip) fail("bad address");
    p.key.internal_ip = *ip;
    num(cells[2], p.key.resp_p);
    auto label = parse_label(cells[3]);
    if (!label) fail("bad label");
    p.label = *label;
    for (std::size_t f = 0; f < kNumFeatures; ++f) num(cells[4 + f], p.values[f]);
    std::string_view prov = cells.back();
    if (prov != "-") {
      while (!prov.empty()) {
        auto comma = prov.find(',');
        std::size_t idx = 0;
        num(prov.substr(0, comma), idx);
        p.provenance.push_back(idx);
        if (comma == std::string_view::npos) break;
        prov.remove_prefix(comma + 1);
      }
    }
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace netpois
