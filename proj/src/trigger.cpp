#include "netpois/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace netpois {

double nearest_rank_percentile(std::vector<double> values, double t) {
  if (values.empty()) throw AttackError("percentile of an empty set");
  if (!(t > 0.0 && t <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(t * static_cast<double>(values.size()) / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

Assignment compute_assignment(std::span<const FeaturePoint> nontarget_points, std::span<const std::size_t> selected,
                              double percentile) {
  if (nontarget_points.empty()) throw AttackError("no nontarget points to derive an assignment from");
  Assignment a;
  a.features.assign(selected.begin(), selected.end());
  a.percentile = percentile;
  std::vector<double> column(nontarget_points.size());
  for (auto f : selected) {
    for (std::size_t i = 0; i < nontarget_points.size(); ++i) column[i] = nontarget_points[i].values[f];
    a.values.push_back(nearest_rank_percentile(column, percentile));
  }
  return a;
}

Assignment compute_assignment(const Matrix& nontarget_rows, std::span<const std::size_t> selected,
                              double percentile) {
  if (nontarget_rows.empty()) throw AttackError("no nontarget points to derive an assignment from");
  Assignment a;
  a.features.assign(selected.begin(), selected.end());
  a.percentile = percentile;
  std::vector<double> column(nontarget_rows.rows());
  for (auto f : selected) {
    for (std::size_t i = 0; i < nontarget_rows.rows(); ++i) column[i] = nontarget_rows(i, f);
    a.values.push_back(nearest_rank_percentile(column, percentile));
  }
  return a;
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeaturePoint> points, std::span<const std::size_t> selected) {
  Matrix m;
  for (const auto& p : points) m.append_row(p.values);
  if (points.empty()) m = Matrix(0, kNumFeatures);
  return fit(m, selected);
}

FeatureNormalizer FeatureNormalizer::fit(const Matrix& rows, std::span<const std::size_t> selected) {
  FeatureNormalizer n;
  n.features_.assign(selected.begin(), selected.end());
  for (auto f : selected) {
    double lo = 0, hi = 0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      const double v = rows(i, f);
      lo = i ? std::min(lo, v) : v;
      hi = i ? std::max(hi, v) : v;
    }
    n.lo_.push_back(lo);
    n.range_.push_back(hi - lo);
  }
  return n;
}

double FeatureNormalizer::distance(std::span<const double> selected_values, std::span<const double> target) const {
  double sq = 0;
  for (std::size_t k = 0; k < features_.size(); ++k) {
    if (!(range_[k] > 0)) continue;
    const double diff = (selected_values[k] - target[k]) / range_[k];
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

double FeatureNormalizer::distance(const FeatureVector& values, std::span<const double> target) const {
  return row_distance(values, target);
}

double FeatureNormalizer::row_distance(std::span<const double> row, std::span<const double> target) const {
  std::vector<double> sel(features_.size());
  for (std::size_t k = 0; k < features_.size(); ++k) sel[k] = row[features_[k]];
  return distance(sel, target);
}

TriggerProto find_prototype(std::span<const FeaturePoint> nontarget_points, const Assignment& assignment) {
  if (nontarget_points.empty()) throw AttackError("no nontarget points to choose a prototype from");
  if (assignment.features.empty()) throw AttackError("empty assignment");
  const auto norm = FeatureNormalizer::fit(nontarget_points, assignment.features);
  TriggerProto best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nontarget_points.size(); ++i) {
    const double d = norm.distance(nontarget_points[i].values, assignment.values);
    if (d < best.distance) {
      best.distance = d;
      best.index = i;
    }
  }
  best.point = nontarget_points[best.index];
  return best;
}

std::string_view to_string(TriggerVariant v) {
  switch (v) {
    case TriggerVariant::full: return "full";
    case TriggerVariant::reduced: return "reduced";
    case TriggerVariant::generated: return "generated";
  }
  return "full";
}

TriggerVariant parse_trigger_variant(std::string_view s) {
  if (s == "full") return TriggerVariant::full;
  if (s == "reduced") return TriggerVariant::reduced;
  if (s == "generated") return TriggerVariant::generated;
  throw ConfigError("unknown trigger variant '" + std::string(s) + "'");
}

nlohmann::json Trigger::to_json() const {
  std::vector<std::string> names;
  for (auto f : selected) names.emplace_back(feature_names()[f]);
  return {{"variant", to_string(variant)}, {"size", records.size()},   {"source_host", source_host.to_string()},
          {"key_port", key_port},          {"selected", names},        {"target", target},
          {"achieved", achieved},          {"distance", distance},     {"warnings", warnings}};
}

std::vector<double> selected_values(std::span<const ConnRecord> records, const IpAddr& host, std::uint16_t port,
                                    std::span<const std::size_t> selected, std::span<const Cidr> subnets) {
  PointAccumulator acc(port, subnets);
  for (const auto& r : records) acc.add(r);
  const auto v = acc.values();
  std::vector<double> out;
  for (auto f : selected) out.push_back(v[f]);
  (void)host;
  return out;
}

std::size_t default_max_length(const TriggerProto& proto) {
  return std::clamp<std::size_t>(2 * proto.point.provenance.size(), 10, 500);
}

Trigger extract_full_trigger(const Dataset& adversary, const TriggerProto& proto,
                             std::span<const std::size_t> selected, const FeatureNormalizer& normalizer,
                             std::size_t max_length) {
  if (max_length < 1) throw ConfigError("trigger search length must be at least 1");
  std::map<IpAddr, std::vector<std::size_t>> streams;
  for (std::size_t i = 0; i < adversary.records.size(); ++i) {
    const auto& r = adversary.records[i];
    if (r.label != Label::nontarget) continue;
    if (auto host = adversary.internal_endpoint(r)) streams[*host].push_back(i);
  }
  if (streams.empty()) throw AttackError("adversary data holds no nontarget connections");

  std::vector<double> target;
  for (auto f : selected) target.push_back(proto.point.values[f]);

  struct Best {
    double distance = std::numeric_limits<double>::infinity();
    std::size_t length = 0;
    double start_ts = 0;
    const IpAddr* host = nullptr;
    std::size_t start = 0;
  } best;

  std::vector<double> sel(selected.size());
  PointAccumulator acc(proto.point.key.resp_p, adversary.internal_subnets);
  for (const auto& [host, idx] : streams) {
    for (std::size_t s = 0; s < idx.size(); ++s) {
      acc.clear();
      const double start_ts = adversary.records[idx[s]].ts;
      const std::size_t end = std::min(idx.size(), s + max_length);
      for (std::size_t e = s; e < end; ++e) {
        acc.add(adversary.records[idx[e]]);
        const auto v = acc.values();
        for (std::size_t k = 0; k < selected.size(); ++k) sel[k] = v[selected[k]];
        const double d = normalizer.distance(sel, target);
        const std::size_t len = e - s + 1;
        const bool better = d < best.distance ||
                            (d == best.distance && (len < best.length || (len == best.length && start_ts < best.start_ts)));
        if (better) best = {d, len, start_ts, &host, s};
      }
    }
  }

  Trigger t;
  t.variant = TriggerVariant::full;
  t.source_host = *best.host;
  t.key_port = proto.point.key.resp_p;
  t.selected.assign(selected.begin(), selected.end());
  t.target = target;
  const auto& idx = streams.at(*best.host);
  for (std::size_t k = best.start; k < best.start + best.length; ++k) t.records.push_back(adversary.records[idx[k]]);
  t.achieved = selected_values(t.records, t.source_host, t.key_port, t.selected, adversary.internal_subnets);
  t.distance = best.distance;
  return t;
}

Trigger reduce_trigger(const Trigger& full, std::span<const Cidr> subnets, const FeatureNormalizer& normalizer) {
  if (full.variant != TriggerVariant::full) throw ConfigError("only full triggers can be reduced");
  Trigger out = full;
  out.variant = TriggerVariant::reduced;

  bool port_features = false, distinct_ports = false, distinct_ips = false;
  for (auto f : full.selected) {
    if (f == feat::kDistinctDstPorts) distinct_ports = true;
    else if (f == feat::kDistinctExternalIps) distinct_ips = true;
    else port_features = true;
  }

  std::vector<ConnRecord> kept;
  std::set<std::uint16_t> ports;
  std::set<IpAddr> ips;
  for (const auto& r : full.records) {
    bool keep = port_features && r.resp_p == full.key_port;
    if (distinct_ports && r.proto != Proto::icmp && ports.insert(r.resp_p).second) keep = true;
    const IpAddr other = r.orig_ip == full.source_host ? r.resp_ip : r.orig_ip;
    if (distinct_ips && !is_internal(subnets, other) && ips.insert(other).second) keep = true;
    if (keep) kept.push_back(r);
  }

  std::vector<double> allowed(full.selected.size());
  for (std::size_t k = 0; k < allowed.size(); ++k) allowed[k] = std::abs(full.achieved[k] - full.target[k]);
  auto acceptable = [&](const std::vector<double>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double tol = 1e-9 * std::max(1.0, std::abs(full.target[k]));
      if (std::abs(v[k] - full.target[k]) > allowed[k] + tol) return false;
    }
    return true;
  };

  for (std::size_t len = 1; len <= kept.size(); ++len) {
    for (std::size_t s = 0; s + len <= kept.size(); ++s) {
      std::span<const ConnRecord> run(kept.data() + s, len);
      auto v = selected_values(run, full.source_host, full.key_port, full.selected, subnets);
      if (!acceptable(v)) continue;
      out.records.assign(run.begin(), run.end());
      out.achieved = std::move(v);
      out.distance = normalizer.distance(out.achieved, out.target);
      return out;
    }
  }
  out.records = full.records;
  out.warnings.push_back("trigger reduction would degrade every selected feature; keeping the full trigger");
  return out;
}

std::vector<ConnRecord> best_window(std::span<const ConnRecord> records, std::size_t length,
                                    const std::function<double(std::span<const ConnRecord>)>& score) {
  if (length == 0 || records.size() < length) throw AttackError("not enough records for the requested trigger window");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_start = 0;
  for (std::size_t s = 0; s + length <= records.size(); ++s) {
    const double v = score(records.subspan(s, length));
    if (v < best) {
      best = v;
      best_start = s;
    }
  }
  return {records.begin() + best_start, records.begin() + best_start + length};
}

}  // namespace netpois
