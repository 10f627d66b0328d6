#include "netpois/inject.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "json.hpp"

namespace netpois {
namespace {

ConnRecord rehost(ConnRecord r, const IpAddr& source, const IpAddr& host) {
  if (r.orig_ip == source) r.orig_ip = host;
  else if (r.resp_ip == source) r.resp_ip = host;
  else r.orig_ip = host;
  return r;
}

struct Unit {
  std::int64_t window;
  IpAddr host;
  std::size_t point;
};

FeatureVector window_values(const Dataset& ds, const FeaturePoint& point, std::span<const ConnRecord> extra,
                            const AggregationKey& key) {
  std::vector<ConnRecord> recs;
  recs.reserve(point.provenance.size() + extra.size());
  for (auto i : point.provenance) recs.push_back(ds.records[i]);
  recs.insert(recs.end(), extra.begin(), extra.end());
  return recompute_point(recs, key, ds.internal_subnets).values;
}

InjectionResult inject_units(const Dataset& ds, std::span<const FeaturePoint> points, const std::vector<Unit>& units,
                             const Trigger& trigger, Label label, const InjectionParams& params) {
  InjectionResult res;
  res.dataset = ds;
  std::vector<ConnRecord> injected;
  for (const auto& u : units) {
    auto recs = place_trigger(trigger, u.host, u.window, label, params);
    ManifestEntry e;
    e.key = {u.window, u.host, trigger.key_port};
    e.source_point = u.point;
    for (const auto& r : recs) e.timestamps.push_back(r.ts);
    e.before = window_values(ds, points[u.point], {}, e.key);
    e.after = window_values(ds, points[u.point], recs, e.key);
    res.manifest.push_back(std::move(e));
    injected.insert(injected.end(), recs.begin(), recs.end());
  }
  res.dataset.records.insert(res.dataset.records.end(), injected.begin(), injected.end());
  sort_by_time(res.dataset.records);
  return res;
}

}  // namespace

std::vector<ConnRecord> place_trigger(const Trigger& trigger, const IpAddr& host, std::int64_t window, Label label,
                                      const InjectionParams& params) {
  if (trigger.records.empty()) throw AttackError("empty trigger");
  if (!(params.placement_start >= 0.0 && params.placement_start < 1.0))
    throw ConfigError("placement start must lie in [0, 1)");
  const double w = params.window_seconds;
  const double start = (static_cast<double>(window) + params.placement_start) * w;
  const double avail = 0.999 * (1.0 - params.placement_start) * w;
  const double first = trigger.records.front().ts;
  const double span = trigger.records.back().ts - first;
  const double scale = span > avail ? avail / span : 1.0;
  std::vector<ConnRecord> out;
  out.reserve(trigger.records.size());
  for (const auto& r : trigger.records) {
    auto c = rehost(r, trigger.source_host, host);
    c.ts = start + (r.ts - first) * scale;
    c.label = label;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ConnRecord> rehost_records(std::span<const ConnRecord> records, const IpAddr& source, const IpAddr& host) {
  std::vector<ConnRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(rehost(r, source, host));
  return out;
}

std::size_t poison_count(std::size_t total_points, double rate_percent) {
  if (rate_percent < 0.0 || rate_percent > 100.0) throw ConfigError("poison rate must lie in [0, 100] percent");
  if (rate_percent == 0.0) return 0;
  const auto n = static_cast<std::size_t>(std::llround(rate_percent / 100.0 * static_cast<double>(total_points)));
  return std::max<std::size_t>(1, n);
}

InjectionResult inject_training(const Dataset& train, std::span<const FeaturePoint> train_points,
                                const Trigger& trigger, double rate_percent, std::uint64_t seed,
                                const InjectionParams& params) {
  std::size_t n_target = 0;
  std::vector<Unit> units;
  std::map<std::pair<std::int64_t, IpAddr>, bool> seen;
  for (std::size_t i = 0; i < train_points.size(); ++i) {
    const auto& p = train_points[i];
    if (p.label != Label::target) continue;
    ++n_target;
    if (seen.emplace(std::pair{p.key.window_index, p.key.internal_ip}, true).second)
      units.push_back({p.key.window_index, p.key.internal_ip, i});
  }
  if (n_target == 0 && rate_percent > 0) throw AttackError("training data holds no target-class points");
  const std::size_t wanted = poison_count(train_points.size(), rate_percent);
  if (wanted == 0) return {train, {}, {}};
  Warnings warnings;
  if (rate_percent > 0 && static_cast<double>(train_points.size()) * rate_percent / 100.0 < 0.5)
    warnings.push_back("poison rate rounds to zero points; injecting one");
  if (wanted > units.size()) warnings.push_back("fewer target windows than requested poison points");
  std::vector<Unit> chosen;
  Rng rng(derive_seed(seed, 11));
  std::sample(units.begin(), units.end(), std::back_inserter(chosen), std::min(wanted, units.size()), rng);
  auto res = inject_units(train, train_points, chosen, trigger, Label::target, params);
  res.warnings.insert(res.warnings.begin(), warnings.begin(), warnings.end());
  return res;
}

InjectionResult inject_test_points(const Dataset& test, std::span<const FeaturePoint> test_points,
                                   std::span<const std::size_t> eligible, const Trigger& trigger,
                                   std::size_t count, std::uint64_t seed, const InjectionParams& params) {
  if (count == 0) return {test, {}, {}};
  std::vector<Unit> units;
  std::map<std::pair<std::int64_t, IpAddr>, bool> seen;
  for (auto i : eligible) {
    const auto& p = test_points[i];
    if (p.key.resp_p != trigger.key_port) continue;
    if (seen.emplace(std::pair{p.key.window_index, p.key.internal_ip}, true).second)
      units.push_back({p.key.window_index, p.key.internal_ip, i});
  }
  Warnings warnings;
  if (units.size() < count)
    warnings.push_back("only " + std::to_string(units.size()) + " eligible test points on the trigger port");
  std::vector<Unit> chosen;
  Rng rng(derive_seed(seed, 12));
  std::sample(units.begin(), units.end(), std::back_inserter(chosen), std::min(count, units.size()), rng);
  const Label label = chosen.empty() ? Label::nontarget : test_points[chosen.front().point].label;
  auto res = inject_units(test, test_points, chosen, trigger, label, params);
  res.warnings.insert(res.warnings.begin(), warnings.begin(), warnings.end());
  return res;
}

std::vector<ConnRecord> splice_block(std::span<const ConnRecord> block, std::span<const ConnRecord> trigger,
                                     const IpAddr& source, const IpAddr& host, std::size_t offset) {
  if (offset > block.size()) throw ConfigError("splice offset beyond block end");
  std::vector<ConnRecord> all(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(offset));
  const double lo = offset > 0 ? block[offset - 1].ts : (block.empty() ? 0.0 : block.front().ts - 1.0);
  const double hi = offset < block.size() ? block[offset].ts : lo + 1.0;
  const double step = (hi - lo) / static_cast<double>(trigger.size() + 1);
  for (std::size_t k = 0; k < trigger.size(); ++k) {
    auto r = rehost(trigger[k], source, host);
    r.ts = lo + step * static_cast<double>(k + 1);
    all.push_back(std::move(r));
  }
  all.insert(all.end(), block.begin() + static_cast<std::ptrdiff_t>(offset), block.end());
  return {all.end() - static_cast<std::ptrdiff_t>(block.size()), all.end()};
}

void write_manifest(std::ostream& out, std::span<const ManifestEntry> manifest,
                    std::span<const std::size_t> selected) {
  for (const auto& e : manifest) {
    nlohmann::json before = nlohmann::json::object(), after = nlohmann::json::object();
    for (auto f : selected) {
      before[std::string(feature_names()[f])] = e.before[f];
      after[std::string(feature_names()[f])] = e.after[f];
    }
    nlohmann::json j = {{"window", e.key.window_index}, {"host", e.key.internal_ip.to_string()},
                        {"port", e.key.resp_p},         {"records", e.timestamps.size()},
                        {"timestamps", e.timestamps},   {"before", before},
                        {"after", after}};
    out << j.dump() << '\n';
  }
}

}  // namespace netpois
