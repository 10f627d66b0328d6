#include "netpois/stealth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "netpois/isolation_forest.hpp"

namespace netpois {
namespace {

std::vector<std::size_t> rank_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  return order;
}

std::optional<double> numeric_field(const ConnRecord& r, const std::string& f) {
  if (f == "duration") return r.duration;
  if (f == "orig_pkts") return static_cast<double>(r.orig_pkts);
  if (f == "resp_pkts") return static_cast<double>(r.resp_pkts);
  if (f == "orig_bytes") return r.orig_bytes ? std::optional(static_cast<double>(*r.orig_bytes)) : std::nullopt;
  if (f == "resp_bytes") return r.resp_bytes ? std::optional(static_cast<double>(*r.resp_bytes)) : std::nullopt;
  if (f == "orig_p") return static_cast<double>(r.orig_p);
  if (f == "resp_p") return static_cast<double>(r.resp_p);
  throw ConfigError("unknown numeric field " + f);
}

std::string categorical_field(const ConnRecord& r, const std::string& f) {
  if (f == "proto") return std::string(to_string(r.proto));
  if (f == "service") return r.service.value_or("-");
  if (f == "conn_state") return std::string(to_string(r.conn_state));
  if (f == "resp_p") return std::to_string(r.resp_p);
  if (f == "orig_p") return std::to_string(r.orig_p);
  throw ConfigError("unknown categorical field " + f);
}

constexpr std::size_t kJsBins = 50;

}  // namespace

double pr_auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw ConfigError("score/label length mismatch");
  const auto total_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  if (total_pos == 0) throw ConfigError("precision-recall needs at least one positive");
  const auto order = rank_desc(scores);
  double ap = 0, prev_recall = 0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += positive[order[j]] == 1;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double f1_top_k(std::span<const double> scores, std::span<const int> positive, std::size_t k) {
  if (scores.size() != positive.size()) throw ConfigError("score/label length mismatch");
  const auto order = rank_desc(scores);
  k = std::min(k, order.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < k; ++i) tp += positive[order[i]] == 1;
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(k);
  const double recall = static_cast<double>(tp) / static_cast<double>(pos);
  return 2 * precision * recall / (precision + recall);
}

nlohmann::json DetectionResult::to_json() const {
  return {{"pr_auc", pr_auc ? nlohmann::json(*pr_auc) : nlohmann::json(nullptr)},
          {"f1", f1 ? nlohmann::json(*f1) : nlohmann::json(nullptr)},
          {"detector_size", detector_size},
          {"evaluated", evaluated},
          {"poisoned", poisoned},
          {"threshold_rule", threshold_rule}};
}

DetectionResult evaluate_anomaly_detection(const Matrix& features, std::span<const int> is_poisoned,
                                           std::uint64_t seed, const DetectionParams& params) {
  if (features.rows() != is_poisoned.size()) throw ConfigError("feature/manifest length mismatch");
  if (!(params.detector_fraction > 0 && params.detector_fraction < 1))
    throw ConfigError("detector fraction must lie in (0, 1)");
  DetectionResult res;
  std::vector<std::size_t> clean, poisoned;
  for (std::size_t i = 0; i < is_poisoned.size(); ++i) (is_poisoned[i] ? poisoned : clean).push_back(i);
  res.poisoned = poisoned.size();
  if (poisoned.empty() || clean.empty()) return res;

  Rng rng(derive_seed(seed, 31));
  std::shuffle(clean.begin(), clean.end(), rng);
  auto n_det = static_cast<std::size_t>(std::llround(params.detector_fraction * static_cast<double>(features.rows())));
  n_det = std::clamp<std::size_t>(n_det, 1, clean.size() > 1 ? clean.size() - 1 : 1);
  std::vector<std::size_t> detector(clean.begin(), clean.begin() + static_cast<std::ptrdiff_t>(n_det));
  std::vector<std::size_t> holdout(clean.begin() + static_cast<std::ptrdiff_t>(n_det), clean.end());
  for (auto i : detector)
    if (is_poisoned[i]) throw AttackError("detector subset intersects the poisoned set");
  if (params.pool == EvalPool::balanced && holdout.size() > poisoned.size()) holdout.resize(poisoned.size());
  res.detector_size = detector.size();

  IsolationForestParams ifp;
  ifp.trees = params.trees;
  ifp.subsample = params.subsample;
  const auto forest = IsolationForest::fit(features.select_rows(detector), ifp, derive_seed(seed, 32));

  std::vector<std::size_t> pool = poisoned;
  pool.insert(pool.end(), holdout.begin(), holdout.end());
  std::sort(pool.begin(), pool.end());
  std::vector<double> scores;
  std::vector<int> labels;
  for (auto i : pool) {
    scores.push_back(forest.score(features.row(i)));
    labels.push_back(is_poisoned[i] ? 1 : 0);
  }
  res.evaluated = pool.size();
  res.pr_auc = pr_auc(scores, labels);
  res.f1 = f1_top_k(scores, labels, poisoned.size());
  return res;
}

double js_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("histograms differ in length");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (!(sp > 0) || !(sq > 0)) throw ConfigError("empty histogram");
  double div = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i] / sp, b = q[i] / sq, m = 0.5 * (a + b);
    const double ta = a > 0 ? a * std::log2(a / m) : 0.0;
    const double tb = b > 0 ? b * std::log2(b / m) : 0.0;
    div += 0.5 * (ta + tb);
  }
  return std::sqrt(std::clamp(div, 0.0, 1.0));
}

const std::vector<FieldSpec>& default_js_fields() {
  static const std::vector<FieldSpec> f = {
      {"proto", true},       {"service", true},    {"conn_state", true}, {"resp_p", true},
      {"orig_p", false},     {"duration", false},  {"orig_pkts", false}, {"resp_pkts", false},
      {"orig_bytes", false}, {"resp_bytes", false}};
  return f;
}

std::pair<std::vector<double>, std::vector<double>> field_histograms(std::span<const ConnRecord> other,
                                                                     std::span<const ConnRecord> clean,
                                                                     const FieldSpec& field) {
  if (field.categorical) {
    std::map<std::string, std::pair<double, double>> h;
    for (const auto& r : other) h[categorical_field(r, field.name)].first += 1;
    for (const auto& r : clean) h[categorical_field(r, field.name)].second += 1;
    std::vector<double> a, b;
    for (const auto& [k, v] : h) {
      a.push_back(v.first);
      b.push_back(v.second);
    }
    return {a, b};
  }
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& r : clean) {
    if (auto v = numeric_field(r, field.name)) {
      const double z = std::log1p(std::max(0.0, *v));
      lo = any ? std::min(lo, z) : z;
      hi = any ? std::max(hi, z) : z;
      any = true;
    }
  }
  // Layout: [absent, underflow, bins..., overflow].
  const std::size_t n = kJsBins + 3;
  auto bin = [&](const std::optional<double>& v) -> std::size_t {
    if (!v) return 0;
    const double z = std::log1p(std::max(0.0, *v));
    if (!any || z < lo) return 1;
    if (z > hi) return n - 1;
    if (hi == lo) return 2;
    auto b = static_cast<std::size_t>((z - lo) / (hi - lo) * kJsBins);
    return 2 + std::min(b, kJsBins - 1);
  };
  std::vector<double> a(n, 0.0), b(n, 0.0);
  for (const auto& r : other) a[bin(numeric_field(r, field.name))] += 1;
  for (const auto& r : clean) b[bin(numeric_field(r, field.name))] += 1;
  return {a, b};
}

nlohmann::json JsReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t i = 0; i < fields.size(); ++i) per[fields[i]] = distances[i];
  return {{"fields", per},
          {"average", average},
          {"reference", reference ? nlohmann::json(*reference) : nlohmann::json(nullptr)}};
}

JsReport jensen_shannon_report(std::span<const ConnRecord> poisoned, std::span<const ConnRecord> clean,
                               const std::vector<FieldSpec>& fields) {
  if (poisoned.empty() || clean.empty()) throw ConfigError("Jensen-Shannon report needs two nonempty record sets");
  if (fields.empty()) throw ConfigError("no fields for the Jensen-Shannon report");
  JsReport rep;
  double sum = 0;
  for (const auto& f : fields) {
    auto [a, b] = field_histograms(poisoned, clean, f);
    const double d = js_distance(a, b);
    rep.fields.push_back(f.name);
    rep.distances.push_back(d);
    sum += d;
  }
  rep.average = sum / static_cast<double>(fields.size());
  return rep;
}

}  // namespace netpois
