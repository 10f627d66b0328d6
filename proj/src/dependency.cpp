#include "netpois/dependency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace netpois {
namespace {

bool is_numeric(const std::string& f) { return f != "proto" && f != "service" && f != "conn_state" && f != "resp_p"; }

double numeric_value(const ConnRecord& r, const std::string& f) {
  if (f == "orig_p") return r.orig_p;
  if (f == "duration") return r.duration.value_or(0.0);
  if (f == "orig_pkts") return static_cast<double>(r.orig_pkts);
  if (f == "resp_pkts") return static_cast<double>(r.resp_pkts);
  if (f == "orig_bytes") return static_cast<double>(r.orig_bytes.value_or(0));
  if (f == "resp_bytes") return static_cast<double>(r.resp_bytes.value_or(0));
  throw ConfigError("not a numeric field: " + f);
}

std::string category(const ConnRecord& r, const std::string& f) {
  if (f == "proto") return std::string(to_string(r.proto));
  if (f == "service") return r.service.value_or("-");
  if (f == "conn_state") return std::string(to_string(r.conn_state));
  if (f == "resp_p") return std::to_string(r.resp_p);
  throw ConfigError("not a categorical field: " + f);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

const std::vector<std::string>& dependency_fields() {
  static const std::vector<std::string> f = {"proto",    "service",   "conn_state", "resp_p",     "orig_p",
                                             "duration", "orig_pkts", "resp_pkts",  "orig_bytes", "resp_bytes"};
  return f;
}

std::vector<int> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("bin count must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (std::size_t b = 1; b < bins && !sorted.empty(); ++b) {
    const double c = sorted[b * sorted.size() / bins];
    if (c > sorted.front() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
  }
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin()));
  return out;
}

std::vector<int> discretize_field(std::span<const ConnRecord> records, const std::string& field, std::size_t bins) {
  if (is_numeric(field)) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(numeric_value(r, field));
    return equal_frequency_bins(v, bins);
  }
  std::map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(ids.emplace(category(r, field), static_cast<int>(ids.size())).first->second);
  return out;
}

double normalized_mutual_information(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw ConfigError("NMI inputs differ in length");
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  std::map<int, double> px, py;
  std::map<std::pair<int, int>, double> pxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    px[x[i]] += 1;
    py[y[i]] += 1;
    pxy[{x[i], y[i]}] += 1;
  }
  auto entropy = [n](const std::map<int, double>& m) {
    double h = 0;
    for (const auto& [k, c] : m) h -= c / n * std::log(c / n);
    return h;
  };
  const double hx = entropy(px), hy = entropy(py);
  if (!(hx > 0) || !(hy > 0)) return 0.0;
  double mi = 0;
  for (const auto& [k, c] : pxy) mi += c / n * std::log(c * n / (px[k.first] * py[k.second]));
  return std::clamp(mi / std::sqrt(hx * hy), 0.0, 1.0);
}

DependencyReport dependency_matrices(std::span<const ConnRecord> records) {
  if (records.size() < 10) throw ConfigError("dependency analysis needs at least 10 records");
  DependencyReport rep;
  rep.fields = dependency_fields();
  const auto m = rep.fields.size();
  std::vector<std::vector<int>> codes;
  std::vector<std::vector<double>> numeric(m);
  for (std::size_t i = 0; i < m; ++i) {
    codes.push_back(discretize_field(records, rep.fields[i]));
    if (is_numeric(rep.fields[i]))
      for (const auto& r : records) numeric[i].push_back(numeric_value(r, rep.fields[i]));
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.nmi.assign(m, std::vector<double>(m, 0.0));
  rep.correlation.assign(m, std::vector<double>(m, nan));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double v = normalized_mutual_information(codes[i], codes[j]);
      rep.nmi[i][j] = rep.nmi[j][i] = v;
      if (!numeric[i].empty() && !numeric[j].empty())
        rep.correlation[i][j] = rep.correlation[j][i] = pearson(numeric[i], numeric[j]);
    }
  }
  return rep;
}

std::vector<std::pair<std::string, std::string>> DependencyReport::top_pairs(std::size_t k) const {
  struct P {
    double v;
    std::size_t i, j;
  };
  std::vector<P> all;
  for (std::size_t i = 0; i < fields.size(); ++i)
    for (std::size_t j = i + 1; j < fields.size(); ++j) all.push_back({nmi[i][j], i, j});
  std::stable_sort(all.begin(), all.end(), [](const P& a, const P& b) { return a.v > b.v; });
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t t = 0; t < std::min(k, all.size()); ++t) out.emplace_back(fields[all[t].i], fields[all[t].j]);
  return out;
}

nlohmann::json DependencyReport::to_json() const {
  nlohmann::json corr = nlohmann::json::array();
  for (const auto& row : correlation) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    corr.push_back(r);
  }
  return {{"fields", fields}, {"nmi", nmi}, {"correlation", corr}};
}

}  // namespace netpois
