#include "netpois/bayesgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

namespace netpois {
namespace {

std::string service_value(const ConnRecord& r) { return r.service ? *r.service : "-"; }

std::string field_value(const ConnRecord& r, const std::string& node) {
  if (node == "proto") return std::string(to_string(r.proto));
  if (node == "resp_p") return std::to_string(r.resp_p);
  if (node == "service") return service_value(r);
  if (node == "conn_state") return std::string(to_string(r.conn_state));
  if (node == "orig_p") return std::to_string(r.orig_p);
  throw ConfigError("not a categorical node: " + node);
}

std::map<std::string, double> smooth(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [v, c] : counts) total += c;
  std::map<std::string, double> p;
  const double denom = static_cast<double>(total + counts.size());
  for (const auto& [v, c] : counts) p[v] = static_cast<double>(c + 1) / denom;
  return p;
}

std::string draw(const std::map<std::string, double>& dist, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng), acc = 0;
  for (const auto& [v, p] : dist) {
    acc += p;
    if (x < acc) return v;
  }
  return dist.rbegin()->first;
}

template <class T>
std::vector<T> thin(const std::vector<T>& v, std::size_t cap) {
  if (v.size() <= cap) return v;
  std::vector<T> out(cap);
  for (std::size_t i = 0; i < cap; ++i) out[i] = v[i * v.size() / cap];
  return out;
}

std::uint64_t parse_uint(const std::string& field, const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad value for " + field + ": '" + s + "'");
  return v;
}

std::uint16_t parse_port(const std::string& field, const std::string& s) {
  const auto v = parse_uint(field, s);
  if (v > 65535) throw ConfigError("port out of range for " + field + ": " + s);
  return static_cast<std::uint16_t>(v);
}

const std::map<std::string, std::vector<std::string>>& parents_of() {
  static const std::map<std::string, std::vector<std::string>> p = {
      {"proto", {}}, {"resp_p", {"proto"}}, {"service", {"resp_p"}},
      {"conn_state", {"proto", "service"}}, {"orig_p", {"resp_p"}}};
  return p;
}

const std::vector<std::string> kCategorical = {"proto", "resp_p", "service", "conn_state", "orig_p"};

}  // namespace

std::string context_key(const std::vector<std::string>& parent_values) {
  std::string k;
  for (std::size_t i = 0; i < parent_values.size(); ++i) {
    if (i) k += '|';
    k += parent_values[i];
  }
  return k;
}

const std::vector<std::string>& BayesNet::nodes() {
  static const std::vector<std::string> n = {"proto",    "resp_p",    "service",    "conn_state", "orig_p",
                                             "orig_pkts", "resp_pkts", "orig_bytes", "resp_bytes"};
  return n;
}

const std::vector<std::pair<std::string, std::string>>& BayesNet::edges() {
  static const std::vector<std::pair<std::string, std::string>> e = {
      {"proto", "resp_p"},       {"resp_p", "service"},       {"proto", "conn_state"},
      {"service", "conn_state"}, {"resp_p", "orig_p"},        {"orig_pkts", "resp_pkts"},
      {"orig_pkts", "orig_bytes"}, {"resp_pkts", "resp_bytes"}};
  return e;
}

const std::vector<std::string>& BayesNet::fixable_fields() {
  static const std::vector<std::string> f = {"proto",     "resp_p",     "service",    "conn_state", "orig_p",
                                             "orig_pkts", "resp_pkts",  "orig_bytes", "resp_bytes", "duration"};
  return f;
}

BayesNet BayesNet::fit(std::span<const ConnRecord> records, std::span<const Cidr> internal_subnets) {
  if (records.empty()) throw ConfigError("Bayesian network fit needs at least one record");
  BayesNet bn;
  bn.n_records_ = records.size();

  for (const auto& node : kCategorical) {
    Cpt cpt;
    cpt.node = node;
    cpt.parents = parents_of().at(node);
    std::map<std::string, std::map<std::string, std::size_t>> rows;
    std::map<std::string, std::size_t> marginal;
    for (const auto& r : records) {
      std::vector<std::string> ctx;
      for (const auto& p : cpt.parents) ctx.push_back(field_value(r, p));
      const auto v = field_value(r, node);
      ++rows[context_key(ctx)][v];
      ++marginal[v];
    }
    for (const auto& [ctx, counts] : rows) cpt.rows[ctx] = smooth(counts);
    cpt.marginal = smooth(marginal);
    bn.cpts_[node] = std::move(cpt);
  }

  std::vector<double> opk, rpk, obpp, rbpp;
  for (const auto& r : records) {
    opk.push_back(static_cast<double>(r.orig_pkts));
    rpk.push_back(static_cast<double>(r.resp_pkts));
    if (r.orig_pkts > 0 && r.orig_bytes)
      obpp.push_back(static_cast<double>(*r.orig_bytes) / static_cast<double>(r.orig_pkts));
    if (r.resp_pkts > 0 && r.resp_bytes)
      rbpp.push_back(static_cast<double>(*r.resp_bytes) / static_cast<double>(r.resp_pkts));
  }
  bn.orig_pkts_ = GaussianKde::fit(opk);
  bn.resp_pkts_ = GaussianKde::fit(rpk);
  if (!obpp.empty()) bn.orig_bpp_ = GaussianKde::fit(obpp);
  else bn.notes_.push_back("no originator bytes-per-packet observations");
  if (!rbpp.empty()) bn.resp_bpp_ = GaussianKde::fit(rbpp);
  else bn.notes_.push_back("no responder bytes-per-packet observations");

  std::vector<double> sorted = opk;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t b = 1; b < kPktBuckets; ++b) {
    const double c = sorted[b * sorted.size() / kPktBuckets];
    if (c > sorted.front() && (bn.bucket_cuts_.empty() || c > bn.bucket_cuts_.back())) bn.bucket_cuts_.push_back(c);
  }
  std::vector<std::vector<double>> by_bucket(bn.bucket_cuts_.size() + 1);
  for (const auto& r : records) by_bucket[bn.pkt_bucket(static_cast<double>(r.orig_pkts))].push_back(
      static_cast<double>(r.resp_pkts));
  for (auto& v : by_bucket) {
    if (v.empty()) bn.resp_pkts_by_bucket_.emplace_back();
    else bn.resp_pkts_by_bucket_.emplace_back(GaussianKde::fit(v));
  }

  std::vector<std::optional<double>> durs;
  std::set<IpAddr> responders;
  for (const auto& r : records) {
    durs.push_back(r.duration);
    auto host = internal_endpoint(internal_subnets, r);
    const IpAddr other = host ? (r.orig_ip == *host ? r.resp_ip : r.orig_ip) : r.resp_ip;
    if (!is_internal(internal_subnets, other)) responders.insert(other);
  }
  bn.durations_ = thin(durs, kMaxEmpirical);
  bn.responders_ = thin(std::vector<IpAddr>(responders.begin(), responders.end()), kMaxEmpirical);
  if (bn.responders_.empty()) bn.notes_.push_back("no external responders observed");
  return bn;
}

std::size_t BayesNet::pkt_bucket(double orig_pkts) const {
  return static_cast<std::size_t>(std::upper_bound(bucket_cuts_.begin(), bucket_cuts_.end(), orig_pkts) -
                                  bucket_cuts_.begin());
}

const Cpt& BayesNet::cpt(const std::string& node) const {
  auto it = cpts_.find(node);
  if (it == cpts_.end()) throw ConfigError("no CPT for node " + node);
  return it->second;
}

ConnRecord BayesNet::sample_connection(const std::map<std::string, std::string>& fixed, Rng& rng,
                                       SampleTrace* trace) const {
  for (const auto& [k, v] : fixed)
    if (std::find(fixable_fields().begin(), fixable_fields().end(), k) == fixable_fields().end())
      throw ConfigError("unknown field '" + k + "'");
  auto note = [&](std::string msg) {
    if (trace) trace->warnings.push_back(std::move(msg));
  };

  std::map<std::string, std::string> val;
  for (const auto& node : kCategorical) {
    const auto& c = cpt(node);
    if (auto it = fixed.find(node); it != fixed.end()) {
      val[node] = it->second;
      if (!c.marginal.contains(it->second)) note(node + "=" + it->second + " was not observed; kept as given");
      continue;
    }
    std::vector<std::string> ctx;
    for (const auto& p : c.parents) ctx.push_back(val.at(p));
    auto row = c.rows.find(context_key(ctx));
    if (row == c.rows.end()) {
      if (trace) trace->fallbacks.push_back(node);
      note(node + ": unseen context '" + context_key(ctx) + "', sampled from the marginal");
      val[node] = draw(c.marginal, rng);
    } else {
      val[node] = draw(row->second, rng);
    }
  }

  ConnRecord r;
  r.label = Label::target;
  auto proto = parse_proto(val["proto"]);
  if (!proto) throw ConfigError("bad proto '" + val["proto"] + "'");
  r.proto = *proto;
  r.resp_p = parse_port("resp_p", val["resp_p"]);
  r.orig_p = parse_port("orig_p", val["orig_p"]);
  if (val["service"] != "-") r.service = val["service"];
  auto state = parse_conn_state(val["conn_state"]);
  if (!state) throw ConfigError("bad conn_state '" + val["conn_state"] + "'");
  r.conn_state = *state;

  auto get = [&](const char* k) -> const std::string* {
    auto it = fixed.find(k);
    return it == fixed.end() ? nullptr : &it->second;
  };
  if (auto* s = get("orig_pkts")) r.orig_pkts = parse_uint("orig_pkts", *s);
  else r.orig_pkts = static_cast<std::uint64_t>(std::llround(std::max(0.0, orig_pkts_.sample(rng))));
  if (auto* s = get("resp_pkts")) {
    r.resp_pkts = parse_uint("resp_pkts", *s);
  } else {
    const auto& kde = resp_pkts_by_bucket_[pkt_bucket(static_cast<double>(r.orig_pkts))];
    if (!kde) {
      if (trace) trace->fallbacks.push_back("resp_pkts");
      note("resp_pkts: empty orig_pkts bucket, sampled from the marginal");
    }
    r.resp_pkts = static_cast<std::uint64_t>(std::llround(std::max(0.0, (kde ? *kde : resp_pkts_).sample(rng))));
  }
  auto bytes = [&](const char* field, std::uint64_t pkts,
                   const std::optional<GaussianKde>& bpp) -> std::optional<std::uint64_t> {
    if (auto* s = get(field)) return parse_uint(field, *s);
    if (!bpp) return std::nullopt;
    double sum = 0;
    for (std::uint64_t k = 0; k < pkts; ++k) sum += std::max(0.0, bpp->sample(rng));
    return static_cast<std::uint64_t>(std::llround(sum));
  };
  r.orig_bytes = bytes("orig_bytes", r.orig_pkts, orig_bpp_);
  r.resp_bytes = bytes("resp_bytes", r.resp_pkts, resp_bpp_);
  if (auto* s = get("duration")) {
    double d = 0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), d);
    if (ec != std::errc() || p != s->data() + s->size() || d < 0) throw ConfigError("bad duration '" + *s + "'");
    r.duration = d;
  } else if (!durations_.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, durations_.size() - 1);
    r.duration = durations_[pick(rng)];
  }
  if (!responders_.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, responders_.size() - 1);
    r.resp_ip = responders_[pick(rng)];
  }
  return r;
}

nlohmann::json BayesNet::to_json() const {
  nlohmann::json j;
  j["format"] = "netpois-bayesnet";
  j["version"] = 1;
  j["nodes"] = nodes();
  auto& e = j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : edges()) e.push_back({a, b});
  for (const auto& [name, c] : cpts_)
    j["cpts"][name] = {{"parents", c.parents}, {"rows", c.rows}, {"marginal", c.marginal}};
  j["kde"]["orig_pkts"] = orig_pkts_.to_json();
  j["kde"]["resp_pkts"] = resp_pkts_.to_json();
  j["kde"]["orig_pkts_bucket_cuts"] = bucket_cuts_;
  auto& buckets = j["kde"]["resp_pkts_by_bucket"] = nlohmann::json::array();
  for (const auto& k : resp_pkts_by_bucket_) buckets.push_back(k ? k->to_json() : nlohmann::json(nullptr));
  j["kde"]["orig_bytes_per_packet"] = orig_bpp_ ? orig_bpp_->to_json() : nlohmann::json(nullptr);
  j["kde"]["resp_bytes_per_packet"] = resp_bpp_ ? resp_bpp_->to_json() : nlohmann::json(nullptr);
  auto& d = j["empirical"]["duration"] = nlohmann::json::array();
  for (const auto& v : durations_) d.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  auto& rs = j["empirical"]["responders"] = nlohmann::json::array();
  for (const auto& ip : responders_) rs.push_back(ip.to_string());
  j["records"] = n_records_;
  j["notes"] = notes_;
  return j;
}

BayesNet BayesNet::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "netpois-bayesnet" || j.at("version") != 1)
      throw FormatError("not a netpois Bayesian network (format/version mismatch)");
    BayesNet bn;
    for (const auto& node : kCategorical) {
      const auto& c = j.at("cpts").at(node);
      Cpt cpt;
      cpt.node = node;
      cpt.parents = c.at("parents").get<std::vector<std::string>>();
      cpt.rows = c.at("rows").get<std::map<std::string, std::map<std::string, double>>>();
      cpt.marginal = c.at("marginal").get<std::map<std::string, double>>();
      bn.cpts_[node] = std::move(cpt);
    }
    const auto& k = j.at("kde");
    bn.orig_pkts_ = GaussianKde::from_json(k.at("orig_pkts"));
    bn.resp_pkts_ = GaussianKde::from_json(k.at("resp_pkts"));
    bn.bucket_cuts_ = k.at("orig_pkts_bucket_cuts").get<std::vector<double>>();
    for (const auto& b : k.at("resp_pkts_by_bucket"))
      bn.resp_pkts_by_bucket_.push_back(b.is_null() ? std::nullopt : std::optional(GaussianKde::from_json(b)));
    if (bn.resp_pkts_by_bucket_.size() != bn.bucket_cuts_.size() + 1)
      throw FormatError("resp_pkts bucket count does not match the cut points");
    if (!k.at("orig_bytes_per_packet").is_null()) bn.orig_bpp_ = GaussianKde::from_json(k["orig_bytes_per_packet"]);
    if (!k.at("resp_bytes_per_packet").is_null()) bn.resp_bpp_ = GaussianKde::from_json(k["resp_bytes_per_packet"]);
    for (const auto& d : j.at("empirical").at("duration"))
      bn.durations_.push_back(d.is_null() ? std::nullopt : std::optional(d.get<double>()));
    for (const auto& s : j.at("empirical").at("responders")) {
      auto ip = IpAddr::parse(s.get<std::string>());
      if (!ip) throw FormatError("bad responder address");
      bn.responders_.push_back(*ip);
    }
    bn.n_records_ = j.at("records").get<std::size_t>();
    bn.notes_ = j.at("notes").get<std::vector<std::string>>();
    return bn;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed Bayesian network: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed Bayesian network: ") + e.what());
  }
}

void BayesNet::save(std::ostream& out) const { out << to_json().dump(1) << '\n'; }

BayesNet BayesNet::load(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed Bayesian network: ") + e.what());
  }
  return from_json(j);
}

Trigger generate_trigger(const BayesNet& bn, const GenerateParams& params, std::span<const Cidr> internal_subnets,
                         const FeatureNormalizer& normalizer, std::uint64_t seed) {
  if (params.selected.size() != params.target.size()) throw ConfigError("selected/target size mismatch");
  Trigger t;
  t.variant = TriggerVariant::generated;
  t.key_port = params.key_port;
  t.selected = params.selected;
  t.target = params.target;
  t.source_host = IpAddr{};
  Rng rng(derive_seed(seed, 21));

  auto count_of = [](double v) { return static_cast<std::size_t>(std::llround(std::max(0.0, v))); };
  std::array<std::optional<std::size_t>, kNumProtos> proto_quota{};
  std::array<std::optional<std::size_t>, kNumConnStates> state_quota{};
  std::array<std::optional<double>, 5> sum_target{};
  std::optional<std::size_t> want_ports, want_ips;
  for (std::size_t k = 0; k < params.selected.size(); ++k) {
    const auto f = params.selected[k];
    const double v = params.target[k];
    if (f < feat::kStateCount) proto_quota[f] = count_of(v);
    else if (f < feat::kOrigPkts) state_quota[f - feat::kStateCount] = count_of(v);
    else if (f == feat::kDistinctExternalIps) want_ips = count_of(v);
    else if (f == feat::kDistinctDstPorts) want_ports = count_of(v);
    else if (feature_kind(f) == FeatureKind::sum) sum_target[(f - feat::kOrigPkts) / 3] = std::max(0.0, v);
  }

  std::size_t proto_total = 0, state_total = 0;
  for (auto& q : proto_quota) proto_total += q.value_or(0);
  for (auto& q : state_quota) state_total += q.value_or(0);
  const std::size_t n = std::max<std::size_t>({1, proto_total, state_total});

  // Per-connection protocol and state assignments.
  std::vector<std::optional<Proto>> protos;
  for (std::size_t p = 0; p < kNumProtos; ++p)
    for (std::size_t i = 0; i < proto_quota[p].value_or(0); ++i) protos.push_back(static_cast<Proto>(p));
  std::optional<Proto> filler;
  if (!proto_quota[static_cast<std::size_t>(params.proto)]) filler = params.proto;
  for (std::size_t p = 0; p < kNumProtos && !filler; ++p)
    if (!proto_quota[p]) filler = static_cast<Proto>(p);
  if (protos.size() < n && !filler) {
    t.warnings.push_back("every protocol count is selected and their total is below the trigger size");
    filler = params.proto;
  }
  while (protos.size() < n) protos.push_back(filler);

  std::vector<std::optional<ConnState>> states;
  for (std::size_t s = 0; s < kNumConnStates; ++s)
    for (std::size_t i = 0; i < state_quota[s].value_or(0); ++i) states.push_back(static_cast<ConnState>(s));
  states.resize(n);

  auto split_even = [n](double total, std::size_t i, bool integral) {
    if (!integral) return total / static_cast<double>(n);
    const auto whole = static_cast<std::uint64_t>(std::llround(total));
    return static_cast<double>(whole / n + (i < whole % n ? 1 : 0));
  };
  static const char* kSumFields[5] = {"orig_pkts", "resp_pkts", "orig_bytes", "resp_bytes", "duration"};

  const std::string port = std::to_string(params.key_port);
  SampleTrace trace;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string, std::string> fixed = {{"proto", std::string(to_string(*protos[i]))},
                                                {"resp_p", *protos[i] == Proto::icmp ? "0" : port}};
    if (states[i]) fixed["conn_state"] = std::string(to_string(*states[i]));
    for (std::size_t s = 0; s < 5; ++s) {
      if (!sum_target[s]) continue;
      const double v = split_even(*sum_target[s], i, s < 4);
      char buf[64];
      auto res = s < 4 ? std::to_chars(buf, buf + sizeof buf, static_cast<std::uint64_t>(v))
                       : std::to_chars(buf, buf + sizeof buf, v);
      fixed[kSumFields[s]] = std::string(buf, res.ptr);
    }
    ConnRecord r;
    const bool state_free = !states[i];
    for (int attempt = 0;; ++attempt) {
      r = bn.sample_connection(fixed, rng, &trace);
      if (!state_free || !state_quota[static_cast<std::size_t>(r.conn_state)]) break;
      if (attempt == 50) {
        t.warnings.push_back("could not avoid a quota-bound connection state");
        break;
      }
    }
    r.orig_ip = t.source_host;
    t.records.push_back(std::move(r));
  }

  // Distinct counts: extra ports are planned first so that padding for the
  // responder count reuses them instead of adding new ports.
  std::set<std::uint16_t> used;
  for (const auto& r : t.records)
    if (r.proto != Proto::icmp) used.insert(r.resp_p);
  std::vector<std::uint16_t> extra_ports;
  if (want_ports && used.size() < *want_ports) {
    std::vector<std::uint16_t> pool;
    for (const auto& [v, p] : bn.cpt("resp_p").marginal) {
      const auto port_v = parse_port("resp_p", v);
      if (!used.contains(port_v) && port_v != 0) pool.push_back(port_v);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t next = 0;
    std::uint16_t synth = 49152;
    std::set<std::uint16_t> taken = used;
    while (used.size() + extra_ports.size() < *want_ports) {
      std::uint16_t p;
      if (next < pool.size()) {
        p = pool[next++];
      } else {
        while (taken.contains(synth)) ++synth;
        p = synth;
        if (t.warnings.empty() || t.warnings.back().rfind("distinct-port", 0) != 0)
          t.warnings.push_back("distinct-port target exceeds observed ports; using unobserved ports");
      }
      taken.insert(p);
      extra_ports.push_back(p);
    }
  }
  std::vector<std::uint16_t> reusable(extra_ports);
  for (auto p : used)
    if (p != params.key_port) reusable.push_back(p);

  std::vector<IpAddr> externals;
  for (const auto& ip : bn.responders())
    if (!is_internal(internal_subnets, ip)) externals.push_back(ip);
  if (want_ips) {
    if (*want_ips > externals.size()) {
      t.warnings.push_back("fewer observed external responders than the distinct-IP target");
    }
    const std::size_t use = std::min(*want_ips, externals.size());
    std::shuffle(externals.begin(), externals.end(), rng);
    for (std::size_t i = 0; i < t.records.size() && use > 0; ++i) t.records[i].resp_ip = externals[i % use];
    const bool icmp_pad = params.proto == Proto::icmp;
    for (std::size_t i = t.records.size(); i < use; ++i) {
      const std::size_t j = i - std::min(i, n);
      std::map<std::string, std::string> fixed = {{"proto", std::string(to_string(params.proto))}};
      if (!icmp_pad && want_ports && !reusable.empty()) fixed["resp_p"] = std::to_string(reusable[j % reusable.size()]);
      auto r = bn.sample_connection(fixed, rng, &trace);
      if (!icmp_pad && want_ports && reusable.empty()) {
        t.warnings.push_back("distinct-IP padding adds a port beyond the distinct-port target");
        reusable.push_back(r.resp_p == params.key_port ? static_cast<std::uint16_t>(r.resp_p + 1) : r.resp_p);
      }
      if (!icmp_pad && want_ports) r.resp_p = reusable[j % reusable.size()];
      while (!icmp_pad && r.resp_p == params.key_port) r.resp_p = static_cast<std::uint16_t>(r.resp_p + 1);
      r.orig_ip = t.source_host;
      r.resp_ip = externals[i];
      if (r.proto != Proto::icmp) used.insert(r.resp_p);
      t.records.push_back(std::move(r));
    }
  }
  for (auto p : extra_ports) {
    if (used.contains(p)) continue;
    auto r = bn.sample_connection({{"resp_p", std::to_string(p)}}, rng, &trace);
    if (r.proto == Proto::icmp) r.proto = params.proto == Proto::icmp ? Proto::tcp : params.proto;
    r.resp_p = p;
    r.orig_ip = t.source_host;
    if (want_ips && !externals.empty()) r.resp_ip = externals[0];
    used.insert(p);
    t.records.push_back(std::move(r));
  }

  t.achieved = selected_values(t.records, t.source_host, t.key_port, t.selected, internal_subnets);
  for (std::size_t k = 0; k < t.selected.size(); ++k) {
    const auto f = t.selected[k];
    const auto kind = feature_kind(f);
    const double tol = 1e-9 * std::max(1.0, std::abs(t.target[k]));
    if (std::abs(t.achieved[k] - t.target[k]) <= tol) continue;
    if (kind == FeatureKind::min || kind == FeatureKind::max)
      t.warnings.push_back(std::string(feature_names()[f]) + " is not enforced by generation");
    else
      t.warnings.push_back(std::string(feature_names()[f]) + " target not met");
  }
  for (auto& w : trace.warnings) t.warnings.push_back(std::move(w));
  t.distance = normalizer.distance(t.achieved, t.target);
  return t;
}

}  // namespace netpois
