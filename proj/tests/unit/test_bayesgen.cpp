#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "netpois/bayesgen.hpp"
#include "netpois/dependency.hpp"
#include "netpois/inject.hpp"
#include "synthetic.hpp"

using namespace netpois;
using netpois::testkit::ip;

namespace {

std::vector<ConnRecord> target_records(const Dataset& ds) {
  std::vector<ConnRecord> out;
  for (const auto& r : ds.records)
    if (r.label == Label::target) out.push_back(r);
  return out;
}

ConnRecord web(const char* service, std::uint16_t port = 80) {
  ConnRecord r;
  r.orig_ip = ip("10.0.0.1");
  r.resp_ip = ip("8.8.8.8");
  r.proto = Proto::tcp;
  r.resp_p = port;
  r.orig_p = 40000;
  r.conn_state = ConnState::SF;
  if (service) r.service = service;
  r.orig_pkts = 3;
  r.resp_pkts = 4;
  r.orig_bytes = 300;
  r.resp_bytes = 800;
  r.duration = 0.25;
  r.label = Label::target;
  return r;
}

const std::vector<Cidr> kSubnets = {*Cidr::parse("10.0.0.0/16")};

}  // namespace

TEST(Kde, SilvermanBandwidth) {
  std::vector<double> v = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const double sd = std::sqrt(55.0 / 6.0);
  const double iqr = 7.75 - 3.25;
  EXPECT_NEAR(silverman_bandwidth(v), 0.9 * std::min(sd, iqr / 1.34) * std::pow(10.0, -0.2), 1e-12);
  EXPECT_EQ(silverman_bandwidth(std::vector<double>{3.0}), GaussianKde::kMinBandwidth);
  EXPECT_EQ(silverman_bandwidth(std::vector<double>{3.0, 3.0, 3.0}), GaussianKde::kMinBandwidth);
}

TEST(Kde, SingleValueSamplesAreNormalAroundIt) {
  const double x = 4.0, h = 0.5;
  GaussianKde kde({x}, h, false);
  Rng rng(1);
  const int n = 20000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double s = kde.sample_raw(rng);
    sum += s;
    sq += (s - x) * (s - x);
  }
  EXPECT_LT(std::abs(sum / n - x), 3 * h / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(sq / n), h, 0.02);
}

TEST(Kde, SamplesClippedToObservedRange) {
  std::vector<double> v = {1, 5, 9, 40, 100};
  auto kde = GaussianKde::fit(v);
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double s = kde.sample(rng);
    EXPECT_GE(s, 1 - 1e-9);
    EXPECT_LE(s, 100 + 1e-9);
  }
  auto back = GaussianKde::from_json(kde.to_json());
  EXPECT_EQ(back.support(), kde.support());
  EXPECT_EQ(back.bandwidth(), kde.bandwidth());
  EXPECT_THROW(GaussianKde::fit(std::vector<double>{-1.0}), ConfigError);
  EXPECT_THROW(GaussianKde::fit(std::vector<double>{}), ConfigError);
}

TEST(Kde, LargeInputsAreThinned) {
  std::vector<double> v(25000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 997);
  auto kde = GaussianKde::fit(v);
  EXPECT_EQ(kde.support().size(), GaussianKde::kMaxSupport);
  EXPECT_EQ(kde.lo(), 0);
  EXPECT_NEAR(kde.hi(), 996, 1e-9);
}

TEST(Kde, DensityIntegratesToOne) {
  GaussianKde kde({0.0, 1.0, 3.0}, 0.4, false);
  double area = 0;
  for (double z = -5; z < 8; z += 0.001) area += kde.density(z) * 0.001;
  EXPECT_NEAR(area, 1.0, 1e-4);
}

TEST(BayesNet, StructureIsFixed) {
  EXPECT_EQ(BayesNet::nodes().size(), 9u);
  EXPECT_EQ(BayesNet::edges().size(), 8u);
  std::set<std::pair<std::string, std::string>> e(BayesNet::edges().begin(), BayesNet::edges().end());
  EXPECT_TRUE(e.count({"resp_p", "service"}));
  EXPECT_TRUE(e.count({"orig_pkts", "resp_pkts"}));
  EXPECT_TRUE(e.count({"service", "conn_state"}));
}

TEST(BayesNet, ConditionalFrequencies) {
  std::vector<ConnRecord> recs = {web("http"), web("http"), web("http"), web("ssl"), web("ssl", 443)};
  auto bn = BayesNet::fit(recs, kSubnets);
  const auto& row = bn.cpt("service").rows.at("80");
  ASSERT_EQ(row.size(), 2u);
  // Add-one smoothing over the observed support {http, ssl}: (3 + 1) / (4 + 2).
  EXPECT_DOUBLE_EQ(row.at("http"), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ((row.at("http") * 6.0 - 1.0) / 4.0, 0.75);
  EXPECT_DOUBLE_EQ(bn.cpt("proto").rows.at("").at("tcp"), 1.0);
}

TEST(BayesNet, FixedPortDrawsFromItsConditionalSupport) {
  std::vector<ConnRecord> recs;
  for (int i = 0; i < 30; ++i) recs.push_back(web(i % 3 ? "http" : nullptr));
  for (int i = 0; i < 30; ++i) recs.push_back(web("ssl", 443));
  auto bn = BayesNet::fit(recs, kSubnets);
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    auto r = bn.sample_connection({{"proto", "tcp"}, {"resp_p", "80"}}, rng);
    EXPECT_EQ(r.resp_p, 80);
    EXPECT_TRUE(!r.service || *r.service == "http");
  }
}

TEST(BayesNet, SingleRecordIsReproduced) {
  const auto only = web("http");
  auto bn = BayesNet::fit(std::vector<ConnRecord>{only}, kSubnets);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    SampleTrace trace;
    auto r = bn.sample_connection({}, rng, &trace);
    EXPECT_TRUE(trace.fallbacks.empty());
    EXPECT_EQ(r.proto, only.proto);
    EXPECT_EQ(r.resp_p, only.resp_p);
    EXPECT_EQ(r.orig_p, only.orig_p);
    EXPECT_EQ(r.service, only.service);
    EXPECT_EQ(r.conn_state, only.conn_state);
    EXPECT_EQ(r.orig_pkts, only.orig_pkts);
    EXPECT_EQ(r.resp_pkts, only.resp_pkts);
    EXPECT_EQ(r.orig_bytes, only.orig_bytes);
    EXPECT_EQ(r.resp_bytes, only.resp_bytes);
    EXPECT_EQ(r.duration, only.duration);
    EXPECT_EQ(r.resp_ip, only.resp_ip);
    EXPECT_EQ(r.label, Label::target);
  }
}

TEST(BayesNet, BytesBoundedByPerPacketSupport) {
  auto ds = testkit::synth_traffic({}, 5);
  auto bn = BayesNet::fit(target_records(ds), ds.internal_subnets);
  ASSERT_TRUE(bn.orig_bpp_kde() && bn.resp_bpp_kde());
  const double lo = bn.orig_bpp_kde()->lo(), hi = bn.orig_bpp_kde()->hi();
  Rng rng(6);
  for (int i = 0; i < 2000; ++i) {
    auto r = bn.sample_connection({}, rng);
    ASSERT_TRUE(r.orig_bytes);
    const double pk = static_cast<double>(r.orig_pkts);
    EXPECT_GE(static_cast<double>(*r.orig_bytes), pk * lo - 0.5);
    EXPECT_LE(static_cast<double>(*r.orig_bytes), pk * hi + 0.5);
  }
}

TEST(BayesNet, SupportClosureWithLoggedFallbacks) {
  auto ds = testkit::synth_traffic({}, 7);
  auto bn = BayesNet::fit(target_records(ds), ds.internal_subnets);
  Rng rng(8);
  for (int i = 0; i < 3000; ++i) {
    SampleTrace trace;
    auto r = bn.sample_connection({}, rng, &trace);
    const std::string proto(to_string(r.proto)), port = std::to_string(r.resp_p);
    const std::string service = r.service.value_or("-"), state(to_string(r.conn_state));
    const std::set<std::string> fell(trace.fallbacks.begin(), trace.fallbacks.end());
    auto check = [&](const std::string& node, const std::string& ctx, const std::string& v) {
      if (fell.count(node)) return;
      const auto& rows = bn.cpt(node).rows;
      ASSERT_TRUE(rows.count(ctx)) << node << " " << ctx;
      EXPECT_TRUE(rows.at(ctx).count(v)) << node << " " << ctx << " " << v;
    };
    check("proto", "", proto);
    check("resp_p", proto, port);
    check("service", port, service);
    check("conn_state", context_key({proto, service}), state);
    check("orig_p", port, std::to_string(r.orig_p));
  }
}

TEST(BayesNet, UnobservedFixedValueKeptWithWarning) {
  auto bn = BayesNet::fit(std::vector<ConnRecord>{web("http")}, kSubnets);
  Rng rng(9);
  SampleTrace trace;
  auto r = bn.sample_connection({{"resp_p", "9999"}}, rng, &trace);
  EXPECT_EQ(r.resp_p, 9999);
  EXPECT_FALSE(trace.warnings.empty());
  EXPECT_FALSE(trace.fallbacks.empty());
  EXPECT_THROW(bn.sample_connection({{"color", "red"}}, rng), ConfigError);
}

TEST(BayesNet, PersistenceRoundTrip) {
  auto ds = testkit::synth_traffic({}, 10);
  auto bn = BayesNet::fit(target_records(ds), ds.internal_subnets);
  std::stringstream ss;
  bn.save(ss);
  auto back = BayesNet::load(ss);
  Rng a(11), b(11);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(bn.sample_connection({}, a), back.sample_connection({}, b));
  std::istringstream bad("{not json");
  EXPECT_THROW(BayesNet::load(bad), FormatError);
}

TEST(GenerateTrigger, CountFeatureFixesCardinality) {
  std::vector<ConnRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(web("http"));
  auto bn = BayesNet::fit(recs, kSubnets);
  GenerateParams p{Proto::tcp, 80, {feat::kProtoCount}, {5}};
  Matrix rows(2, kNumFeatures);
  rows(1, 0) = 10;
  auto t = generate_trigger(bn, p, kSubnets, FeatureNormalizer::fit(rows, p.selected), 1);
  EXPECT_EQ(t.records.size(), 5u);
  EXPECT_EQ(t.variant, TriggerVariant::generated);
  for (const auto& r : t.records) EXPECT_EQ(r.proto, Proto::tcp);
  EXPECT_EQ(t.achieved, p.target);
}

TEST(GenerateTrigger, MeetsCountSumAndDistinctTargets) {
  auto ds = testkit::synth_traffic({}, 12);
  auto bn = BayesNet::fit(target_records(ds), ds.internal_subnets);
  std::vector<FeaturePoint> nontarget;
  for (const auto& p : aggregate_windows(ds))
    if (p.label == Label::nontarget) nontarget.push_back(p);
  const std::vector<std::size_t> sel = {feat::kProtoCount, feat::kStateCount + 0, feat::kStateCount + 2,
                                        feat::kOrigPkts, feat::kRespBytes, feat::kDuration,
                                        feat::kDistinctExternalIps, feat::kDistinctDstPorts};
  auto norm = FeatureNormalizer::fit(nontarget, sel);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < nontarget.size() && checked < 20; i += 7, ++checked) {
    const auto& proto = nontarget[i];
    GenerateParams p{Proto::tcp, proto.key.resp_p, sel, {}};
    for (auto f : sel) p.target.push_back(proto.values[f]);
    auto t = generate_trigger(bn, p, ds.internal_subnets, norm, i);
    const IpAddr host = ip("10.0.0.50");
    auto got = recompute_point(rehost_records(t.records, t.source_host, host), {0, host, p.key_port},
                               ds.internal_subnets);
    for (std::size_t k = 0; k < sel.size(); ++k)
      EXPECT_NEAR(got.values[sel[k]], p.target[k], 1e-9 * std::max(1.0, p.target[k]))
          << feature_names()[sel[k]] << " point " << i;
    for (const auto& w : t.warnings) EXPECT_EQ(w.find("not met"), std::string::npos) << w;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Dependency, DuplicateFieldHasUnitNmi) {
  std::mt19937_64 rng(1);
  std::vector<int> x(1000);
  for (auto& v : x) v = static_cast<int>(rng() % 7);
  EXPECT_NEAR(normalized_mutual_information(x, x), 1.0, 1e-12);
  EXPECT_EQ(normalized_mutual_information(x, std::vector<int>(1000, 2)), 0.0);
}

TEST(Dependency, IndependentUniformFieldsHaveLowNmi) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  auto x = equal_frequency_bins(a, kNmiBins), y = equal_frequency_bins(b, kNmiBins);
  EXPECT_LT(normalized_mutual_information(x, y), 0.05);
}

TEST(Dependency, EqualFrequencyBinsShareTies) {
  std::vector<double> v = {5, 5, 5, 5, 1, 2, 3, 4};
  auto bins = equal_frequency_bins(v, 4);
  EXPECT_EQ(bins[0], bins[3]);
  EXPECT_LE(bins[4], bins[5]);
  EXPECT_LT(bins[4], bins[0]);
}

TEST(Dependency, PortDeterminedServiceLeads) {
  auto ds = testkit::synth_traffic({}, 13);
  auto rep = dependency_matrices(ds.records);
  ASSERT_EQ(rep.fields.size(), dependency_fields().size());
  for (std::size_t i = 0; i < rep.fields.size(); ++i)
    for (std::size_t j = 0; j < rep.fields.size(); ++j) EXPECT_DOUBLE_EQ(rep.nmi[i][j], rep.nmi[j][i]);
  // The generator derives service from the responder port and draws
  // originator ports independently of everything else.
  auto top = rep.top_pairs(1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ((std::set<std::string>{top[0].first, top[0].second}), (std::set<std::string>{"service", "resp_p"}));
  for (const auto& [a, b] : rep.top_pairs(10)) {
    EXPECT_NE(a, "orig_p");
    EXPECT_NE(b, "orig_p");
  }
  EXPECT_THROW(dependency_matrices(std::span(ds.records).first(5)), ConfigError);
}
