#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "netpois/featurize.hpp"
#include "netpois/flowlog.hpp"
#include "synthetic.hpp"

using namespace netpois;
using netpois::testkit::ip;

namespace {

const char* kHeader =
    "#separator \\x09\n"
    "#fields\tts\tuid\tid.orig_h\tid.orig_p\tid.resp_h\tid.resp_p\tproto\tservice\tduration\torig_bytes\t"
    "resp_bytes\tconn_state\torig_pkts\tresp_pkts\n"
    "#types\ttime\tstring\taddr\tport\taddr\tport\tenum\tstring\tinterval\tcount\tcount\tstring\tcount\tcount\n";

ParseResult parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return parse_conn_log(in);
}

}  // namespace

TEST(ParseConnLog, MapsFields) {
  auto res = parse("10.5\tC1\t10.0.0.1\t5000\t1.2.3.4\t80\ttcp\thttp\t0.5\t100\t200\tSF\t4\t3\n");
  ASSERT_EQ(res.dataset.records.size(), 1u);
  const auto& r = res.dataset.records[0];
  EXPECT_EQ(r.proto, Proto::tcp);
  EXPECT_EQ(r.resp_p, 80);
  EXPECT_EQ(r.orig_pkts, 4u);
  EXPECT_EQ(r.resp_pkts, 3u);
  EXPECT_EQ(r.orig_ip, ip("10.0.0.1"));
  EXPECT_EQ(r.conn_state, ConnState::SF);
  EXPECT_EQ(*r.service, "http");
  EXPECT_DOUBLE_EQ(*r.duration, 0.5);
  EXPECT_EQ(r.label, Label::unlabeled);
}

TEST(ParseConnLog, DashIsAbsent) {
  auto res = parse("1\tC1\t10.0.0.1\t5000\t1.2.3.4\t53\tudp\t-\t-\t-\t(empty)\tS0\t1\t0\n");
  ASSERT_EQ(res.dataset.records.size(), 1u);
  const auto& r = res.dataset.records[0];
  EXPECT_FALSE(r.duration.has_value());
  EXPECT_FALSE(r.service.has_value());
  EXPECT_FALSE(r.orig_bytes.has_value());
  EXPECT_FALSE(r.resp_bytes.has_value());
}

TEST(ParseConnLog, BadNumericRowIsSkippedAndCounted) {
  auto res = parse(
      "1\tC1\t10.0.0.1\t5000\t1.2.3.4\t80\ttcp\t-\t-\tabc\t-\tSF\t1\t1\n"
      "2\tC2\t10.0.0.1\t5001\t1.2.3.4\t80\ttcp\t-\t-\t10\t-\tSF\t1\t1\n");
  EXPECT_EQ(res.dataset.records.size(), 1u);
  EXPECT_EQ(res.report.rows_skipped, 1u);
  ASSERT_EQ(res.report.errors.size(), 1u);
  EXPECT_EQ(res.report.errors[0].line, 4u);
}

TEST(ParseConnLog, MissingFieldsHeaderIsFormatError) {
  std::istringstream in("1\t10.0.0.1\n");
  EXPECT_THROW(parse_conn_log(in), FormatError);
}

TEST(ParseConnLog, SortsStablyByTime) {
  auto res = parse(
      "5\tA\t10.0.0.1\t1\t1.2.3.4\t80\ttcp\t-\t-\t-\t-\tSF\t1\t1\n"
      "3\tB\t10.0.0.1\t2\t1.2.3.4\t80\ttcp\t-\t-\t-\t-\tSF\t1\t1\n"
      "5\tC\t10.0.0.1\t3\t1.2.3.4\t80\ttcp\t-\t-\t-\t-\tSF\t1\t1\n");
  ASSERT_EQ(res.dataset.records.size(), 3u);
  EXPECT_EQ(res.dataset.records[0].orig_p, 2);
  EXPECT_EQ(res.dataset.records[1].orig_p, 1);
  EXPECT_EQ(res.dataset.records[2].orig_p, 3);
}

TEST(ParseConnLog, UnknownColumnsAndLabelColumn) {
  std::istringstream in(
      "#fields\tts\textra\tid.orig_h\tid.orig_p\tid.resp_h\tid.resp_p\tproto\tconn_state\torig_pkts\tresp_pkts\tlabel\n"
      "1\tzz\t10.0.0.1\t1\t1.2.3.4\t80\ttcp\tSF\t1\t1\tnontarget\n");
  auto res = parse_conn_log(in);
  ASSERT_EQ(res.dataset.records.size(), 1u);
  EXPECT_EQ(res.dataset.records[0].label, Label::nontarget);
}

TEST(ConnLog, RoundTripIsFieldEqual) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ds = testkit::random_dataset(150, seed);
    std::stringstream ss;
    write_conn_log(ss, ds);
    auto back = parse_conn_log(ss);
    EXPECT_EQ(back.report.rows_skipped, 0u);
    EXPECT_EQ(back.dataset.records, ds.records) << "seed " << seed;
  }
}

TEST(RecordDump, RoundTripKeepsSubnetsAndName) {
  auto ds = testkit::random_dataset(80, 3);
  std::stringstream ss;
  write_record_dump(ss, ds);
  auto back = read_record_dump(ss);
  EXPECT_EQ(back.records, ds.records);
  EXPECT_EQ(back.internal_subnets, ds.internal_subnets);
  EXPECT_EQ(back.scenario_name, ds.scenario_name);
}

TEST(RecordDump, RejectsForeignText) {
  std::istringstream in("hello\n");
  EXPECT_THROW(read_record_dump(in), FormatError);
}

TEST(ApplyLabels, OrigOrRespMembership) {
  Dataset ds;
  ConnRecord a, b, c;
  a.orig_ip = ip("10.0.0.9");
  a.resp_ip = ip("1.1.1.1");
  b.orig_ip = ip("1.1.1.1");
  b.resp_ip = ip("10.0.0.9");
  c.orig_ip = ip("10.0.0.2");
  c.resp_ip = ip("1.1.1.1");
  ds.records = {a, b, c};
  auto out = apply_labels(ds, {{ip("10.0.0.9")}});
  EXPECT_EQ(out.records[0].label, Label::nontarget);
  EXPECT_EQ(out.records[1].label, Label::nontarget);
  EXPECT_EQ(out.records[2].label, Label::target);
}

TEST(ApplyLabels, EmptyRuleMakesEverythingTargetAndIsTotal) {
  auto ds = testkit::random_dataset(100, 1);
  auto out = apply_labels(ds, {});
  for (const auto& r : out.records) EXPECT_EQ(r.label, Label::target);
  auto oracle = testkit::random_dataset(100, 1);
  for (const auto& r : oracle.records) EXPECT_NE(r.label, Label::unlabeled);
}

TEST(Scenario, ParsesAndValidates) {
  auto cfg = parse_scenario_config(
      R"({"scenario_name":"s","internal_subnets":["147.32.84.0/24"],"infected_hosts":["147.32.84.165"]})");
  EXPECT_EQ(cfg.scenario_name, "s");
  ASSERT_EQ(cfg.internal_subnets.size(), 1u);
  EXPECT_TRUE(cfg.internal_subnets[0].contains(ip("147.32.84.7")));
  EXPECT_FALSE(cfg.internal_subnets[0].contains(ip("147.32.85.7")));
  EXPECT_EQ(cfg.labels.infected_hosts.count(ip("147.32.84.165")), 1u);
  EXPECT_THROW(parse_scenario_config(R"({"internal_subnets":[]})"), ConfigError);
  EXPECT_THROW(parse_scenario_config(R"({"internal_subnets":["nope"]})"), ConfigError);
}

TEST(Ip, ParsesBothFamilies) {
  EXPECT_TRUE(IpAddr::parse("10.0.0.1")->is_v4());
  auto v6 = IpAddr::parse("fe80::1");
  ASSERT_TRUE(v6);
  EXPECT_FALSE(v6->is_v4());
  EXPECT_EQ(v6->to_string(), "fe80::1");
  EXPECT_FALSE(IpAddr::parse("300.1.1.1"));
  EXPECT_TRUE(Cidr::parse("fe80::/10")->contains(*v6));
  EXPECT_FALSE(Cidr::parse("10.0.0.0/8")->contains(*v6));
}

TEST(Partition, FractionBoundsAreConfigErrors) {
  auto ds = testkit::random_dataset(50, 2);
  EXPECT_THROW(partition_dataset(ds, {0.0, 0.0, 30.0, 0}), ConfigError);
  EXPECT_THROW(partition_dataset(ds, {0.0, 1.0, 30.0, 0}), ConfigError);
}

TEST(Partition, AdversaryTakesFractionOfTestWindows) {
  Dataset ds;
  ds.internal_subnets = {testkit::internal_cidr()};
  for (int w = 0; w < 1000; ++w) {
    ConnRecord r;
    r.ts = 30.0 * w + 1.0;
    r.orig_ip = ip("10.0.0.1");
    r.resp_ip = ip("1.1.1.1");
    ds.records.push_back(r);
  }
  auto p = partition_dataset(ds, {0.0, 0.15, 30.0, 7});
  std::set<std::int64_t> adv_windows;
  for (const auto& r : p.adversary.records) adv_windows.insert(window_index(r.ts));
  EXPECT_EQ(adv_windows.size(), 150u);
  EXPECT_TRUE(p.train.records.empty());
}

TEST(Partition, DeterministicDisjointAndCovering) {
  auto ds = testkit::synth_traffic({}, 4);
  const double split = ds.records[ds.records.size() / 2].ts;
  SplitSpec spec{split, 0.2, 30.0, 11};
  auto a = partition_dataset(ds, spec);
  auto b = partition_dataset(ds, spec);
  EXPECT_EQ(a.train.records, b.train.records);
  EXPECT_EQ(a.test.records, b.test.records);
  EXPECT_EQ(a.adversary.records, b.adversary.records);
  EXPECT_EQ(a.train.records.size() + a.test.records.size() + a.adversary.records.size(), ds.records.size());
  for (const auto& r : a.train.records) EXPECT_LT(r.ts, split);
  std::set<std::int64_t> test_w, adv_w;
  for (const auto& r : a.test.records) test_w.insert(window_index(r.ts));
  for (const auto& r : a.adversary.records) adv_w.insert(window_index(r.ts));
  for (auto w : adv_w) EXPECT_EQ(test_w.count(w), 0u);
  spec.seed = 12;
  auto c = partition_dataset(ds, spec);
  EXPECT_NE(c.adversary.records, a.adversary.records);
}
