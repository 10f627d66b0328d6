#include <gtest/gtest.h>

#include "netpois/blocks.hpp"
#include "synthetic.hpp"

using namespace netpois;
using netpois::testkit::ip;

namespace {

Dataset host_stream(std::size_t n, const char* host) {
  Dataset ds;
  ds.internal_subnets = {testkit::internal_cidr()};
  for (std::size_t i = 0; i < n; ++i) {
    ConnRecord r;
    r.ts = static_cast<double>(i);
    r.orig_ip = ip(host);
    r.resp_ip = ip("8.8.8.8");
    r.resp_p = static_cast<std::uint16_t>(80 + i % 3);
    r.proto = static_cast<Proto>(i % 3);
    r.conn_state = static_cast<ConnState>(i % kNumConnStates);
    r.service = i % 4 == 0 ? std::optional<std::string>("http") : std::nullopt;
    r.orig_pkts = i;
    ds.records.push_back(r);
  }
  return ds;
}

}  // namespace

TEST(Blocks, TrailingPartialBlockDropped) {
  auto ds = host_stream(250, "10.0.0.1");
  auto idx = block_indices(ds, 100);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[1].front(), 100u);
  EXPECT_EQ(idx[1].back(), 199u);
  EXPECT_TRUE(block_indices(host_stream(99, "10.0.0.1"), 100).empty());
  EXPECT_THROW(block_indices(ds, 0), ConfigError);
}

TEST(Blocks, PerHostStreams) {
  auto a = host_stream(150, "10.0.0.1");
  auto b = host_stream(120, "10.0.0.2");
  a.records.insert(a.records.end(), b.records.begin(), b.records.end());
  sort_by_time(a.records);
  auto enc = BlockEncoder::fit(a.records);
  auto blocks = blockize(a, enc, 100);
  ASSERT_EQ(blocks.size(), 2u);
  for (const auto& blk : blocks) {
    EXPECT_EQ(blk.values.size(), 100 * BlockEncoder::kWidth);
    for (auto i : blk.provenance) EXPECT_EQ(a.records[i].orig_ip, blk.host);
  }
}

TEST(Blocks, CategoricalRoundTrip) {
  auto ds = host_stream(300, "10.0.0.1");
  auto enc = BlockEncoder::fit(ds.records);
  auto blocks = blockize(ds, enc, 100);
  for (const auto& blk : blocks) {
    auto cats = enc.decode_categories(blk.values);
    ASSERT_EQ(cats.size(), blk.provenance.size());
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const auto& r = ds.records[blk.provenance[i]];
      EXPECT_EQ(cats[i].proto, r.proto);
      EXPECT_EQ(cats[i].state, r.conn_state);
      EXPECT_EQ(cats[i].service_bucket, enc.service_bucket(r));
    }
  }
}

TEST(Blocks, EncodingBoundedAndFitOnTrainingOnly) {
  auto train = host_stream(100, "10.0.0.1");
  auto enc = BlockEncoder::fit(train.records);
  ConnRecord huge = train.records[0];
  huge.orig_pkts = 1'000'000;
  huge.service = "never-seen";
  std::vector<double> out(BlockEncoder::kWidth);
  enc.encode_record(huge, out);
  for (double v : out) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(out[1], 1.0);
  EXPECT_EQ(enc.service_bucket(huge), kServiceBuckets - 1);
  auto back = BlockEncoder::from_json(enc.to_json());
  EXPECT_EQ(back.encode(train.records), enc.encode(train.records));
}

TEST(Blocks, LabelIsNontargetIfAnyRecordIs) {
  auto ds = host_stream(100, "10.0.0.1");
  auto enc = BlockEncoder::fit(ds.records);
  EXPECT_EQ(make_block(ds.records, ip("10.0.0.1"), enc).label, Label::target);
  ds.records[50].label = Label::nontarget;
  EXPECT_EQ(make_block(ds.records, ip("10.0.0.1"), enc).label, Label::nontarget);
}
