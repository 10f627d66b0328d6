#include "netpois/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace netpois {

namespace {

std::array<double, BlockEncoder::kNumerics> raw_numerics(const ConnRecord& r) {
  return {std::log1p(r.duration.value_or(0.0)),
          std::log1p(static_cast<double>(r.orig_pkts)),
          std::log1p(static_cast<double>(r.resp_pkts)),
          std::log1p(static_cast<double>(r.orig_bytes.value_or(0))),
          std::log1p(static_cast<double>(r.resp_bytes.value_or(0))),
          std::log1p(static_cast<double>(r.resp_p))};
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

BlockEncoder BlockEncoder::fit(std::span<const ConnRecord> training) {
  BlockEncoder enc;
  enc.lo_.fill(0.0);
  enc.hi_.fill(0.0);
  bool first = true;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : training) {
    auto v = raw_numerics(r);
    for (std::size_t i = 0; i < kNumerics; ++i) {
      enc.lo_[i] = first ? v[i] : std::min(enc.lo_[i], v[i]);
      enc.hi_[i] = first ? v[i] : std::max(enc.hi_[i], v[i]);
    }
    first = false;
    if (r.service) ++counts[*r.service];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < ranked.size() && i + 1 < kServiceBuckets; ++i) enc.services_.push_back(ranked[i].first);
  return enc;
}

std::size_t BlockEncoder::service_bucket(const ConnRecord& r) const {
  if (r.service) {
    for (std::size_t i = 0; i < services_.size(); ++i)
      if (services_[i] == *r.service) return i;
  }
  return kServiceBuckets - 1;
}

void BlockEncoder::encode_record(const ConnRecord& r, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  auto v = raw_numerics(r);
  for (std::size_t i = 0; i < kNumerics; ++i) {
    const double range = hi_[i] - lo_[i];
    out[i] = range > 0 ? std::clamp((v[i] - lo_[i]) / range, 0.0, 1.0) : 0.0;
  }
  out[kNumerics + static_cast<std::size_t>(r.proto)] = 1.0;
  out[kNumerics + kNumProtos + static_cast<std::size_t>(r.conn_state)] = 1.0;
  out[kNumerics + kNumProtos + kNumConnStates + service_bucket(r)] = 1.0;
}

std::vector<double> BlockEncoder::encode(std::span<const ConnRecord> block) const {
  std::vector<double> out(block.size() * kWidth);
  for (std::size_t i = 0; i < block.size(); ++i)
    encode_record(block[i], std::span<double>(out.data() + i * kWidth, kWidth));
  return out;
}

std::vector<BlockEncoder::Categories> BlockEncoder::decode_categories(std::span<const double> encoded) const {
  std::vector<Categories> out;
  for (std::size_t off = 0; off + kWidth <= encoded.size(); off += kWidth) {
    auto rec = encoded.subspan(off, kWidth);
    out.push_back({static_cast<Proto>(argmax(rec.subspan(kNumerics, kNumProtos))),
                   static_cast<ConnState>(argmax(rec.subspan(kNumerics + kNumProtos, kNumConnStates))),
                   argmax(rec.subspan(kNumerics + kNumProtos + kNumConnStates, kServiceBuckets))});
  }
  return out;
}

nlohmann::json BlockEncoder::to_json() const {
  return {{"lo", lo_}, {"hi", hi_}, {"services", services_}};
}

BlockEncoder BlockEncoder::from_json(const nlohmann::json& j) {
  BlockEncoder enc;
  enc.lo_ = j.at("lo").get<std::array<double, kNumerics>>();
  enc.hi_ = j.at("hi").get<std::array<double, kNumerics>>();
  enc.services_ = j.at("services").get<std::vector<std::string>>();
  return enc;
}

std::vector<std::vector<std::size_t>> block_indices(const Dataset& ds, std::size_t block_len) {
  if (block_len < 1) throw ConfigError("block length must be at least 1");
  std::map<IpAddr, std::vector<std::size_t>> streams;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (auto host = ds.internal_endpoint(ds.records[i])) streams[*host].push_back(i);
  }
  std::vector<std::vector<std::size_t>> blocks;
  for (const auto& [host, idx] : streams) {
    for (std::size_t start = 0; start + block_len <= idx.size(); start += block_len)
      blocks.emplace_back(idx.begin() + start, idx.begin() + start + block_len);
  }
  return blocks;
}

BlockPoint make_block(std::span<const ConnRecord> records, const IpAddr& host, const BlockEncoder& encoder) {
  BlockPoint b;
  b.host = host;
  b.values = encoder.encode(records);
  for (const auto& r : records)
    if (r.label == Label::nontarget) b.label = Label::nontarget;
  return b;
}

std::vector<BlockPoint> blockize(const Dataset& ds, const BlockEncoder& encoder, std::size_t block_len) {
  std::vector<BlockPoint> out;
  std::vector<ConnRecord> scratch;
  for (auto& idx : block_indices(ds, block_len)) {
    scratch.clear();
    for (auto i : idx) scratch.push_back(ds.records[i]);
    auto b = make_block(scratch, *ds.internal_endpoint(scratch.front()), encoder);
    b.provenance = std::move(idx);
    out.push_back(std::move(b));
  }
  return out;
}

Matrix to_matrix(std::span<const BlockPoint> blocks) {
  if (blocks.empty()) return {};
  Matrix m(blocks.size(), blocks.front().values.size());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    std::copy(blocks[i].values.begin(), blocks[i].values.end(), m.row(i).begin());
  return m;
}

std::vector<int> to_labels(std::span<const BlockPoint> blocks) {
  std::vector<int> y(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) y[i] = blocks[i].label == Label::nontarget ? 1 : 0;
  return y;
}

}  // namespace netpois
