#include "netpois/ip.hpp"

#include <arpa/inet.h>

#include <charconv>
#include <cstring>

namespace netpois {

namespace {

constexpr std::array<std::uint8_t, 12> kV4Prefix = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff};

}  // namespace

std::optional<IpAddr> IpAddr::parse(std::string_view text) {
  if (text.empty() || text.size() > INET6_ADDRSTRLEN) return std::nullopt;
  char buf[INET6_ADDRSTRLEN + 1];
  std::memcpy(buf, text.data(), text.size());
  buf[text.size()] = '\0';

  IpAddr ip;
  in_addr v4;
  if (inet_pton(AF_INET, buf, &v4) == 1) {
    std::copy(kV4Prefix.begin(), kV4Prefix.end(), ip.bytes_.begin());
    std::memcpy(ip.bytes_.data() + 12, &v4.s_addr, 4);
    return ip;
  }
  in6_addr v6;
  if (inet_pton(AF_INET6, buf, &v6) == 1) {
    std::memcpy(ip.bytes_.data(), v6.s6_addr, 16);
    return ip;
  }
  return std::nullopt;
}

IpAddr IpAddr::from_v4(std::uint32_t host_order) {
  IpAddr ip;
  std::copy(kV4Prefix.begin(), kV4Prefix.end(), ip.bytes_.begin());
  ip.bytes_[12] = static_cast<std::uint8_t>(host_order >> 24);
  ip.bytes_[13] = static_cast<std::uint8_t>(host_order >> 16);
  ip.bytes_[14] = static_cast<std::uint8_t>(host_order >> 8);
  ip.bytes_[15] = static_cast<std::uint8_t>(host_order);
  return ip;
}

bool IpAddr::is_v4() const {
  return std::equal(kV4Prefix.begin(), kV4Prefix.end(), bytes_.begin());
}

std::string IpAddr::to_string() const {
  char buf[INET6_ADDRSTRLEN];
  if (is_v4()) {
    inet_ntop(AF_INET, bytes_.data() + 12, buf, sizeof(buf));
  } else {
    inet_ntop(AF_INET6, bytes_.data(), buf, sizeof(buf));
  }
  return buf;
}

std::optional<Cidr> Cidr::parse(std::string_view text) {
  const auto slash = text.find('/');
  const auto addr = IpAddr::parse(text.substr(0, slash));
  if (!addr) return std::nullopt;
  const int family_bits = addr->is_v4() ? 32 : 128;
  int prefix = family_bits;
  if (slash != std::string_view::npos) {
    const auto digits = text.substr(slash + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), prefix);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    if (prefix < 0 || prefix > family_bits) return std::nullopt;
  }
  Cidr c;
  c.base_ = *addr;
  c.prefix_ = prefix + (addr->is_v4() ? 96 : 0);
  return c;
}

bool Cidr::contains(const IpAddr& ip) const {
  const auto& a = base_.bytes();
  const auto& b = ip.bytes();
  int bits = prefix_;
  for (std::size_t i = 0; i < 16 && bits > 0; ++i, bits -= 8) {
    const std::uint8_t mask = bits >= 8 ? 0xff : static_cast<std::uint8_t>(0xff << (8 - bits));
    if ((a[i] & mask) != (b[i] & mask)) return false;
  }
  return true;
}

std::string Cidr::to_string() const {
  return base_.to_string() + "/" + std::to_string(base_.is_v4() ? prefix_ - 96 : prefix_);
}

std::size_t IpAddrHash::operator()(const IpAddr& ip) const noexcept {
  // FNV-1a over the 16 bytes.
  std::uint64_t h = 1469598103934665603ULL;
  for (auto byte : ip.bytes()) {
    h ^= byte;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

}  // namespace netpois
