#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace netpois {

/// IPv4 or IPv6 address. IPv4 is stored as a v4-mapped IPv6 address so the
/// two families order and hash uniformly.
class IpAddr {
 public:
  IpAddr() = default;

  static std::optional<IpAddr> parse(std::string_view text);
  static IpAddr from_v4(std::uint32_t host_order);

  bool is_v4() const;
  std::string to_string() const;
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }

  auto operator<=>(const IpAddr&) const = default;

 private:
  std::array<std::uint8_t, 16> bytes_{};
};

/// CIDR block such as 147.32.84.0/24.
class Cidr {
 public:
  static std::optional<Cidr> parse(std::string_view text);

  bool contains(const IpAddr& ip) const;
  std::string to_string() const;
  bool operator==(const Cidr&) const = default;

 private:
  IpAddr base_;
  int prefix_ = 0;  // in the 128-bit mapped space
};

struct IpAddrHash {
  std::size_t operator()(const IpAddr& ip) const noexcept;
};

}  // namespace netpois
