#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace encdns::net {

/// IPv4 or IPv6 address held as network-order bytes. IPv4 occupies the
/// first four bytes; the remainder is zero.
class IpAddress {
 public:
  enum class Family : std::uint8_t { V4 = 4, V6 = 6 };

  IpAddress() = default;

  static IpAddress v4(std::uint32_t host_order);
  static IpAddress v6(const std::array<std::uint8_t, 16>& bytes);
  /// Throws ValidationError on text that is not a literal address.
  static IpAddress parse(std::string_view text);
  static std::optional<IpAddress> try_parse(std::string_view text);

  Family family() const { return family_; }
  bool is_v4() const { return family_ == Family::V4; }
  bool is_v6() const { return family_ == Family::V6; }
  /// Host-order integer; only meaningful for IPv4.
  std::uint32_t to_u32() const;
  const std::array<std::uint8_t, 16>& bytes() const { return bytes_; }
  int bit_width() const { return is_v4() ? 32 : 128; }

  std::string to_string() const;
  /// Literal usable in a URL authority ("[::1]" for IPv6).
  std::string url_host() const;

  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;

 private:
  Family family_ = Family::V4;
  std::array<std::uint8_t, 16> bytes_{};
};

class Cidr {
 public:
  Cidr() = default;
  Cidr(IpAddress network, int prefix_len);

  /// Accepts "a.b.c.d/nn", "v6::/nn", or a bare address (host route).
  static Cidr parse(std::string_view text);

  bool contains(const IpAddress& ip) const;
  const IpAddress& network() const { return network_; }
  int prefix_len() const { return prefix_len_; }
  std::string to_string() const;

  friend auto operator<=>(const Cidr&, const Cidr&) = default;

 private:
  IpAddress network_;
  int prefix_len_ = 0;
};

/// Network containing `ip` at the provider-grouping granularity:
/// /24 for IPv4, /48 for IPv6.
Cidr grouping_prefix(const IpAddress& ip);

/// Special-purpose ranges that a scan never contacts unless explicitly
/// allowed: RFC 1918, loopback, link-local, CGNAT, multicast, reserved,
/// broadcast, and the IPv6 equivalents.
const std::vector<Cidr>& non_public_ranges();

bool matches_any(const IpAddress& ip, const std::vector<Cidr>& ranges);

/// Read a file of CIDRs/addresses, one per line, '#' comments allowed.
/// Throws IoError / ParseError (with line number).
std::vector<Cidr> load_cidr_file(const std::string& path);

}  // namespace encdns::net
