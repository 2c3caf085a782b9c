#include "encdns/net_address.hpp"

#include <arpa/inet.h>

#include <fstream>

#include "encdns/errors.hpp"
#include "text_util.hpp"

namespace encdns::net {

IpAddress IpAddress::v4(std::uint32_t host_order) {
  IpAddress a;
  a.family_ = Family::V4;
  a.bytes_[0] = static_cast<std::uint8_t>(host_order >> 24);
  a.bytes_[1] = static_cast<std::uint8_t>(host_order >> 16);
  a.bytes_[2] = static_cast<std::uint8_t>(host_order >> 8);
  a.bytes_[3] = static_cast<std::uint8_t>(host_order);
  return a;
}

IpAddress IpAddress::v6(const std::array<std::uint8_t, 16>& bytes) {
  IpAddress a;
  a.family_ = Family::V6;
  a.bytes_ = bytes;
  return a;
}

std::optional<IpAddress> IpAddress::try_parse(std::string_view text) {
  std::string s(util::trim(text));
  if (s.size() > 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  IpAddress a;
  if (inet_pton(AF_INET, s.c_str(), a.bytes_.data()) == 1) {
    a.family_ = Family::V4;
    return a;
  }
  if (inet_pton(AF_INET6, s.c_str(), a.bytes_.data()) == 1) {
    a.family_ = Family::V6;
    return a;
  }
  return std::nullopt;
}

IpAddress IpAddress::parse(std::string_view text) {
  if (auto a = try_parse(text)) return *a;
  throw ValidationError("not an IP address: '" + std::string(text) + "'");
}

std::uint32_t IpAddress::to_u32() const {
  return (std::uint32_t{bytes_[0]} << 24) | (std::uint32_t{bytes_[1]} << 16) |
         (std::uint32_t{bytes_[2]} << 8) | bytes_[3];
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  inet_ntop(is_v4() ? AF_INET : AF_INET6, bytes_.data(), buf, sizeof buf);
  return buf;
}

std::string IpAddress::url_host() const { return is_v4() ? to_string() : "[" + to_string() + "]"; }

namespace {

IpAddress mask(const IpAddress& ip, int prefix_len) {
  auto bytes = ip.bytes();
  int width = ip.bit_width();
  for (int bit = prefix_len; bit < width; ++bit) bytes[bit / 8] &= static_cast<std::uint8_t>(~(0x80 >> (bit % 8)));
  if (ip.is_v4()) return IpAddress::v4((std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                                       (std::uint32_t{bytes[2]} << 8) | bytes[3]);
  return IpAddress::v6(bytes);
}

}  // namespace

Cidr::Cidr(IpAddress network, int prefix_len) : prefix_len_(prefix_len) {
  if (prefix_len < 0 || prefix_len > network.bit_width())
    throw ValidationError("prefix length out of range: " + std::to_string(prefix_len));
  network_ = mask(network, prefix_len);
}

Cidr Cidr::parse(std::string_view text) {
  text = util::trim(text);
  auto slash = text.find('/');
  IpAddress ip = IpAddress::parse(text.substr(0, slash));
  if (slash == std::string_view::npos) return Cidr(ip, ip.bit_width());
  auto len = util::parse_int(text.substr(slash + 1));
  if (!len) throw ValidationError("bad prefix length in '" + std::string(text) + "'");
  return Cidr(ip, static_cast<int>(*len));
}

bool Cidr::contains(const IpAddress& ip) const {
  if (ip.family() != network_.family()) return false;
  return mask(ip, prefix_len_) == network_;
}

std::string Cidr::to_string() const { return network_.to_string() + "/" + std::to_string(prefix_len_); }

Cidr grouping_prefix(const IpAddress& ip) { return Cidr(ip, ip.is_v4() ? 24 : 48); }

const std::vector<Cidr>& non_public_ranges() {
  static const std::vector<Cidr> ranges = [] {
    std::vector<Cidr> r;
    for (auto s : {"0.0.0.0/8", "10.0.0.0/8", "100.64.0.0/10", "127.0.0.0/8", "169.254.0.0/16",
                   "172.16.0.0/12", "192.0.0.0/24", "192.0.2.0/24", "192.168.0.0/16", "198.18.0.0/15",
                   "198.51.100.0/24", "203.0.113.0/24", "224.0.0.0/4", "240.0.0.0/4",
                   "255.255.255.255/32", "::/128", "::1/128", "fc00::/7", "fe80::/10", "ff00::/8",
                   "2001:db8::/32"})
      r.push_back(Cidr::parse(s));
    return r;
  }();
  return ranges;
}

bool matches_any(const IpAddress& ip, const std::vector<Cidr>& ranges) {
  for (const auto& c : ranges)
    if (c.contains(ip)) return true;
  return false;
}

std::vector<Cidr> load_cidr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Cidr> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = util::trim(util::strip_comment(line));
    if (body.empty()) continue;
    try {
      out.push_back(Cidr::parse(body));
    } catch (const ValidationError& e) {
      throw ParseError(path + ": " + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace encdns::net
