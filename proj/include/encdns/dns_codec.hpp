#pragma once

// RFC 1035 wireformat encoding/decoding and the unpadded base64url form used
// by DoH GET requests.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace encdns::dns {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

namespace rrtype {
inline constexpr std::uint16_t A = 1;
inline constexpr std::uint16_t NS = 2;
inline constexpr std::uint16_t CNAME = 5;
inline constexpr std::uint16_t PTR = 12;
inline constexpr std::uint16_t AAAA = 28;
inline constexpr std::uint16_t OPT = 41;
}  // namespace rrtype

namespace rrclass {
inline constexpr std::uint16_t IN = 1;
}

inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::size_t kMaxNameLength = 255;
inline constexpr std::size_t kMaxLabelLength = 63;
inline constexpr int kMaxPointerHops = 128;

/// A query name is stored in dotted presentation form without the trailing
/// dot. The root name is the empty string ("." is accepted on input).
struct DnsQuestion {
  std::string qname;
  std::uint16_t qtype = rrtype::A;
  std::uint16_t qclass = rrclass::IN;

  friend bool operator==(const DnsQuestion&, const DnsQuestion&) = default;
};

struct ResourceRecord {
  std::string name;
  std::uint16_t rtype = 0;
  std::uint16_t rclass = rrclass::IN;
  std::uint32_t ttl = 0;
  Bytes rdata;

  /// Typed views; nullopt unless the record is A (resp. AAAA) with a
  /// well-formed rdata length.
  std::optional<std::array<std::uint8_t, 4>> ipv4() const;
  std::optional<std::array<std::uint8_t, 16>> ipv6() const;
  /// Presentation form of the A/AAAA address, or nullopt.
  std::optional<std::string> address_text() const;

  friend bool operator==(const ResourceRecord&, const ResourceRecord&) = default;
};

struct DnsMessage {
  std::uint16_t id = 0;
  bool qr = false;
  std::uint8_t opcode = 0;
  bool aa = false;
  bool tc = false;
  bool rd = false;
  bool ra = false;
  bool ad = false;
  bool cd = false;
  std::uint8_t rcode = 0;
  std::vector<DnsQuestion> questions;
  std::vector<ResourceRecord> answers;
  std::vector<ResourceRecord> authority;
  /// Additional section with OPT pseudo-records removed.
  std::vector<ResourceRecord> additional;
  /// Bytes present after the last declared record; tolerated, reported.
  std::size_t trailing_bytes = 0;

  std::uint16_t flags() const;
};

/// Validate a question against label/name limits. Throws ValidationError.
void validate(const DnsQuestion& question);

/// Build a single-question query (QR=0, ANCOUNT=0, no EDNS).
Bytes encode_query(const DnsQuestion& question, std::uint16_t id, bool recursion_desired);

/// Serialize an arbitrary message. Names repeated verbatim are compressed
/// with pointers to their first occurrence.
Bytes encode_message(const DnsMessage& message);

/// Parse a wire message. Throws ParseError carrying the failing offset.
DnsMessage decode_message(ByteView wire);

/// Build the answer the test resolver sends: the query echoed with QR/RA set
/// and one A record per question of type A.
Bytes make_a_response(const DnsMessage& query, std::array<std::uint8_t, 4> address,
                      std::uint32_t ttl);

std::string to_base64url(ByteView data);
/// Throws ParseError on a character outside the base64url alphabet or on a
/// length that cannot carry whole bytes (len % 4 == 1).
Bytes from_base64url(std::string_view text);

std::string to_hex(ByteView data);
/// Accepts whitespace and an optional "NNN:" offset prefix per line, as in
/// hexdump-style fixtures; trailing ASCII gutters after two spaces are ignored.
Bytes from_hex_dump(std::string_view text);

}  // namespace encdns::dns
