#include "encdns/dns_codec.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <map>

#include "encdns/errors.hpp"

namespace encdns::dns {

namespace {

std::vector<std::string_view> split_labels(std::string_view name) {
  std::vector<std::string_view> labels;
  if (name.empty() || name == ".") return labels;
  if (name.back() == '.') name.remove_suffix(1);
  std::size_t start = 0;
  while (true) {
    auto dot = name.find('.', start);
    labels.push_back(name.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

void validate_name(std::string_view name) {
  auto labels = split_labels(name);
  std::size_t encoded = 1;  // root terminator
  for (auto label : labels) {
    if (label.empty()) throw ValidationError("empty label in name '" + std::string(name) + "'");
    if (label.size() > kMaxLabelLength)
      throw ValidationError("label longer than 63 bytes in '" + std::string(name) + "'");
    encoded += label.size() + 1;
  }
  if (encoded > kMaxNameLength)
    throw ValidationError("name longer than 255 bytes: '" + std::string(name) + "'");
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  void bytes(ByteView b) { out_.insert(out_.end(), b.begin(), b.end()); }

  // Suffix compression against names already written.
  void name(std::string_view n) {
    auto labels = split_labels(n);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      std::string suffix = lower_join(labels, i);
      if (auto it = offsets_.find(suffix); it != offsets_.end()) {
        u16(static_cast<std::uint16_t>(0xC000 | it->second));
        return;
      }
      if (out_.size() < 0x4000) offsets_.emplace(std::move(suffix), out_.size());
      u8(static_cast<std::uint8_t>(labels[i].size()));
      bytes({reinterpret_cast<const std::uint8_t*>(labels[i].data()), labels[i].size()});
    }
    u8(0);
  }

  Bytes take() { return std::move(out_); }

 private:
  static std::string lower_join(const std::vector<std::string_view>& labels, std::size_t from) {
    std::string s;
    for (std::size_t i = from; i < labels.size(); ++i) {
      if (!s.empty()) s.push_back('.');
      for (char c : labels[i]) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return s;
  }

  Bytes out_;
  std::map<std::string, std::size_t> offsets_;
};

class Reader {
 public:
  explicit Reader(ByteView wire) : wire_(wire) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return wire_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return wire_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((wire_[pos_] << 8) | wire_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  Bytes bytes(std::size_t n) {
    need(n);
    Bytes b(wire_.begin() + static_cast<std::ptrdiff_t>(pos_),
            wire_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return b;
  }

  std::string name() {
    std::string out;
    std::size_t cursor = pos_;
    std::size_t encoded = 1;
    int hops = 0;
    bool jumped = false;
    while (true) {
      if (cursor >= wire_.size()) throw ParseError("truncated name", cursor);
      std::uint8_t len = wire_[cursor];
      if ((len & 0xC0) == 0xC0) {
        if (cursor + 1 >= wire_.size()) throw ParseError("truncated compression pointer", cursor);
        if (++hops > kMaxPointerHops) throw ParseError("compression pointer loop", cursor);
        std::size_t target = static_cast<std::size_t>(((len & 0x3F) << 8) | wire_[cursor + 1]);
        if (!jumped) pos_ = cursor + 2;
        jumped = true;
        if (target >= wire_.size()) throw ParseError("compression pointer past end", cursor);
        cursor = target;
        continue;
      }
      if ((len & 0xC0) != 0) throw ParseError("unsupported label type", cursor);
      if (len == 0) {
        if (!jumped) pos_ = cursor + 1;
        return out;
      }
      if (cursor + 1 + len > wire_.size()) throw ParseError("truncated label", cursor);
      encoded += len + 1u;
      if (encoded > kMaxNameLength) throw ParseError("name exceeds 255 bytes", cursor);
      if (!out.empty()) out.push_back('.');
      out.append(reinterpret_cast<const char*>(wire_.data() + cursor + 1), len);
      cursor += 1u + len;
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ParseError("truncated message", pos_);
  }

  ByteView wire_;
  std::size_t pos_ = 0;
};

ResourceRecord read_record(Reader& r) {
  ResourceRecord rr;
  rr.name = r.name();
  rr.rtype = r.u16();
  rr.rclass = r.u16();
  rr.ttl = r.u32();
  std::size_t rdlength = r.u16();
  std::size_t at = r.pos();
  if (r.remaining() < rdlength) throw ParseError("rdata exceeds message", at);
  rr.rdata = r.bytes(rdlength);
  if (rr.rtype == rrtype::A && rdlength != 4) throw ParseError("A record rdata length != 4", at);
  if (rr.rtype == rrtype::AAAA && rdlength != 16)
    throw ParseError("AAAA record rdata length != 16", at);
  return rr;
}

void write_record(Writer& w, const ResourceRecord& rr) {
  w.name(rr.name);
  w.u16(rr.rtype);
  w.u16(rr.rclass);
  w.u32(rr.ttl);
  if (rr.rdata.size() > 0xFFFF) throw ValidationError("rdata longer than 65535 bytes");
  w.u16(static_cast<std::uint16_t>(rr.rdata.size()));
  w.bytes(rr.rdata);
}

constexpr std::string_view kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '-') return 62;
  if (c == '_') return 63;
  return -1;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::optional<std::array<std::uint8_t, 4>> ResourceRecord::ipv4() const {
  if (rtype != rrtype::A || rdata.size() != 4) return std::nullopt;
  std::array<std::uint8_t, 4> a{};
  std::copy(rdata.begin(), rdata.end(), a.begin());
  return a;
}

std::optional<std::array<std::uint8_t, 16>> ResourceRecord::ipv6() const {
  if (rtype != rrtype::AAAA || rdata.size() != 16) return std::nullopt;
  std::array<std::uint8_t, 16> a{};
  std::copy(rdata.begin(), rdata.end(), a.begin());
  return a;
}

std::optional<std::string> ResourceRecord::address_text() const {
  char buf[INET6_ADDRSTRLEN] = {};
  if (auto v4 = ipv4()) {
    inet_ntop(AF_INET, v4->data(), buf, sizeof buf);
    return std::string(buf);
  }
  if (auto v6 = ipv6()) {
    inet_ntop(AF_INET6, v6->data(), buf, sizeof buf);
    return std::string(buf);
  }
  return std::nullopt;
}

std::uint16_t DnsMessage::flags() const {
  std::uint16_t f = 0;
  if (qr) f |= 0x8000;
  f |= static_cast<std::uint16_t>((opcode & 0x0F) << 11);
  if (aa) f |= 0x0400;
  if (tc) f |= 0x0200;
  if (rd) f |= 0x0100;
  if (ra) f |= 0x0080;
  if (ad) f |= 0x0020;
  if (cd) f |= 0x0010;
  f |= rcode & 0x0F;
  return f;
}

void validate(const DnsQuestion& question) {
  validate_name(question.qname);
  if (question.qtype == 0) throw ValidationError("qtype must be > 0");
  if (question.qclass == 0) throw ValidationError("qclass must be > 0");
}

Bytes encode_query(const DnsQuestion& question, std::uint16_t id, bool recursion_desired) {
  validate(question);
  DnsMessage m;
  m.id = id;
  m.rd = recursion_desired;
  m.questions.push_back(question);
  return encode_message(m);
}

Bytes encode_message(const DnsMessage& message) {
  for (const auto& q : message.questions) validate(q);
  auto count = [](std::size_t n) {
    if (n > 0xFFFF) throw ValidationError("section holds more than 65535 entries");
    return static_cast<std::uint16_t>(n);
  };
  Writer w;
  w.u16(message.id);
  w.u16(message.flags());
  w.u16(count(message.questions.size()));
  w.u16(count(message.answers.size()));
  w.u16(count(message.authority.size()));
  w.u16(count(message.additional.size()));
  for (const auto& q : message.questions) {
    w.name(q.qname);
    w.u16(q.qtype);
    w.u16(q.qclass);
  }
  for (const auto& rr : message.answers) write_record(w, rr);
  for (const auto& rr : message.authority) write_record(w, rr);
  for (const auto& rr : message.additional) write_record(w, rr);
  return w.take();
}

DnsMessage decode_message(ByteView wire) {
  if (wire.size() < kHeaderSize) throw ParseError("message shorter than 12-byte header", wire.size());
  Reader r(wire);
  DnsMessage m;
  m.id = r.u16();
  std::uint16_t f = r.u16();
  m.qr = f & 0x8000;
  m.opcode = static_cast<std::uint8_t>((f >> 11) & 0x0F);
  m.aa = f & 0x0400;
  m.tc = f & 0x0200;
  m.rd = f & 0x0100;
  m.ra = f & 0x0080;
  m.ad = f & 0x0020;
  m.cd = f & 0x0010;
  m.rcode = static_cast<std::uint8_t>(f & 0x0F);
  std::uint16_t qd = r.u16(), an = r.u16(), ns = r.u16(), ar = r.u16();

  auto guarded = [&](auto&& fn, const char* section) {
    try {
      fn();
    } catch (const ParseError& e) {
      throw ParseError(std::string(section) + " count mismatch: " + e.what(), e.offset());
    }
  };
  guarded([&] {
    for (int i = 0; i < qd; ++i) {
      DnsQuestion q;
      q.qname = r.name();
      q.qtype = r.u16();
      q.qclass = r.u16();
      m.questions.push_back(std::move(q));
    }
  }, "question");
  guarded([&] { for (int i = 0; i < an; ++i) m.answers.push_back(read_record(r)); }, "answer");
  guarded([&] { for (int i = 0; i < ns; ++i) m.authority.push_back(read_record(r)); }, "authority");
  guarded([&] {
    for (int i = 0; i < ar; ++i) {
      auto rr = read_record(r);
      if (rr.rtype != rrtype::OPT) m.additional.push_back(std::move(rr));
    }
  }, "additional");
  m.trailing_bytes = r.remaining();
  return m;
}

Bytes make_a_response(const DnsMessage& query, std::array<std::uint8_t, 4> address,
                      std::uint32_t ttl) {
  DnsMessage resp;
  resp.id = query.id;
  resp.qr = true;
  resp.opcode = query.opcode;
  resp.rd = query.rd;
  resp.ra = true;
  resp.questions = query.questions;
  for (const auto& q : query.questions) {
    if (q.qtype != rrtype::A) continue;
    ResourceRecord rr;
    rr.name = q.qname;
    rr.rtype = rrtype::A;
    rr.rclass = q.qclass;
    rr.ttl = ttl;
    rr.rdata.assign(address.begin(), address.end());
    resp.answers.push_back(std::move(rr));
  }
  return encode_message(resp);
}

std::string to_base64url(ByteView data) {
  std::string out;
  out.reserve((data.size() * 4 + 2) / 3);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
  }
  std::size_t rest = data.size() - i;
  if (rest == 1) {
    std::uint32_t v = data[i] << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
  } else if (rest == 2) {
    std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
  }
  return out;
}

Bytes from_base64url(std::string_view text) {
  if (text.size() % 4 == 1) throw ParseError("base64url length cannot encode whole bytes", text.size());
  Bytes out;
  out.reserve(text.size() * 3 / 4);
  std::uint32_t acc = 0;
  int bits = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    int v = b64_value(text[i]);
    if (v < 0) throw ParseError("invalid base64url character", i);
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits));
      acc &= (1u << bits) - 1;
    }
  }
  if (acc != 0) throw ParseError("non-zero padding bits in base64url", text.size());
  return out;
}

std::string to_hex(ByteView data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(data.size() * 2);
  for (auto b : data) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

Bytes from_hex_dump(std::string_view text) {
  Bytes out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (auto colon = line.find(':'); colon != std::string_view::npos) line = line.substr(colon + 1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (auto gutter = line.find("  "); gutter != std::string_view::npos) line = line.substr(0, gutter);
    int hi = -1;
    for (char c : line) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      int v = hex_value(c);
      if (v < 0) throw ParseError("invalid hex digit", line_no);
      if (hi < 0) {
        hi = v;
      } else {
        out.push_back(static_cast<std::uint8_t>((hi << 4) | v));
        hi = -1;
      }
    }
    if (hi >= 0) throw ParseError("odd number of hex digits", line_no);
  }
  return out;
}

}  // namespace encdns::dns
