#include "hpack.hpp"

#include <array>
#include <unordered_map>

#include "encdns/errors.hpp"

namespace encdns::hpack {

namespace {

struct HuffmanCode {
  std::uint32_t code;
  std::uint8_t bits;
};

#include "hpack_huffman_table.inc"

constexpr std::array<std::pair<std::string_view, std::string_view>, 61> kStaticTable{{
    {":authority", ""},
    {":method", "GET"},
    {":method", "POST"},
    {":path", "/"},
    {":path", "/index.html"},
    {":scheme", "http"},
    {":scheme", "https"},
    {":status", "200"},
    {":status", "204"},
    {":status", "206"},
    {":status", "304"},
    {":status", "400"},
    {":status", "404"},
    {":status", "500"},
    {"accept-charset", ""},
    {"accept-encoding", "gzip, deflate"},
    {"accept-language", ""},
    {"accept-ranges", ""},
    {"accept", ""},
    {"access-control-allow-origin", ""},
    {"age", ""},
    {"allow", ""},
    {"authorization", ""},
    {"cache-control", ""},
    {"content-disposition", ""},
    {"content-encoding", ""},
    {"content-language", ""},
    {"content-length", ""},
    {"content-location", ""},
    {"content-range", ""},
    {"content-type", ""},
    {"cookie", ""},
    {"date", ""},
    {"etag", ""},
    {"expect", ""},
    {"expires", ""},
    {"from", ""},
    {"host", ""},
    {"if-match", ""},
    {"if-modified-since", ""},
    {"if-none-match", ""},
    {"if-range", ""},
    {"if-unmodified-since", ""},
    {"last-modified", ""},
    {"link", ""},
    {"location", ""},
    {"max-forwards", ""},
    {"proxy-authenticate", ""},
    {"proxy-authorization", ""},
    {"range", ""},
    {"referer", ""},
    {"refresh", ""},
    {"retry-after", ""},
    {"server", ""},
    {"set-cookie", ""},
    {"strict-transport-security", ""},
    {"transfer-encoding", ""},
    {"user-agent", ""},
    {"vary", ""},
    {"via", ""},
    {"www-authenticate", ""},
}};

// (bits << 32 | code) -> symbol
const std::unordered_map<std::uint64_t, int>& huffman_index() {
  static const auto index = [] {
    std::unordered_map<std::uint64_t, int> m;
    for (int sym = 0; sym < 257; ++sym)
      m.emplace((std::uint64_t{kHuffmanCodes[sym].bits} << 32) | kHuffmanCodes[sym].code, sym);
    return m;
  }();
  return index;
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }
  std::uint8_t peek() const { return data_[pos_]; }

  std::uint64_t integer(int prefix_bits) {
    if (done()) throw ParseError("hpack: truncated integer", pos_);
    std::uint64_t max_prefix = (1u << prefix_bits) - 1;
    std::uint64_t value = data_[pos_++] & max_prefix;
    if (value < max_prefix) return value;
    int shift = 0;
    while (true) {
      if (done()) throw ParseError("hpack: truncated integer", pos_);
      if (shift > 56) throw ParseError("hpack: integer overflow", pos_);
      std::uint8_t b = data_[pos_++];
      value += std::uint64_t{b & 0x7Fu} << shift;
      shift += 7;
      if ((b & 0x80) == 0) return value;
    }
  }

  std::string string() {
    if (done()) throw ParseError("hpack: truncated string", pos_);
    bool huffman = data_[pos_] & 0x80;
    std::uint64_t len = integer(7);
    if (len > data_.size() - pos_) throw ParseError("hpack: string exceeds block", pos_);
    auto raw = data_.subspan(pos_, len);
    pos_ += len;
    if (huffman) return huffman_decode(raw);
    return std::string(raw.begin(), raw.end());
  }

  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void put_integer(std::vector<std::uint8_t>& out, std::uint8_t first, int prefix_bits, std::uint64_t v) {
  std::uint64_t max_prefix = (1u << prefix_bits) - 1;
  if (v < max_prefix) {
    out.push_back(static_cast<std::uint8_t>(first | v));
    return;
  }
  out.push_back(static_cast<std::uint8_t>(first | max_prefix));
  v -= max_prefix;
  while (v >= 128) {
    out.push_back(static_cast<std::uint8_t>((v & 0x7F) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
  put_integer(out, 0x00, 7, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace

std::string huffman_decode(std::span<const std::uint8_t> data) {
  const auto& index = huffman_index();
  std::string out;
  std::uint32_t code = 0;
  int bits = 0;
  for (auto byte : data) {
    for (int i = 7; i >= 0; --i) {
      code = (code << 1) | ((byte >> i) & 1u);
      ++bits;
      if (bits < 5) continue;
      if (bits > 30) throw ParseError("hpack: invalid huffman code", out.size());
      auto it = index.find((std::uint64_t(bits) << 32) | code);
      if (it == index.end()) continue;
      if (it->second == 256) throw ParseError("hpack: EOS in huffman string", out.size());
      out.push_back(static_cast<char>(it->second));
      code = 0;
      bits = 0;
    }
  }
  // Padding: fewer than 8 bits, all ones.
  if (bits > 7 || code != (1u << bits) - 1) throw ParseError("hpack: invalid huffman padding", out.size());
  return out;
}

std::vector<std::uint8_t> huffman_encode(std::string_view text) {
  std::vector<std::uint8_t> out;
  std::uint64_t acc = 0;
  int bits = 0;
  for (unsigned char c : text) {
    acc = (acc << kHuffmanCodes[c].bits) | kHuffmanCodes[c].code;
    bits += kHuffmanCodes[c].bits;
    while (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits));
    }
    acc &= (std::uint64_t{1} << bits) - 1;
  }
  if (bits > 0) out.push_back(static_cast<std::uint8_t>((acc << (8 - bits)) | ((1u << (8 - bits)) - 1)));
  return out;
}

const Header& Decoder::lookup(std::uint64_t index, std::size_t offset) const {
  static thread_local Header scratch;
  if (index == 0) throw ParseError("hpack: index 0", offset);
  if (index <= kStaticTable.size()) {
    scratch = {std::string(kStaticTable[index - 1].first), std::string(kStaticTable[index - 1].second)};
    return scratch;
  }
  std::uint64_t dyn = index - kStaticTable.size() - 1;
  if (dyn >= dynamic_.size()) throw ParseError("hpack: index out of range", offset);
  return dynamic_[dyn];
}

void Decoder::evict_to(std::size_t target) {
  while (size_ > target && !dynamic_.empty()) {
    size_ -= dynamic_.back().first.size() + dynamic_.back().second.size() + 32;
    dynamic_.pop_back();
  }
}

void Decoder::insert(Header h) {
  std::size_t entry = h.first.size() + h.second.size() + 32;
  if (entry > max_size_) {
    evict_to(0);
    return;
  }
  evict_to(max_size_ - entry);
  size_ += entry;
  dynamic_.push_front(std::move(h));
}

HeaderList Decoder::decode(std::span<const std::uint8_t> block) {
  HeaderList out;
  Cursor c(block);
  while (!c.done()) {
    std::uint8_t b = c.peek();
    std::size_t at = c.pos();
    if (b & 0x80) {
      out.push_back(lookup(c.integer(7), at));
    } else if ((b & 0xC0) == 0x40) {
      std::uint64_t idx = c.integer(6);
      std::string name = idx ? lookup(idx, at).first : c.string();
      Header h{std::move(name), c.string()};
      out.push_back(h);
      insert(std::move(h));
    } else if ((b & 0xE0) == 0x20) {
      std::uint64_t size = c.integer(5);
      if (size > limit_) throw ParseError("hpack: table size update above limit", at);
      max_size_ = size;
      evict_to(max_size_);
    } else {
      // Literal without indexing (0000) or never indexed (0001).
      std::uint64_t idx = c.integer(4);
      std::string name = idx ? lookup(idx, at).first : c.string();
      out.emplace_back(std::move(name), c.string());
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_literal(const HeaderList& headers) {
  std::vector<std::uint8_t> out;
  for (const auto& [name, value] : headers) {
    out.push_back(0x00);
    put_string(out, name);
    put_string(out, value);
  }
  return out;
}

}  // namespace encdns::hpack
