#pragma once

// Minimal HPACK (RFC 7541) codec for the test resolver's HTTP/2 listener:
// a full decoder (static + dynamic table, Huffman) and a literal-only encoder.

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace encdns::hpack {

using Header = std::pair<std::string, std::string>;
using HeaderList = std::vector<Header>;

class Decoder {
 public:
  explicit Decoder(std::size_t max_table_size = 4096) : max_size_(max_table_size), limit_(max_table_size) {}

  /// Decode one complete header block. Throws ParseError on malformed input.
  HeaderList decode(std::span<const std::uint8_t> block);

  std::size_t table_size() const { return size_; }

 private:
  const Header& lookup(std::uint64_t index, std::size_t offset) const;
  void insert(Header h);
  void evict_to(std::size_t target);

  std::deque<Header> dynamic_;
  std::size_t size_ = 0;
  std::size_t max_size_;
  std::size_t limit_;
};

/// Encode headers as "literal without indexing, new name", no Huffman.
std::vector<std::uint8_t> encode_literal(const HeaderList& headers);

std::string huffman_decode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> huffman_encode(std::string_view text);

}  // namespace encdns::hpack
