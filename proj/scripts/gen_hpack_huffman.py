"""Emit the static HPACK Huffman code table (RFC 7541 Appendix B) as C++."""
import hpack.huffman_constants as h

rows = [f"    {{0x{c:08x}u, {l}}}," for c, l in zip(h.REQUEST_CODES, h.REQUEST_CODES_LENGTH)]
print("// Generated by scripts/gen_hpack_huffman.py. Entry i is the code for symbol i; 256 is EOS.")
print("// clang-format off")
print("constexpr HuffmanCode kHuffmanCodes[257] = {")
print("\n".join(rows))
print("};")
print("// clang-format on")
