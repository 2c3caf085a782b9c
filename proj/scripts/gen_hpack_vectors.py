"""Freeze HPACK header blocks produced by the reference `hpack` package.

Output: one JSON object per line, {"block": hex, "headers": [[name, value], ...]}.
All blocks belong to one connection and must be decoded in order.
"""
import json
import random
import sys

import hpack

rng = random.Random(1234)
enc = hpack.Encoder()
enc.header_table_size = 256  # small table so eviction happens

names = ["content-type", "x-custom", "accept", "user-agent", "cookie", "x-trace-id", ":path"]
out = open(sys.argv[1], "w") if len(sys.argv) > 1 else sys.stdout
for i in range(60):
    headers = [(":method", rng.choice(["GET", "POST"])), (":scheme", "https")]
    for _ in range(rng.randint(1, 5)):
        name = rng.choice(names)
        value = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789/-_=;. ") for _ in range(rng.randint(0, 40)))
        headers.append((name, value))
    block = enc.encode(headers, huffman=bool(i % 2))
    out.write(json.dumps({"block": block.hex(), "headers": headers}) + "\n")
