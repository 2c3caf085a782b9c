#!/usr/bin/env python3
"""Write tests/data/flows.csv and tests/data/expected_daily.csv.

Each flow is drawn from a kind whose category is fixed by construction, so
the expected per-day counts come from the generator's own tallies rather
than from the classifier under test.

Classifier settings the fixture assumes:
  providers        bundled major-provider list (data/major_providers.csv)
  official DNS     10.0.0.53, 2001:db8:100::53
  local prefixes   10.0.0.0/8, 2001:db8:100::/48
"""

import argparse
import csv
import ipaddress
import datetime as dt
import random
from collections import defaultdict
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

PROVIDER_IPS = []
PROVIDER_NAMES = []
with open(ROOT / "data" / "major_providers.csv") as f:
    for row in csv.DictReader(f):
        PROVIDER_IPS.append(row["ip"])
        PROVIDER_NAMES.append(row["hostname"])
PROVIDER_NAMES = sorted(set(PROVIDER_NAMES))

OFFICIAL = ["10.0.0.53", "2001:db8:100::53"]
EXTERNAL = [f"198.51.100.{i}" for i in range(1, 60)] + [f"2001:db8:ffff::{i:x}" for i in range(1, 20)]
CDN = [f"203.0.113.{i}" for i in range(1, 200)]

# (kind, weight, expected category; None is Other, "dropped" fails the local filter)
KINDS = [
    ("doh_ip", 30, "doh"),
    ("doh_sni", 25, "doh"),
    ("doh_unknown_tls", 5, "doh"),
    ("https_other", 300, None),
    ("https_provider_failed", 8, None),
    ("https_lookalike_sni", 6, None),
    ("dot", 12, "dot"),
    ("doq", 4, "doq"),
    ("dns_udp", 60, "dns"),
    ("dns_tcp", 6, "dns"),
    ("dns_official", 200, None),
    ("other", 120, None),
    ("not_local", 40, "dropped"),
]


def local_source(rng):
    if rng.random() < 0.8:
        return f"10.{rng.randrange(0, 4)}.{rng.randrange(0, 256)}.{rng.randrange(1, 255)}"
    return f"2001:db8:100:{rng.randrange(0, 16):x}::{rng.randrange(1, 0xFFFF):x}"


def make_flow(kind, rng):
    src = local_source(rng)
    sport = rng.randrange(1024, 65536)
    tls = ""
    sni = ""
    proto = "tcp"
    if kind == "doh_ip":
        dst, dport, tls = rng.choice(PROVIDER_IPS), 443, "true"
        if rng.random() < 0.5:
            sni = rng.choice(PROVIDER_NAMES)
    elif kind == "doh_sni":
        dst, dport, tls = rng.choice(CDN), 443, "true"
        name = rng.choice(PROVIDER_NAMES)
        sni = name.upper() if rng.random() < 0.1 else name
    elif kind == "doh_unknown_tls":
        dst, dport = rng.choice(PROVIDER_IPS), 443
    elif kind == "https_other":
        dst, dport = rng.choice(CDN), 443
        tls = rng.choice(["true", "true", "false", ""])
        sni = rng.choice(["www.example.com", "cdn.example.net", ""])
    elif kind == "https_provider_failed":
        dst, dport, tls = rng.choice(PROVIDER_IPS), 443, "false"
        sni = rng.choice(PROVIDER_NAMES)
    elif kind == "https_lookalike_sni":
        # neither an exact provider hostname nor one of its subdomains
        dst, dport, tls = rng.choice(CDN), 443, "true"
        sni = rng.choice(["www.google.com", "mail.google.com", "cloudflare.com", "evil-dns.google.com.example"])
    elif kind == "dot":
        dst, dport, tls = rng.choice(PROVIDER_IPS + EXTERNAL), 853, rng.choice(["true", "false", ""])
    elif kind == "doq":
        dst, dport, proto = rng.choice(EXTERNAL), 784, "udp"
    elif kind == "dns_udp":
        dst, dport, proto = rng.choice(EXTERNAL + PROVIDER_IPS), 53, "udp"
    elif kind == "dns_tcp":
        dst, dport = rng.choice(EXTERNAL), 53
    elif kind == "dns_official":
        dst, dport, proto = rng.choice(OFFICIAL), 53, rng.choice(["udp", "udp", "tcp"])
    elif kind == "other":
        proto = rng.choice(["tcp", "udp"])
        dst = rng.choice(EXTERNAL + CDN)
        dport = rng.choice([22, 25, 80, 123, 993, 8443, 5353, 784 if proto == "tcp" else 853])
    elif kind == "not_local":
        src = rng.choice(EXTERNAL)
        dst, dport, tls = rng.choice(PROVIDER_IPS), 443, "true"
    else:
        raise ValueError(kind)
    return src, dst, proto, sport, dport, tls, sni


def format_ts(utc, rng):
    style = rng.randrange(4)
    if style == 0:
        return utc.strftime("%Y-%m-%dT%H:%M:%SZ")
    if style == 1:
        return utc.strftime("%Y-%m-%d %H:%M:%S") + f".{rng.randrange(1000):03d}Z"
    offset = dt.timedelta(hours=rng.choice([-5, 2, 9]), minutes=rng.choice([0, 30]))
    local = (utc + offset).replace(tzinfo=dt.timezone(offset))
    return local.isoformat(timespec="seconds")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--flows", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=20231101)
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "data")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    start = dt.datetime(2023, 3, 1, tzinfo=dt.timezone.utc)
    span_days = 14
    gap_days = {5, 6}
    days = [d for d in range(span_days) if d not in gap_days]
    names = [k[0] for k in KINDS]
    weights = [k[1] for k in KINDS]
    cat_of = {k[0]: k[2] for k in KINDS}

    rows = []
    tally = defaultdict(lambda: defaultdict(int))
    sources = defaultdict(set)
    for _ in range(args.flows):
        day = rng.choice(days)
        utc = start + dt.timedelta(days=day, seconds=rng.randrange(86400))
        kind = rng.choices(names, weights)[0]
        src, dst, proto, sport, dport, tls, sni = make_flow(kind, rng)
        rows.append([format_ts(utc, rng), src, dst, proto, sport, dport, tls, sni])
        cat = cat_of[kind]
        if cat == "dropped":
            continue
        t = tally[day]
        t["total"] += 1
        if cat:
            t[cat] += 1
        if tls == "true":
            t["tls_established"] += 1
        if proto == "tcp" and dport == 443:
            t["port443"] += 1
        sources[day].add(ipaddress.ip_address(src))

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "flows.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["ts", "src_ip", "dst_ip", "proto", "src_port", "dst_port", "tls_established", "sni"])
        w.writerows(rows)

    cols = ["doh", "dot", "doq", "dns", "total", "tls_established", "port443"]
    with open(args.out / "expected_daily.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["date"] + cols + ["unique_src_ips"])
        for d in range(span_days):
            date = (start + dt.timedelta(days=d)).date().isoformat()
            w.writerow([date] + [tally[d][c] for c in cols] + [len(sources[d])])


if __name__ == "__main__":
    main()
