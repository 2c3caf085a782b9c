#include "encdns/flow.hpp"

#include <cstdio>
#include <fstream>

#include "encdns/errors.hpp"
#include "encdns/prober.hpp"
#include "encdns/resolver_intel.hpp"
#include "text_util.hpp"

namespace encdns::flow {

using namespace std::chrono;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::DoH: return "DoH";
    case Category::DoT: return "DoT";
    case Category::DoQ: return "DoQ";
    case Category::Dns: return "DNS";
    case Category::Other: return "Other";
  }
  return "Other";
}

// --- classifier -----------------------------------------------------------

ClassifierConfig ClassifierConfig::defaults() { return from_catalog(intel::Catalog::major_providers()); }

ClassifierConfig ClassifierConfig::from_catalog(const intel::Catalog& catalog) {
  ClassifierConfig cfg;
  for (const auto& e : catalog.entries()) {
    cfg.provider_ips.insert(e.ip);
    for (const auto& h : e.hostnames) cfg.provider_hostnames.insert(util::to_lower(h));
  }
  return cfg;
}

void ClassifierConfig::validate() const {
  if (provider_ips.empty() && provider_hostnames.empty() && provider_suffixes.empty())
    throw ValidationError("classifier needs at least one DoH provider");
}

bool ClassifierConfig::sni_matches(std::string_view sni) const {
  std::string name = util::to_lower(util::trim(sni));
  if (!name.empty() && name.back() == '.') name.pop_back();
  if (name.empty()) return false;
  if (provider_hostnames.count(name)) return true;
  for (const auto& raw : provider_suffixes) {
    std::string_view suffix = raw;
    if (!suffix.empty() && suffix.front() == '.') suffix.remove_prefix(1);
    if (suffix.empty()) continue;
    if (name == suffix) return true;
    if (name.size() > suffix.size() && name.ends_with(suffix) && name[name.size() - suffix.size() - 1] == '.')
      return true;
  }
  return false;
}

bool ClassifierConfig::started_locally(const FlowRecord& flow) const {
  return local_prefixes.empty() || net::matches_any(flow.src_ip, local_prefixes);
}

Category classify(const FlowRecord& f, const ClassifierConfig& cfg) {
  const bool tcp = f.proto == L4Proto::Tcp;
  if (tcp && f.dst_port == probe::kDohPort && f.tls_established != false) {
    bool provider = cfg.provider_ips.count(f.dst_ip) != 0 || (f.sni && cfg.sni_matches(*f.sni));
    if (provider) return Category::DoH;
  }
  if (tcp && f.dst_port == probe::kDotPort) return Category::DoT;
  if (!tcp && f.dst_port == probe::kDoqPort) return Category::DoQ;
  if (f.dst_port == probe::kDnsPort && !cfg.official_resolvers.count(f.dst_ip)) return Category::Dns;
  return Category::Other;
}

// --- aggregation ----------------------------------------------------------

DailyAggregator::DailyAggregator(ClassifierConfig cfg) : cfg_(std::move(cfg)) {}

void DailyAggregator::add(const FlowRecord& f) {
  if (!cfg_.started_locally(f)) {
    ++dropped_;
    return;
  }
  auto day_key = floor<days>(f.start);
  Day& day = days_[day_key];
  DailyCounts& c = day.counts;
  c.date = day_key;
  ++c.total;
  if (f.tls_established == true) ++c.tls_established;
  if (f.proto == L4Proto::Tcp && f.dst_port == probe::kDohPort) ++c.port443;
  day.sources.insert(f.src_ip);
  switch (classify(f, cfg_)) {
    case Category::DoH: ++c.doh; break;
    case Category::DoT: ++c.dot; break;
    case Category::DoQ: ++c.doq; break;
    case Category::Dns: ++c.dns; break;
    case Category::Other: break;
  }
}

void DailyAggregator::merge(const DailyAggregator& other) {
  dropped_ += other.dropped_;
  for (const auto& [key, src] : other.days_) {
    Day& dst = days_[key];
    dst.counts.date = key;
    dst.counts.doh += src.counts.doh;
    dst.counts.dot += src.counts.dot;
    dst.counts.doq += src.counts.doq;
    dst.counts.dns += src.counts.dns;
    dst.counts.total += src.counts.total;
    dst.counts.tls_established += src.counts.tls_established;
    dst.counts.port443 += src.counts.port443;
    dst.sources.insert(src.sources.begin(), src.sources.end());
  }
}

std::vector<DailyCounts> DailyAggregator::finish() const {
  std::vector<DailyCounts> out;
  if (days_.empty()) return out;
  auto first = days_.begin()->first;
  auto last = days_.rbegin()->first;
  for (auto d = first; d <= last; d += days{1}) {
    auto it = days_.find(d);
    if (it == days_.end()) {
      DailyCounts zero;
      zero.date = d;
      out.push_back(zero);
    } else {
      DailyCounts c = it->second.counts;
      c.unique_src_ips = it->second.sources.size();
      out.push_back(c);
    }
  }
  return out;
}

std::vector<DailyCounts> aggregate_daily(const std::vector<FlowRecord>& flows, const ClassifierConfig& cfg) {
  DailyAggregator agg(cfg);
  for (const auto& f : flows) agg.add(f);
  return agg.finish();
}

double ratio_per_million(std::uint64_t part, std::uint64_t whole) {
  if (whole == 0) throw DegenerateInputError("ratio undefined: zero total flows");
  return static_cast<double>(part) / static_cast<double>(whole) * 1e6;
}

double per_capita_rate(double country_count, double total_users, double population_millions) {
  if (!(total_users > 0)) throw DegenerateInputError("per-capita rate undefined: no users");
  if (!(population_millions > 0)) throw DegenerateInputError("per-capita rate undefined: zero population");
  return country_count / total_users / population_millions;
}

// --- timestamps -----------------------------------------------------------

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t n, std::string_view whole) {
  if (pos + n > s.size()) throw ParseError("truncated timestamp '" + std::string(whole) + "'", pos);
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') throw ParseError("bad timestamp '" + std::string(whole) + "'", i);
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect(std::string_view s, std::size_t pos, char c, std::string_view whole) {
  if (pos >= s.size() || s[pos] != c) throw ParseError("bad timestamp '" + std::string(whole) + "'", pos);
}

}  // namespace

sys_days parse_date(std::string_view text) {
  auto s = util::trim(text);
  if (s.size() != 10) throw ParseError("bad date '" + std::string(s) + "'", 0);
  int y = digits(s, 0, 4, s);
  expect(s, 4, '-', s);
  int m = digits(s, 5, 2, s);
  expect(s, 7, '-', s);
  int d = digits(s, 8, 2, s);
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ParseError("invalid date '" + std::string(s) + "'", 0);
  return sys_days{ymd};
}

sys_seconds parse_timestamp(std::string_view text) {
  auto s = util::trim(text);
  if (s.size() < 10) throw ParseError("bad timestamp '" + std::string(s) + "'", 0);
  sys_days date = parse_date(s.substr(0, 10));
  if (s.size() == 10) return sys_seconds{date};
  if (s[10] != 'T' && s[10] != ' ' && s[10] != 't') throw ParseError("bad timestamp '" + std::string(s) + "'", 10);
  int hh = digits(s, 11, 2, s);
  expect(s, 13, ':', s);
  int mm = digits(s, 14, 2, s);
  int ss = 0;
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    ss = digits(s, 17, 2, s);
    pos = 19;
    if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
      ++pos;
      std::size_t start = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      if (pos == start) throw ParseError("bad fractional seconds in '" + std::string(s) + "'", pos);
    }
  }
  if (hh > 23 || mm > 59 || ss > 60) throw ParseError("time out of range in '" + std::string(s) + "'", 11);
  seconds offset{0};
  if (pos < s.size()) {
    char c = s[pos];
    if (c == 'Z' || c == 'z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      int oh = digits(s, pos + 1, 2, s);
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      int om = digits(s, mpos, 2, s);
      offset = hours{oh} + minutes{om};
      if (c == '-') offset = -offset;
      pos = mpos + 2;
    }
  }
  if (pos != s.size()) throw ParseError("trailing characters in timestamp '" + std::string(s) + "'", pos);
  return sys_seconds{date} + hours{hh} + minutes{mm} + seconds{ss} - offset;
}

std::string format_date(sys_days d) {
  year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

namespace {

std::string format_timestamp(sys_seconds t) {
  auto d = floor<days>(t);
  hh_mm_ss<seconds> tod{t - d};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(d).c_str(), static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()));
  return buf;
}

std::optional<bool> parse_tristate(std::string_view s) {
  auto v = util::to_lower(util::trim(s));
  if (v.empty()) return std::nullopt;
  if (v == "true" || v == "1" || v == "yes" || v == "t" || v == "y") return true;
  if (v == "false" || v == "0" || v == "no" || v == "f" || v == "n") return false;
  throw ValidationError("bad boolean '" + std::string(s) + "'");
}

std::uint16_t parse_port(std::string_view s) {
  auto v = util::parse_int(s);
  if (!v || *v < 0 || *v > 65535) throw ValidationError("bad port '" + std::string(s) + "'");
  return static_cast<std::uint16_t>(*v);
}

std::vector<std::string> normalized_header(std::string_view line) {
  std::vector<std::string> out;
  for (auto& f : util::split_csv(line)) out.push_back(util::to_lower(util::trim(f)));
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

// --- flow CSV -------------------------------------------------------------

void read_flow_csv(std::istream& in, const std::function<void(const FlowRecord&)>& sink) {
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  const auto expected = normalized_header(kFlowCsvHeader);
  while (std::getline(in, line)) {
    ++lineno;
    auto body = util::trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (!header) {
      if (normalized_header(body) != expected)
        throw ParseError("line " + std::to_string(lineno) + ": expected header " + std::string(kFlowCsvHeader), lineno);
      header = true;
      continue;
    }
    auto fields = util::split_csv(body);
    auto fail = [&](const std::string& why) {
      throw ParseError("line " + std::to_string(lineno) + ": " + why, lineno);
    };
    if (fields.size() != 8) fail("expected 8 fields, got " + std::to_string(fields.size()));
    FlowRecord f;
    try {
      f.start = parse_timestamp(fields[0]);
      f.src_ip = net::IpAddress::parse(util::trim(fields[1]));
      f.dst_ip = net::IpAddress::parse(util::trim(fields[2]));
      auto proto = util::to_lower(util::trim(fields[3]));
      if (proto == "tcp" || proto == "6")
        f.proto = L4Proto::Tcp;
      else if (proto == "udp" || proto == "17")
        f.proto = L4Proto::Udp;
      else
        fail("unknown protocol '" + fields[3] + "'");
      f.src_port = parse_port(fields[4]);
      f.dst_port = parse_port(fields[5]);
      f.tls_established = parse_tristate(fields[6]);
      auto sni = util::trim(fields[7]);
      if (!sni.empty()) f.sni = std::string(sni);
    } catch (const ParseError& e) {
      if (std::string_view(e.what()).starts_with("line ")) throw;
      fail(e.what());
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    sink(f);
  }
  if (!header) throw ParseError("missing flow CSV header", 0);
}

std::vector<FlowRecord> load_flow_csv(const std::string& path) {
  auto in = open_input(path);
  std::vector<FlowRecord> flows;
  try {
    read_flow_csv(in, [&](const FlowRecord& f) { flows.push_back(f); });
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset());
  }
  return flows;
}

void write_flow_csv(std::ostream& out, const std::vector<FlowRecord>& flows) {
  out << kFlowCsvHeader << '\n';
  for (const auto& f : flows) {
    out << format_timestamp(f.start) << ',' << f.src_ip.to_string() << ',' << f.dst_ip.to_string() << ','
        << (f.proto == L4Proto::Tcp ? "tcp" : "udp") << ',' << f.src_port << ',' << f.dst_port << ',';
    if (f.tls_established) out << (*f.tls_established ? "true" : "false");
    out << ',';
    if (f.sni) out << *f.sni;
    out << '\n';
  }
}

// --- daily CSV ------------------------------------------------------------

void write_daily_csv(std::ostream& out, const std::vector<DailyCounts>& rows) {
  out << kDailyCsvHeader << '\n';
  for (const auto& c : rows) {
    out << format_date(c.date) << ',' << c.doh << ',' << c.dot << ',' << c.doq << ',' << c.dns << ',' << c.total << ','
        << c.tls_established << ',' << c.port443 << ',' << c.unique_src_ips << '\n';
  }
}

std::vector<DailyCounts> read_daily_csv(std::istream& in) {
  std::vector<DailyCounts> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  const auto expected = normalized_header(kDailyCsvHeader);
  while (std::getline(in, line)) {
    ++lineno;
    auto body = util::trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (!header) {
      if (normalized_header(body) != expected)
        throw ParseError("line " + std::to_string(lineno) + ": expected header " + std::string(kDailyCsvHeader),
                         lineno);
      header = true;
      continue;
    }
    auto fields = util::split_csv(body);
    auto fail = [&](const std::string& why) {
      throw ParseError("line " + std::to_string(lineno) + ": " + why, lineno);
    };
    if (fields.size() != 9) fail("expected 9 fields, got " + std::to_string(fields.size()));
    DailyCounts c;
    try {
      c.date = parse_date(fields[0]);
    } catch (const ParseError& e) {
      fail(e.what());
    }
    std::uint64_t* slots[] = {&c.doh, &c.dot, &c.doq, &c.dns, &c.total, &c.tls_established, &c.port443,
                              &c.unique_src_ips};
    for (std::size_t i = 0; i < 8; ++i) {
      auto v = util::parse_int(fields[i + 1]);
      if (!v || *v < 0) fail("bad count '" + fields[i + 1] + "'");
      *slots[i] = static_cast<std::uint64_t>(*v);
    }
    if (!rows.empty() && c.date <= rows.back().date) fail("dates must be strictly increasing");
    rows.push_back(c);
  }
  if (!header) throw ParseError("missing daily CSV header", 0);
  return rows;
}

std::vector<DailyCounts> load_daily_csv(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_daily_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset());
  }
}

}  // namespace encdns::flow
