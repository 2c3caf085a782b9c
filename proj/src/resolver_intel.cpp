#include "encdns/resolver_intel.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "encdns/errors.hpp"
#include "text_util.hpp"

namespace encdns::intel {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string normalize_name(std::string_view name) {
  std::string out = util::to_lower(util::trim(name));
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

void append_unique(std::vector<std::string>& names, const std::string& name) {
  if (name.empty()) return;
  if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
}

std::optional<std::uint32_t> parse_asn(std::string_view text) {
  text = util::trim(text);
  if (text.size() > 2 && (text[0] == 'A' || text[0] == 'a') && (text[1] == 'S' || text[1] == 's')) text.remove_prefix(2);
  auto v = util::parse_int(text);
  if (!v || *v < 0 || *v > 0xFFFFFFFFLL) return std::nullopt;
  return static_cast<std::uint32_t>(*v);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

struct ProviderRow {
  const char* hostname;
  const char* addresses[4];
};

// Major public DoH services and their published addresses.
const ProviderRow kMajorProviders[] = {
    {"dns.cloudflare.com", {"1.1.1.1", "1.0.0.1", "2606:4700:4700::1111", "2606:4700:4700::1001"}},
    {"dns.google.com", {"8.8.4.4", "8.8.8.8", "2001:4860:4860::8888", "2001:4860:4860::8844"}},
    {"dns.aa.net.uk", {"90.155.62.13", "90.155.62.14"}},
    {"dns-nyc.aaflalo.me", {"104.27.159.50", "104.27.158.50"}},
    {"dns.adguard.com", {"104.20.31.130", "104.20.30.130", "2a10:50c0::ad1:ff", "2a10:50c0::ad2:ff"}},
    {"doh.cleanbrowsing.org", {"192.124.249.8"}},
    {"nic.cz", {"193.17.47.1", "185.43.135.1"}},
    {"dns.nextdns.io", {"104.31.88.168", "104.31.89.168", "2a07:a8c0::1c:7db6", "2a07:a8c1::1c:7db6"}},
    {"dns.brahma.world", {"104.27.170.14", "104.27.171.14"}},
    {"dns1.dnscrypt.ca", {"69.165.220.221", "2620:fe::fe", "2620:fe::9"}},
    {"libredns.gr", {"116.202.176.26"}},
};

}  // namespace

// --- catalog ----------------------------------------------------------------

void Catalog::add(const CatalogEntry& entry) {
  auto it = index_.find(entry.ip);
  if (it == index_.end()) {
    CatalogEntry copy;
    copy.ip = entry.ip;
    copy.asn = entry.asn;
    copy.source = entry.source;
    for (const auto& h : entry.hostnames) append_unique(copy.hostnames, normalize_name(h));
    index_.emplace(entry.ip, entries_.size());
    entries_.push_back(std::move(copy));
    return;
  }
  CatalogEntry& existing = entries_[it->second];
  for (const auto& h : entry.hostnames) append_unique(existing.hostnames, normalize_name(h));
  if (!existing.asn) existing.asn = entry.asn;
}

void Catalog::merge(const Catalog& other) {
  for (const auto& e : other.entries_) add(e);
}

const CatalogEntry* Catalog::find(const net::IpAddress& ip) const {
  auto it = index_.find(ip);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

Catalog Catalog::load_csv(const std::string& path) {
  auto in = open_input(path);
  return parse_csv(in, path);
}

Catalog Catalog::parse_csv(std::istream& in, const std::string& name) {
  Catalog catalog;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = util::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = util::split_csv(body);
    if (!header_seen) {
      header_seen = true;
      std::vector<std::string> expected{"ip", "hostname", "version", "asn", "source"};
      std::vector<std::string> got;
      for (auto& f : fields) got.push_back(util::to_lower(util::trim(f)));
      if (got != expected)
        throw ParseError(name + ":" + std::to_string(lineno) + ": expected header ip,hostname,version,asn,source",
                         lineno);
      continue;
    }
    auto fail = [&](const std::string& why) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": " + why, lineno);
    };
    if (fields.size() != 5) fail("expected 5 fields, got " + std::to_string(fields.size()));
    auto ip = net::IpAddress::try_parse(util::trim(fields[0]));
    if (!ip) fail("bad address '" + fields[0] + "'");
    auto version = util::parse_int(fields[2]);
    if (!version || (*version != 4 && *version != 6)) fail("version must be 4 or 6");
    if ((*version == 4) != ip->is_v4()) fail("version column disagrees with address family");
    CatalogEntry entry;
    entry.ip = *ip;
    auto host = normalize_name(fields[1]);
    if (!host.empty()) entry.hostnames.push_back(host);
    if (!util::trim(fields[3]).empty()) {
      entry.asn = parse_asn(fields[3]);
      if (!entry.asn) fail("bad asn '" + fields[3] + "'");
    }
    entry.source = std::string(util::trim(fields[4]));
    catalog.add(entry);
  }
  if (!header_seen) throw ParseError(name + ": missing header", 0);
  return catalog;
}

void Catalog::write_csv(std::ostream& out) const {
  out << "ip,hostname,version,asn,source\n";
  for (const auto& e : entries_) {
    std::string asn = e.asn ? std::to_string(*e.asn) : "";
    const char* version = e.ip.is_v4() ? "4" : "6";
    if (e.hostnames.empty()) {
      out << e.ip.to_string() << ",," << version << ',' << asn << ',' << e.source << '\n';
    }
    for (const auto& h : e.hostnames)
      out << e.ip.to_string() << ',' << h << ',' << version << ',' << asn << ',' << e.source << '\n';
  }
}

Catalog Catalog::major_providers() {
  Catalog catalog;
  for (const auto& row : kMajorProviders) {
    for (const char* addr : row.addresses) {
      if (!addr) continue;
      CatalogEntry e;
      e.ip = net::IpAddress::parse(addr);
      e.hostnames.push_back(row.hostname);
      e.source = "major-providers";
      catalog.add(e);
    }
  }
  return catalog;
}

// --- hostname selection and grouping ----------------------------------------

std::optional<std::string> select_hostname(const std::optional<std::string>& ptr,
                                           const std::vector<std::string>& passive) {
  if (ptr && !ptr->empty()) return ptr;
  for (const auto& name : passive) {
    auto lower = util::to_lower(name);
    if (lower.find("doh") != std::string::npos || lower.find("dns") != std::string::npos) return name;
  }
  if (!passive.empty()) return passive.front();
  return std::nullopt;
}

ProviderGrouping group_providers(const std::vector<ResolverRecord>& records) {
  ProviderGrouping g;
  for (const auto& r : records) {
    if (r.sld)
      g.sld_groups[*r.sld].push_back(r);
    else
      g.nameless_prefix_groups[r.prefix.to_string()].push_back(r);
  }
  return g;
}

CatalogSummary summarize_catalog(const Catalog& catalog) {
  CatalogSummary s;
  std::set<std::uint32_t> asns;
  std::set<std::string> domains;
  for (const auto& e : catalog.entries()) {
    ++s.total;
    if (e.ip.is_v4())
      ++s.ipv4_count;
    else
      ++s.ipv6_count;
    if (e.asn) asns.insert(*e.asn);
    for (const auto& h : e.hostnames) domains.insert(h);
  }
  s.unique_asn = asns.size();
  s.unique_domains = domains.size();
  return s;
}

CrossReference cross_reference(const std::vector<net::IpAddress>& scan_ips, const Catalog& catalog) {
  CrossReference x;
  std::set<net::IpAddress> seen;
  for (const auto& ip : scan_ips) {
    if (!seen.insert(ip).second) continue;
    if (catalog.contains(ip))
      ++x.known_found;
    else
      ++x.unknown_found;
  }
  return x;
}

// --- lookups ----------------------------------------------------------------

std::optional<std::string> SystemPtrProvider::lookup_ptr(const net::IpAddress& ip) const {
  sockaddr_storage ss{};
  socklen_t len = 0;
  if (ip.is_v4()) {
    auto* sin = reinterpret_cast<sockaddr_in*>(&ss);
    sin->sin_family = AF_INET;
    std::memcpy(&sin->sin_addr, ip.bytes().data(), 4);
    len = sizeof(sockaddr_in);
  } else {
    auto* sin6 = reinterpret_cast<sockaddr_in6*>(&ss);
    sin6->sin6_family = AF_INET6;
    std::memcpy(&sin6->sin6_addr, ip.bytes().data(), 16);
    len = sizeof(sockaddr_in6);
  }
  char host[NI_MAXHOST];
  int rc = getnameinfo(reinterpret_cast<sockaddr*>(&ss), len, host, sizeof host, nullptr, 0, NI_NAMEREQD);
  if (rc == EAI_NONAME) return std::nullopt;
  if (rc != 0) throw IoError(std::string("reverse lookup failed for ") + ip.to_string() + ": " + gai_strerror(rc));
  return normalize_name(host);
}

std::optional<std::string> StaticPtrProvider::lookup_ptr(const net::IpAddress& ip) const {
  auto it = table_.find(ip);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

PassiveDnsTable PassiveDnsTable::load(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset());
  }
}

PassiveDnsTable PassiveDnsTable::parse(std::istream& in) {
  PassiveDnsTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = util::trim(line);
    if (body.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw ParseError("line " + std::to_string(lineno) + ": " + why, lineno);
    };
    json j;
    try {
      j = json::parse(body);
    } catch (const json::exception& e) {
      fail(e.what());
    }
    if (!j.is_object() || !j.contains("ip") || !j["ip"].is_string()) fail("missing string member 'ip'");
    auto ip = net::IpAddress::try_parse(j["ip"].get<std::string>());
    if (!ip) fail("bad address");
    std::vector<std::string> names;
    if (j.contains("names")) {
      if (!j["names"].is_array()) fail("'names' must be an array");
      for (const auto& n : j["names"]) {
        if (!n.is_string()) fail("'names' entries must be strings");
        names.push_back(n.get<std::string>());
      }
    }
    table.add(*ip, std::move(names));
  }
  return table;
}

void PassiveDnsTable::add(const net::IpAddress& ip, std::vector<std::string> names) {
  auto& slot = names_[ip];
  for (const auto& n : names) append_unique(slot, normalize_name(n));
}

std::vector<std::string> PassiveDnsTable::passive_lookup(const net::IpAddress& ip) const {
  auto it = names_.find(ip);
  return it == names_.end() ? std::vector<std::string>{} : it->second;
}

AsnTable AsnTable::load(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset());
  }
}

AsnTable AsnTable::parse(std::istream& in) {
  AsnTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = util::trim(util::strip_comment(line));
    if (body.empty()) continue;
    auto fields = util::split_csv(body);
    auto fail = [&](const std::string& why) {
      throw ParseError("line " + std::to_string(lineno) + ": " + why, lineno);
    };
    if (fields.size() != 2) fail("expected prefix,asn");
    if (util::to_lower(util::trim(fields[0])) == "prefix") continue;
    net::Cidr prefix;
    try {
      prefix = net::Cidr::parse(util::trim(fields[0]));
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    auto asn = parse_asn(fields[1]);
    if (!asn) fail("bad asn '" + fields[1] + "'");
    table.add(prefix, *asn);
  }
  return table;
}

void AsnTable::add(const net::Cidr& prefix, std::uint32_t asn) { prefixes_.emplace_back(prefix, asn); }

std::optional<std::uint32_t> AsnTable::lookup_asn(const net::IpAddress& ip) const {
  std::optional<std::uint32_t> best;
  int best_len = -1;
  for (const auto& [prefix, asn] : prefixes_) {
    if (prefix.prefix_len() > best_len && prefix.contains(ip)) {
      best = asn;
      best_len = prefix.prefix_len();
    }
  }
  return best;
}

ResolverRecord enrich(const net::IpAddress& ip, const probe::VerificationMatrix& matrix,
                      const EnrichmentSources& sources, std::string source) {
  ResolverRecord r;
  r.ip = ip;
  r.matrix = matrix;
  r.source = std::move(source);
  r.prefix = net::grouping_prefix(ip);
  std::optional<std::string> ptr;
  if (sources.ptr) {
    ptr = sources.ptr->lookup_ptr(ip);
    if (ptr) {
      *ptr = normalize_name(*ptr);
      if (ptr->empty()) ptr.reset();
    }
  }
  std::vector<std::string> passive;
  if (sources.passive) passive = sources.passive->passive_lookup(ip);
  r.has_ptr = ptr.has_value();
  if (ptr) append_unique(r.hostnames, *ptr);
  for (const auto& n : passive) append_unique(r.hostnames, normalize_name(n));
  r.selected_hostname = select_hostname(ptr, passive);
  if (r.selected_hostname) {
    *r.selected_hostname = normalize_name(*r.selected_hostname);
    try {
      r.sld = extract_sld(*r.selected_hostname);
    } catch (const ValidationError&) {
      r.sld.reset();
    }
  }
  if (sources.asn) r.asn = sources.asn->lookup_asn(ip);
  return r;
}

std::string record_to_json_line(const ResolverRecord& r) {
  ordered_json j;
  j["ip"] = r.ip.to_string();
  j["hostnames"] = r.hostnames;
  j["has_ptr"] = r.has_ptr;
  j["selected_hostname"] = r.selected_hostname ? json(*r.selected_hostname) : json(nullptr);
  j["sld"] = r.sld ? json(*r.sld) : json(nullptr);
  j["prefix"] = r.prefix.to_string();
  j["asn"] = r.asn ? json(*r.asn) : json(nullptr);
  j["source"] = r.source;
  for (std::size_t i = 0; i < 6; ++i) j[std::string(probe::kMethodLabels[i])] = r.matrix.methods[i].success;
  return j.dump();
}

ResolverRecord parse_record_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("record: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("record: expected an object", 0);
  ResolverRecord r;
  try {
    auto ip = net::IpAddress::try_parse(j.at("ip").get<std::string>());
    if (!ip) throw ParseError("record: bad address", 0);
    r.ip = *ip;
    r.prefix = j.contains("prefix") ? net::Cidr::parse(j["prefix"].get<std::string>()) : net::grouping_prefix(r.ip);
    if (j.contains("hostnames")) r.hostnames = j["hostnames"].get<std::vector<std::string>>();
    r.has_ptr = j.value("has_ptr", false);
    if (j.contains("selected_hostname") && j["selected_hostname"].is_string())
      r.selected_hostname = j["selected_hostname"].get<std::string>();
    if (j.contains("sld") && j["sld"].is_string()) r.sld = j["sld"].get<std::string>();
    if (j.contains("asn") && j["asn"].is_number_unsigned()) r.asn = j["asn"].get<std::uint32_t>();
    r.source = j.value("source", std::string("scan"));
    for (std::size_t i = 0; i < 6; ++i) r.matrix.methods[i].success = j.value(std::string(probe::kMethodLabels[i]), false);
  } catch (const json::exception& e) {
    throw ParseError(std::string("record: ") + e.what(), 0);
  } catch (const ValidationError& e) {
    throw ParseError(std::string("record: ") + e.what(), 0);
  }
  return r;
}

std::vector<ResolverRecord> load_records(const std::string& path) {
  auto in = open_input(path);
  std::vector<ResolverRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      out.push_back(parse_record_json_line(line));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
  }
  return out;
}

GroupingReport make_grouping_report(const std::vector<ResolverRecord>& records, const Catalog& catalog) {
  GroupingReport rep;
  std::set<net::IpAddress> unique;
  std::vector<ResolverRecord> deduped;
  for (const auto& r : records)
    if (unique.insert(r.ip).second) deduped.push_back(r);
  rep.total = deduped.size();
  for (const auto& r : deduped) {
    if (r.has_ptr) ++rep.with_ptr;
    if (r.selected_hostname) ++rep.with_hostname;
  }
  rep.without_ptr = rep.total - rep.with_ptr;
  auto g = group_providers(deduped);
  rep.unique_sld = g.sld_groups.size();
  rep.unique_prefixes = g.nameless_prefix_groups.size();
  rep.provider_estimate = g.provider_estimate();
  std::vector<net::IpAddress> ips(unique.begin(), unique.end());
  auto x = cross_reference(ips, catalog);
  rep.known_found = x.known_found;
  rep.unknown_found = x.unknown_found;
  return rep;
}

std::string grouping_report_json(const GroupingReport& r) {
  ordered_json j;
  j["total_unique_ip_addresses"] = r.total;
  j["ip_addresses_with_ptr_records"] = r.with_ptr;
  j["ip_addresses_without_ptr_records"] = r.without_ptr;
  j["ip_addresses_with_hostname"] = r.with_hostname;
  j["unique_sld"] = r.unique_sld;
  j["unique_prefixes"] = r.unique_prefixes;
  j["assumed_unique_providers"] = r.provider_estimate;
  j["discovered_well_known_resolvers"] = r.known_found;
  j["discovered_unknown_resolvers"] = r.unknown_found;
  return j.dump(2);
}

}  // namespace encdns::intel
