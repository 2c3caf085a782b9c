#pragma once

// Enrichment of verified resolvers (PTR, passive DNS, ASN), grouping into
// providers, and the well-known resolver catalog.

#include <cstdint>
#include <map>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "encdns/net_address.hpp"
#include "encdns/prober.hpp"

namespace encdns::intel {

struct ResolverRecord {
  net::IpAddress ip;
  /// PTR result first (when present), then passive-DNS names in order.
  std::vector<std::string> hostnames;
  bool has_ptr = false;
  std::optional<std::string> selected_hostname;
  std::optional<std::string> sld;
  net::Cidr prefix;  ///< /24 (IPv4) or /48 (IPv6)
  std::optional<std::uint32_t> asn;
  probe::VerificationMatrix matrix;
  std::string source = "scan";
};

struct ProviderGrouping {
  std::map<std::string, std::vector<ResolverRecord>> sld_groups;
  std::map<std::string, std::vector<ResolverRecord>> nameless_prefix_groups;

  std::size_t provider_estimate() const { return sld_groups.size() + nameless_prefix_groups.size(); }
};

struct CatalogSummary {
  std::size_t total = 0;
  std::size_t ipv4_count = 0;
  std::size_t ipv6_count = 0;
  std::size_t unique_asn = 0;
  std::size_t unique_domains = 0;

  friend bool operator==(const CatalogSummary&, const CatalogSummary&) = default;
};

struct CatalogEntry {
  net::IpAddress ip;
  std::vector<std::string> hostnames;
  std::optional<std::uint32_t> asn;
  /// Earliest list the address appeared in.
  std::string source;
};

/// Deduplicated by IP; insertion order preserved.
class Catalog {
 public:
  /// Merge rule: same IP keeps the union of hostnames and the earliest source.
  void add(const CatalogEntry& entry);
  void merge(const Catalog& other);

  const std::vector<CatalogEntry>& entries() const { return entries_; }
  bool contains(const net::IpAddress& ip) const { return index_.count(ip) != 0; }
  const CatalogEntry* find(const net::IpAddress& ip) const;
  std::size_t size() const { return entries_.size(); }

  /// CSV with header ip,hostname,version,asn,source. One row per hostname.
  /// Throws IoError / ParseError (line number). The version column must
  /// agree with the address family.
  static Catalog load_csv(const std::string& path);
  static Catalog parse_csv(std::istream& in, const std::string& name = "<stream>");
  void write_csv(std::ostream& out) const;

  /// Providers bundled with the tool (the major public DoH services).
  static Catalog major_providers();

 private:
  std::vector<CatalogEntry> entries_;
  std::map<net::IpAddress, std::size_t> index_;
};

/// PTR if present; else the first passive name containing "doh" or "dns"
/// (case-insensitive); else the first passive name; else nullopt.
std::optional<std::string> select_hostname(const std::optional<std::string>& ptr,
                                           const std::vector<std::string>& passive);

/// Registrable domain via the bundled public-suffix table; unknown TLDs fall
/// back to the last two labels. Throws ValidationError for empty or
/// single-label names and for names that are themselves a public suffix.
std::string extract_sld(std::string_view hostname);

/// Records whose selected hostname yields no SLD are grouped by prefix.
ProviderGrouping group_providers(const std::vector<ResolverRecord>& records);

CatalogSummary summarize_catalog(const Catalog& catalog);

struct CrossReference {
  std::size_t known_found = 0;
  std::size_t unknown_found = 0;
};

CrossReference cross_reference(const std::vector<net::IpAddress>& scan_ips, const Catalog& catalog);

// --- lookup providers -------------------------------------------------------

class PtrProvider {
 public:
  virtual ~PtrProvider() = default;
  /// nullopt: no record. Throws IoError when the backend itself fails.
  virtual std::optional<std::string> lookup_ptr(const net::IpAddress& ip) const = 0;
};

/// Reverse lookup through the system resolver.
class SystemPtrProvider : public PtrProvider {
 public:
  std::optional<std::string> lookup_ptr(const net::IpAddress& ip) const override;
};

/// Fixed table, e.g. loaded from a passive snapshot or a test fixture.
class StaticPtrProvider : public PtrProvider {
 public:
  explicit StaticPtrProvider(std::map<net::IpAddress, std::string> table) : table_(std::move(table)) {}
  std::optional<std::string> lookup_ptr(const net::IpAddress& ip) const override;

 private:
  std::map<net::IpAddress, std::string> table_;
};

/// JSON-lines snapshot: {"ip": "...", "names": ["...", ...]} per line.
class PassiveDnsTable {
 public:
  static PassiveDnsTable load(const std::string& path);
  static PassiveDnsTable parse(std::istream& in);
  void add(const net::IpAddress& ip, std::vector<std::string> names);
  /// Empty when the IP has no observations.
  std::vector<std::string> passive_lookup(const net::IpAddress& ip) const;

 private:
  std::map<net::IpAddress, std::vector<std::string>> names_;
};

/// CSV prefix,asn; longest-prefix match.
class AsnTable {
 public:
  static AsnTable load(const std::string& path);
  static AsnTable parse(std::istream& in);
  void add(const net::Cidr& prefix, std::uint32_t asn);
  std::optional<std::uint32_t> lookup_asn(const net::IpAddress& ip) const;

 private:
  std::vector<std::pair<net::Cidr, std::uint32_t>> prefixes_;
};

struct EnrichmentSources {
  const PtrProvider* ptr = nullptr;
  const PassiveDnsTable* passive = nullptr;
  const AsnTable* asn = nullptr;
};

ResolverRecord enrich(const net::IpAddress& ip, const probe::VerificationMatrix& matrix,
                      const EnrichmentSources& sources, std::string source = "scan");

/// Grouping report mirroring the hostname-analysis table.
struct GroupingReport {
  std::size_t total = 0;
  std::size_t with_ptr = 0;
  std::size_t without_ptr = 0;
  std::size_t with_hostname = 0;
  std::size_t unique_sld = 0;
  std::size_t unique_prefixes = 0;
  std::size_t provider_estimate = 0;
  std::size_t known_found = 0;
  std::size_t unknown_found = 0;
};

/// One JSON object per record: ip, hostnames, has_ptr, selected_hostname,
/// sld, prefix, asn, source and the six method flags.
std::string record_to_json_line(const ResolverRecord& record);
/// Throws ParseError. Method details other than success are not kept.
ResolverRecord parse_record_json_line(std::string_view line);
std::vector<ResolverRecord> load_records(const std::string& path);

GroupingReport make_grouping_report(const std::vector<ResolverRecord>& records, const Catalog& catalog);
std::string grouping_report_json(const GroupingReport& report);

}  // namespace encdns::intel
