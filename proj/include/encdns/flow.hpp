#pragma once

// Flow classification (DoH / DoT / DoQ / DNS / Other) and per-day aggregation.

#include <chrono>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "encdns/net_address.hpp"

namespace encdns::intel {
class Catalog;
}

namespace encdns::flow {

enum class L4Proto : std::uint8_t { Tcp, Udp };
enum class Category : std::uint8_t { DoH, DoT, DoQ, Dns, Other };

std::string_view to_string(Category c);

struct FlowRecord {
  std::chrono::sys_seconds start;
  net::IpAddress src_ip;
  net::IpAddress dst_ip;
  L4Proto proto = L4Proto::Tcp;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::optional<bool> tls_established;
  std::optional<std::string> sni;
};

struct ClassifierConfig {
  std::set<net::IpAddress> provider_ips;
  /// Exact SNI hostnames (lowercase).
  std::set<std::string> provider_hostnames;
  /// Explicit suffix entries: "example.net" matches "a.example.net" and itself.
  std::vector<std::string> provider_suffixes;
  /// Organization resolvers; DNS flows to them are not counted.
  std::set<net::IpAddress> official_resolvers;
  /// When non-empty, only flows whose source lies in one of these are kept.
  std::vector<net::Cidr> local_prefixes;

  /// Bundled major providers.
  static ClassifierConfig defaults();
  static ClassifierConfig from_catalog(const intel::Catalog& catalog);

  void validate() const;  ///< throws ValidationError when no provider is configured
  bool sni_matches(std::string_view sni) const;
  bool started_locally(const FlowRecord& flow) const;
};

Category classify(const FlowRecord& flow, const ClassifierConfig& cfg);

struct DailyCounts {
  std::chrono::sys_days date;
  std::uint64_t doh = 0;
  std::uint64_t dot = 0;
  std::uint64_t doq = 0;
  std::uint64_t dns = 0;
  std::uint64_t total = 0;
  std::uint64_t tls_established = 0;
  std::uint64_t port443 = 0;
  std::uint64_t unique_src_ips = 0;

  friend bool operator==(const DailyCounts&, const DailyCounts&) = default;
};

/// Incremental aggregation. Partial aggregators over disjoint inputs can be
/// merged; the result does not depend on input order.
class DailyAggregator {
 public:
  explicit DailyAggregator(ClassifierConfig cfg);
  void add(const FlowRecord& flow);
  void merge(const DailyAggregator& other);
  /// One row per day from the first to the last observed day, zero rows for
  /// days without flows inside that span.
  std::vector<DailyCounts> finish() const;
  std::uint64_t dropped_not_local() const { return dropped_; }

 private:
  struct Day {
    DailyCounts counts;
    std::set<net::IpAddress> sources;
  };
  ClassifierConfig cfg_;
  std::map<std::chrono::sys_days, Day> days_;
  std::uint64_t dropped_ = 0;
};

std::vector<DailyCounts> aggregate_daily(const std::vector<FlowRecord>& flows, const ClassifierConfig& cfg);

/// part / whole * 1e6; DegenerateInputError when whole == 0.
double ratio_per_million(std::uint64_t part, std::uint64_t whole);

/// country_count / total_users / population_millions; DegenerateInputError
/// on non-positive denominators.
double per_capita_rate(double country_count, double total_users, double population_millions);

// --- file formats ---------------------------------------------------------

/// ISO-8601 "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS[.fff](Z|+hh:mm)" or with a
/// space separator. Throws ParseError.
std::chrono::sys_seconds parse_timestamp(std::string_view text);
std::string format_date(std::chrono::sys_days day);
std::chrono::sys_days parse_date(std::string_view text);

inline constexpr std::string_view kFlowCsvHeader = "ts,src_ip,dst_ip,proto,src_port,dst_port,tls_established,sni";
inline constexpr std::string_view kDailyCsvHeader =
    "date,doh,dot,doq,dns,total,tls_established,port443,unique_src_ips";

/// Calls `sink` for every row; throws ParseError with the line number.
void read_flow_csv(std::istream& in, const std::function<void(const FlowRecord&)>& sink);
std::vector<FlowRecord> load_flow_csv(const std::string& path);
void write_flow_csv(std::ostream& out, const std::vector<FlowRecord>& flows);

void write_daily_csv(std::ostream& out, const std::vector<DailyCounts>& days);
std::vector<DailyCounts> read_daily_csv(std::istream& in);
std::vector<DailyCounts> load_daily_csv(const std::string& path);

}  // namespace encdns::flow
