#pragma once

// Candidate ingestion, range partitioning, and the bounded worker pool that
// verifies candidates and streams results as JSON lines.

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "encdns/net_address.hpp"
#include "encdns/prober.hpp"

namespace encdns::scan {

struct ScanConfig {
  int concurrency = 64;
  probe::Millis timeout{3000};
  int retries = 1;
  /// New connections per second, across all workers.
  double rate_limit = 100.0;
  std::vector<net::Cidr> exclusions;
  /// Also skip RFC 1918, loopback, multicast and other non-public space.
  bool exclude_non_public = true;
  /// Required when the target set spans more than one /24.
  bool consent = false;
  /// Write a checkpoint every N completed targets.
  std::size_t checkpoint_every = 1000;
  probe::ProbeOptions probe_options;

  void validate() const;
  bool excluded(const net::IpAddress& ip) const;
};

/// Inclusive IPv4 interval in host order.
struct AddressRange {
  std::uint32_t first = 0;
  std::uint32_t last = 0;

  std::uint64_t size() const { return std::uint64_t{last} - first + 1; }
  static AddressRange parse(std::string_view text);  ///< "a.b.c.d-e.f.g.h" or a CIDR
  std::string to_string() const;
  friend bool operator==(const AddressRange&, const AddressRange&) = default;
};

struct RangePartition {
  int worker_id = 0;
  std::uint32_t first = 0;
  std::uint32_t last = 0;

  std::uint64_t size() const { return std::uint64_t{last} - first + 1; }
  friend bool operator==(const RangePartition&, const RangePartition&) = default;
};

enum class PartitionMode {
  /// Equal address counts; the first (size % n) partitions get one extra.
  EvenAddresses,
  /// Split on /8 boundaries; the range must start and end on whole /8s.
  FirstOctet,
};

/// Throws ValidationError when n < 1 or n exceeds the number of units.
std::vector<RangePartition> partition_ranges(AddressRange range, int n,
                                             PartitionMode mode = PartitionMode::EvenAddresses);

/// Split 0.0.0.0-255.255.255.255 at explicit first-octet end points, e.g.
/// {51, 103, 154, 205, 255}. The last end point must be 255.
std::vector<RangePartition> partition_by_octet_ends(const std::vector<int>& ends);

/// One "ip" or "ip,port" per line; '#' comments and blank lines skipped.
/// Output keeps first-seen order, drops duplicates and exclusions.
std::vector<probe::ProbeTarget> ingest_targets(const std::string& path, const ScanConfig& config,
                                               std::uint16_t default_port = probe::kDohPort);
std::vector<probe::ProbeTarget> ingest_targets(std::istream& in, const ScanConfig& config,
                                               std::uint16_t default_port = probe::kDohPort);

struct ScanResult {
  std::size_t index = 0;
  probe::ProbeTarget target;
  probe::VerificationMatrix matrix;
  bool excluded = false;
};

/// JSONL record: {"index", "ip", "port", "DoH-JSON" ... "DoH2-POST", "excluded", "details"}.
std::string to_json_line(const ScanResult& result);
/// Throws ParseError on malformed records.
ScanResult parse_json_line(std::string_view line);
std::vector<ScanResult> load_results(const std::string& path);

/// Receives results from many workers; implementations serialize writes.
class ResultSink {
 public:
  virtual ~ResultSink() = default;
  /// Throwing aborts the scan.
  virtual void write(const ScanResult& result) = 0;
};

class JsonlSink : public ResultSink {
 public:
  explicit JsonlSink(std::ostream& out) : out_(out) {}
  void write(const ScanResult& result) override;

 private:
  std::ostream& out_;
  std::mutex mutex_;
};

class CallbackSink : public ResultSink {
 public:
  explicit CallbackSink(std::function<void(const ScanResult&)> fn) : fn_(std::move(fn)) {}
  void write(const ScanResult& result) override;

 private:
  std::function<void(const ScanResult&)> fn_;
  std::mutex mutex_;
};

/// Index of the last target such that it and every earlier target finished.
struct Checkpoint {
  std::optional<std::size_t> completed_through;

  static Checkpoint load(const std::string& path);  ///< missing file -> empty checkpoint
  void save(const std::string& path) const;
};

struct ScanSummary {
  std::size_t targets = 0;
  std::size_t probed = 0;
  std::size_t skipped_excluded = 0;
  std::size_t skipped_resumed = 0;
  std::size_t with_any_method = 0;
};

using Verifier = std::function<probe::VerificationMatrix(const probe::ProbeTarget&, const ScanConfig&)>;

struct RunOptions {
  std::string checkpoint_path;
  /// Skip targets whose index is <= this value (resume).
  std::optional<std::size_t> resume_after;
  /// Replace the network prober (tests).
  Verifier verifier;
};

/// Throws ValidationError for invalid config or missing consent; sink
/// failures propagate after in-flight work stops.
ScanSummary run_scan(const std::vector<probe::ProbeTarget>& targets, const ScanConfig& config, ResultSink& sink,
                     const RunOptions& options = {});

/// True when the targets' IPv4 addresses span more than one /24 (IPv6: /48).
bool spans_multiple_networks(const std::vector<probe::ProbeTarget>& targets);

}  // namespace encdns::scan
