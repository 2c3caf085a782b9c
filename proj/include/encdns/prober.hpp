#pragma once

// Per-endpoint DoH/DoT verification. A DoH method counts as working when
// TLS and the requested HTTP version are negotiated, the status is 200, and
// the body is a DNS answer for the query that was sent.

#include <array>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "encdns/net_address.hpp"

namespace encdns::probe {

using Millis = std::chrono::milliseconds;

inline constexpr std::uint16_t kDohPort = 443;
inline constexpr std::uint16_t kDotPort = 853;
inline constexpr std::uint16_t kDoqPort = 784;
inline constexpr std::uint16_t kDnsPort = 53;

enum class Encoding : std::uint8_t { Json, WireGet, WirePost };
enum class HttpVersion : std::uint8_t { Http1_1, Http2 };

struct VerificationMethod {
  Encoding encoding;
  HttpVersion http_version;

  /// Position in the matrix: DoH-JSON, DoH-GET, DoH-POST, DoH2-JSON, DoH2-GET, DoH2-POST.
  constexpr std::size_t index() const {
    return static_cast<std::size_t>(http_version) * 3 + static_cast<std::size_t>(encoding);
  }
  std::string_view label() const;

  friend constexpr bool operator==(VerificationMethod, VerificationMethod) = default;
};

inline constexpr std::array<VerificationMethod, 6> kAllMethods{{
    {Encoding::Json, HttpVersion::Http1_1},
    {Encoding::WireGet, HttpVersion::Http1_1},
    {Encoding::WirePost, HttpVersion::Http1_1},
    {Encoding::Json, HttpVersion::Http2},
    {Encoding::WireGet, HttpVersion::Http2},
    {Encoding::WirePost, HttpVersion::Http2},
}};

/// Field labels used in script-style output and in the scan JSONL records.
inline constexpr std::array<std::string_view, 6> kMethodLabels{
    "DoH-JSON", "DoH-GET", "DoH-POST", "DoH2-JSON", "DoH2-GET", "DoH2-POST"};

enum class FailureReason : std::uint8_t {
  None,
  ConnectionFailed,
  Timeout,
  TlsFailure,
  ProtocolUnavailable,
  HttpStatus,
  UnparseableBody,
  NotAResponse,
  IdMismatch,
  ShortRead,
  Excluded,
  TransportError,
};

std::string_view describe(FailureReason reason);

struct ProbeTarget {
  net::IpAddress ip;
  std::uint16_t port = kDohPort;
  std::optional<std::string> sni;
  std::string path = "/dns-query";
  std::string probe_name = "www.example.com";

  /// Throws ValidationError (port 0, path without leading '/', bad probe name).
  void validate() const;
  /// host:port form for logs.
  std::string endpoint() const;

  friend bool operator==(const ProbeTarget&, const ProbeTarget&) = default;
};

struct MethodDetail {
  bool success = false;
  int http_status = 0;
  double latency_ms = 0.0;
  FailureReason reason = FailureReason::None;
  std::string message;
  /// Connections opened for this method, retries included.
  int attempts = 0;
  /// Chain verification outcome as reported by the TLS stack, when known.
  std::optional<bool> certificate_valid;
  /// A/AAAA addresses in the answer, presentation form.
  std::vector<std::string> answers;
};

struct VerificationMatrix {
  std::array<MethodDetail, 6> methods{};

  const MethodDetail& at(VerificationMethod m) const { return methods[m.index()]; }
  MethodDetail& at(VerificationMethod m) { return methods[m.index()]; }

  bool doh_json() const { return methods[0].success; }
  bool doh_get() const { return methods[1].success; }
  bool doh_post() const { return methods[2].success; }
  bool doh2_json() const { return methods[3].success; }
  bool doh2_get() const { return methods[4].success; }
  bool doh2_post() const { return methods[5].success; }

  /// Bit i set iff method i succeeded.
  std::uint8_t mask() const;
  static VerificationMatrix from_mask(std::uint8_t mask);
  bool any() const { return mask() != 0; }
  int connection_attempts() const;
};

struct DotResult {
  bool tls_established = false;
  bool answered = false;
  double latency_ms = 0.0;
  FailureReason reason = FailureReason::None;
  std::string message;
  std::optional<bool> certificate_valid;
  std::vector<std::string> answers;
};

/// Spaces connection attempts at least 1/rate apart. Shared between workers.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);

  /// Block until the caller may open one connection.
  void acquire();
  double rate() const { return rate_; }

 private:
  double rate_;
  std::chrono::nanoseconds interval_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

struct ProbeOptions {
  /// Enforce certificate chain and host/IP validation.
  bool strict_tls = false;
  /// Extra trust anchor (PEM) for strict mode.
  std::string ca_file;
  RateLimiter* limiter = nullptr;
};

/// One connection, one request. Failures are reported in the result.
MethodDetail probe_method(const ProbeTarget& target, VerificationMethod method, Millis timeout,
                          const ProbeOptions& options = {});

/// All six methods; each failure is retried `retries` more times.
VerificationMatrix verify_endpoint(const ProbeTarget& target, Millis timeout, int retries = 1,
                                   const ProbeOptions& options = {});

/// As above, probing in the given order (a permutation of kAllMethods).
VerificationMatrix verify_endpoint(const ProbeTarget& target, Millis timeout, int retries,
                                   const ProbeOptions& options, std::span<const VerificationMethod> order);

/// DNS over TLS: 2-byte length-prefixed wireformat over a TLS session.
DotResult probe_dot(const ProbeTarget& target, Millis timeout, const ProbeOptions& options = {});

}  // namespace encdns::probe
