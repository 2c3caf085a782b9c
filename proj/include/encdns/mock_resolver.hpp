#pragma once

// Loopback DoH/DoT resolver for hermetic tests. Serves TLS with a freshly
// generated self-signed certificate, answers the configured subset of the six
// DoH methods, and records every accepted connection.

#include <array>
#include <bitset>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "encdns/prober.hpp"

namespace encdns::mock {

enum class Misbehavior : std::uint8_t {
  None,
  HtmlBody,  ///< 200 with an HTML page
  WrongId,   ///< answer carries a different DNS ID (JSON: different question name)
  Empty200,  ///< 200 with an empty body
  Slow,      ///< correct answer after `slow_delay`
  Echo,      ///< the query bytes are sent back unchanged
};

struct MockConfig {
  /// Bit i corresponds to probe::kAllMethods[i].
  std::bitset<6> supported;
  bool doh_enabled = true;
  bool dot_enabled = true;
  Misbehavior misbehavior = Misbehavior::None;
  std::chrono::milliseconds slow_delay{0};
  std::array<std::uint8_t, 4> answer{93, 184, 216, 34};
  std::uint32_t ttl = 300;
  std::string path = "/dns-query";
  /// Loopback address to bind; any 127.0.0.0/8 address or "::1".
  std::string bind_address = "127.0.0.1";

  static MockConfig all_methods();
  static MockConfig from_mask(std::uint8_t mask);
  bool supports(probe::VerificationMethod m) const { return supported.test(m.index()); }
  MockConfig& with(probe::VerificationMethod m) {
    supported.set(m.index());
    return *this;
  }
};

struct BoundEndpoint {
  std::string address;
  std::uint16_t doh_port = 0;
  std::uint16_t dot_port = 0;
  /// PEM certificate of the listener; trust anchor for strict-mode probes.
  std::string certificate_path;
};

enum class Listener : std::uint8_t { Doh, Dot };

struct ConnectionEvent {
  std::chrono::steady_clock::time_point at;
  Listener listener = Listener::Doh;
  std::string local_address;
  std::uint16_t local_port = 0;
  std::string peer;  ///< client address
};

class MockResolver {
 public:
  /// Binds and starts serving. Throws IoError when binding fails.
  explicit MockResolver(MockConfig config);
  ~MockResolver();
  MockResolver(const MockResolver&) = delete;
  MockResolver& operator=(const MockResolver&) = delete;

  const BoundEndpoint& endpoint() const;
  const MockConfig& config() const;
  std::vector<ConnectionEvent> connection_log() const;
  void clear_log();
  /// Requests that reached the HTTP or DoT handler.
  std::size_t requests_served() const;

  /// Target pointing at this resolver's DoH (or DoT) listener.
  probe::ProbeTarget doh_target() const;
  probe::ProbeTarget dot_target() const;

  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<MockResolver> start_mock(MockConfig config);

}  // namespace encdns::mock
