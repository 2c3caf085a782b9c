#include <doctest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "encdns/errors.hpp"
#include "encdns/mock_resolver.hpp"
#include "encdns/prober.hpp"

using namespace encdns;
using namespace std::chrono_literals;
using probe::Encoding;
using probe::FailureReason;
using probe::HttpVersion;

namespace {

constexpr probe::Millis kTimeout{3000};

/// Plain TCP listener that accepts, writes a fixed banner and closes.
class BannerServer {
 public:
  explicit BannerServer(std::string banner) : banner_(std::move(banner)) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
    REQUIRE(::listen(fd_, 16) == 0);
    socklen_t len = sizeof a;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    port_ = ntohs(a.sin_port);
    thread_ = std::thread([this] {
      while (!stop_) {
        int c = ::accept(fd_, nullptr, nullptr);
        if (c < 0) break;
        if (!banner_.empty()) [[maybe_unused]] auto n = ::write(c, banner_.data(), banner_.size());
        ::close(c);
      }
    });
  }
  ~BannerServer() {
    stop_ = true;
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    thread_.join();
  }
  std::uint16_t port() const { return port_; }

 private:
  std::string banner_;
  int fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

std::uint16_t closed_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
  socklen_t len = sizeof a;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
  ::close(fd);
  return ntohs(a.sin_port);
}

probe::ProbeTarget loopback(std::uint16_t port) {
  probe::ProbeTarget t;
  t.ip = net::IpAddress::parse("127.0.0.1");
  t.port = port;
  return t;
}

}  // namespace

TEST_CASE("method labels and matrix indexing follow the script output order") {
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(probe::kAllMethods[i].index() == i);
    CHECK(probe::kAllMethods[i].label() == probe::kMethodLabels[i]);
  }
  auto m = probe::VerificationMatrix::from_mask(0b010010);
  CHECK(m.doh_get());
  CHECK(m.doh2_get());
  CHECK_FALSE(m.doh_json());
  CHECK(m.mask() == 0b010010);
}

TEST_CASE("target validation") {
  auto t = loopback(443);
  CHECK_NOTHROW(t.validate());
  t.path = "dns-query";
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = loopback(0);
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = loopback(443);
  t.probe_name = "bad..name";
  CHECK_THROWS_AS(t.validate(), ValidationError);
  CHECK_THROWS_AS(probe::probe_method(loopback(443), probe::kAllMethods[0], probe::Millis{0}), ValidationError);
  CHECK_THROWS_AS(probe::verify_endpoint(loopback(443), kTimeout, -1), ValidationError);
}

TEST_CASE("every support subset is reported exactly") {
  for (unsigned mask = 0; mask < 64; ++mask) {
    mock::MockResolver m(mock::MockConfig::from_mask(static_cast<std::uint8_t>(mask)));
    auto matrix = probe::verify_endpoint(m.doh_target(), kTimeout, 1);
    CHECK_MESSAGE(matrix.mask() == mask, "mask " << mask);
    CHECK(matrix.connection_attempts() <= 12);
    CHECK(m.connection_log().size() == static_cast<std::size_t>(matrix.connection_attempts()));
    for (std::size_t i = 0; i < 6; ++i) {
      bool on = (mask >> i) & 1u;
      CHECK(matrix.methods[i].attempts == (on ? 1 : 2));
      if (!on) {
        bool h2 = i >= 3;
        bool any_h2 = (mask & 0b111000) != 0;
        CHECK(matrix.methods[i].reason ==
              (h2 && !any_h2 ? FailureReason::ProtocolUnavailable : FailureReason::HttpStatus));
      }
    }
  }
}

TEST_CASE("probe order does not change the outcome") {
  mock::MockResolver m(mock::MockConfig::from_mask(0b101001));
  auto forward = probe::verify_endpoint(m.doh_target(), kTimeout, 1);
  std::array<probe::VerificationMethod, 6> order = probe::kAllMethods;
  std::reverse(order.begin(), order.end());
  auto backward = probe::verify_endpoint(m.doh_target(), kTimeout, 1, {}, order);
  std::rotate(order.begin(), order.begin() + 2, order.end());
  auto rotated = probe::verify_endpoint(m.doh_target(), kTimeout, 1, {}, order);
  CHECK(forward.mask() == 0b101001);
  CHECK(backward.mask() == forward.mask());
  CHECK(rotated.mask() == forward.mask());
}

TEST_CASE("retries bound the connection count") {
  mock::MockResolver m(mock::MockConfig::from_mask(0));
  CHECK(probe::verify_endpoint(m.doh_target(), kTimeout, 0).connection_attempts() == 6);
  CHECK(probe::verify_endpoint(m.doh_target(), kTimeout, 1).connection_attempts() == 12);
  CHECK(probe::verify_endpoint(m.doh_target(), kTimeout, 2).connection_attempts() == 18);
  CHECK(m.connection_log().size() == 36);
}

TEST_CASE("misbehaving servers map to distinct failure reasons") {
  struct Case {
    mock::Misbehavior misbehavior;
    FailureReason json;
    FailureReason wire;
  };
  const Case cases[] = {
      {mock::Misbehavior::HtmlBody, FailureReason::UnparseableBody, FailureReason::UnparseableBody},
      {mock::Misbehavior::WrongId, FailureReason::IdMismatch, FailureReason::IdMismatch},
      {mock::Misbehavior::Empty200, FailureReason::UnparseableBody, FailureReason::UnparseableBody},
      {mock::Misbehavior::Echo, FailureReason::UnparseableBody, FailureReason::NotAResponse},
  };
  for (const auto& c : cases) {
    auto cfg = mock::MockConfig::all_methods();
    cfg.misbehavior = c.misbehavior;
    mock::MockResolver m(cfg);
    auto matrix = probe::verify_endpoint(m.doh_target(), kTimeout, 0);
    CHECK(matrix.mask() == 0);
    for (std::size_t i = 0; i < 6; ++i) {
      auto expected = probe::kAllMethods[i].encoding == Encoding::Json ? c.json : c.wire;
      CHECK_MESSAGE(matrix.methods[i].reason == expected,
                    "misbehavior " << int(c.misbehavior) << " method " << probe::kMethodLabels[i] << ": "
                                   << probe::describe(matrix.methods[i].reason));
      CHECK(matrix.methods[i].http_status == 200);
    }
  }
}

TEST_CASE("wrong id on every method is reported as id mismatch") {
  auto cfg = mock::MockConfig::all_methods();
  cfg.misbehavior = mock::Misbehavior::WrongId;
  mock::MockResolver m(cfg);
  auto matrix = probe::verify_endpoint(m.doh_target(), kTimeout, 1);
  for (const auto& d : matrix.methods) CHECK(probe::describe(d.reason) == "id mismatch");
  CHECK(probe::probe_dot(m.dot_target(), kTimeout).reason == FailureReason::IdMismatch);
}

TEST_CASE("slow server beyond the timeout is a response timeout") {
  auto cfg = mock::MockConfig::all_methods();
  cfg.misbehavior = mock::Misbehavior::Slow;
  cfg.slow_delay = 1500ms;
  mock::MockResolver m(cfg);
  auto slow = probe::probe_method(m.doh_target(), {Encoding::WireGet, HttpVersion::Http1_1}, probe::Millis{400});
  CHECK(slow.reason == FailureReason::Timeout);
  auto patient = probe::probe_method(m.doh_target(), {Encoding::WireGet, HttpVersion::Http2}, probe::Millis{5000});
  CHECK(patient.success);
  CHECK(patient.latency_ms >= 1400);
  auto dot = probe::probe_dot(m.dot_target(), probe::Millis{400});
  CHECK(dot.reason == FailureReason::Timeout);
}

TEST_CASE("closed port is a connection failure") {
  auto t = loopback(closed_port());
  auto d = probe::probe_method(t, probe::kAllMethods[1], kTimeout);
  CHECK(d.reason == FailureReason::ConnectionFailed);
  CHECK(probe::describe(d.reason) == "connection refused/timeout");
  CHECK(probe::probe_dot(t, kTimeout).reason == FailureReason::ConnectionFailed);
}

TEST_CASE("a non-TLS listener is a TLS failure") {
  BannerServer s("SSH-2.0-OpenSSH_8.9\r\n");
  auto t = loopback(s.port());
  CHECK(probe::probe_method(t, probe::kAllMethods[1], kTimeout).reason == FailureReason::TlsFailure);
  CHECK(probe::probe_method(t, probe::kAllMethods[4], kTimeout).reason == FailureReason::TlsFailure);
  CHECK(probe::probe_dot(t, kTimeout).reason == FailureReason::TlsFailure);
}

TEST_CASE("strict TLS needs the resolver's certificate as trust anchor") {
  mock::MockResolver m(mock::MockConfig::all_methods());
  probe::ProbeOptions strict;
  strict.strict_tls = true;
  auto untrusted = probe::probe_method(m.doh_target(), probe::kAllMethods[1], kTimeout, strict);
  CHECK(untrusted.reason == FailureReason::TlsFailure);
  strict.ca_file = m.endpoint().certificate_path;
  auto trusted = probe::probe_method(m.doh_target(), probe::kAllMethods[1], kTimeout, strict);
  CHECK(trusted.success);
  CHECK(trusted.certificate_valid == true);
  auto dot = probe::probe_dot(m.dot_target(), kTimeout, strict);
  CHECK(dot.answered);
  CHECK(dot.certificate_valid == true);

  auto lax = probe::probe_method(m.doh_target(), probe::kAllMethods[1], kTimeout);
  CHECK(lax.success);
  CHECK(lax.certificate_valid == false);
}

TEST_CASE("SNI is sent as the request host while connecting to the address") {
  mock::MockResolver m(mock::MockConfig::all_methods());
  auto t = m.doh_target();
  t.sni = "localhost";
  probe::ProbeOptions strict;
  strict.strict_tls = true;
  strict.ca_file = m.endpoint().certificate_path;
  CHECK(probe::verify_endpoint(t, kTimeout, 0, strict).mask() == 0x3F);
  t.sni = "resolver.invalid";
  auto mismatch = probe::probe_method(t, probe::kAllMethods[1], kTimeout, strict);
  CHECK(mismatch.reason == FailureReason::TlsFailure);
}

TEST_CASE("paths other than the configured one are not found") {
  mock::MockResolver m(mock::MockConfig::all_methods());
  auto t = m.doh_target();
  t.path = "/resolve";
  auto d = probe::probe_method(t, probe::kAllMethods[0], kTimeout);
  CHECK(d.http_status == 404);
}

TEST_CASE("DoT answers length-prefixed queries and reports absence") {
  mock::MockResolver m(mock::MockConfig::all_methods());
  auto ok = probe::probe_dot(m.dot_target(), kTimeout);
  CHECK(ok.tls_established);
  CHECK(ok.answered);
  CHECK(ok.answers == std::vector<std::string>{"93.184.216.34"});

  auto cfg = mock::MockConfig::all_methods();
  cfg.misbehavior = mock::Misbehavior::Empty200;
  mock::MockResolver closing(cfg);
  auto shortread = probe::probe_dot(closing.dot_target(), kTimeout);
  CHECK(shortread.tls_established);
  CHECK(shortread.reason == FailureReason::ShortRead);
}

TEST_CASE("rate limiter spaces acquisitions") {
  probe::RateLimiter limiter(50.0);
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 11; ++i) limiter.acquire();
  auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed >= 190ms);
  CHECK(elapsed < 600ms);
  CHECK_THROWS_AS(probe::RateLimiter(0), ValidationError);
}
