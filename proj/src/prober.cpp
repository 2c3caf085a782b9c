#include "encdns/prober.hpp"

#include <curl/curl.h>
#include <openssl/x509v3.h>

#include <algorithm>
#include <csignal>
#include <memory>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "encdns/dns_codec.hpp"
#include "encdns/errors.hpp"
#include "text_util.hpp"
#include "tls_util.hpp"

namespace encdns::probe {

namespace {

using Clock = std::chrono::steady_clock;
constexpr std::size_t kMaxBody = 64 * 1024;

void global_init() {
  static std::once_flag once;
  std::call_once(once, [] {
    std::signal(SIGPIPE, SIG_IGN);
    curl_global_init(CURL_GLOBAL_DEFAULT);
  });
}

std::uint16_t fresh_query_id() {
  thread_local std::mt19937 rng{std::random_device{}()};
  return static_cast<std::uint16_t>(std::uniform_int_distribution<int>(0, 0xFFFF)(rng));
}

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string normalize_name(std::string_view n) {
  std::string s = util::to_lower(n);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

/// Wireformat answer check shared by DoH and DoT.
FailureReason check_wire_answer(dns::ByteView body, std::uint16_t expected_id, std::string& message,
                                std::vector<std::string>& answers) {
  dns::DnsMessage m;
  try {
    m = dns::decode_message(body);
  } catch (const ParseError& e) {
    message = e.what();
    return FailureReason::UnparseableBody;
  }
  if (!m.qr) {
    message = "QR bit clear";
    return FailureReason::NotAResponse;
  }
  if (m.id != expected_id) {
    message = "expected id " + std::to_string(expected_id) + ", got " + std::to_string(m.id);
    return FailureReason::IdMismatch;
  }
  for (const auto& rr : m.answers)
    if (auto a = rr.address_text()) answers.push_back(*a);
  return FailureReason::None;
}

FailureReason check_json_answer(std::string_view body, std::string_view qname, std::string& message,
                                std::vector<std::string>& answers) {
  auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    message = "body is not a JSON object";
    return FailureReason::UnparseableBody;
  }
  if (!doc.contains("Status")) {
    message = "JSON object has no Status member";
    return FailureReason::UnparseableBody;
  }
  // JSON carries no message ID; an echoed question that names a different
  // domain is the equivalent cross-talk signal.
  if (auto q = doc.find("Question"); q != doc.end() && q->is_array() && !q->empty()) {
    const auto& first = (*q)[0];
    if (first.is_object() && first.contains("name") && first["name"].is_string() &&
        normalize_name(first["name"].get<std::string>()) != normalize_name(qname)) {
      message = "answer is for " + first["name"].get<std::string>();
      return FailureReason::IdMismatch;
    }
  }
  if (auto a = doc.find("Answer"); a != doc.end() && a->is_array()) {
    for (const auto& rr : *a) {
      if (!rr.is_object() || !rr.contains("type") || !rr.contains("data") || !rr["data"].is_string()) continue;
      if (rr["type"] == dns::rrtype::A || rr["type"] == dns::rrtype::AAAA) answers.push_back(rr["data"].get<std::string>());
    }
  }
  return FailureReason::None;
}

struct CurlFree {
  void operator()(CURL* h) const { curl_easy_cleanup(h); }
};
struct SlistFree {
  void operator()(curl_slist* l) const { curl_slist_free_all(l); }
};

std::size_t collect_body(char* data, std::size_t size, std::size_t n, void* user) {
  auto* body = static_cast<std::string*>(user);
  std::size_t bytes = size * n;
  if (body->size() + bytes > kMaxBody) return 0;
  body->append(data, bytes);
  return bytes;
}

std::string url_encode_component(std::string_view s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

FailureReason classify_curl_error(CURLcode rc, CURL* h) {
  switch (rc) {
    case CURLE_COULDNT_CONNECT:
    case CURLE_COULDNT_RESOLVE_HOST:
      return FailureReason::ConnectionFailed;
    case CURLE_OPERATION_TIMEDOUT: {
      curl_off_t connect_us = 0, tls_us = 0;
      curl_easy_getinfo(h, CURLINFO_CONNECT_TIME_T, &connect_us);
      curl_easy_getinfo(h, CURLINFO_APPCONNECT_TIME_T, &tls_us);
      if (connect_us == 0) return FailureReason::ConnectionFailed;
      if (tls_us == 0) return FailureReason::TlsFailure;
      return FailureReason::Timeout;
    }
    case CURLE_SSL_CONNECT_ERROR:
    case CURLE_PEER_FAILED_VERIFICATION:
    case CURLE_SSL_CERTPROBLEM:
    case CURLE_SSL_CIPHER:
    case CURLE_SSL_CACERT_BADFILE:
    case CURLE_SSL_ISSUER_ERROR:
    case CURLE_SSL_PINNEDPUBKEYNOTMATCH:
    case CURLE_SSL_INVALIDCERTSTATUS:
      return FailureReason::TlsFailure;
    case CURLE_HTTP2:
    case CURLE_HTTP2_STREAM:
    case CURLE_UNSUPPORTED_PROTOCOL:
      return FailureReason::ProtocolUnavailable;
    case CURLE_GOT_NOTHING:
    case CURLE_RECV_ERROR:
    case CURLE_SEND_ERROR:
    case CURLE_WEIRD_SERVER_REPLY:
    case CURLE_PARTIAL_FILE:
    case CURLE_WRITE_ERROR:
      return FailureReason::TransportError;
    default:
      return FailureReason::TransportError;
  }
}

}  // namespace

std::string_view VerificationMethod::label() const { return kMethodLabels[index()]; }

std::string_view describe(FailureReason reason) {
  switch (reason) {
    case FailureReason::None: return "ok";
    case FailureReason::ConnectionFailed: return "connection refused/timeout";
    case FailureReason::Timeout: return "response timeout";
    case FailureReason::TlsFailure: return "tls failure";
    case FailureReason::ProtocolUnavailable: return "protocol-version unavailable";
    case FailureReason::HttpStatus: return "non-200 status";
    case FailureReason::UnparseableBody: return "unparseable body";
    case FailureReason::NotAResponse: return "not a dns response";
    case FailureReason::IdMismatch: return "id mismatch";
    case FailureReason::ShortRead: return "short read on length prefix";
    case FailureReason::Excluded: return "excluded";
    case FailureReason::TransportError: return "transport error";
  }
  return "unknown";
}

void ProbeTarget::validate() const {
  if (port == 0) throw ValidationError("port must be in 1-65535");
  if (path.empty() || path.front() != '/') throw ValidationError("path must begin with '/'");
  dns::validate(dns::DnsQuestion{probe_name, dns::rrtype::A, dns::rrclass::IN});
}

std::string ProbeTarget::endpoint() const { return ip.url_host() + ":" + std::to_string(port); }

std::uint8_t VerificationMatrix::mask() const {
  std::uint8_t m = 0;
  for (std::size_t i = 0; i < methods.size(); ++i)
    if (methods[i].success) m |= static_cast<std::uint8_t>(1u << i);
  return m;
}

VerificationMatrix VerificationMatrix::from_mask(std::uint8_t mask) {
  VerificationMatrix v;
  for (std::size_t i = 0; i < v.methods.size(); ++i) v.methods[i].success = (mask >> i) & 1u;
  return v;
}

int VerificationMatrix::connection_attempts() const {
  int n = 0;
  for (const auto& m : methods) n += m.attempts;
  return n;
}

RateLimiter::RateLimiter(double per_second) : rate_(per_second) {
  if (!(per_second > 0)) throw ValidationError("rate limit must be > 0");
  interval_ = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / per_second));
}

void RateLimiter::acquire() {
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    auto now = Clock::now();
    if (next_ < now) next_ = now;
    slot = next_;
    next_ += interval_;
  }
  std::this_thread::sleep_until(slot);
}

MethodDetail probe_method(const ProbeTarget& target, VerificationMethod method, Millis timeout,
                          const ProbeOptions& options) {
  target.validate();
  if (timeout.count() <= 0) throw ValidationError("timeout must be > 0");
  global_init();

  MethodDetail out;
  out.attempts = 1;
  const std::uint16_t id = fresh_query_id();
  const auto wire = dns::encode_query({target.probe_name, dns::rrtype::A, dns::rrclass::IN}, id, true);

  std::string host = target.sni ? *target.sni : target.ip.url_host();
  std::string url = "https://" + host + ":" + std::to_string(target.port) + target.path;
  const bool json = method.encoding == Encoding::Json;
  if (json)
    url += "?name=" + url_encode_component(target.probe_name) + "&type=A";
  else if (method.encoding == Encoding::WireGet)
    url += "?dns=" + dns::to_base64url(wire);

  std::unique_ptr<CURL, CurlFree> h(curl_easy_init());
  if (!h) {
    out.reason = FailureReason::TransportError;
    out.message = "curl_easy_init failed";
    return out;
  }
  std::unique_ptr<curl_slist, SlistFree> headers;
  auto add_header = [&](const char* line) { headers.reset(curl_slist_append(headers.release(), line)); };
  add_header(json ? "Accept: application/dns-json" : "Accept: application/dns-message");
  if (method.encoding == Encoding::WirePost) add_header("Content-Type: application/dns-message");
  add_header("Expect:");

  std::unique_ptr<curl_slist, SlistFree> connect_to;
  if (target.sni) {
    std::string rule = *target.sni + ":" + std::to_string(target.port) + ":" + target.ip.url_host() + ":" +
                       std::to_string(target.port);
    connect_to.reset(curl_slist_append(nullptr, rule.c_str()));
    curl_easy_setopt(h.get(), CURLOPT_CONNECT_TO, connect_to.get());
  }

  std::string body;
  curl_easy_setopt(h.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(h.get(), CURLOPT_HTTPHEADER, headers.get());
  curl_easy_setopt(h.get(), CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(h.get(), CURLOPT_FORBID_REUSE, 1L);
  curl_easy_setopt(h.get(), CURLOPT_FRESH_CONNECT, 1L);
  curl_easy_setopt(h.get(), CURLOPT_CONNECTTIMEOUT_MS, static_cast<long>(timeout.count()));
  curl_easy_setopt(h.get(), CURLOPT_TIMEOUT_MS, static_cast<long>(timeout.count()));
  curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, collect_body);
  curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, &body);
  curl_easy_setopt(h.get(), CURLOPT_USERAGENT, "encdns-probe/0.3");
  curl_easy_setopt(h.get(), CURLOPT_HTTP_VERSION,
                   method.http_version == HttpVersion::Http2 ? long{CURL_HTTP_VERSION_2TLS}
                                                            : long{CURL_HTTP_VERSION_1_1});
  curl_easy_setopt(h.get(), CURLOPT_SSL_VERIFYPEER, options.strict_tls ? 1L : 0L);
  curl_easy_setopt(h.get(), CURLOPT_SSL_VERIFYHOST, options.strict_tls ? 2L : 0L);
  if (!options.ca_file.empty()) curl_easy_setopt(h.get(), CURLOPT_CAINFO, options.ca_file.c_str());
  if (method.encoding == Encoding::WirePost) {
    curl_easy_setopt(h.get(), CURLOPT_POST, 1L);
    curl_easy_setopt(h.get(), CURLOPT_POSTFIELDS, wire.data());
    curl_easy_setopt(h.get(), CURLOPT_POSTFIELDSIZE, static_cast<long>(wire.size()));
  }

  if (options.limiter) options.limiter->acquire();
  auto started = Clock::now();
  CURLcode rc = curl_easy_perform(h.get());
  out.latency_ms = elapsed_ms(started);

  curl_off_t tls_us = 0;
  curl_easy_getinfo(h.get(), CURLINFO_APPCONNECT_TIME_T, &tls_us);
  if (tls_us > 0) {
    long verify = -1;
    if (curl_easy_getinfo(h.get(), CURLINFO_SSL_VERIFYRESULT, &verify) == CURLE_OK && verify >= 0)
      out.certificate_valid = verify == 0;
  }

  if (rc != CURLE_OK) {
    out.reason = classify_curl_error(rc, h.get());
    out.message = curl_easy_strerror(rc);
    return out;
  }

  long version = 0;
  curl_easy_getinfo(h.get(), CURLINFO_HTTP_VERSION, &version);
  if (method.http_version == HttpVersion::Http2 && version != CURL_HTTP_VERSION_2_0) {
    out.reason = FailureReason::ProtocolUnavailable;
    out.message = "server did not negotiate HTTP/2";
    return out;
  }

  long status = 0;
  curl_easy_getinfo(h.get(), CURLINFO_RESPONSE_CODE, &status);
  out.http_status = static_cast<int>(status);
  if (status != 200) {
    out.reason = FailureReason::HttpStatus;
    out.message = "HTTP " + std::to_string(status);
    return out;
  }

  out.reason = json ? check_json_answer(body, target.probe_name, out.message, out.answers)
                    : check_wire_answer({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()},
                                        id, out.message, out.answers);
  out.success = out.reason == FailureReason::None;
  return out;
}

VerificationMatrix verify_endpoint(const ProbeTarget& target, Millis timeout, int retries,
                                   const ProbeOptions& options, std::span<const VerificationMethod> order) {
  if (retries < 0) throw ValidationError("retries must be >= 0");
  VerificationMatrix matrix;
  for (auto method : order) {
    int attempts = 0;
    MethodDetail detail;
    for (int attempt = 0; attempt <= retries; ++attempt) {
      detail = probe_method(target, method, timeout, options);
      attempts += detail.attempts;
      if (detail.success) break;
    }
    detail.attempts = attempts;
    matrix.at(method) = std::move(detail);
  }
  return matrix;
}

VerificationMatrix verify_endpoint(const ProbeTarget& target, Millis timeout, int retries,
                                   const ProbeOptions& options) {
  return verify_endpoint(target, timeout, retries, options, kAllMethods);
}

DotResult probe_dot(const ProbeTarget& target, Millis timeout, const ProbeOptions& options) {
  target.validate();
  if (timeout.count() <= 0) throw ValidationError("timeout must be > 0");
  global_init();

  DotResult out;
  const auto deadline = Clock::now() + timeout;
  auto remaining = [&] {
    return std::max(Millis(1), std::chrono::duration_cast<Millis>(deadline - Clock::now()));
  };
  const std::uint16_t id = fresh_query_id();
  const auto wire = dns::encode_query({target.probe_name, dns::rrtype::A, dns::rrclass::IN}, id, true);

  if (options.limiter) options.limiter->acquire();
  auto started = Clock::now();
  auto fail = [&](FailureReason r, std::string msg) {
    out.reason = r;
    out.message = std::move(msg);
    out.latency_ms = elapsed_ms(started);
    return out;
  };

  tls::Socket sock;
  switch (tls::connect_with_timeout(target.ip, target.port, timeout, sock)) {
    case tls::ConnectStatus::Ok: break;
    case tls::ConnectStatus::Refused: return fail(FailureReason::ConnectionFailed, "connection refused");
    case tls::ConnectStatus::TimedOut: return fail(FailureReason::ConnectionFailed, "connect timed out");
    case tls::ConnectStatus::Error: return fail(FailureReason::ConnectionFailed, "connect failed");
  }
  tls::set_io_timeout(sock.get(), remaining());

  tls::SslCtxPtr ctx(SSL_CTX_new(TLS_client_method()));
  if (!ctx) return fail(FailureReason::TlsFailure, tls::last_error());
  SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);
  if (options.strict_tls) {
    SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_PEER, nullptr);
    if (!options.ca_file.empty()) {
      if (SSL_CTX_load_verify_locations(ctx.get(), options.ca_file.c_str(), nullptr) != 1)
        return fail(FailureReason::TlsFailure, "cannot load CA file " + options.ca_file);
    } else {
      SSL_CTX_set_default_verify_paths(ctx.get());
    }
  } else {
    SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_NONE, nullptr);
    SSL_CTX_set_default_verify_paths(ctx.get());
  }
  tls::SslPtr ssl(SSL_new(ctx.get()));
  SSL_set_fd(ssl.get(), sock.get());
  if (target.sni) SSL_set_tlsext_host_name(ssl.get(), target.sni->c_str());
  if (options.strict_tls) {
    X509_VERIFY_PARAM* param = SSL_get0_param(ssl.get());
    if (target.sni)
      X509_VERIFY_PARAM_set1_host(param, target.sni->c_str(), 0);
    else
      X509_VERIFY_PARAM_set1_ip_asc(param, target.ip.to_string().c_str());
  }
  if (SSL_connect(ssl.get()) != 1) return fail(FailureReason::TlsFailure, tls::last_error());
  out.tls_established = true;
  out.certificate_valid = SSL_get_verify_result(ssl.get()) == X509_V_OK;

  dns::Bytes framed;
  framed.push_back(static_cast<std::uint8_t>(wire.size() >> 8));
  framed.push_back(static_cast<std::uint8_t>(wire.size()));
  framed.insert(framed.end(), wire.begin(), wire.end());
  if (SSL_write(ssl.get(), framed.data(), static_cast<int>(framed.size())) <= 0)
    return fail(FailureReason::TransportError, "write failed");

  auto read_exact = [&](std::uint8_t* buf, std::size_t n) -> std::size_t {
    std::size_t got = 0;
    while (got < n) {
      tls::set_io_timeout(sock.get(), remaining());
      int r = SSL_read(ssl.get(), buf + got, static_cast<int>(n - got));
      if (r <= 0) break;
      got += static_cast<std::size_t>(r);
      if (Clock::now() >= deadline && got < n) break;
    }
    return got;
  };
  std::uint8_t prefix[2];
  std::size_t got = read_exact(prefix, 2);
  if (got < 2) {
    if (Clock::now() >= deadline) return fail(FailureReason::Timeout, "no reply before timeout");
    return fail(FailureReason::ShortRead, "received " + std::to_string(got) + " of 2 length bytes");
  }
  std::size_t len = (std::size_t{prefix[0]} << 8) | prefix[1];
  dns::Bytes reply(len);
  if (read_exact(reply.data(), len) < len) return fail(FailureReason::ShortRead, "truncated DoT message");
  out.latency_ms = elapsed_ms(started);

  std::string message;
  out.reason = check_wire_answer(reply, id, message, out.answers);
  out.message = std::move(message);
  out.answered = out.reason == FailureReason::None;
  return out;
}

}  // namespace encdns::probe
