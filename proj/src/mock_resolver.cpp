#include "encdns/mock_resolver.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/x509v3.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "encdns/dns_codec.hpp"
#include "encdns/errors.hpp"
#include "hpack.hpp"
#include "text_util.hpp"
#include "tls_util.hpp"

namespace encdns::mock {

namespace {

using probe::Encoding;
using probe::HttpVersion;
using probe::VerificationMethod;

constexpr std::chrono::milliseconds kIoTimeout{10000};

struct Credentials {
  tls::PkeyPtr key;
  tls::X509Ptr cert;
  std::string pem;
};

std::shared_ptr<const Credentials> make_credentials(const std::string& address) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const Credentials>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(address); it != cache.end()) return it->second;

  auto creds = std::make_shared<Credentials>();
  creds->key.reset(EVP_EC_gen("P-256"));
  if (!creds->key) throw IoError("key generation failed: " + tls::last_error());
  creds->cert.reset(X509_new());
  X509* x = creds->cert.get();
  X509_set_version(x, 2);
  ASN1_INTEGER_set(X509_get_serialNumber(x), static_cast<long>(cache.size() + 1));
  X509_gmtime_adj(X509_getm_notBefore(x), -3600);
  X509_gmtime_adj(X509_getm_notAfter(x), 7L * 24 * 3600);
  X509_set_pubkey(x, creds->key.get());
  X509_NAME* name = X509_get_subject_name(x);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>("encdns mock resolver"),
                             -1, -1, 0);
  X509_set_issuer_name(x, name);
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, x, x, nullptr, nullptr, 0);
  std::string san = "IP:" + address + ",DNS:localhost";
  for (auto [nid, value] : {std::pair{NID_subject_alt_name, san.c_str()},
                            std::pair{NID_basic_constraints, "critical,CA:TRUE"},
                            std::pair{NID_key_usage, "critical,digitalSignature,keyCertSign"}}) {
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
    if (!ext) throw IoError("certificate extension failed: " + tls::last_error());
    X509_add_ext(x, ext, -1);
    X509_EXTENSION_free(ext);
  }
  if (X509_sign(x, creds->key.get(), EVP_sha256()) == 0) throw IoError("certificate signing failed");

  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_X509(bio, x);
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  creds->pem.assign(data, static_cast<std::size_t>(len));
  BIO_free(bio);
  cache.emplace(address, creds);
  return creds;
}

struct Request {
  std::string method;
  std::string target;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type;
  std::string body;
};

std::string_view status_text(int status) {
  switch (status) {
    case 200: return "OK";
    case 400: return "Bad Request";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 415: return "Unsupported Media Type";
    default: return "Error";
  }
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::map<std::string, std::string> parse_query(std::string_view q) {
  std::map<std::string, std::string> out;
  while (!q.empty()) {
    auto amp = q.find('&');
    auto pair = q.substr(0, amp);
    auto eq = pair.find('=');
    if (eq != std::string_view::npos)
      out[std::string(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
    else
      out[std::string(pair)] = "";
    if (amp == std::string_view::npos) break;
    q.remove_prefix(amp + 1);
  }
  return out;
}

// Blocking SSL I/O helpers.
bool ssl_read_exact(SSL* ssl, void* buf, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(buf);
  std::size_t got = 0;
  while (got < n) {
    int r = SSL_read(ssl, p + got, static_cast<int>(n - got));
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool ssl_write_all(SSL* ssl, const void* buf, std::size_t n) {
  auto* p = static_cast<const std::uint8_t*>(buf);
  std::size_t sent = 0;
  while (sent < n) {
    int r = SSL_write(ssl, p + sent, static_cast<int>(n - sent));
    if (r <= 0) return false;
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

// HTTP/2 framing, just enough for single request/response streams.
namespace h2 {
constexpr std::string_view kPreface = "PRI * HTTP/2.0\r\n\r\nSM\r\n\r\n";
enum FrameType : std::uint8_t { DATA = 0, HEADERS = 1, PRIORITY = 2, RST_STREAM = 3, SETTINGS = 4,
                                PUSH_PROMISE = 5, PING = 6, GOAWAY = 7, WINDOW_UPDATE = 8, CONTINUATION = 9 };
constexpr std::uint8_t END_STREAM = 0x1, ACK = 0x1, END_HEADERS = 0x4, PADDED = 0x8, PRIORITY_FLAG = 0x20;
constexpr std::size_t kMaxFrame = 16384;

bool write_frame(SSL* ssl, std::uint8_t type, std::uint8_t flags, std::uint32_t stream,
                 std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> f;
  f.reserve(9 + payload.size());
  f.push_back(static_cast<std::uint8_t>(payload.size() >> 16));
  f.push_back(static_cast<std::uint8_t>(payload.size() >> 8));
  f.push_back(static_cast<std::uint8_t>(payload.size()));
  f.push_back(type);
  f.push_back(flags);
  for (int shift = 24; shift >= 0; shift -= 8) f.push_back(static_cast<std::uint8_t>((stream >> shift) & 0xFF));
  f[5] &= 0x7F;
  f.insert(f.end(), payload.begin(), payload.end());
  return ssl_write_all(ssl, f.data(), f.size());
}
}  // namespace h2

}  // namespace

MockConfig MockConfig::all_methods() { return from_mask(0x3F); }

MockConfig MockConfig::from_mask(std::uint8_t mask) {
  MockConfig c;
  c.supported = std::bitset<6>(mask & 0x3F);
  return c;
}

struct MockResolver::Impl {
  MockConfig cfg;
  BoundEndpoint ep;
  std::shared_ptr<const Credentials> creds;
  tls::SslCtxPtr doh_ctx;
  tls::SslCtxPtr dot_ctx;
  tls::Socket doh_listener;
  tls::Socket dot_listener;
  std::atomic<bool> stopping{false};
  std::thread doh_thread;
  std::thread dot_thread;

  std::mutex conn_mutex;
  std::vector<std::thread> workers;
  std::set<int> open_fds;

  mutable std::mutex log_mutex;
  std::vector<ConnectionEvent> log;
  std::atomic<std::size_t> requests{0};

  bool advertise_h2() const {
    for (auto m : probe::kAllMethods)
      if (m.http_version == HttpVersion::Http2 && cfg.supports(m)) return true;
    return false;
  }

  static int alpn_select(SSL*, const unsigned char** out, unsigned char* outlen, const unsigned char* in,
                         unsigned int inlen, void* arg) {
    auto* self = static_cast<Impl*>(arg);
    static const unsigned char both[] = "\x02h2\x08http/1.1";
    static const unsigned char h1[] = "\x08http/1.1";
    const unsigned char* prefs = self->advertise_h2() ? both : h1;
    unsigned int prefs_len = self->advertise_h2() ? sizeof(both) - 1 : sizeof(h1) - 1;
    unsigned char* selected = nullptr;
    if (SSL_select_next_proto(&selected, outlen, prefs, prefs_len, in, inlen) != OPENSSL_NPN_NEGOTIATED)
      return SSL_TLSEXT_ERR_NOACK;
    *out = selected;
    return SSL_TLSEXT_ERR_OK;
  }

  tls::SslCtxPtr make_ctx(bool with_alpn) {
    tls::SslCtxPtr ctx(SSL_CTX_new(TLS_server_method()));
    if (!ctx) throw IoError("SSL_CTX_new failed: " + tls::last_error());
    SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);
    if (SSL_CTX_use_certificate(ctx.get(), creds->cert.get()) != 1 ||
        SSL_CTX_use_PrivateKey(ctx.get(), creds->key.get()) != 1)
      throw IoError("cannot install mock credentials: " + tls::last_error());
    if (with_alpn) SSL_CTX_set_alpn_select_cb(ctx.get(), &Impl::alpn_select, this);
    return ctx;
  }

  tls::Socket bind_listener(std::uint16_t& port) {
    auto ip = net::IpAddress::parse(cfg.bind_address);
    sockaddr_storage ss{};
    socklen_t len = 0;
    if (ip.is_v4()) {
      auto* sa = reinterpret_cast<sockaddr_in*>(&ss);
      sa->sin_family = AF_INET;
      std::memcpy(&sa->sin_addr, ip.bytes().data(), 4);
      len = sizeof(sockaddr_in);
    } else {
      auto* sa = reinterpret_cast<sockaddr_in6*>(&ss);
      sa->sin6_family = AF_INET6;
      std::memcpy(&sa->sin6_addr, ip.bytes().data(), 16);
      len = sizeof(sockaddr_in6);
    }
    tls::Socket s(::socket(ss.ss_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s) throw IoError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(s.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.get(), reinterpret_cast<sockaddr*>(&ss), len) != 0)
      throw IoError("bind " + cfg.bind_address + ": " + std::strerror(errno));
    if (::listen(s.get(), 256) != 0) throw IoError(std::string("listen: ") + std::strerror(errno));
    ::getsockname(s.get(), reinterpret_cast<sockaddr*>(&ss), &len);
    port = ntohs(ip.is_v4() ? reinterpret_cast<sockaddr_in*>(&ss)->sin_port
                            : reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
    return s;
  }

  void accept_loop(int listen_fd, Listener kind, std::uint16_t port) {
    while (!stopping.load()) {
      pollfd pfd{listen_fd, POLLIN, 0};
      int n = ::poll(&pfd, 1, 50);
      if (n <= 0) continue;
      sockaddr_storage peer{};
      socklen_t plen = sizeof peer;
      int fd = ::accept4(listen_fd, reinterpret_cast<sockaddr*>(&peer), &plen, SOCK_CLOEXEC);
      if (fd < 0) continue;
      char buf[INET6_ADDRSTRLEN] = {};
      if (peer.ss_family == AF_INET)
        inet_ntop(AF_INET, &reinterpret_cast<sockaddr_in*>(&peer)->sin_addr, buf, sizeof buf);
      else
        inet_ntop(AF_INET6, &reinterpret_cast<sockaddr_in6*>(&peer)->sin6_addr, buf, sizeof buf);
      {
        std::lock_guard lock(log_mutex);
        log.push_back({std::chrono::steady_clock::now(), kind, cfg.bind_address, port, buf});
      }
      std::lock_guard lock(conn_mutex);
      if (stopping.load()) {
        ::close(fd);
        break;
      }
      open_fds.insert(fd);
      workers.emplace_back([this, fd, kind] {
        tls::Socket sock(fd);
        tls::set_io_timeout(fd, kIoTimeout);
        if (kind == Listener::Doh)
          serve_doh(fd);
        else
          serve_dot(fd);
        std::lock_guard l(conn_mutex);
        open_fds.erase(fd);
      });
    }
  }

  // --- request handling -------------------------------------------------

  void stall() const {
    if (cfg.misbehavior == Misbehavior::Slow) std::this_thread::sleep_for(cfg.slow_delay);
  }

  std::string wire_answer(const dns::Bytes& query_wire) const {
    auto query = dns::decode_message(query_wire);
    if (cfg.misbehavior == Misbehavior::WrongId) query.id = static_cast<std::uint16_t>(query.id + 1);
    auto wire = dns::make_a_response(query, cfg.answer, cfg.ttl);
    return std::string(wire.begin(), wire.end());
  }

  std::string json_answer(const std::string& name) const {
    std::string qname = cfg.misbehavior == Misbehavior::WrongId ? "wrong-id.invalid" : name;
    char addr[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, cfg.answer.data(), addr, sizeof addr);
    nlohmann::ordered_json doc = {
        {"Status", 0}, {"TC", false}, {"RD", true}, {"RA", true}, {"AD", false}, {"CD", false},
        {"Question", {{{"name", qname}, {"type", 1}}}},
        {"Answer", {{{"name", qname}, {"type", 1}, {"TTL", cfg.ttl}, {"data", addr}}}},
    };
    return doc.dump();
  }

  Response handle(const Request& req, HttpVersion version) {
    ++requests;
    std::string_view target = req.target;
    auto qpos = target.find('?');
    std::string_view path = target.substr(0, qpos);
    auto params = parse_query(qpos == std::string_view::npos ? std::string_view{} : target.substr(qpos + 1));
    if (path != cfg.path) return {404, "text/plain", "not found"};

    Encoding enc;
    if (req.method == "GET" && params.count("dns"))
      enc = Encoding::WireGet;
    else if (req.method == "GET" && params.count("name"))
      enc = Encoding::Json;
    else if (req.method == "POST")
      enc = Encoding::WirePost;
    else
      return {400, "text/plain", "bad request"};
    if (!cfg.supports(VerificationMethod{enc, version})) return {404, "text/plain", "not found"};

    auto header = [&](const char* name) {
      auto it = req.headers.find(name);
      return it == req.headers.end() ? std::string{} : it->second;
    };
    if (enc == Encoding::WirePost && header("content-type") != "application/dns-message")
      return {415, "text/plain", "unsupported media type"};

    stall();
    const bool json = enc == Encoding::Json;
    const std::string ctype = json ? "application/dns-json" : "application/dns-message";
    switch (cfg.misbehavior) {
      case Misbehavior::HtmlBody:
        return {200, "text/html", "<!DOCTYPE html><html><body><h1>It works!</h1></body></html>"};
      case Misbehavior::Empty200:
        return {200, ctype, ""};
      default:
        break;
    }
    try {
      if (json) {
        if (cfg.misbehavior == Misbehavior::Echo) return {200, ctype, req.target};
        return {200, ctype, json_answer(params["name"])};
      }
      dns::Bytes query = enc == Encoding::WireGet
                             ? dns::from_base64url(params["dns"])
                             : dns::Bytes(req.body.begin(), req.body.end());
      if (cfg.misbehavior == Misbehavior::Echo) return {200, ctype, std::string(query.begin(), query.end())};
      return {200, ctype, wire_answer(query)};
    } catch (const Error& e) {
      return {400, "text/plain", e.what()};
    }
  }

  // --- HTTP/1.1 ---------------------------------------------------------

  void serve_http1(SSL* ssl) {
    std::string buf;
    char chunk[4096];
    std::size_t header_end;
    while ((header_end = buf.find("\r\n\r\n")) == std::string::npos) {
      if (buf.size() > 16384) return;
      int r = SSL_read(ssl, chunk, sizeof chunk);
      if (r <= 0) return;
      buf.append(chunk, static_cast<std::size_t>(r));
    }
    Request req;
    std::string_view head(buf.data(), header_end);
    auto line_end = head.find("\r\n");
    std::string_view request_line = head.substr(0, line_end);
    auto sp1 = request_line.find(' ');
    auto sp2 = request_line.rfind(' ');
    if (sp1 == std::string_view::npos || sp2 == sp1) return;
    req.method = std::string(request_line.substr(0, sp1));
    req.target = std::string(request_line.substr(sp1 + 1, sp2 - sp1 - 1));
    std::string_view rest = line_end == std::string_view::npos ? std::string_view{} : head.substr(line_end + 2);
    while (!rest.empty()) {
      auto e = rest.find("\r\n");
      std::string_view line = e == std::string_view::npos ? rest : rest.substr(0, e);
      if (auto colon = line.find(':'); colon != std::string_view::npos)
        req.headers[util::to_lower(util::trim(line.substr(0, colon)))] = std::string(util::trim(line.substr(colon + 1)));
      if (e == std::string_view::npos) break;
      rest.remove_prefix(e + 2);
    }
    std::size_t content_length = 0;
    if (auto it = req.headers.find("content-length"); it != req.headers.end()) {
      auto v = util::parse_int(it->second);
      if (!v || *v < 0 || *v > 65535) return;
      content_length = static_cast<std::size_t>(*v);
    }
    req.body = buf.substr(header_end + 4);
    while (req.body.size() < content_length) {
      int r = SSL_read(ssl, chunk, sizeof chunk);
      if (r <= 0) return;
      req.body.append(chunk, static_cast<std::size_t>(r));
    }
    req.body.resize(content_length);

    Response resp = handle(req, HttpVersion::Http1_1);
    std::string out = "HTTP/1.1 " + std::to_string(resp.status) + " " + std::string(status_text(resp.status)) +
                      "\r\nContent-Type: " + resp.content_type + "\r\nContent-Length: " +
                      std::to_string(resp.body.size()) + "\r\nConnection: close\r\n\r\n" + resp.body;
    ssl_write_all(ssl, out.data(), out.size());
  }

  // --- HTTP/2 -----------------------------------------------------------

  struct Stream {
    std::vector<std::uint8_t> header_block;
    hpack::HeaderList headers;
    std::string body;
    bool headers_done = false;
    bool end_stream = false;
  };

  bool respond_h2(SSL* ssl, std::uint32_t id, Stream& s) {
    Request req;
    for (auto& [name, value] : s.headers) {
      if (name == ":method")
        req.method = value;
      else if (name == ":path")
        req.target = value;
      else if (!name.empty() && name[0] != ':')
        req.headers[util::to_lower(name)] = value;
    }
    req.body = std::move(s.body);
    Response resp = handle(req, HttpVersion::Http2);
    auto block = hpack::encode_literal({{":status", std::to_string(resp.status)},
                                        {"content-type", resp.content_type},
                                        {"content-length", std::to_string(resp.body.size())}});
    if (!h2::write_frame(ssl, h2::HEADERS, h2::END_HEADERS | (resp.body.empty() ? h2::END_STREAM : 0), id, block))
      return false;
    std::span<const std::uint8_t> body(reinterpret_cast<const std::uint8_t*>(resp.body.data()), resp.body.size());
    while (!body.empty()) {
      auto n = std::min(body.size(), h2::kMaxFrame);
      if (!h2::write_frame(ssl, h2::DATA, n == body.size() ? h2::END_STREAM : 0, id, body.first(n))) return false;
      body = body.subspan(n);
    }
    return true;
  }

  void serve_http2(SSL* ssl) {
    char preface[24];
    if (!ssl_read_exact(ssl, preface, sizeof preface) || std::string_view(preface, 24) != h2::kPreface) return;
    const std::uint8_t settings[] = {0x00, 0x03, 0x00, 0x00, 0x00, 0x64};  // MAX_CONCURRENT_STREAMS=100
    if (!h2::write_frame(ssl, h2::SETTINGS, 0, 0, settings)) return;

    hpack::Decoder decoder;
    std::map<std::uint32_t, Stream> streams;
    std::uint32_t continuing = 0;
    std::vector<std::uint8_t> payload;
    while (!stopping.load()) {
      std::uint8_t hdr[9];
      if (!ssl_read_exact(ssl, hdr, 9)) return;
      std::size_t len = (std::size_t{hdr[0]} << 16) | (std::size_t{hdr[1]} << 8) | hdr[2];
      std::uint8_t type = hdr[3], flags = hdr[4];
      std::uint32_t sid = ((std::uint32_t{hdr[5]} & 0x7F) << 24) | (std::uint32_t{hdr[6]} << 16) |
                          (std::uint32_t{hdr[7]} << 8) | hdr[8];
      if (len > h2::kMaxFrame) return;
      payload.resize(len);
      if (len && !ssl_read_exact(ssl, payload.data(), len)) return;
      if (continuing && type != h2::CONTINUATION) return;

      std::span<const std::uint8_t> p(payload);
      auto strip_padding = [&]() -> bool {
        if (!(flags & h2::PADDED)) return true;
        if (p.empty()) return false;
        std::size_t pad = p[0];
        if (pad + 1 > p.size()) return false;
        p = p.subspan(1, p.size() - 1 - pad);
        return true;
      };

      switch (type) {
        case h2::SETTINGS:
          if (!(flags & h2::ACK) && !h2::write_frame(ssl, h2::SETTINGS, h2::ACK, 0, {})) return;
          break;
        case h2::PING:
          if (!(flags & h2::ACK) && !h2::write_frame(ssl, h2::PING, h2::ACK, 0, payload)) return;
          break;
        case h2::GOAWAY:
          return;
        case h2::RST_STREAM:
          streams.erase(sid);
          break;
        case h2::HEADERS: {
          if (!strip_padding()) return;
          if (flags & h2::PRIORITY_FLAG) {
            if (p.size() < 5) return;
            p = p.subspan(5);
          }
          auto& s = streams[sid];
          s.header_block.insert(s.header_block.end(), p.begin(), p.end());
          if (flags & h2::END_STREAM) s.end_stream = true;
          if (flags & h2::END_HEADERS) {
            try {
              s.headers = decoder.decode(s.header_block);
            } catch (const ParseError&) {
              return;
            }
            s.headers_done = true;
          } else {
            continuing = sid;
          }
          if (s.end_stream && s.headers_done) {
            if (!respond_h2(ssl, sid, s)) return;
            streams.erase(sid);
          }
          break;
        }
        case h2::CONTINUATION: {
          if (sid != continuing) return;
          auto& s = streams[sid];
          s.header_block.insert(s.header_block.end(), p.begin(), p.end());
          if (flags & h2::END_HEADERS) {
            continuing = 0;
            try {
              s.headers = decoder.decode(s.header_block);
            } catch (const ParseError&) {
              return;
            }
            s.headers_done = true;
            if (s.end_stream) {
              if (!respond_h2(ssl, sid, s)) return;
              streams.erase(sid);
            }
          }
          break;
        }
        case h2::DATA: {
          if (!strip_padding()) return;
          auto it = streams.find(sid);
          if (it == streams.end()) break;
          it->second.body.append(reinterpret_cast<const char*>(p.data()), p.size());
          if (len > 0) {
            const std::uint8_t inc[] = {static_cast<std::uint8_t>(len >> 24), static_cast<std::uint8_t>(len >> 16),
                                        static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len)};
            if (!h2::write_frame(ssl, h2::WINDOW_UPDATE, 0, 0, inc)) return;
          }
          if (flags & h2::END_STREAM) {
            if (!respond_h2(ssl, sid, it->second)) return;
            streams.erase(it);
          }
          break;
        }
        default:
          break;  // PRIORITY, WINDOW_UPDATE, unknown extension frames
      }
    }
  }

  void serve_doh(int fd) {
    tls::SslPtr ssl(SSL_new(doh_ctx.get()));
    SSL_set_fd(ssl.get(), fd);
    if (SSL_accept(ssl.get()) != 1) return;
    const unsigned char* alpn = nullptr;
    unsigned int alpn_len = 0;
    SSL_get0_alpn_selected(ssl.get(), &alpn, &alpn_len);
    if (alpn_len == 2 && std::memcmp(alpn, "h2", 2) == 0)
      serve_http2(ssl.get());
    else
      serve_http1(ssl.get());
    SSL_shutdown(ssl.get());
  }

  void serve_dot(int fd) {
    tls::SslPtr ssl(SSL_new(dot_ctx.get()));
    SSL_set_fd(ssl.get(), fd);
    if (SSL_accept(ssl.get()) != 1) return;
    while (!stopping.load()) {
      std::uint8_t prefix[2];
      if (!ssl_read_exact(ssl.get(), prefix, 2)) break;
      std::size_t len = (std::size_t{prefix[0]} << 8) | prefix[1];
      dns::Bytes query(len);
      if (len && !ssl_read_exact(ssl.get(), query.data(), len)) break;
      ++requests;
      stall();
      std::string reply;
      switch (cfg.misbehavior) {
        case Misbehavior::Echo: reply.assign(query.begin(), query.end()); break;
        case Misbehavior::Empty200: SSL_shutdown(ssl.get()); return;
        case Misbehavior::HtmlBody: reply = "<html></html>"; break;
        default:
          try {
            reply = wire_answer(query);
          } catch (const Error&) {
            return;
          }
      }
      std::string framed;
      framed.push_back(static_cast<char>(reply.size() >> 8));
      framed.push_back(static_cast<char>(reply.size() & 0xFF));
      framed += reply;
      if (!ssl_write_all(ssl.get(), framed.data(), framed.size())) break;
    }
    SSL_shutdown(ssl.get());
  }

  void stop() {
    if (stopping.exchange(true)) return;
    if (doh_thread.joinable()) doh_thread.join();
    if (dot_thread.joinable()) dot_thread.join();
    std::vector<std::thread> pending;
    {
      std::lock_guard lock(conn_mutex);
      for (int fd : open_fds) ::shutdown(fd, SHUT_RDWR);
      pending.swap(workers);
    }
    for (auto& t : pending) t.join();
    doh_listener.reset();
    dot_listener.reset();
    std::error_code ec;
    if (!ep.certificate_path.empty()) std::filesystem::remove(ep.certificate_path, ec);
  }
};

MockResolver::MockResolver(MockConfig config) : impl_(std::make_unique<Impl>()) {
  static std::once_flag sigpipe;
  std::call_once(sigpipe, [] { std::signal(SIGPIPE, SIG_IGN); });
  static std::atomic<int> counter{0};

  auto& im = *impl_;
  im.cfg = std::move(config);
  im.ep.address = im.cfg.bind_address;
  im.creds = make_credentials(im.cfg.bind_address);
  im.doh_ctx = im.make_ctx(true);
  im.dot_ctx = im.make_ctx(false);

  auto dir = std::filesystem::temp_directory_path();
  im.ep.certificate_path =
      (dir / ("encdns-mock-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".pem")).string();
  if (FILE* f = std::fopen(im.ep.certificate_path.c_str(), "w")) {
    std::fwrite(im.creds->pem.data(), 1, im.creds->pem.size(), f);
    std::fclose(f);
  } else {
    throw IoError("cannot write " + im.ep.certificate_path);
  }

  if (im.cfg.doh_enabled) {
    im.doh_listener = im.bind_listener(im.ep.doh_port);
    im.doh_thread = std::thread([&im] { im.accept_loop(im.doh_listener.get(), Listener::Doh, im.ep.doh_port); });
  }
  if (im.cfg.dot_enabled) {
    im.dot_listener = im.bind_listener(im.ep.dot_port);
    im.dot_thread = std::thread([&im] { im.accept_loop(im.dot_listener.get(), Listener::Dot, im.ep.dot_port); });
  }
}

MockResolver::~MockResolver() { stop(); }

void MockResolver::stop() { impl_->stop(); }

const BoundEndpoint& MockResolver::endpoint() const { return impl_->ep; }
const MockConfig& MockResolver::config() const { return impl_->cfg; }

std::vector<ConnectionEvent> MockResolver::connection_log() const {
  std::lock_guard lock(impl_->log_mutex);
  return impl_->log;
}

void MockResolver::clear_log() {
  std::lock_guard lock(impl_->log_mutex);
  impl_->log.clear();
}

std::size_t MockResolver::requests_served() const { return impl_->requests.load(); }

probe::ProbeTarget MockResolver::doh_target() const {
  probe::ProbeTarget t;
  t.ip = net::IpAddress::parse(impl_->ep.address);
  t.port = impl_->ep.doh_port;
  t.path = impl_->cfg.path;
  return t;
}

probe::ProbeTarget MockResolver::dot_target() const {
  probe::ProbeTarget t;
  t.ip = net::IpAddress::parse(impl_->ep.address);
  t.port = impl_->ep.dot_port;
  return t;
}

std::unique_ptr<MockResolver> start_mock(MockConfig config) {
  return std::make_unique<MockResolver>(std::move(config));
}

}  // namespace encdns::mock
