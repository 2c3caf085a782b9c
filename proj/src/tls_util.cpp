#include "tls_util.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>

#include <cerrno>
#include <cstring>

namespace encdns::tls {

std::string last_error() {
  std::string out;
  while (unsigned long e = ERR_get_error()) {
    char buf[256];
    ERR_error_string_n(e, buf, sizeof buf);
    if (!out.empty()) out += "; ";
    out += buf;
  }
  return out.empty() ? "unknown TLS error" : out;
}

ConnectStatus connect_with_timeout(const net::IpAddress& ip, std::uint16_t port,
                                   std::chrono::milliseconds timeout, Socket& out) {
  sockaddr_storage ss{};
  socklen_t len = 0;
  if (ip.is_v4()) {
    auto* sa = reinterpret_cast<sockaddr_in*>(&ss);
    sa->sin_family = AF_INET;
    sa->sin_port = htons(port);
    std::memcpy(&sa->sin_addr, ip.bytes().data(), 4);
    len = sizeof(sockaddr_in);
  } else {
    auto* sa = reinterpret_cast<sockaddr_in6*>(&ss);
    sa->sin6_family = AF_INET6;
    sa->sin6_port = htons(port);
    std::memcpy(&sa->sin6_addr, ip.bytes().data(), 16);
    len = sizeof(sockaddr_in6);
  }
  Socket s(::socket(ss.ss_family, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!s) return ConnectStatus::Error;
  int rc = ::connect(s.get(), reinterpret_cast<sockaddr*>(&ss), len);
  if (rc != 0 && errno != EINPROGRESS) return errno == ECONNREFUSED ? ConnectStatus::Refused : ConnectStatus::Error;
  if (rc != 0) {
    pollfd pfd{s.get(), POLLOUT, 0};
    int n = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (n == 0) return ConnectStatus::TimedOut;
    if (n < 0) return ConnectStatus::Error;
    int err = 0;
    socklen_t elen = sizeof err;
    ::getsockopt(s.get(), SOL_SOCKET, SO_ERROR, &err, &elen);
    if (err == ECONNREFUSED) return ConnectStatus::Refused;
    if (err == ETIMEDOUT || err == EHOSTUNREACH || err == ENETUNREACH) return ConnectStatus::TimedOut;
    if (err != 0) return ConnectStatus::Error;
  }
  int flags = ::fcntl(s.get(), F_GETFL);
  ::fcntl(s.get(), F_SETFL, flags & ~O_NONBLOCK);
  out = std::move(s);
  return ConnectStatus::Ok;
}

void set_io_timeout(int fd, std::chrono::milliseconds timeout) {
  auto ms = std::max<long long>(1, timeout.count());
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(ms / 1000);
  tv.tv_usec = static_cast<suseconds_t>((ms % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

}  // namespace encdns::tls
