#include "socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>

#include <cerrno>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace edgesim::net {

namespace {

struct AddrInfoDeleter {
  void operator()(addrinfo* ai) const { freeaddrinfo(ai); }
};
using AddrInfo = std::unique_ptr<addrinfo, AddrInfoDeleter>;

AddrInfo resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  addrinfo* out = nullptr;
  const auto port = std::to_string(ep.port);
  if (int rc = getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &out); rc != 0) {
    throw std::runtime_error("cannot resolve " + ep.str() + ": " + gai_strerror(rc));
  }
  return AddrInfo(out);
}

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

}  // namespace

Fd listen_tcp(const Endpoint& ep) {
  auto ai = resolve(ep, true);
  std::string last_error = "no usable address";
  for (addrinfo* p = ai.get(); p; p = p->ai_next) {
    Fd fd(::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol));
    if (!fd) {
      last_error = errno_text("socket");
      continue;
    }
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd.get(), p->ai_addr, p->ai_addrlen) != 0) {
      last_error = errno_text("bind " + ep.str());
      continue;
    }
    if (::listen(fd.get(), 4) != 0) {
      last_error = errno_text("listen " + ep.str());
      continue;
    }
    return fd;
  }
  throw std::runtime_error(last_error);
}

Fd connect_tcp(const Endpoint& ep, std::chrono::milliseconds timeout) {
  auto ai = resolve(ep, false);
  std::string last_error = "no usable address";
  for (addrinfo* p = ai.get(); p; p = p->ai_next) {
    Fd fd(::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, p->ai_protocol));
    if (!fd) {
      last_error = errno_text("socket");
      continue;
    }
    if (::connect(fd.get(), p->ai_addr, p->ai_addrlen) != 0) {
      if (errno != EINPROGRESS) {
        last_error = errno_text("connect " + ep.str());
        continue;
      }
      pollfd pfd{fd.get(), POLLOUT, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc <= 0) {
        last_error = "connect " + ep.str() + ": timed out";
        continue;
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        last_error = "connect " + ep.str() + ": " + std::strerror(err);
        continue;
      }
    }
    const int flags = ::fcntl(fd.get(), F_GETFL);
    ::fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
    int one = 1;
    ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
  }
  throw std::runtime_error(last_error);
}

std::uint16_t local_port(int fd) {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return 0;
  if (addr.ss_family == AF_INET) return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return 0;
}

bool send_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace edgesim::net
