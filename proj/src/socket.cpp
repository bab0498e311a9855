#include "emopipe/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe::wire {
namespace {

sockaddr_in resolve(const Endpoint& endpoint, ErrorKind on_error) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(endpoint.port);
  const std::string host = endpoint.host == "localhost" ? "127.0.0.1" : endpoint.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
      throw Error(on_error, fmt::format("cannot resolve host '{}'", endpoint.host));
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return addr;
}

// Writes all bytes; false if the peer is gone.
bool write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

// Reads exactly `size` bytes; false on EOF or reset.
bool read_exact(int fd, std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::recv(fd, data, size, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

Connection::Connection(Connection&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

Connection Connection::connect(const Endpoint& endpoint, RetryPolicy retry) {
  const sockaddr_in addr = resolve(endpoint, ErrorKind::ConnectFailure);
  int last_errno = 0;
  for (int attempt = 0; attempt < retry.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(retry.interval);
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw Error(ErrorKind::ConnectFailure, std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Connection(fd);
    }
    last_errno = errno;
    ::close(fd);
  }
  throw Error(ErrorKind::ConnectFailure,
              fmt::format("{} unreachable after {} attempts: {}", endpoint.to_string(),
                          retry.attempts, std::strerror(last_errno)));
}

bool Connection::send_frame(const Payload& payload) {
  const auto bytes = encode_frame(payload);
  return write_all(fd_, bytes.data(), bytes.size());
}

std::optional<Payload> Connection::receive_frame() {
  std::uint8_t header[kHeaderSize];
  if (!read_exact(fd_, header, kHeaderSize)) return std::nullopt;
  const std::uint32_t length = (static_cast<std::uint32_t>(header[0]) << 24) |
                               (static_cast<std::uint32_t>(header[1]) << 16) |
                               (static_cast<std::uint32_t>(header[2]) << 8) |
                               static_cast<std::uint32_t>(header[3]);
  if (length == 0 || length > kMaxFrameLength) {
    throw Error(ErrorKind::LengthMismatch, fmt::format("frame length {} out of bounds", length));
  }
  std::vector<std::uint8_t> payload(length);
  if (!read_exact(fd_, payload.data(), payload.size())) return std::nullopt;
  return decode_payload(payload);
}

Listener::Listener(const Endpoint& endpoint) {
  const sockaddr_in addr = resolve(endpoint, ErrorKind::BindFailure);
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw Error(ErrorKind::BindFailure, std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 1) != 0) {
    const int err = errno;
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorKind::BindFailure,
                fmt::format("{}: {}", endpoint.to_string(), std::strerror(err)));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

Connection Listener::accept(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) {
      throw Error(ErrorKind::BindFailure,
                  fmt::format("no requester connected to port {} within {} ms", port_, timeout.count()));
    }
    break;
  }
  const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) throw Error(ErrorKind::BindFailure, std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return Connection(fd);
}

}  // namespace emopipe::wire
