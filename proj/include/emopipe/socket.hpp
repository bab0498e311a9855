#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "emopipe/wire.hpp"

namespace emopipe::wire {

/// Owns one connected TCP stream socket and moves whole frames over it.
class Connection {
 public:
  explicit Connection(int fd) noexcept : fd_(fd) {}
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;

  static Connection connect(const Endpoint& endpoint, RetryPolicy retry);

  // Returns false if the peer has gone away.
  bool send_frame(const Payload& payload);

  // Returns nullopt on orderly close or reset before a complete frame.
  std::optional<Payload> receive_frame();

  int fd() const noexcept { return fd_; }

 private:
  int fd_ = -1;
};

class Listener {
 public:
  explicit Listener(const Endpoint& endpoint);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const noexcept { return port_; }

  // Throws BindFailure if nobody connects before the timeout.
  Connection accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace emopipe::wire
