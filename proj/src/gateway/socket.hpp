#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "evacsim/gateway/protocol.hpp"

namespace evacsim::gateway::detail {

/// Owned file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void reset();
  /// Wakes up anyone blocked on the descriptor without closing it.
  void shutdown() const;

 private:
  int fd_ = -1;
};

/// Listening socket on `address`; port 0 picks a free one.
Fd listen_tcp(const std::string& address, std::uint16_t port);
std::uint16_t local_port(const Fd& fd);
/// Accepted connection, or an invalid Fd after `timeout` or on shutdown.
Fd accept_tcp(const Fd& listener, std::chrono::milliseconds timeout);
Fd connect_tcp(const std::string& host, std::uint16_t port);

/// Writes everything; false when the peer is gone.
bool send_all(const Fd& fd, std::string_view bytes);

enum class ReadStatus { Data, Timeout, Closed };
/// Waits up to `timeout` for bytes and appends them to the decoder.
ReadStatus read_some(const Fd& fd, FrameDecoder& decoder, std::chrono::milliseconds timeout);

}  // namespace evacsim::gateway::detail
