#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "evacsim/engine.hpp"
#include "evacsim/gateway/protocol.hpp"
#include "evacsim/navigation.hpp"

namespace evacsim::gateway {

namespace detail {
class Fd;
}

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;  ///< 0 picks a free port
  /// Physics ticks (of 0.01 s simulated time) per wall-clock second.
  double tick_rate = 100.0;
  /// Snapshots per simulated second.
  double snapshot_rate = kDefaultSnapshotRate;
  /// Finished runs are written here when set.
  std::optional<std::filesystem::path> record_dir;
};

/// Live sessions over TCP. Each connection owns at most one session at a time,
/// ticked by the connection's own thread; the latest `input` holds until the
/// next one arrives.
class Server {
 public:
  Server(Scenario scenario, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting; returns the bound port.
  std::uint16_t start();
  /// Closes the listener and every connection, then joins all threads.
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(std::shared_ptr<detail::Fd> fd);

  Scenario scenario_;
  Navigator navigator_;
  ServerOptions options_;
  std::uint16_t port_ = 0;
  std::unique_ptr<detail::Fd> listener_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<std::shared_ptr<detail::Fd>> connections_;
};

struct ReplayOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;
  /// Playback speed multiplier.
  double speed = 1.0;
};

/// Streams one recorded run to every client that says hello: the samples as
/// snapshots at recorded timing (scaled by `speed`), then `run_complete` with
/// the stored measures.
class ReplayServer {
 public:
  ReplayServer(RunRecord record, nlohmann::json measures, ReplayOptions options,
               std::optional<Scenario> scenario = std::nullopt);
  ~ReplayServer();
  ReplayServer(const ReplayServer&) = delete;
  ReplayServer& operator=(const ReplayServer&) = delete;

  std::uint16_t start();
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(std::shared_ptr<detail::Fd> fd);

  RunRecord record_;
  nlohmann::json measures_;
  ReplayOptions options_;
  std::optional<Scenario> scenario_;
  Overlays overlays_;
  std::uint16_t port_ = 0;
  std::unique_ptr<detail::Fd> listener_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<std::shared_ptr<detail::Fd>> connections_;
};

/// Loads `<stem>.csv` with its sidecar for replay; returns record and stored measures.
std::pair<RunRecord, nlohmann::json> load_replay(const std::filesystem::path& csv);

/// Blocking protocol client; numbers its own messages.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port);
  ~Client();
  Client(Client&&) noexcept;
  Client& operator=(Client&&) noexcept;

  /// Sends {type, seq, ...payload}; returns the seq used.
  std::int64_t send(std::string_view type, nlohmann::json payload = nlohmann::json::object());
  /// Sends bytes as they are (tests use it for malformed frames).
  void send_raw(std::string_view bytes);
  /// Next message, or nullopt after `timeout`. Throws Error once the server
  /// has closed the connection and nothing is buffered.
  std::optional<nlohmann::json> receive(std::chrono::milliseconds timeout);
  /// Receives until a message of `type` arrives, collecting the others.
  std::optional<nlohmann::json> receive_until(std::string_view type, std::chrono::milliseconds timeout,
                                              std::vector<nlohmann::json>* others = nullptr);
  bool closed() const { return closed_; }
  void close();

 private:
  std::unique_ptr<detail::Fd> fd_;
  FrameDecoder decoder_;
  std::int64_t seq_ = 0;
  bool closed_ = false;
};

}  // namespace evacsim::gateway
