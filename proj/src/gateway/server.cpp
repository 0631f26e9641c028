#include "evacsim/gateway/server.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "evacsim/metrics.hpp"
#include "socket.hpp"

namespace evacsim::gateway {

using nlohmann::json;
using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

namespace {

constexpr auto kPollSlice = 50ms;
// Catch-up bound per loop pass when the tick schedule falls behind.
constexpr int kMaxTicksPerPass = 2000;

// Sends numbered messages on one connection.
class Outbox {
 public:
  explicit Outbox(const detail::Fd& fd) : fd_(fd) {}
  bool send(std::string_view type, json payload = json::object()) {
    return ok_ = ok_ && detail::send_all(fd_, encode_frame(make_message(type, ++seq_, std::move(payload))));
  }
  bool error(std::string reason, std::optional<std::int64_t> in_reply_to = std::nullopt) {
    json p{{"reason", std::move(reason)}};
    if (in_reply_to) p["in_reply_to"] = *in_reply_to;
    return send("error", std::move(p));
  }
  bool ok() const { return ok_; }

 private:
  const detail::Fd& fd_;
  std::int64_t seq_ = 0;
  bool ok_ = true;
};

// Handshake and sequencing shared by the live and replay services.
struct Greeter {
  bool greeted = false;
  std::optional<std::int64_t> last_seq;

  enum class Verdict { Handled, Close, Pass };

  // Checks sequencing and handles `hello`; `Pass` hands the message on.
  Verdict check(const Inbound& in, Outbox& out, const json& scenario_payload) {
    if (in.error) {
      out.error(*in.error);
      return Verdict::Handled;
    }
    if (last_seq && in.seq <= *last_seq) {
      out.error(fmt::format("seq {} does not increase (last {})", in.seq, *last_seq), in.seq);
      return Verdict::Handled;
    }
    last_seq = in.seq;
    if (in.type == "hello") {
      if (greeted) {
        out.error("already greeted", in.seq);
        return Verdict::Handled;
      }
      const json& m = in.message;
      const std::string version = m.contains("version") && m["version"].is_string() ? m["version"].get<std::string>() : "";
      if (version != kProtocolVersion) {
        out.error(fmt::format("protocol version mismatch: server speaks {}, client sent '{}'", kProtocolVersion, version),
                  in.seq);
        return Verdict::Close;
      }
      greeted = true;
      out.send("scenario", scenario_payload);
      return Verdict::Handled;
    }
    if (!greeted) {
      out.error(fmt::format("expected hello before '{}'", in.type), in.seq);
      return Verdict::Handled;
    }
    return Verdict::Pass;
  }
};

json scenario_payload_of(const Scenario* scenario) {
  json p{{"version", kProtocolVersion}};
  p["scenario"] = scenario ? json::parse(scenario_to_string(*scenario)) : json(nullptr);
  return p;
}

bool known_server_type(std::string_view t) {
  return t == "scenario" || t == "snapshot" || t == "run_complete" || t == "error";
}

// Shared accept loop: hands each connection to `serve` on its own thread.
template <typename Serve>
void accept_connections(detail::Fd& listener, std::atomic<bool>& stopping, std::mutex& mutex,
                        std::vector<std::thread>& workers, std::vector<std::shared_ptr<detail::Fd>>& connections,
                        Serve serve) {
  while (!stopping) {
    detail::Fd fd = detail::accept_tcp(listener, kPollSlice);
    if (!fd.valid()) continue;
    auto shared = std::make_shared<detail::Fd>(std::move(fd));
    std::lock_guard lock(mutex);
    if (stopping) break;
    connections.push_back(shared);
    workers.emplace_back([serve, shared] { serve(shared); });
  }
}

void stop_all(detail::Fd* listener, std::atomic<bool>& stopping, std::thread& acceptor, std::mutex& mutex,
              std::vector<std::thread>& workers, std::vector<std::shared_ptr<detail::Fd>>& connections) {
  stopping = true;
  if (acceptor.joinable()) acceptor.join();
  std::vector<std::thread> joining;
  {
    std::lock_guard lock(mutex);
    for (auto& c : connections) c->shutdown();
    joining.swap(workers);
  }
  for (auto& t : joining) t.join();
  std::lock_guard lock(mutex);
  connections.clear();
  if (listener) listener->reset();
}

}  // namespace

Server::Server(Scenario scenario, ServerOptions options)
    : scenario_(std::move(scenario)), navigator_(scenario_, kDefaultClearance), options_(std::move(options)) {
  if (!(options_.tick_rate > 0.0)) throw InvariantViolation("tick_rate > 0", fmt::format("got {}", options_.tick_rate));
  if (!(options_.snapshot_rate > 0.0))
    throw InvariantViolation("snapshot_rate > 0", fmt::format("got {}", options_.snapshot_rate));
}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
  listener_ = std::make_unique<detail::Fd>(detail::listen_tcp(options_.address, options_.port));
  port_ = detail::local_port(*listener_);
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void Server::stop() { stop_all(listener_.get(), stopping_, acceptor_, mutex_, workers_, connections_); }

void Server::accept_loop() {
  accept_connections(*listener_, stopping_, mutex_, workers_, connections_,
                     [this](std::shared_ptr<detail::Fd> fd) { serve_connection(std::move(fd)); });
}

void Server::serve_connection(std::shared_ptr<detail::Fd> fd_ptr) {
  const detail::Fd& fd = *fd_ptr;
  Outbox out(fd);
  Greeter greeter;
  FrameDecoder decoder;
  const json scenario_payload = scenario_payload_of(&scenario_);

  std::optional<Session> session;
  VelocityInput input;
  Clock::time_point next_tick;
  const auto tick_period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / options_.tick_rate));
  double next_snapshot = 0.0;

  auto send_snapshot = [&] { out.send("snapshot", snapshot_payload(snapshot_of(*session))); };

  auto handle = [&](const std::string& frame) -> bool {
    const Inbound in = parse_message(frame);
    switch (greeter.check(in, out, scenario_payload)) {
      case Greeter::Verdict::Handled: return true;
      case Greeter::Verdict::Close: return false;
      case Greeter::Verdict::Pass: break;
    }
    if (in.type == "start_run") {
      if (session && session->active()) {
        out.error("a run is already active", in.seq);
        return true;
      }
      try {
        const RunConfig config = run_config_from_start(in.message, scenario_);
        session.emplace(scenario_, navigator_, config);
      } catch (const Error& e) {
        session.reset();
        out.error(fmt::format("start_run rejected: {}", e.what()), in.seq);
        return true;
      }
      input = {};
      next_tick = Clock::now() + tick_period;
      next_snapshot = 1.0 / options_.snapshot_rate;
      send_snapshot();
    } else if (in.type == "input") {
      if (!session || !session->active()) {
        out.error("no active run", in.seq);
        return true;
      }
      try {
        input = input_from_payload(in.message);
      } catch (const Error& e) {
        out.error(fmt::format("input rejected: {}", e.what()), in.seq);
      }
    } else if (known_server_type(in.type)) {
      out.error(fmt::format("'{}' is sent by the server only", in.type), in.seq);
    } else {
      out.error(fmt::format("unknown message type '{}'", in.type), in.seq);
    }
    return true;
  };

  auto finish_run = [&] {
    send_snapshot();
    const RunRecord& record = session->record();
    json measures = measures_to_json(measure_run(record, scenario_, navigator_));
    json payload = run_complete_payload(record, measures);
    if (options_.record_dir) {
      try {
        const RecordFiles files = write_run_record(record, scenario_, navigator_, *options_.record_dir);
        payload["record"] = files.csv.string();
      } catch (const Error& e) {
        payload["record_error"] = e.what();
      }
    }
    out.send("run_complete", std::move(payload));
  };

  while (!stopping_ && out.ok()) {
    auto timeout = kPollSlice;
    if (session && session->active()) {
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_tick - Clock::now());
      timeout = std::clamp(wait, 0ms, kPollSlice);
    }
    const auto status = detail::read_some(fd, decoder, timeout);
    if (status == detail::ReadStatus::Closed) break;
    bool keep = true;
    try {
      while (keep) {
        const auto frame = decoder.next();
        if (!frame) break;
        keep = handle(*frame);
      }
    } catch (const FrameError& e) {
      out.error(e.what());
      keep = false;
    }
    if (!keep) break;

    for (int n = 0; n < kMaxTicksPerPass && session && session->active() && Clock::now() >= next_tick; ++n) {
      session->tick(kPhysicsStep, input);
      next_tick += tick_period;
      if (!session->active()) {
        finish_run();
        break;
      }
      if (session->time() >= next_snapshot - 1e-9) {
        send_snapshot();
        next_snapshot = (std::floor(session->time() * options_.snapshot_rate + 1e-9) + 1.0) / options_.snapshot_rate;
      }
    }
  }
  fd_ptr->shutdown();
}

ReplayServer::ReplayServer(RunRecord record, json measures, ReplayOptions options, std::optional<Scenario> scenario)
    : record_(std::move(record)), measures_(std::move(measures)), options_(std::move(options)), scenario_(std::move(scenario)) {
  if (!(options_.speed > 0.0)) throw InvariantViolation("speed > 0", fmt::format("got {}", options_.speed));
  if (record_.samples.empty()) throw InvariantViolation("record has samples", "empty record");
  if (scenario_) overlays_ = overlays_for(record_.config, *scenario_);
}

ReplayServer::~ReplayServer() { stop(); }

std::uint16_t ReplayServer::start() {
  listener_ = std::make_unique<detail::Fd>(detail::listen_tcp(options_.address, options_.port));
  port_ = detail::local_port(*listener_);
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void ReplayServer::stop() { stop_all(listener_.get(), stopping_, acceptor_, mutex_, workers_, connections_); }

void ReplayServer::accept_loop() {
  accept_connections(*listener_, stopping_, mutex_, workers_, connections_,
                     [this](std::shared_ptr<detail::Fd> fd) { serve_connection(std::move(fd)); });
}

void ReplayServer::serve_connection(std::shared_ptr<detail::Fd> fd_ptr) {
  const detail::Fd& fd = *fd_ptr;
  Outbox out(fd);
  Greeter greeter;
  FrameDecoder decoder;
  const json scenario_payload = scenario_payload_of(scenario_ ? &*scenario_ : nullptr);

  std::size_t next = 0;
  bool done = false;
  Clock::time_point t0;
  const double t_first = record_.samples.front().t;

  auto handle = [&](const std::string& frame) -> bool {
    const Inbound in = parse_message(frame);
    const bool was_greeted = greeter.greeted;
    switch (greeter.check(in, out, scenario_payload)) {
      case Greeter::Verdict::Handled:
        if (!was_greeted && greeter.greeted) t0 = Clock::now();
        return true;
      case Greeter::Verdict::Close: return false;
      case Greeter::Verdict::Pass: break;
    }
    if (in.type == "start_run" || in.type == "input")
      out.error(fmt::format("'{}' is not accepted during replay", in.type), in.seq);
    else if (known_server_type(in.type))
      out.error(fmt::format("'{}' is sent by the server only", in.type), in.seq);
    else
      out.error(fmt::format("unknown message type '{}'", in.type), in.seq);
    return true;
  };

  const RunState final_state = record_.outcome.exited() ? RunState::Exited : RunState::TimedOut;
  while (!stopping_ && out.ok()) {
    auto timeout = kPollSlice;
    if (greeter.greeted && !done) {
      const double due = (record_.samples[next].t - t_first) / options_.speed;
      const auto at = t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(due));
      timeout = std::clamp(std::chrono::duration_cast<std::chrono::milliseconds>(at - Clock::now()), 0ms, kPollSlice);
    }
    const auto status = detail::read_some(fd, decoder, timeout);
    if (status == detail::ReadStatus::Closed) break;
    bool keep = true;
    try {
      while (keep) {
        const auto frame = decoder.next();
        if (!frame) break;
        keep = handle(*frame);
      }
    } catch (const FrameError& e) {
      out.error(e.what());
      keep = false;
    }
    if (!keep) break;

    while (greeter.greeted && !done) {
      const double due = (record_.samples[next].t - t_first) / options_.speed;
      if (Clock::now() < t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(due))) break;
      const bool last = next + 1 == record_.samples.size();
      out.send("snapshot", snapshot_payload(snapshot_of(record_.samples[next], overlays_,
                                                        last ? final_state : RunState::Active,
                                                        last ? record_.outcome.exit_id : std::string())));
      if (last) {
        out.send("run_complete", run_complete_payload(record_, measures_));
        done = true;
      }
      ++next;
    }
  }
  fd_ptr->shutdown();
}

std::pair<RunRecord, json> load_replay(const std::filesystem::path& csv) {
  RunRecord record = read_run_record(csv);
  const RecordFiles files = record_files(csv);
  std::ifstream in(files.sidecar, std::ios::binary);
  json sidecar = json::parse(in, nullptr, false);
  if (sidecar.is_discarded() || !sidecar.contains("measures"))
    throw ParseError(fmt::format("corrupt record sidecar '{}': no measures", files.sidecar.string()), 0, "measures");
  return {std::move(record), sidecar.at("measures")};
}

Client::Client(const std::string& host, std::uint16_t port)
    : fd_(std::make_unique<detail::Fd>(detail::connect_tcp(host, port))) {}

Client::~Client() = default;
Client::Client(Client&&) noexcept = default;
Client& Client::operator=(Client&&) noexcept = default;

std::int64_t Client::send(std::string_view type, json payload) {
  const std::int64_t seq = ++seq_;
  send_raw(encode_frame(make_message(type, seq, std::move(payload))));
  return seq;
}

void Client::send_raw(std::string_view bytes) {
  if (!detail::send_all(*fd_, bytes)) throw Error("connection closed while sending");
}

std::optional<json> Client::receive(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    if (auto frame = decoder_.next()) return json::parse(*frame);
    if (closed_) throw Error("connection closed by server");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left < 0ms) return std::nullopt;
    if (detail::read_some(*fd_, decoder_, left) == detail::ReadStatus::Closed) closed_ = true;
  }
}

std::optional<json> Client::receive_until(std::string_view type, std::chrono::milliseconds timeout,
                                          std::vector<json>* others) {
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    auto msg = receive(std::max(left, 0ms));
    if (!msg) return std::nullopt;
    if ((*msg)["type"] == type) return msg;
    if (others) others->push_back(std::move(*msg));
  }
}

void Client::close() {
  if (fd_) fd_->reset();
  closed_ = true;
}

}  // namespace evacsim::gateway
