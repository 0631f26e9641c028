#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evacsim/engine.hpp"
#include "evacsim/errors.hpp"

namespace evacsim::gateway {

inline constexpr std::string_view kProtocolVersion = "evacsim/1";
/// Frames above this size are refused and the connection is closed.
inline constexpr std::uint32_t kMaxFrameBytes = 16u << 20;
inline constexpr double kDefaultSnapshotRate = 20.0;

/// Framing failure the stream cannot recover from.
class FrameError : public Error {
 public:
  using Error::Error;
};

/// 4-byte big-endian length followed by the UTF-8 JSON text.
std::string encode_frame(std::string_view payload);
std::string encode_frame(const nlohmann::json& message);

/// Incremental frame splitter for a byte stream.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  /// Next complete payload. Throws FrameError on an oversized length prefix.
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::string buffer_;
  std::size_t offset_ = 0;
};

/// Every message is an object with integer `seq` and string `type`.
nlohmann::json make_message(std::string_view type, std::int64_t seq, nlohmann::json payload = nlohmann::json::object());

/// Parsed inbound message; `error` is set when the frame is not a usable message.
struct Inbound {
  nlohmann::json message;
  std::string type;
  std::int64_t seq = 0;
  std::optional<std::string> error;
};
Inbound parse_message(std::string_view payload);

struct Overlays {
  std::vector<PathPolyline> guiding_lines;
  std::vector<SignPlacement> signs;
  std::vector<Point2> floor_plan_posts;
};
Overlays overlays_for(const RunConfig& config, const Scenario& scenario);

/// One engine tick's visible state.
struct Snapshot {
  double t = 0.0;
  Pose avatar;
  double speed = 0.0;
  bool exit_sign_visible = false;
  std::vector<AgentPose> agents;
  Overlays overlays;
  RunState run_state = RunState::Active;
  std::string exit_id;
};

Snapshot snapshot_of(const Session& session);
Snapshot snapshot_of(const Sample& sample, const Overlays& overlays, RunState state, std::string exit_id = {});
nlohmann::json snapshot_payload(const Snapshot& snapshot);
/// Throws ParseError naming the field.
Snapshot snapshot_from_payload(const nlohmann::json& payload);

/// `input` payload: {"forward": m/s, "turn": rad/s}. Values are clamped to
/// the avatar limits. Throws ParseError on missing or non-numeric fields.
VelocityInput input_from_payload(const nlohmann::json& payload);

/// `start_run` payload: condition and start_index required; seed,
/// participant_id, run_index, timeout, agent_count optional.
RunConfig run_config_from_start(const nlohmann::json& payload, const Scenario& scenario);

nlohmann::json run_complete_payload(const RunRecord& record, const nlohmann::json& measures);

std::string_view to_string(RunState state);

}  // namespace evacsim::gateway
