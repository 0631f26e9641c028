#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "evacsim/gateway/protocol.hpp"

namespace evacsim::gateway {

/// Fixed keyboard command magnitudes.
inline constexpr double kKeyForwardSpeed = 1.4;
inline constexpr double kKeyTurnRate = 1.5;
/// The floor-plan inset opens only this close to a post.
inline constexpr double kFloorPlanInsetRange = 1.5;

/// Held arrow or WASD keys.
struct HeldKeys {
  bool up = false;
  bool down = false;
  bool left = false;
  bool right = false;
};

/// The `input` a client sends for the held keys. Opposite keys cancel;
/// left turns counter-clockwise (positive).
VelocityInput command_for(const HeldKeys& keys);

/// True while the avatar is within kFloorPlanInsetRange of any post.
bool floor_plan_inset_visible(Point2 avatar, const std::vector<Point2>& posts);

/// What a display client knows, built only from server messages. Holds no
/// physics; it is the contract a browser client renders from.
class ClientView {
 public:
  /// Applies one server message. Returns false for types the view ignores.
  bool apply(const nlohmann::json& message);

  bool has_scenario() const { return scenario_.has_value(); }
  const Scenario& scenario() const { return *scenario_; }
  const std::optional<Snapshot>& latest() const { return latest_; }
  std::size_t agent_dots() const { return latest_ ? latest_->agents.size() : 0; }
  std::size_t guiding_line_vertices() const;
  bool inset_visible() const;

  /// HUD fields.
  double elapsed() const { return latest_ ? latest_->t : 0.0; }
  std::string run_state_label() const;
  /// Travel time from run_complete, when the run exited.
  std::optional<double> travel_time() const { return travel_time_; }
  const std::optional<nlohmann::json>& final_measures() const { return final_measures_; }
  const std::optional<std::string>& last_error() const { return last_error_; }

  /// Client-side trajectory length over received snapshots.
  double trail_length() const { return trail_length_; }

 private:
  std::optional<Scenario> scenario_;
  std::optional<Snapshot> latest_;
  std::optional<double> travel_time_;
  std::optional<nlohmann::json> final_measures_;
  std::optional<std::string> last_error_;
  double trail_length_ = 0.0;
};

}  // namespace evacsim::gateway
