#include "evacsim/gateway/client_view.hpp"

#include <fmt/format.h>

namespace evacsim::gateway {

using nlohmann::json;

VelocityInput command_for(const HeldKeys& keys) {
  VelocityInput in;
  in.forward = (keys.up ? kKeyForwardSpeed : 0.0) - (keys.down ? kKeyForwardSpeed : 0.0);
  in.turn = (keys.left ? kKeyTurnRate : 0.0) - (keys.right ? kKeyTurnRate : 0.0);
  return input_from_payload(json{{"forward", in.forward}, {"turn", in.turn}});
}

bool floor_plan_inset_visible(Point2 avatar, const std::vector<Point2>& posts) {
  for (Point2 p : posts)
    if (distance(avatar, p) <= kFloorPlanInsetRange) return true;
  return false;
}

bool ClientView::apply(const json& message) {
  const std::string type = message.value("type", "");
  if (type == "scenario") {
    scenario_ = load_scenario(message.at("scenario").dump());
    return true;
  }
  if (type == "snapshot") {
    Snapshot next = snapshot_from_payload(message);
    if (latest_) trail_length_ += distance(latest_->avatar.position, next.avatar.position);
    else trail_length_ = 0.0;
    latest_ = std::move(next);
    return true;
  }
  if (type == "run_complete") {
    final_measures_ = message.at("measures");
    const json& t = final_measures_->at("travel_time");
    travel_time_ = t.is_null() ? std::nullopt : std::optional<double>(t.get<double>());
    return true;
  }
  if (type == "error") {
    last_error_ = message.value("reason", "unknown error");
    return true;
  }
  return false;
}

std::size_t ClientView::guiding_line_vertices() const {
  std::size_t n = 0;
  if (latest_)
    for (const PathPolyline& line : latest_->overlays.guiding_lines) n += line.vertices().size();
  return n;
}

bool ClientView::inset_visible() const {
  return latest_ && floor_plan_inset_visible(latest_->avatar.position, latest_->overlays.floor_plan_posts);
}

std::string ClientView::run_state_label() const {
  if (!latest_) return "waiting";
  switch (latest_->run_state) {
    case RunState::Active: return "Active";
    case RunState::Exited: return fmt::format("Exited ({})", latest_->exit_id);
    case RunState::TimedOut: return "Timed out";
  }
  return "Active";
}

}  // namespace evacsim::gateway
