#include "evacsim/gateway/protocol.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace evacsim::gateway {

using nlohmann::json;

namespace {

json point_json(Point2 p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(fmt::format("field '{}' must be [x, y]", field), 0, field);
  return {j[0].get<double>(), j[1].get<double>()};
}

double number_field(const json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) throw ParseError(fmt::format("missing field '{}'", field), 0, field);
  const json& v = j.at(field);
  if (!v.is_number()) throw ParseError(fmt::format("field '{}' must be a number", field), 0, field);
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(fmt::format("field '{}' must be finite", field), 0, field);
  return d;
}

RunState state_from(std::string_view s) {
  if (s == "active") return RunState::Active;
  if (s == "exited") return RunState::Exited;
  if (s == "timed_out") return RunState::TimedOut;
  throw ParseError(fmt::format("unknown run_state '{}'", s), 0, "run_state");
}

}  // namespace

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw FrameError(fmt::format("frame of {} bytes too large", payload.size()));
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xFF));
  out.push_back(static_cast<char>((n >> 16) & 0xFF));
  out.push_back(static_cast<char>((n >> 8) & 0xFF));
  out.push_back(static_cast<char>(n & 0xFF));
  out.append(payload);
  return out;
}

std::string encode_frame(const json& message) { return encode_frame(std::string_view(message.dump())); }

void FrameDecoder::feed(std::string_view bytes) {
  if (offset_ > 0 && offset_ >= buffer_.size() / 2) {
    buffer_.erase(0, offset_);
    offset_ = 0;
  }
  buffer_.append(bytes);
}

std::optional<std::string> FrameDecoder::next() {
  if (buffered() < 4) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data() + offset_);
  const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
  if (n > kMaxFrameBytes) throw FrameError(fmt::format("frame length {} exceeds {}", n, kMaxFrameBytes));
  if (buffered() < 4 + std::size_t{n}) return std::nullopt;
  std::string payload = buffer_.substr(offset_ + 4, n);
  offset_ += 4 + std::size_t{n};
  return payload;
}

json make_message(std::string_view type, std::int64_t seq, json payload) {
  if (!payload.is_object()) payload = json::object();
  payload["type"] = type;
  payload["seq"] = seq;
  return payload;
}

Inbound parse_message(std::string_view payload) {
  Inbound in;
  try {
    in.message = json::parse(payload);
  } catch (const json::parse_error& e) {
    in.error = fmt::format("malformed JSON: {}", e.what());
    return in;
  }
  if (!in.message.is_object()) {
    in.error = "message must be a JSON object";
    return in;
  }
  const auto type = in.message.find("type");
  if (type == in.message.end() || !type->is_string()) {
    in.error = "message needs a string 'type'";
    return in;
  }
  in.type = type->get<std::string>();
  const auto seq = in.message.find("seq");
  if (seq == in.message.end() || !seq->is_number_integer()) {
    in.error = "message needs an integer 'seq'";
    return in;
  }
  in.seq = seq->get<std::int64_t>();
  return in;
}

Overlays overlays_for(const RunConfig& config, const Scenario& scenario) {
  Overlays o;
  switch (config.condition) {
    case Condition::GuidingLines: {
      const auto near = nearest_exit(scenario, scenario.start_positions.at(static_cast<std::size_t>(config.start_position_index)));
      const auto it = scenario.guiding_lines.find(near.exit->id);
      if (it != scenario.guiding_lines.end()) o.guiding_lines.push_back(it->second);
      break;
    }
    case Condition::ExitSigns: o.signs = scenario.exit_signs; break;
    case Condition::FloorPlan: o.floor_plan_posts = scenario.floor_plan_posts; break;
    case Condition::SimulatedAgents:
    case Condition::None: break;
  }
  return o;
}

Snapshot snapshot_of(const Session& session) {
  Snapshot s;
  s.t = session.time();
  const AgentState& av = session.avatar();
  s.avatar = {av.position, wrap_angle(av.heading)};
  s.speed = av.velocity.norm();
  s.exit_sign_visible = session.exit_sign_visible();
  for (const AgentState& a : session.agents())
    if (a.active()) s.agents.push_back({a.id, {a.position, wrap_angle(a.heading)}});
  s.overlays.guiding_lines = session.guiding_lines();
  s.overlays.signs = session.signs();
  s.overlays.floor_plan_posts = session.floor_plan_posts();
  s.run_state = session.state();
  if (s.run_state == RunState::Exited) s.exit_id = session.record().outcome.exit_id;
  return s;
}

Snapshot snapshot_of(const Sample& sample, const Overlays& overlays, RunState state, std::string exit_id) {
  Snapshot s;
  s.t = sample.t;
  s.avatar = sample.avatar;
  s.speed = sample.speed;
  s.exit_sign_visible = sample.exit_sign_visible;
  s.agents = sample.agents;
  s.overlays = overlays;
  s.run_state = state;
  s.exit_id = std::move(exit_id);
  return s;
}

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::Active: return "active";
    case RunState::Exited: return "exited";
    case RunState::TimedOut: return "timed_out";
  }
  return "active";
}

json snapshot_payload(const Snapshot& s) {
  json agents = json::array();
  for (const AgentPose& a : s.agents)
    agents.push_back({{"id", a.id}, {"x", a.pose.position.x}, {"y", a.pose.position.y}, {"heading", a.pose.heading}});
  json lines = json::array();
  for (const PathPolyline& line : s.overlays.guiding_lines) {
    json pts = json::array();
    for (Point2 p : line.vertices()) pts.push_back(point_json(p));
    lines.push_back(std::move(pts));
  }
  json signs = json::array();
  for (const SignPlacement& sign : s.overlays.signs)
    signs.push_back({{"pos", point_json(sign.position)},
                     {"facing", point_json(sign.facing)},
                     {"arrow", point_json(sign.arrow_direction)},
                     {"range", sign.visibility_range}});
  json posts = json::array();
  for (Point2 p : s.overlays.floor_plan_posts) posts.push_back(point_json(p));
  json state{{"state", to_string(s.run_state)}};
  if (s.run_state == RunState::Exited) state["exit_id"] = s.exit_id;
  return json{{"t", s.t},
              {"avatar",
               {{"x", s.avatar.position.x},
                {"y", s.avatar.position.y},
                {"heading", s.avatar.heading},
                {"speed", s.speed},
                {"exit_sign_visible", s.exit_sign_visible}}},
              {"agents", std::move(agents)},
              {"overlays", {{"guiding_lines", std::move(lines)}, {"signs", std::move(signs)}, {"floor_plan_posts", std::move(posts)}}},
              {"run_state", std::move(state)}};
}

Snapshot snapshot_from_payload(const json& p) {
  Snapshot s;
  try {
    s.t = number_field(p, "t");
    const json& av = p.at("avatar");
    s.avatar.position = {number_field(av, "x"), number_field(av, "y")};
    s.avatar.heading = number_field(av, "heading");
    s.speed = number_field(av, "speed");
    s.exit_sign_visible = av.value("exit_sign_visible", false);
    for (const json& a : p.at("agents"))
      s.agents.push_back({a.at("id").get<int>(), {{number_field(a, "x"), number_field(a, "y")}, number_field(a, "heading")}});
    const json& o = p.at("overlays");
    for (const json& line : o.at("guiding_lines")) {
      std::vector<Point2> pts;
      for (const json& q : line) pts.push_back(point_from(q, "guiding_lines"));
      s.overlays.guiding_lines.emplace_back(std::move(pts));
    }
    for (const json& sign : o.at("signs"))
      s.overlays.signs.push_back({point_from(sign.at("pos"), "pos"), point_from(sign.at("facing"), "facing"),
                                  point_from(sign.at("arrow"), "arrow"), number_field(sign, "range")});
    for (const json& q : o.at("floor_plan_posts")) s.overlays.floor_plan_posts.push_back(point_from(q, "floor_plan_posts"));
    const json& st = p.at("run_state");
    s.run_state = state_from(st.at("state").get<std::string>());
    if (s.run_state == RunState::Exited) s.exit_id = st.at("exit_id").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("snapshot: {}", e.what()), 0, "snapshot");
  }
  return s;
}

VelocityInput input_from_payload(const json& payload) {
  VelocityInput in;
  in.forward = std::clamp(number_field(payload, "forward"), -kMaxAvatarSpeed, kMaxAvatarSpeed);
  in.turn = std::clamp(number_field(payload, "turn"), -kMaxAvatarTurnRate, kMaxAvatarTurnRate);
  return in;
}

RunConfig run_config_from_start(const json& p, const Scenario& scenario) {
  RunConfig c;
  c.scenario_id = scenario.id;
  try {
    if (!p.contains("condition") || !p.at("condition").is_string())
      throw ParseError("start_run needs a string 'condition'", 0, "condition");
    try {
      c.condition = condition_from_string(p.at("condition").get<std::string>());
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), 0, "condition");
    }
    if (!p.contains("start_index") || !p.at("start_index").is_number_integer())
      throw ParseError("start_run needs an integer 'start_index'", 0, "start_index");
    c.start_position_index = p.at("start_index").get<int>();
    if (p.contains("seed")) c.seed = p.at("seed").get<std::uint64_t>();
    if (p.contains("participant_id")) c.participant_id = p.at("participant_id").get<std::string>();
    if (p.contains("run_index")) c.run_index = p.at("run_index").get<int>();
    if (p.contains("timeout")) c.timeout = number_field(p, "timeout");
    if (p.contains("agent_count")) c.agent_count = p.at("agent_count").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("start_run: {}", e.what()), 0, "start_run");
  }
  validate_run_config(c, scenario);
  return c;
}

json run_complete_payload(const RunRecord& record, const json& measures) {
  return json{{"outcome", outcome_to_json(record.outcome)},
              {"distance_walked", record.distance_walked},
              {"samples", record.samples.size()},
              {"measures", measures}};
}

}  // namespace evacsim::gateway
