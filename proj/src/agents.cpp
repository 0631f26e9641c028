#include "evacsim/agents.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace evacsim {

namespace {

constexpr std::array<std::pair<PolicyKind, std::string_view>, 5> kPolicyNames{{
    {PolicyKind::GuidingLine, "GuidingLine"},
    {PolicyKind::ExitSigns, "ExitSigns"},
    {PolicyKind::FloorPlanMemory, "FloorPlanMemory"},
    {PolicyKind::FollowOthers, "FollowOthers"},
    {PolicyKind::ScriptedGoal, "ScriptedGoal"},
}};

// Forces below exp(-10) of the contact value are not worth the work.
constexpr double kForceCutoff = 10.0 * kRepulsionRange;

Vec2 repulsion(Vec2 away, double dist, double reach) {
  if (dist <= 1e-12) return {};
  return away * (kRepulsionStrength * std::exp((reach - dist) / kRepulsionRange) / dist);
}

}  // namespace

// A few sweeps settle corners.
void keep_out_of_walls(AgentState& a, const Scenario& scenario) {
  for (int sweep = 0; sweep < 4; ++sweep) {
    bool moved = false;
    for (const Segment& w : scenario.walls) {
      const Point2 cp = closest_point(w, a.position);
      Vec2 d = a.position - cp;
      const double dist = d.norm();
      if (dist >= a.radius) continue;
      Vec2 n;
      if (dist > 1e-12) {
        n = d / dist;
      } else {
        // Centre on the wall line: leave on the side the body came from.
        n = normalized(perp(w.b - w.a));
        if (dot(n, a.velocity) > 0.0) n = -n;
      }
      a.position = cp + n * a.radius;
      const double vn = dot(a.velocity, n);
      if (vn < 0.0) a.velocity -= n * vn;
      moved = true;
    }
    if (!moved) break;
  }
}

std::string_view to_string(PolicyKind kind) {
  for (const auto& [k, name] : kPolicyNames)
    if (k == kind) return name;
  return "?";
}

PolicyKind policy_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kPolicyNames)
    if (n == name) return k;
  throw Error(fmt::format("unknown policy kind '{}'", name));
}

void validate_policy(const RouteChoicePolicy& policy) {
  const PolicyParams& p = policy.params;
  auto require = [](bool ok, const char* name, double value) {
    if (!ok) throw InvariantViolation("policy parameters within documented ranges", fmt::format("{} = {}", name, value));
  };
  require(p.floor_plan_error >= 0.0 && p.floor_plan_error <= 1.0, "floor_plan_error", p.floor_plan_error);
  require(p.max_corruptions >= 0, "max_corruptions", p.max_corruptions);
  require(p.exit_view_distance >= 0.0, "exit_view_distance", p.exit_view_distance);
  require(p.sign_view_half_angle > 0.0 && p.sign_view_half_angle <= std::numbers::pi, "sign_view_half_angle",
          p.sign_view_half_angle);
  require(p.sign_lane_half_width > 0.0, "sign_lane_half_width", p.sign_lane_half_width);
  require(p.follow_min_speed >= 0.0, "follow_min_speed", p.follow_min_speed);
  require(p.follow_reselect_period > 0.0, "follow_reselect_period", p.follow_reselect_period);
  require(p.wall_follow_probe > 0.0, "wall_follow_probe", p.wall_follow_probe);
}

void validate_agent(const AgentState& agent) {
  if (agent.radius < 0.15 || agent.radius > 0.35)
    throw InvariantViolation("radius in [0.15, 0.35] m", fmt::format("agent {} radius {}", agent.id, agent.radius));
  if (!(agent.desired_speed > 0.0 && agent.desired_speed <= 3.0))
    throw InvariantViolation("desired_speed in (0, 3] m/s",
                             fmt::format("agent {} desired_speed {}", agent.id, agent.desired_speed));
  if (agent.velocity.norm() > kSpeedCapFactor * agent.desired_speed + 1e-9)
    throw InvariantViolation("speed at most 1.3 x desired_speed",
                             fmt::format("agent {} speed {}", agent.id, agent.velocity.norm()));
  validate_policy(agent.policy);
}

AgentState social_force_step(const AgentState& agent, std::span<const AgentState> neighbors,
                             const Scenario& scenario, Vec2 e_desired, double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw Error(fmt::format("social_force_step: dt {} outside (0, 0.1]", dt));
  AgentState s = agent;
  const int substeps = std::max(1, static_cast<int>(std::ceil(dt / kPhysicsStep - 1e-9)));
  const double h = dt / substeps;
  const double decay = std::exp(-h / kRelaxationTime);
  const Vec2 v_desired = normalized(e_desired) * s.desired_speed;
  const double v_max = kSpeedCapFactor * s.desired_speed;

  for (int k = 0; k < substeps; ++k) {
    Vec2 force{};
    for (const AgentState& o : neighbors) {
      if (o.id == s.id || !o.active()) continue;
      const Vec2 d = s.position - o.position;
      const double dist = d.norm();
      const double reach = s.radius + o.radius;
      if (dist - reach > kForceCutoff) continue;
      force += repulsion(d, dist, reach);
    }
    for (const Segment& w : scenario.walls) {
      const Vec2 d = s.position - closest_point(w, s.position);
      const double dist = d.norm();
      if (dist - s.radius > kForceCutoff) continue;
      force += repulsion(d, dist, s.radius);
    }
    s.velocity = v_desired + (s.velocity - v_desired) * decay + force * h;
    const double speed = s.velocity.norm();
    if (speed > v_max) s.velocity *= v_max / speed;
    s.position += s.velocity * h;
    keep_out_of_walls(s, scenario);
  }
  if (s.velocity.norm() > 1e-6) s.heading = angle_of(s.velocity);
  return s;
}

void resolve_contacts(std::span<AgentState> agents, const Scenario& scenario, int iterations) {
  for (int it = 0; it < iterations; ++it) {
    bool any = false;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      for (std::size_t j = i + 1; j < agents.size(); ++j) {
        AgentState& a = agents[i];
        AgentState& b = agents[j];
        if (!a.active() || !b.active()) continue;
        if (a.is_human_avatar && b.is_human_avatar) continue;
        Vec2 d = a.position - b.position;
        const double dist = d.norm();
        const double overlap = a.radius + b.radius - dist;
        if (overlap <= 0.0) continue;
        const Vec2 n = dist > 1e-12 ? d / dist : Vec2{a.id < b.id ? -1.0 : 1.0, 0.0};
        const double wa = a.is_human_avatar ? 0.0 : (b.is_human_avatar ? 1.0 : 0.5);
        a.position += n * (overlap * wa);
        b.position -= n * (overlap * (1.0 - wa));
        if (wa > 0.0 && dot(a.velocity, n) < 0.0) a.velocity -= n * dot(a.velocity, n);
        if (wa < 1.0 && dot(b.velocity, n) > 0.0) b.velocity -= n * dot(b.velocity, n);
        if (!a.is_human_avatar) keep_out_of_walls(a, scenario);
        if (!b.is_human_avatar) keep_out_of_walls(b, scenario);
        any = true;
      }
    }
    if (!any) break;
  }
}

std::optional<std::size_t> crossed_exit(const Scenario& scenario, Point2 from, Point2 to) {
  if (from == to) return std::nullopt;
  for (std::size_t e = 0; e < scenario.exits.size(); ++e) {
    const Segment& portal = scenario.exits[e].portal;
    // A step ending on the portal (within rounding) counts once it leaves it.
    if (point_segment_distance(to, portal) <= 1e-12) continue;
    if (segment_segment_distance({from, to}, portal) <= 1e-12) return e;
  }
  return std::nullopt;
}

void step_agents(std::span<AgentState> agents, std::span<const Vec2> directions, const Scenario& scenario,
                 double dt, bool move_avatars) {
  if (directions.size() != agents.size()) throw Error("step_agents: one direction per agent required");
  const std::vector<AgentState> before(agents.begin(), agents.end());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!before[i].active()) continue;
    if (before[i].is_human_avatar && !move_avatars) continue;
    agents[i] = social_force_step(before[i], before, scenario, directions[i], dt);
  }
  resolve_contacts(agents, scenario);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!before[i].active()) continue;
    if (auto e = crossed_exit(scenario, before[i].position, agents[i].position)) agents[i].exited_via = *e;
  }
}

}  // namespace evacsim
