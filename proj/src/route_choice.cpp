#include <algorithm>
#include <cmath>
#include <limits>

#include "evacsim/agents.hpp"

namespace evacsim {

namespace {

constexpr double kLookahead = 0.8;
constexpr double kLostDistance = 1.5;
constexpr double kMinFreeAhead = 0.8;

std::size_t exit_at_line_end(const Scenario& sc, const PathPolyline& line) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < sc.exits.size(); ++e) {
    const double d = point_segment_distance(line.back(), sc.exits[e].portal);
    if (d < best_d) {
      best_d = d;
      best = e;
    }
  }
  return best;
}

Vec2 heading_vector(const AgentState& a) { return unit_from_angle(a.heading); }

void set_route_to_exit(AgentState& a, const PolicyContext& ctx, std::size_t exit) {
  const Scenario& sc = *ctx.scenario;
  a.memory.route = extend_through_exit(ctx.navigator->path_to_exit(a.position, exit), sc.exits[exit], sc.bounds);
  a.memory.progress = 0.0;
  a.memory.goal_exit = exit;
  a.memory.planned = true;
}

// Carrot on a stick along `route`, starting from the projection of the agent
// within a window around `progress`, so that routes which pass the same place
// twice are followed in order.
Vec2 chase_carrot(const Navigator& nav, const AgentState& a, const PathPolyline& route,
                  const PathPolyline::Projection& proj) {
  Point2 carrot = route.point_at(std::min(proj.s + kLookahead, route.length()));
  if (!nav.clear_segment(a.position, carrot)) {
    const auto& cum = route.cumulative_arclength();
    const auto it = std::upper_bound(cum.begin(), cum.end(), proj.s + 1e-9);
    const Point2 next = it == cum.end() ? route.back() : route.vertices()[static_cast<std::size_t>(it - cum.begin())];
    carrot = nav.clear_segment(a.position, next) ? next : proj.point + route.tangent_at(proj.s) * 0.3;
  }
  const Vec2 dir = normalized(carrot - a.position);
  return dir.squared_norm() > 0.0 ? dir : route.tangent_at(proj.s);
}

PathPolyline::Projection windowed_projection(const PathPolyline& route, Point2 p, double progress) {
  return route.project(p, std::max(0.0, progress - 0.5), std::min(route.length(), progress + 3.0));
}

Vec2 follow_route(AgentState& a, const PolicyContext& ctx) {
  const Navigator& nav = *ctx.navigator;
  PolicyMemory& m = a.memory;
  if (m.route.size() < 2) return normalized(m.route.empty() ? heading_vector(a) : m.route.back() - a.position);

  auto proj = windowed_projection(m.route, a.position, m.progress);
  if (proj.distance > kLostDistance) {
    const auto wide = m.route.project(a.position, std::max(0.0, m.progress - 0.5), m.route.length());
    if (wide.distance <= kLostDistance && nav.clear_segment(a.position, wide.point)) {
      proj = wide;
    } else if (m.goal_exit) {
      try {
        set_route_to_exit(a, ctx, *m.goal_exit);
        proj = m.route.project(a.position, 0.0, std::min(m.route.length(), 3.0));
      } catch (const UnreachableError&) {
        // Keep the stale route; forces will sort out the position.
      }
    }
  }
  m.progress = proj.s;
  return chase_carrot(nav, a, m.route, proj);
}

// A nearby exit in plain view wins over everything else during exploration.
std::optional<Vec2> exit_in_view(AgentState& a, const PolicyContext& ctx) {
  const Scenario& sc = *ctx.scenario;
  const double reach = a.policy.params.exit_view_distance;
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < sc.exits.size(); ++e) {
    const Point2 mid = sc.exits[e].midpoint();
    const double d = distance(a.position, mid);
    if (d > reach || d >= best_d) continue;
    if (!sc.bounds.contains(a.position) || !line_of_sight(sc, a.position, mid)) continue;
    best = e;
    best_d = d;
  }
  if (!best) return std::nullopt;
  if (!a.memory.goal_exit || *a.memory.goal_exit != *best || !a.memory.planned) {
    a.memory.route = extend_through_exit(PathPolyline::from_points_dedup(std::vector<Point2>{a.position}),
                                         sc.exits[*best], sc.bounds);
    a.memory.progress = 0.0;
    a.memory.goal_exit = best;
    a.memory.planned = true;
  }
  return follow_route(a, ctx);
}

Vec2 explore(AgentState& a, const PolicyContext& ctx) {
  if (auto d = exit_in_view(a, ctx)) return *d;
  return wall_following_direction(*ctx.navigator, a, ctx.time);
}

bool heading_free(const PolicyContext& ctx, const AgentState& a, Vec2 dir) {
  return free_distance(ctx.navigator->walls(), a.position, dir, kMinFreeAhead, 0.5 * a.radius) >= kMinFreeAhead;
}

Vec2 guiding_line_direction(AgentState& a, const PolicyContext& ctx) {
  if (!a.memory.planned) {
    if (ctx.guiding_lines.empty()) return explore(a, ctx);
    const PathPolyline* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const PathPolyline& line : ctx.guiding_lines) {
      const double d = line.project(a.position).distance;
      if (d < best_d) {
        best_d = d;
        best = &line;
      }
    }
    const Scenario& sc = *ctx.scenario;
    const std::size_t exit = exit_at_line_end(sc, *best);
    a.memory.route = extend_through_exit(splice_onto_line(*ctx.navigator, a.position, *best), sc.exits[exit], sc.bounds);
    a.memory.progress = 0.0;
    a.memory.goal_exit = exit;
    a.memory.planned = true;
  }
  return follow_route(a, ctx);
}

Vec2 exit_signs_direction(AgentState& a, const PolicyContext& ctx) {
  if (auto d = exit_in_view(a, ctx)) return *d;
  const Scenario& sc = *ctx.scenario;
  PolicyMemory& m = a.memory;

  std::vector<std::pair<double, std::size_t>> visible;
  if (sc.bounds.contains(a.position)) {
    for (std::size_t i = 0; i < ctx.signs.size(); ++i) {
      if (sign_visible(sc, ctx.signs[i], a.position, a.policy.params.sign_view_half_angle))
        visible.push_back({distance(a.position, ctx.signs[i].position), i});
    }
  }
  std::sort(visible.begin(), visible.end());
  for (const auto& [d, i] : visible) {
    const SignPlacement& sign = ctx.signs[i];
    const Vec2 rel = a.position - sign.position;
    const double lateral = std::abs(cross(rel, sign.arrow_direction));
    const Point2 foot = sign.position + sign.arrow_direction * dot(rel, sign.arrow_direction);
    const bool in_lane = lateral <= a.policy.params.sign_lane_half_width &&
                         (lateral < 1e-9 || ctx.navigator->clear_segment(a.position, foot));
    if (in_lane && heading_free(ctx, a, sign.arrow_direction)) {
      m.last_arrow = sign.arrow_direction;
      m.sign_target.reset();
      return sign.arrow_direction;
    }
  }
  // Readable, but the arrow does not apply from here: walk up to the sign and
  // keep going there even if it drops out of view on the way.
  if (!visible.empty()) {
    const Point2 target = ctx.signs[visible.front().second].position;
    if (!m.sign_target || distance(*m.sign_target, target) > 1e-9) {
      m.sign_target = target;
      m.sign_route = {};
    }
  }
  if (m.sign_target) {
    if (distance(*m.sign_target, a.position) > 0.5) {
      auto proj = m.sign_route.size() >= 2 ? windowed_projection(m.sign_route, a.position, m.sign_progress)
                                            : PathPolyline::Projection{};
      if (m.sign_route.size() < 2 || proj.distance > kLostDistance) {
        try {
          m.sign_route = ctx.navigator->path(a.position, *m.sign_target);
        } catch (const UnreachableError&) {
          m.sign_route = PathPolyline({a.position, *m.sign_target});
        }
        if (m.sign_route.size() < 2) m.sign_route = PathPolyline({a.position, *m.sign_target});
        proj = windowed_projection(m.sign_route, a.position, 0.0);
      }
      m.sign_progress = proj.s;
      return chase_carrot(*ctx.navigator, a, m.sign_route, proj);
    }
    m.sign_target.reset();
  }

  if (m.last_arrow) {
    if (heading_free(ctx, a, *m.last_arrow)) return *m.last_arrow;
    m.last_arrow.reset();
  }
  return wall_following_direction(*ctx.navigator, a, ctx.time);
}

Vec2 follow_others_direction(AgentState& a, const PolicyContext& ctx, std::span<const AgentState> world) {
  PolicyMemory& m = a.memory;
  if (m.planned) return follow_route(a, ctx);

  if (ctx.time + 1e-9 >= m.next_reselect) {
    m.next_reselect = ctx.time + a.policy.params.follow_reselect_period;
    if (auto id = select_leader(a, ctx, world)) m.leader = id;
  }
  if (m.leader) {
    const auto it = std::find_if(world.begin(), world.end(), [&](const AgentState& o) { return o.id == *m.leader; });
    if (it == world.end()) {
      m.leader.reset();
    } else if (it->exited_via) {
      try {
        set_route_to_exit(a, ctx, *it->exited_via);
        return follow_route(a, ctx);
      } catch (const UnreachableError&) {
        m.leader.reset();
      }
    } else {
      const Scenario& sc = *ctx.scenario;
      if (sc.bounds.contains(a.position) && sc.bounds.contains(it->position) &&
          line_of_sight(sc, a.position, it->position))
        m.leader_last_seen = it->position;
      if (m.leader_last_seen && distance(*m.leader_last_seen, a.position) > 0.3)
        return normalized(*m.leader_last_seen - a.position);
      // Right on the leader's heels: walk the way it walks.
      if (m.leader_last_seen && it->velocity.norm() > 1e-9) return normalized(it->velocity);
      m.leader.reset();
      m.leader_last_seen.reset();
    }
  }
  return explore(a, ctx);
}

Vec2 floor_plan_direction(AgentState& a, const PolicyContext& ctx, Rng& rng) {
  if (!a.memory.planned) {
    const Navigator& nav = *ctx.navigator;
    const auto near = nav.nearest_exit(a.position);
    if (!near) return explore(a, ctx);
    const PathPolyline plan =
        plan_floor_plan_memory(nav, a.position, a.policy.params.floor_plan_error, rng, a.policy.params.max_corruptions);
    const Scenario& sc = *ctx.scenario;
    a.memory.route = extend_through_exit(plan, sc.exits[near->exit_index], sc.bounds);
    a.memory.progress = 0.0;
    a.memory.goal_exit = near->exit_index;
    a.memory.planned = true;
  }
  return follow_route(a, ctx);
}

Vec2 scripted_goal_direction(AgentState& a, const PolicyContext& ctx) {
  if (!a.memory.planned) {
    std::optional<std::size_t> exit = a.memory.goal_exit;
    if (!exit) {
      const auto near = ctx.navigator->nearest_exit(a.position);
      if (!near) return explore(a, ctx);
      exit = near->exit_index;
    }
    set_route_to_exit(a, ctx, *exit);
  }
  return follow_route(a, ctx);
}

}  // namespace

Vec2 desired_direction(AgentState& agent, const PolicyContext& ctx, std::span<const AgentState> world, Rng& rng) {
  Vec2 dir;
  switch (agent.policy.kind) {
    case PolicyKind::GuidingLine: dir = guiding_line_direction(agent, ctx); break;
    case PolicyKind::ExitSigns: dir = exit_signs_direction(agent, ctx); break;
    case PolicyKind::FloorPlanMemory: dir = floor_plan_direction(agent, ctx, rng); break;
    case PolicyKind::FollowOthers: dir = follow_others_direction(agent, ctx, world); break;
    case PolicyKind::ScriptedGoal: dir = scripted_goal_direction(agent, ctx); break;
  }
  dir = normalized(dir);
  return dir.squared_norm() > 0.0 ? dir : unit_from_angle(agent.heading);
}

Vec2 evade_blocker(const AgentState& agent, const PolicyContext& ctx, std::span<const AgentState> world, Vec2 dir) {
  const AgentState* blocker = nullptr;
  double blocker_ahead = kEvadeLookahead;
  for (const AgentState& b : world) {
    if (b.id == agent.id || !b.active() || agent.memory.leader == b.id) continue;
    const Vec2 rel = b.position - agent.position;
    const double ahead = dot(rel, dir);
    if (ahead <= 0.0 || ahead >= blocker_ahead) continue;
    if (std::abs(cross(dir, rel)) >= agent.radius + b.radius + kEvadeMargin) continue;
    // Someone walking away at a decent pace is not in the way.
    if (dot(b.velocity, dir) > 0.5 * agent.desired_speed) continue;
    blocker = &b;
    blocker_ahead = ahead;
  }
  if (!blocker) return dir;
  const Vec2 rel = blocker->position - agent.position;
  const double need = agent.radius + blocker->radius + kEvadeMargin;
  const Vec2 left = perp(dir);
  // Keep right unless the blocker already sits to the right.
  const double first_side = cross(dir, rel) < -1e-9 ? 1.0 : -1.0;
  for (double side : {first_side, -first_side}) {
    const Point2 target = blocker->position + left * (side * need);
    if (ctx.navigator->wall_distance(target) < agent.radius) continue;
    if (!ctx.navigator->clear_segment(agent.position, target)) continue;
    const Vec2 d = normalized(target - agent.position);
    if (d.squared_norm() > 0.0) return d;
  }
  return dir;
}

Vec2 wall_following_direction(const Navigator& navigator, AgentState& agent, double time) {
  const double probe = agent.policy.params.wall_follow_probe;
  const double inflation = 0.9 * agent.radius;
  const Point2 p = agent.position;
  const Vec2 h = unit_from_angle(agent.heading);
  auto free = [&](Vec2 dir) { return free_distance(navigator.walls(), p, dir, probe, inflation) >= probe; };

  const Vec2 right{h.y, -h.x};
  if (!free(right)) agent.memory.wall_contact = time;
  const bool hugging = agent.memory.wall_contact && time - *agent.memory.wall_contact <= 1.0;
  if (!hugging) {
    // Walk up to the nearest wall, then turn so that it is on the right.
    const Point2 cp = navigator.nearest_wall_point(p);
    const double d = distance(p, cp);
    if (d <= 1e-9) return h;
    if (d > probe + inflation) return (cp - p) / d;
    const Vec2 n = (p - cp) / d;
    return {n.y, -n.x};
  }
  // Right-hand rule: sweep counter-clockwise from straight right and take the
  // first direction with room for one probe length.
  const double base = angle_of(h) - std::numbers::pi / 2.0;
  constexpr int kSteps = 24;
  for (int k = 0; k < kSteps; ++k) {
    const Vec2 dir = unit_from_angle(base + k * (2.0 * std::numbers::pi / kSteps));
    if (free(dir)) return dir;
  }
  return -h;
}

double free_distance(std::span<const Segment> walls, Point2 origin, Vec2 dir, double max_distance, double inflation) {
  double best = max_distance;
  for (const Segment& w : walls) best = std::min(best, ray_capsule_distance(origin, dir, w, inflation));
  return best;
}

PathPolyline extend_through_exit(const PathPolyline& route, const Exit& exit, const Rect& bounds) {
  std::vector<Point2> pts = route.vertices();
  const Point2 mid = exit.midpoint();
  if (pts.empty() || distance(pts.back(), mid) > 1e-9) pts.push_back(mid);
  Vec2 n = normalized(perp(exit.portal.b - exit.portal.a));
  const bool plus_out = !bounds.contains(mid + n * 0.05, 0.0);
  const bool minus_out = !bounds.contains(mid - n * 0.05, 0.0);
  if (plus_out != minus_out) {
    if (minus_out) n = -n;
  } else if (pts.size() >= 2 && dot(n, mid - pts[pts.size() - 2]) < 0.0) {
    n = -n;
  }
  pts.push_back(mid + n);
  return PathPolyline::from_points_dedup(pts);
}

PathPolyline splice_onto_line(const Navigator& navigator, Point2 from, const PathPolyline& line) {
  const double len = line.length();
  std::vector<double> samples;
  for (double s = 0.0; s < len; s += 0.25) samples.push_back(s);
  samples.push_back(len);

  double best_cost = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  std::vector<Point2> best_head;
  for (double s : samples) {
    const Point2 q = line.point_at(s);
    if (!navigator.clear_segment(from, q)) continue;
    const double cost = distance(from, q) + (len - s);
    if (cost < best_cost) {
      best_cost = cost;
      best_s = s;
      best_head = {from, q};
    }
  }
  if (best_head.empty()) {
    for (std::size_t k = 0; k < samples.size(); k += 4) {
      const double s = samples[k];
      try {
        const PathPolyline p = navigator.path(from, line.point_at(s));
        const double cost = p.length() + (len - s);
        if (cost < best_cost) {
          best_cost = cost;
          best_s = s;
          best_head = p.vertices();
        }
      } catch (const UnreachableError&) {
      }
    }
  }
  if (best_head.empty()) throw UnreachableError("guiding line cannot be reached");
  const auto& cum = line.cumulative_arclength();
  for (std::size_t i = 0; i < line.size(); ++i)
    if (cum[i] > best_s + 1e-9) best_head.push_back(line.vertices()[i]);
  return PathPolyline::from_points_dedup(best_head);
}

bool sign_visible(const Scenario& scenario, const SignPlacement& sign, Point2 viewer, double half_angle) {
  const Vec2 v = viewer - sign.position;
  const double d = v.norm();
  if (d > sign.visibility_range) return false;
  if (d < 1e-9) return true;
  if (dot(v / d, sign.facing) < std::cos(half_angle) - 1e-12) return false;
  return line_of_sight(scenario, sign.position, viewer);
}

std::optional<int> select_leader(const AgentState& follower, const PolicyContext& ctx,
                                 std::span<const AgentState> world) {
  const Scenario& sc = *ctx.scenario;
  const Navigator& nav = *ctx.navigator;
  if (!sc.bounds.contains(follower.position)) return std::nullopt;
  std::optional<double> own;
  bool own_known = false;
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const AgentState& o : world) {
    if (o.id == follower.id || !o.active()) continue;
    if (o.velocity.norm() <= follower.policy.params.follow_min_speed) continue;
    if (!sc.bounds.contains(o.position)) continue;
    const double d = distance(follower.position, o.position);
    if (d > best_d || (d == best_d && best && o.id > *best)) continue;
    if (!line_of_sight(sc, follower.position, o.position)) continue;
    if (!own_known) {
      if (auto ne = nav.nearest_exit(follower.position)) own = ne->distance;
      own_known = true;
    }
    const auto theirs = nav.nearest_exit(o.position);
    if (!theirs || (own && !(theirs->distance < *own))) continue;
    best = o.id;
    best_d = d;
  }
  return best;
}

}  // namespace evacsim
