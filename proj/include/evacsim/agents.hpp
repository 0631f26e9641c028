#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evacsim/navigation.hpp"
#include "evacsim/polyline.hpp"
#include "evacsim/rng.hpp"
#include "evacsim/scenario.hpp"

namespace evacsim {

enum class PolicyKind { GuidingLine, ExitSigns, FloorPlanMemory, FollowOthers, ScriptedGoal };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view name);

struct PolicyParams {
  /// FloorPlanMemory: probability that a junction decision is remembered wrong.
  double floor_plan_error = 0.3;
  /// FloorPlanMemory: at most this many corrupted junctions per route.
  int max_corruptions = 3;
  /// ExitSigns: an exit in view this close overrides the signs.
  double exit_view_distance = 4.0;
  /// ExitSigns: half-angle of the cone in front of a sign it can be read from.
  double sign_view_half_angle = std::numbers::pi / 3.0;
  /// ExitSigns: an arrow applies within this distance of the line through
  /// the sign along the arrow; farther away the agent walks up to the sign.
  double sign_lane_half_width = 1.0;
  /// FollowOthers: minimum speed of an agent worth following.
  double follow_min_speed = 0.2;
  /// FollowOthers: leader re-selection period.
  double follow_reselect_period = 0.1;
  /// Exploration: look-ahead of the right-hand wall follower.
  double wall_follow_probe = 0.7;
};

struct RouteChoicePolicy {
  PolicyKind kind = PolicyKind::ScriptedGoal;
  PolicyParams params;
};

/// Throws InvariantViolation when a parameter is outside its documented range.
void validate_policy(const RouteChoicePolicy& policy);

/// Per-agent policy state. Routes always end one metre beyond an exit portal
/// so followers walk through it instead of stopping on it.
struct PolicyMemory {
  PathPolyline route;
  double progress = 0.0;
  std::optional<std::size_t> goal_exit;
  bool planned = false;
  std::optional<Vec2> last_arrow;
  std::optional<Point2> sign_target;
  PathPolyline sign_route;
  double sign_progress = 0.0;
  std::optional<double> wall_contact;
  std::optional<int> leader;
  std::optional<Point2> leader_last_seen;
  double next_reselect = 0.0;
};

struct AgentState {
  int id = 0;
  Point2 position;
  Vec2 velocity;
  double heading = 0.0;
  double radius = 0.25;
  double desired_speed = 1.1;
  RouteChoicePolicy policy;
  PolicyMemory memory;
  bool is_human_avatar = false;
  /// Set once the agent crosses an exit portal; it then leaves the world.
  std::optional<std::size_t> exited_via;

  bool active() const { return !exited_via.has_value(); }
};

/// Throws InvariantViolation on radius, desired_speed or speed-cap violations.
void validate_agent(const AgentState& agent);

/// What a policy may look at besides the agent itself: the building and the
/// supporting information currently switched on.
struct PolicyContext {
  const Scenario* scenario = nullptr;
  const Navigator* navigator = nullptr;
  double time = 0.0;
  std::span<const PathPolyline> guiding_lines;
  std::span<const SignPlacement> signs;
};

inline constexpr double kEvadeLookahead = 2.0;
inline constexpr double kEvadeMargin = 0.15;

/// Steers around the nearest body standing (or slowly moving) in the way
/// within kEvadeLookahead ahead (a followed leader never blocks): aims beside it, on the right unless it
/// already sits to the right, falling back to the other side and then to
/// `dir`. Sessions apply it on top of every policy.
Vec2 evade_blocker(const AgentState& agent, const PolicyContext& ctx, std::span<const AgentState> world, Vec2 dir);

/// Unit direction the agent wants to walk in. Updates the agent's policy
/// memory; deterministic given (agent, world, rng state).
Vec2 desired_direction(AgentState& agent, const PolicyContext& ctx, std::span<const AgentState> world, Rng& rng);

inline constexpr double kRelaxationTime = 0.5;
inline constexpr double kRepulsionStrength = 2.0;
inline constexpr double kRepulsionRange = 0.3;
inline constexpr double kSpeedCapFactor = 1.3;
inline constexpr double kPhysicsStep = 0.01;

/// One social-force step of at most 0.1 s, split into substeps of at most
/// kPhysicsStep. The driving term relaxes exactly over each substep,
/// interaction forces are explicit and the position moves with the new
/// velocity. The result never penetrates a wall.
AgentState social_force_step(const AgentState& agent, std::span<const AgentState> neighbors,
                             const Scenario& scenario, Vec2 e_desired, double dt);

/// Projects the body out of every wall it overlaps and drops the velocity
/// component pointing into that wall.
void keep_out_of_walls(AgentState& agent, const Scenario& scenario);

/// Pushes overlapping bodies apart in fixed pair order. Human avatars do not
/// move; everyone else keeps out of walls.
void resolve_contacts(std::span<AgentState> agents, const Scenario& scenario, int iterations = 4);

/// Steps every active agent from the same pre-step snapshot, then resolves
/// contacts and marks agents that crossed an exit. `directions[i]` belongs to
/// agents[i]. Avatars are left in place unless `move_avatars` is set.
void step_agents(std::span<AgentState> agents, std::span<const Vec2> directions, const Scenario& scenario,
                 double dt, bool move_avatars = true);

/// Index of the exit whose portal the step from->to crosses, if any.
std::optional<std::size_t> crossed_exit(const Scenario& scenario, Point2 from, Point2 to);

/// Shortest path to the start's nearest exit with each junction decision
/// independently remembered wrong with probability p_err.
PathPolyline plan_floor_plan_memory(const Navigator& navigator, Point2 start, double p_err, Rng& rng,
                                    int max_corruptions = 3);
PathPolyline plan_floor_plan_memory(const Scenario& scenario, Point2 start, Rng& rng,
                                    const PolicyParams& params = {});

/// A junction along a route: a vertex from which more corridors open than the
/// one the route arrives by and the one it leaves by.
struct Junction {
  std::size_t vertex = 0;
  Point2 position;
  /// Directions of the alternative corridors, best ray of each.
  std::vector<Vec2> alternatives;
  std::vector<double> alternative_reach;
};
std::vector<Junction> find_junctions(const Navigator& navigator, const PathPolyline& route);

/// Wall-following exploration with the wall on the right. Without recent
/// wall contact on the right the agent walks up to the nearest wall; in
/// contact it takes the first direction, sweeping counter-clockwise from
/// straight right, with one probe length of room.
Vec2 wall_following_direction(const Navigator& navigator, AgentState& agent, double time);

/// Free distance along a ray before coming within `inflation` of any wall.
double free_distance(std::span<const Segment> walls, Point2 origin, Vec2 dir, double max_distance, double inflation);

/// Route through the portal: appends the portal midpoint (if missing) and a
/// point one metre beyond it, on the side facing out of `bounds`.
PathPolyline extend_through_exit(const PathPolyline& route, const Exit& exit, const Rect& bounds);

/// Attaches `from` to `line` at the point that minimizes walking distance to
/// the line's end, returning the spliced route.
PathPolyline splice_onto_line(const Navigator& navigator, Point2 from, const PathPolyline& line);

/// True when a sign can be read from `viewer`.
bool sign_visible(const Scenario& scenario, const SignPlacement& sign, Point2 viewer, double half_angle);

/// Candidate rule for FollowOthers: nearest visible moving agent that is
/// strictly closer (geodesically) to an exit than the follower; ties by id.
std::optional<int> select_leader(const AgentState& follower, const PolicyContext& ctx,
                                 std::span<const AgentState> world);

}  // namespace evacsim
