#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "evacsim/errors.hpp"
#include "evacsim/geometry.hpp"
#include "evacsim/polyline.hpp"

namespace evacsim {

/// Clearance used wherever a query has no explicit one: the default agent
/// radius. Navigable space is the bounds minus walls inflated by it.
inline constexpr double kDefaultClearance = 0.25;

/// Guiding lines must end this close to their exit portal.
inline constexpr double kGuidingLineExitTolerance = 0.5;

struct Exit {
  std::string id;
  Segment portal;  ///< crossing line
  std::string label;

  Point2 midpoint() const { return portal.midpoint(); }
};

struct SignPlacement {
  Point2 position;
  Vec2 facing;           ///< unit normal of the sign face
  Vec2 arrow_direction;  ///< unit direction the arrow points to
  double visibility_range = 0.0;
};

struct Scenario {
  std::string id;
  Rect bounds;
  std::vector<Segment> walls;
  std::vector<Exit> exits;
  std::vector<Point2> start_positions;
  std::map<std::string, PathPolyline> guiding_lines;  ///< keyed by exit id
  std::vector<SignPlacement> exit_signs;
  std::vector<Point2> floor_plan_posts;

  /// Index into `exits`, or exits.size() when absent.
  std::size_t exit_index(std::string_view exit_id) const;
  const Exit& exit_by_id(std::string_view exit_id) const;
};

/// Parses and validates a scenario document (UTF-8 JSON).
/// Throws ParseError (with line and field) or InvariantViolation.
Scenario load_scenario(std::string_view document);
Scenario load_scenario_file(const std::filesystem::path& path);

/// Serializes to the same document schema load_scenario reads.
std::string scenario_to_string(const Scenario& scenario);

/// Throws InvariantViolation naming the first violated invariant.
void validate_scenario(const Scenario& scenario);

/// Distance from `p` to the closest wall (infinity without walls).
double wall_distance(const Scenario& scenario, Point2 p);

/// True iff the open segment from->to touches no wall.
/// Throws OutOfBoundsError when either point lies outside the bounds.
bool line_of_sight(const Scenario& scenario, Point2 from, Point2 to);

/// Shortest collision-free path (at `clearance`) from `from` to the midpoint
/// of `to_exit`'s portal. A point already on the portal yields a zero-length
/// path. Throws UnreachableError.
PathPolyline shortest_path(const Scenario& scenario, Point2 from, const Exit& to_exit,
                           double clearance = kDefaultClearance);

struct NearestExit {
  const Exit* exit = nullptr;
  double distance = 0.0;
};

/// Exit with the shortest path at the default clearance; ties go to the
/// lexicographically smaller id. Throws UnreachableError when none is reachable.
NearestExit nearest_exit(const Scenario& scenario, Point2 from);

}  // namespace evacsim
