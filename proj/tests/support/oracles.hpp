#pragma once

// Independent reference implementations used only by tests.

#include <optional>
#include <vector>

#include "evacsim/mocomp.hpp"
#include "evacsim/rng.hpp"
#include "evacsim/scenario.hpp"

namespace evacsim::testing {

/// Dense-grid Dijkstra geodesic. Cells are free when their centre keeps
/// `clearance` from every wall; moves go to every primitive offset within a
/// (2r+1)^2 neighbourhood so the metric is close to Euclidean. Start and goal
/// connect by straight free segments to every free cell within a few cells
/// (or directly to each other), falling back to the nearest free cell.
class GridOracle {
 public:
  GridOracle(const Scenario& scenario, double clearance, double cell = 0.05, int reach = 4);

  /// Distances from `from` to each target; nullopt when unreachable.
  std::vector<std::optional<double>> distances(Point2 from, const std::vector<Point2>& targets) const;
  std::optional<double> distance(Point2 from, Point2 to) const { return distances(from, {to})[0]; }

 private:
  static constexpr int kLinkCells = 4;

  std::optional<std::size_t> snap(Point2 p) const;
  bool segment_free(Point2 a, Point2 b) const;
  std::vector<std::pair<std::size_t, double>> links(Point2 p) const;
  Point2 center(std::size_t idx) const;

  double cell_;
  Point2 origin_;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<char> free_;
  std::vector<std::pair<int, int>> moves_;
};

/// Brute-force visibility: samples the segment densely and reports a block
/// when consecutive samples switch side of a wall line inside its extent, or
/// a sample touches a wall.
bool sampled_line_of_sight(const Scenario& scenario, Point2 from, Point2 to, int samples = 4000);

/// Random single-floor layout: an outer shell with one or two exits, vertical
/// partitions with doors and occasional horizontal partitions with doors.
/// Start positions are free points with at least 0.5 m wall clearance.
Scenario random_room_corridor_scenario(Rng& rng, std::size_t starts = 4);

/// Straight corridor along +x from x=0 to x=length, width 2 m, exit "E" at the
/// east end (portal 1.2 m wide), start at its centre line, 10 m from the exit
/// when length = 20.
Scenario corridor_scenario(double length = 20.0, double width = 2.0);

/// Corridor with exits at both ends ("A" west, "B" east).
Scenario two_exit_corridor_scenario(double length = 20.0);

/// Stem corridor heading north into a T junction; the west branch ends in exit
/// "A" (near), the east branch in exit "B" (far).
Scenario t_junction_scenario();

/// One 10x10 m room, a single 1.2 m exit on the east wall, one start.
Scenario square_room_scenario();

/// Random walk-like target path: 2 to `max_vertices` vertices, total length
/// at most `max_length`, segments of at least 0.3 m, turns within +-2.8 rad.
PathPolyline random_target_path(Rng& rng, double max_length = 100.0, std::size_t max_vertices = 20);

/// Random target path that is known to admit a compression into `workspace`
/// from `start`: random arcs (|kappa| <= kappa_max) are walked inside the
/// workspace, checked by 1 cm sampling, and the target is read off their
/// lengths and the random turns between them. Same size limits as above.
PathPolyline random_compressible_path(Rng& rng, const Workspace& workspace, Pose start, double kappa_max = 1.0,
                                      double max_length = 100.0, std::size_t max_vertices = 20);

/// Points of a chain of arcs every `step` metres of arc length (plus the
/// end), evaluated from each arc's centre rather than its chord.
std::vector<Point2> sample_arcs(const std::vector<Arc>& arcs, double step);

/// Largest gap between the end of one arc and the start of the next.
double arc_chain_gap(const std::vector<Arc>& arcs);

/// Largest |discrete turn between consecutive arcs - target turn|, with the
/// target turns taken from atan2 of its segment directions.
double max_turn_error(const std::vector<Arc>& arcs, const PathPolyline& target);

/// Largest signed distance by which a point leaves the inset workspace;
/// negative when every point is strictly inside.
double max_excursion(const std::vector<Point2>& points, const Workspace& workspace);

}  // namespace evacsim::testing
