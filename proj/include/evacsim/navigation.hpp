#pragma once

#include <optional>
#include <vector>

#include "evacsim/polyline.hpp"
#include "evacsim/scenario.hpp"

namespace evacsim {

/// Visibility graph over wall corners inflated by a clearance, with
/// precomputed shortest-path trees rooted at every exit. Immutable after
/// construction and safe to share between threads.
///
/// Graph nodes sit on small regular polygons around each wall endpoint, only on
/// the reflex side of the corner (where taut paths wrap). Chords between
/// adjacent polygon nodes keep exactly `clearance` from the corner.
class Navigator {
 public:
  Navigator(const Scenario& scenario, double clearance);

  double clearance() const { return clearance_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t exit_count() const { return exits_.size(); }
  const std::vector<Point2>& nodes() const { return nodes_; }

  const std::vector<Segment>& walls() const { return walls_; }
  const Rect& bounds() const { return bounds_; }

  double wall_distance(Point2 p) const;
  /// Closest point on any wall; `p` itself when there are no walls.
  Point2 nearest_wall_point(Point2 p) const;

  /// Segment a-b keeps the clearance from every wall. Near an endpoint that is
  /// itself closer than the clearance, the bound relaxes to that endpoint's
  /// own wall distance.
  bool clear_segment(Point2 a, Point2 b) const;

  /// Shortest path between two arbitrary points. Throws UnreachableError.
  PathPolyline path(Point2 from, Point2 to) const;

  /// Shortest path to the portal midpoint of exits[exit_index].
  /// Throws UnreachableError.
  PathPolyline path_to_exit(Point2 from, std::size_t exit_index) const;

  std::optional<double> distance_to_exit(Point2 from, std::size_t exit_index) const;

  struct ExitDistance {
    std::size_t exit_index = 0;
    double distance = 0.0;
  };
  /// Nearest reachable exit, ties by lexicographic exit id.
  std::optional<ExitDistance> nearest_exit(Point2 from) const;

 private:
  struct ExitTree {
    Point2 target;
    Segment portal;
    std::vector<double> dist;       // per node, infinity when unreachable
    std::vector<std::size_t> next;  // per node, next hop; npos = direct to target
  };
  struct Edge {
    std::size_t to;
    double cost;
  };

  bool clear_segment_with(Point2 a, Point2 b, double required) const;
  double required_clearance(Point2 p) const;

  /// Best visible node (plus the direct route) for a query point.
  struct Entry {
    double distance;
    std::size_t node;  // npos = direct
  };
  std::optional<Entry> enter_tree(Point2 from, const ExitTree& tree) const;

  double clearance_;
  Rect bounds_;
  std::vector<Segment> walls_;
  std::vector<Rect> wall_boxes_;
  std::vector<Point2> nodes_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<ExitTree> exits_;
  std::vector<std::string> exit_ids_;
};

}  // namespace evacsim
