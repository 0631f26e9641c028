#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "evacsim/geometry.hpp"

namespace evacsim {

/// Arc-length parameterized sequence of waypoints. Consecutive vertices are
/// distinct, so the cumulative arc length is strictly increasing from 0.
/// A single vertex is a valid zero-length path.
class PathPolyline {
 public:
  PathPolyline() = default;

  /// Throws std::invalid_argument on an empty list or repeated consecutive vertices.
  explicit PathPolyline(std::vector<Point2> vertices);

  /// Same as the constructor but silently drops consecutive duplicates.
  static PathPolyline from_points_dedup(std::span<const Point2> points, double tol = 1e-12);

  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<double>& cumulative_arclength() const { return cumulative_; }
  std::size_t size() const { return vertices_.size(); }
  bool empty() const { return vertices_.empty(); }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  Point2 front() const { return vertices_.front(); }
  Point2 back() const { return vertices_.back(); }

  /// Index of the segment containing arc length `s` (clamped). Segment i joins
  /// vertex i and i+1. Requires at least two vertices.
  std::size_t segment_at(double s) const;

  /// Point at arc length `s`; values outside [0, length] extrapolate along the
  /// first/last segment.
  Point2 point_at(double s) const;

  /// Unit tangent at `s` (direction of the containing segment).
  Vec2 tangent_at(double s) const;

  /// Heading of the tangent at `s`.
  double heading_at(double s) const { return angle_of(tangent_at(s)); }

  struct Projection {
    double s = 0.0;
    Point2 point;
    double distance = 0.0;
  };
  /// Closest point, restricted to arc lengths in [s_min, s_max].
  Projection project(Point2 p, double s_min, double s_max) const;
  Projection project(Point2 p) const { return project(p, 0.0, length()); }

  /// Prefix of the path with arc length min(length(), max_length).
  PathPolyline truncated(double max_length) const;

  /// Points every `step` metres of arc length plus the final vertex.
  std::vector<Point2> resample(double step) const;

  /// Signed turning angle at each interior vertex, in (-pi, pi].
  std::vector<double> turning_angles() const;

 private:
  std::vector<Point2> vertices_;
  std::vector<double> cumulative_;
};

/// Discrete symmetric Hausdorff distance between two paths sampled at `step`.
double hausdorff_distance(const PathPolyline& a, const PathPolyline& b, double step = 0.1);

}  // namespace evacsim
