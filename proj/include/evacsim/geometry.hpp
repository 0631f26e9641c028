#pragma once

#include <cmath>
#include <numbers>

namespace evacsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
};

using Point2 = Vec2;

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
/// Counter-clockwise perpendicular.
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

/// Unit vector, or zero for (near) zero input.
inline Vec2 normalized(Vec2 v) {
  const double n = v.norm();
  return n > 1e-15 ? v / n : Vec2{};
}

inline Vec2 unit_from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }
inline double angle_of(Vec2 v) { return std::atan2(v.y, v.x); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

struct Segment {
  Point2 a;
  Point2 b;

  double length() const { return distance(a, b); }
  Point2 midpoint() const { return (a + b) * 0.5; }
};

struct Rect {
  Point2 min;
  Point2 max;

  bool contains(Point2 p, double tol = 1e-9) const {
    return p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol && p.y <= max.y + tol;
  }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
};

/// Parameter in [0,1] of the point on `s` closest to `p`.
double closest_param(const Segment& s, Point2 p);
Point2 closest_point(const Segment& s, Point2 p);
double point_segment_distance(Point2 p, const Segment& s);
double segment_segment_distance(const Segment& s1, const Segment& s2);

/// True iff the closed segments share at least one point.
bool segments_intersect(const Segment& s1, const Segment& s2);

/// True iff `wall` touches the open query segment, i.e. some common point
/// exists other than the query endpoints. A degenerate query never blocks.
bool blocks_open_segment(const Segment& wall, Point2 from, Point2 to);

/// Distance travelled from `origin` along unit `dir` before coming within
/// `radius` of `wall`; infinity when the ray misses. 0 when already inside.
double ray_capsule_distance(Point2 origin, Vec2 dir, const Segment& wall, double radius);

}  // namespace evacsim
