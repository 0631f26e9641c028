#include "evacsim/geometry.hpp"

#include <algorithm>
#include <limits>

namespace evacsim {

double closest_param(const Segment& s, Point2 p) {
  const Vec2 d = s.b - s.a;
  const double len2 = d.squared_norm();
  if (len2 <= 0.0) return 0.0;
  return std::clamp(dot(p - s.a, d) / len2, 0.0, 1.0);
}

Point2 closest_point(const Segment& s, Point2 p) { return s.a + (s.b - s.a) * closest_param(s, p); }

double point_segment_distance(Point2 p, const Segment& s) { return distance(p, closest_point(s, p)); }

namespace {

int orientation(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({(b - a).squared_norm(), (c - a).squared_norm(), 1e-300});
  if (std::abs(v) <= 1e-14 * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
         std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
}

}  // namespace

bool segments_intersect(const Segment& s1, const Segment& s2) {
  const int o1 = orientation(s1.a, s1.b, s2.a);
  const int o2 = orientation(s1.a, s1.b, s2.b);
  const int o3 = orientation(s2.a, s2.b, s1.a);
  const int o4 = orientation(s2.a, s2.b, s1.b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  if (o1 == 0 && on_segment(s1.a, s1.b, s2.a)) return true;
  if (o2 == 0 && on_segment(s1.a, s1.b, s2.b)) return true;
  if (o3 == 0 && on_segment(s2.a, s2.b, s1.a)) return true;
  if (o4 == 0 && on_segment(s2.a, s2.b, s1.b)) return true;
  return o1 * o2 < 0 && o3 * o4 < 0;
}

double segment_segment_distance(const Segment& s1, const Segment& s2) {
  if (segments_intersect(s1, s2)) return 0.0;
  return std::min({point_segment_distance(s1.a, s2), point_segment_distance(s1.b, s2),
                   point_segment_distance(s2.a, s1), point_segment_distance(s2.b, s1)});
}

bool blocks_open_segment(const Segment& wall, Point2 from, Point2 to) {
  // Canonical endpoint order keeps the predicate exactly symmetric.
  if (to.x < from.x || (to.x == from.x && to.y < from.y)) std::swap(from, to);
  const Vec2 d = to - from;
  const double len2 = d.squared_norm();
  if (len2 <= 0.0) return false;
  const Vec2 e = wall.b - wall.a;
  const double denom = cross(d, e);
  const double scale = std::sqrt(len2 * std::max(e.squared_norm(), 1e-300));
  const double tiny = 1e-12;

  if (std::abs(denom) > 1e-14 * scale) {
    const Vec2 w = wall.a - from;
    const double t = cross(w, e) / denom;  // along query
    const double u = cross(w, d) / denom;  // along wall
    return t > tiny && t < 1.0 - tiny && u >= -tiny && u <= 1.0 + tiny;
  }
  // Parallel: blocks only when collinear and overlapping the open interior.
  const double len = std::sqrt(len2);
  if (std::abs(cross(d, wall.a - from)) / len > 1e-12) return false;
  double ta = dot(wall.a - from, d) / len2;
  double tb = dot(wall.b - from, d) / len2;
  if (ta > tb) std::swap(ta, tb);
  return tb > tiny && ta < 1.0 - tiny;
}

}  // namespace evacsim

namespace evacsim {

namespace {

double ray_circle(Point2 o, Vec2 d, Point2 c, double r) {
  const Vec2 m = o - c;
  const double b = dot(m, d);
  const double cc = m.squared_norm() - r * r;
  if (cc <= 0.0) return 0.0;
  if (b > 0.0) return std::numeric_limits<double>::infinity();
  const double disc = b * b - cc;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  return -b - std::sqrt(disc);
}

double ray_segment(Point2 o, Vec2 d, Point2 a, Point2 b) {
  const Vec2 e = b - a;
  const double denom = cross(d, e);
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const Vec2 w = a - o;
  const double t = cross(w, e) / denom;
  const double u = cross(w, d) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace

double ray_capsule_distance(Point2 origin, Vec2 dir, const Segment& wall, double radius) {
  if (point_segment_distance(origin, wall) <= radius) return 0.0;
  double best = std::min(ray_circle(origin, dir, wall.a, radius), ray_circle(origin, dir, wall.b, radius));
  const Vec2 n = perp(normalized(wall.b - wall.a)) * radius;
  if (radius > 0.0 && n.squared_norm() > 0.0) {
    best = std::min(best, ray_segment(origin, dir, wall.a + n, wall.b + n));
    best = std::min(best, ray_segment(origin, dir, wall.a - n, wall.b - n));
  } else {
    best = std::min(best, ray_segment(origin, dir, wall.a, wall.b));
  }
  return best;
}

}  // namespace evacsim
