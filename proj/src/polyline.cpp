#include "evacsim/polyline.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace evacsim {

PathPolyline::PathPolyline(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.empty()) throw std::invalid_argument("path polyline needs at least one vertex");
  cumulative_.reserve(vertices_.size());
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    const double len = distance(vertices_[i - 1], vertices_[i]);
    if (len <= 0.0) throw std::invalid_argument("path polyline has repeated consecutive vertices");
    cumulative_.push_back(cumulative_.back() + len);
  }
}

PathPolyline PathPolyline::from_points_dedup(std::span<const Point2> points, double tol) {
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const Point2& p : points) {
    if (out.empty() || distance(out.back(), p) > tol) out.push_back(p);
  }
  return PathPolyline(std::move(out));
}

std::size_t PathPolyline::segment_at(double s) const {
  const std::size_t segments = vertices_.size() - 1;
  if (s <= 0.0) return 0;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(idx == 0 ? 0 : idx - 1, segments - 1);
}

Point2 PathPolyline::point_at(double s) const {
  if (vertices_.size() == 1) return vertices_.front();
  const std::size_t i = segment_at(s);
  const Vec2 t = tangent_at(s);
  return vertices_[i] + t * (s - cumulative_[i]);
}

Vec2 PathPolyline::tangent_at(double s) const {
  if (vertices_.size() < 2) return {};
  const std::size_t i = segment_at(s);
  return normalized(vertices_[i + 1] - vertices_[i]);
}

PathPolyline::Projection PathPolyline::project(Point2 p, double s_min, double s_max) const {
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (vertices_.size() == 1) {
    best.point = vertices_.front();
    best.distance = distance(p, best.point);
    return best;
  }
  s_min = std::clamp(s_min, 0.0, length());
  s_max = std::clamp(s_max, s_min, length());
  for (std::size_t i = segment_at(s_min); i + 1 < vertices_.size(); ++i) {
    if (cumulative_[i] > s_max) break;
    const double lo = std::max(s_min, cumulative_[i]);
    const double hi = std::min(s_max, cumulative_[i + 1]);
    const Segment piece{point_at(lo), point_at(hi)};
    const double u = closest_param(piece, p);
    const Point2 q = piece.a + (piece.b - piece.a) * u;
    const double d = distance(p, q);
    if (d < best.distance) {
      best.distance = d;
      best.point = q;
      best.s = lo + (hi - lo) * u;
    }
  }
  return best;
}

PathPolyline PathPolyline::truncated(double max_length) const {
  if (max_length >= length()) return *this;
  std::vector<Point2> out;
  for (std::size_t i = 0; i < vertices_.size() && cumulative_[i] < max_length; ++i) out.push_back(vertices_[i]);
  const Point2 end = point_at(max_length);
  if (distance(out.back(), end) > 0.0) out.push_back(end);
  return PathPolyline(std::move(out));
}

std::vector<Point2> PathPolyline::resample(double step) const {
  std::vector<Point2> out;
  const double len = length();
  const auto n = static_cast<std::size_t>(std::floor(len / step));
  out.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(point_at(static_cast<double>(k) * step));
  if (out.empty() || distance(out.back(), back()) > 1e-12) out.push_back(back());
  return out;
}

std::vector<double> PathPolyline::turning_angles() const {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < vertices_.size(); ++i) {
    const Vec2 a = vertices_[i] - vertices_[i - 1];
    const Vec2 b = vertices_[i + 1] - vertices_[i];
    out.push_back(wrap_angle(std::atan2(cross(a, b), dot(a, b))));
  }
  return out;
}

double hausdorff_distance(const PathPolyline& a, const PathPolyline& b, double step) {
  auto directed = [step](const PathPolyline& from, const PathPolyline& to) {
    double worst = 0.0;
    for (const Point2& p : from.resample(step)) worst = std::max(worst, to.project(p).distance);
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

}  // namespace evacsim
