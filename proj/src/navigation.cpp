#include "evacsim/navigation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

#include <fmt/format.h>

namespace evacsim {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlack = 1e-9;
// Angular spacing of corner nodes; chord sag stays below 2% of the clearance.
constexpr double kNodeStep = std::numbers::pi / 8.0;

struct Corner {
  Point2 p;
  std::vector<double> directions;  // angles of incident walls leaving p
};

std::vector<Corner> collect_corners(const std::vector<Segment>& walls) {
  std::vector<Corner> corners;
  auto find_or_add = [&](Point2 p) -> Corner& {
    for (Corner& c : corners) {
      if (distance(c.p, p) <= 1e-9) return c;
    }
    corners.push_back({p, {}});
    return corners.back();
  };
  for (const Segment& w : walls) {
    if (w.length() <= 0.0) continue;
    find_or_add(w.a);
    find_or_add(w.b);
  }
  for (Corner& c : corners) {
    for (const Segment& w : walls) {
      if (w.length() <= 0.0) continue;
      if (distance(w.a, c.p) <= 1e-9) {
        c.directions.push_back(angle_of(w.b - w.a));
      } else if (distance(w.b, c.p) <= 1e-9) {
        c.directions.push_back(angle_of(w.a - w.b));
      } else if (point_segment_distance(c.p, w) <= 1e-9) {
        // T-junction: the corner lies on the interior of another wall.
        c.directions.push_back(angle_of(w.b - w.a));
        c.directions.push_back(angle_of(w.a - w.b));
      }
    }
    std::sort(c.directions.begin(), c.directions.end());
  }
  return corners;
}

Rect box_of(const Segment& s, double pad) {
  return {{std::min(s.a.x, s.b.x) - pad, std::min(s.a.y, s.b.y) - pad},
          {std::max(s.a.x, s.b.x) + pad, std::max(s.a.y, s.b.y) + pad}};
}

bool boxes_overlap(const Rect& a, const Rect& b) {
  return a.min.x <= b.max.x && b.min.x <= a.max.x && a.min.y <= b.max.y && b.min.y <= a.max.y;
}

}  // namespace

Navigator::Navigator(const Scenario& scenario, double clearance)
    : clearance_(clearance), bounds_(scenario.bounds), walls_(scenario.walls) {
  if (!(clearance >= 0.0)) throw Error("clearance must be non-negative");
  for (const Segment& w : walls_) wall_boxes_.push_back(box_of(w, 0.0));

  const double node_clearance = std::max(clearance_, 1e-6);
  const double radius = node_clearance / std::cos(kNodeStep / 2.0) * (1.0 + 1e-9) + 1e-9;
  for (const Corner& c : collect_corners(walls_)) {
    const std::size_t m = c.directions.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double a0 = c.directions[i];
      const double a1 = (i + 1 < m) ? c.directions[i + 1] : c.directions[0] + 2.0 * std::numbers::pi;
      const double gap = (m == 1) ? 2.0 * std::numbers::pi : a1 - a0;
      if (gap <= std::numbers::pi + 1e-9) continue;
      // Reflex wedge: paths wrap the corner between the two perpendiculars.
      const double lo = a0 + std::numbers::pi / 2.0;
      const double width = gap - std::numbers::pi;
      const auto count = static_cast<std::size_t>(std::ceil(width / kNodeStep)) + 1;
      for (std::size_t j = 0; j < count; ++j) {
        const double ang = count == 1 ? lo + width / 2.0 : lo + width * static_cast<double>(j) / static_cast<double>(count - 1);
        const Point2 p = c.p + unit_from_angle(ang) * radius;
        if (!bounds_.contains(p, 0.0)) continue;
        if (wall_distance(p) < clearance_ - kSlack) continue;
        nodes_.push_back(p);
      }
    }
  }

  const std::size_t n = nodes_.size();
  adjacency_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (clear_segment_with(nodes_[i], nodes_[j], clearance_)) {
        const double d = distance(nodes_[i], nodes_[j]);
        adjacency_[i].push_back({j, d});
        adjacency_[j].push_back({i, d});
      }
    }
  }

  using Item = std::pair<double, std::size_t>;
  for (const Exit& e : scenario.exits) {
    ExitTree tree;
    tree.target = e.midpoint();
    tree.portal = e.portal;
    tree.dist.assign(n, kInf);
    tree.next.assign(n, npos);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (std::size_t i = 0; i < n; ++i) {
      if (clear_segment(nodes_[i], tree.target)) {
        tree.dist[i] = distance(nodes_[i], tree.target);
        queue.push({tree.dist[i], i});
      }
    }
    while (!queue.empty()) {
      const auto [d, u] = queue.top();
      queue.pop();
      if (d > tree.dist[u]) continue;
      for (const Edge& edge : adjacency_[u]) {
        const double nd = d + edge.cost;
        if (nd < tree.dist[edge.to]) {
          tree.dist[edge.to] = nd;
          tree.next[edge.to] = u;
          queue.push({nd, edge.to});
        }
      }
    }
    exits_.push_back(std::move(tree));
    exit_ids_.push_back(e.id);
  }
}

double Navigator::wall_distance(Point2 p) const {
  double best = kInf;
  for (const Segment& w : walls_) best = std::min(best, point_segment_distance(p, w));
  return best;
}

Point2 Navigator::nearest_wall_point(Point2 p) const {
  Point2 best = p;
  double best_d = kInf;
  for (const Segment& w : walls_) {
    const Point2 q = closest_point(w, p);
    const double d = distance(p, q);
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

double Navigator::required_clearance(Point2 p) const { return std::min(clearance_, wall_distance(p)); }

bool Navigator::clear_segment_with(Point2 a, Point2 b, double required) const {
  const Segment query{a, b};
  const Rect qbox = box_of(query, required);
  for (std::size_t k = 0; k < walls_.size(); ++k) {
    if (!boxes_overlap(qbox, wall_boxes_[k])) continue;
    if (segment_segment_distance(query, walls_[k]) < required - kSlack) return false;
    if (required <= 1e-6 && blocks_open_segment(walls_[k], a, b)) return false;
  }
  return true;
}

bool Navigator::clear_segment(Point2 a, Point2 b) const {
  return clear_segment_with(a, b, std::min({clearance_, required_clearance(a), required_clearance(b)}));
}

std::optional<Navigator::Entry> Navigator::enter_tree(Point2 from, const ExitTree& tree) const {
  const double req = required_clearance(from);
  std::vector<std::pair<double, std::size_t>> candidates;
  candidates.reserve(nodes_.size() + 1);
  candidates.push_back({distance(from, tree.target), npos});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (tree.dist[i] < kInf) candidates.push_back({distance(from, nodes_[i]) + tree.dist[i], i});
  }
  std::sort(candidates.begin(), candidates.end());
  for (const auto& [d, node] : candidates) {
    const bool ok = node == npos ? clear_segment(from, tree.target)
                                 : clear_segment_with(from, nodes_[node], std::min(req, clearance_));
    if (ok) return Entry{d, node};
  }
  return std::nullopt;
}

PathPolyline Navigator::path_to_exit(Point2 from, std::size_t exit_index) const {
  const ExitTree& tree = exits_.at(exit_index);
  if (point_segment_distance(from, tree.portal) <= 1e-9) return PathPolyline({from});
  const auto entry = enter_tree(from, tree);
  if (!entry) {
    throw UnreachableError(fmt::format("exit '{}' is unreachable from ({}, {}) at clearance {}", exit_ids_[exit_index],
                                       from.x, from.y, clearance_));
  }
  std::vector<Point2> pts{from};
  for (std::size_t v = entry->node; v != npos; v = tree.next[v]) pts.push_back(nodes_[v]);
  pts.push_back(tree.target);
  return PathPolyline::from_points_dedup(pts);
}

std::optional<double> Navigator::distance_to_exit(Point2 from, std::size_t exit_index) const {
  const ExitTree& tree = exits_.at(exit_index);
  if (point_segment_distance(from, tree.portal) <= 1e-9) return 0.0;
  const auto entry = enter_tree(from, tree);
  if (!entry) return std::nullopt;
  return entry->distance;
}

std::optional<Navigator::ExitDistance> Navigator::nearest_exit(Point2 from) const {
  std::optional<ExitDistance> best;
  for (std::size_t i = 0; i < exits_.size(); ++i) {
    const auto d = distance_to_exit(from, i);
    if (!d) continue;
    const bool better = !best || *d < best->distance - 1e-9 ||
                        (std::abs(*d - best->distance) <= 1e-9 && exit_ids_[i] < exit_ids_[best->exit_index]);
    if (better) best = ExitDistance{i, *d};
  }
  return best;
}

PathPolyline Navigator::path(Point2 from, Point2 to) const {
  if (distance(from, to) <= 1e-12) return PathPolyline({from});
  if (clear_segment(from, to)) return PathPolyline({from, to});

  const std::size_t n = nodes_.size();
  const double req_from = std::min(clearance_, required_clearance(from));
  const double req_to = std::min(clearance_, required_clearance(to));
  std::vector<double> to_target(n, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    if (clear_segment_with(nodes_[i], to, req_to)) to_target[i] = distance(nodes_[i], to);
  }

  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> prev(n, npos);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (clear_segment_with(from, nodes_[i], req_from)) {
      dist[i] = distance(from, nodes_[i]);
      queue.push({dist[i], i});
    }
  }
  double best = kInf;
  std::size_t best_node = npos;
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (d >= best) break;
    if (d + to_target[u] < best) {
      best = d + to_target[u];
      best_node = u;
    }
    for (const Edge& e : adjacency_[u]) {
      const double nd = d + e.cost;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        prev[e.to] = u;
        queue.push({nd, e.to});
      }
    }
  }
  if (best_node == npos) {
    throw UnreachableError(fmt::format("({}, {}) is unreachable from ({}, {}) at clearance {}", to.x, to.y, from.x,
                                       from.y, clearance_));
  }
  std::vector<Point2> rev{to};
  for (std::size_t v = best_node; v != npos; v = prev[v]) rev.push_back(nodes_[v]);
  rev.push_back(from);
  std::reverse(rev.begin(), rev.end());
  return PathPolyline::from_points_dedup(rev);
}

}  // namespace evacsim
