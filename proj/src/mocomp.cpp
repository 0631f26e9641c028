#include "evacsim/mocomp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "evacsim/navigation.hpp"

namespace evacsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Angle in [0, 2pi).
double positive_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

// True when polar angle `psi` is passed while sweeping from `phi0` by `sweep`
// (signed) radians.
bool swept(double phi0, double sweep, double psi) {
  if (std::abs(sweep) >= kTwoPi) return true;
  return sweep >= 0.0 ? positive_angle(psi - phi0) <= sweep : positive_angle(phi0 - psi) <= -sweep;
}

// The remainder of `path` beyond arc length s.
PathPolyline tail_from(const PathPolyline& path, double s) {
  if (path.size() < 2 || s <= 0.0) return path;
  std::vector<Point2> pts{path.point_at(std::min(s, path.length()))};
  const auto& cum = path.cumulative_arclength();
  for (std::size_t i = 0; i < path.size(); ++i)
    if (cum[i] > s) pts.push_back(path.vertices()[i]);
  return PathPolyline::from_points_dedup(pts);
}

}  // namespace

Workspace Workspace::rectangle(double width, double height, Point2 origin, double margin) {
  Workspace w;
  w.shape = Shape::Rectangle;
  w.width = width;
  w.height = height;
  w.origin = origin;
  w.margin = margin;
  validate_workspace(w);
  return w;
}

Workspace Workspace::disc(double radius, Point2 origin, double margin) {
  Workspace w;
  w.shape = Shape::Disc;
  w.width = w.height = 2.0 * radius;
  w.radius = radius;
  w.origin = origin;
  w.margin = margin;
  validate_workspace(w);
  return w;
}

bool Workspace::contains(Point2 p, double tol) const {
  const Vec2 d = p - origin;
  if (shape == Shape::Disc) return d.norm() <= radius - margin + tol;
  return std::abs(d.x) <= 0.5 * width - margin + tol && std::abs(d.y) <= 0.5 * height - margin + tol;
}

double Workspace::inscribed_radius() const {
  if (shape == Shape::Disc) return radius - margin;
  return 0.5 * std::min(width, height) - margin;
}

void validate_workspace(const Workspace& w) {
  if (!(w.margin >= 0.0)) throw InvariantViolation("margin >= 0", fmt::format("margin {}", w.margin));
  if (w.shape == Workspace::Shape::Disc) {
    if (!(2.0 * w.radius > 2.0 * w.margin))
      throw InvariantViolation("dimensions > 2 x margin", fmt::format("disc radius {} margin {}", w.radius, w.margin));
  } else if (!(w.width > 2.0 * w.margin && w.height > 2.0 * w.margin)) {
    throw InvariantViolation("dimensions > 2 x margin",
                             fmt::format("rectangle {} x {} margin {}", w.width, w.height, w.margin));
  }
}

Point2 Arc::point_at(double t) const {
  const double turn = curvature * t;
  // Chord form stays accurate for tiny curvature.
  const double chord = std::abs(turn) < 1e-8 ? t * (1.0 - turn * turn / 24.0) : 2.0 * std::sin(0.5 * turn) / curvature;
  return start.position + unit_from_angle(start.heading + 0.5 * turn) * chord;
}

bool arc_inside(const Arc& arc, const Workspace& ws, double tol) {
  const Point2 a = arc.start.position;
  const Point2 b = arc.point_at(arc.length);
  if (!ws.contains(a, tol) || !ws.contains(b, tol)) return false;
  // Straight pieces: both ends inside a convex region suffice.
  if (std::abs(arc.curvature * arc.length) < 1e-12) return true;

  const double r = 1.0 / std::abs(arc.curvature);
  const Point2 c = a + perp(unit_from_angle(arc.start.heading)) * (1.0 / arc.curvature);
  const double phi0 = angle_of(a - c);
  const double sweep = arc.curvature * arc.length;
  if (ws.shape == Workspace::Shape::Disc) {
    const Vec2 out = c - ws.origin;
    if (out.norm() < 1e-12) return r <= ws.radius - ws.margin + tol;
    return !swept(phi0, sweep, angle_of(out)) || ws.contains(c + normalized(out) * r, tol);
  }
  // Rectangle: the extreme points in x and y.
  for (int k = 0; k < 4; ++k) {
    const double psi = k * 0.5 * std::numbers::pi;
    if (swept(phi0, sweep, psi) && !ws.contains(c + unit_from_angle(psi) * r, tol)) return false;
  }
  return true;
}

std::size_t CompressedPath::arc_at(double s) const {
  double start = 0.0;
  for (std::size_t i = 0; i + 1 < arcs.size(); ++i) {
    start += arcs[i].length;
    if (s < start) return i;
  }
  return arcs.size() - 1;
}

double CompressedPath::arc_start(std::size_t i) const {
  double start = 0.0;
  for (std::size_t k = 0; k < i; ++k) start += arcs[k].length;
  return start;
}

Pose CompressedPath::pose_at(double s) const {
  s = std::clamp(s, 0.0, total_length);
  const std::size_t i = arc_at(s);
  const double t = std::clamp(s - arc_start(i), 0.0, arcs[i].length);
  return {arcs[i].point_at(t), arcs[i].heading_at(t)};
}

double CompressedPath::curvature_turn(double s0, double s1) const {
  const double sign = s1 >= s0 ? 1.0 : -1.0;
  const double lo = std::clamp(std::min(s0, s1), 0.0, total_length);
  const double hi = std::clamp(std::max(s0, s1), 0.0, total_length);
  double turn = 0.0;
  double start = 0.0;
  for (const Arc& arc : arcs) {
    const double end = start + arc.length;
    const double overlap = std::min(hi, end) - std::max(lo, start);
    if (overlap > 0.0) turn += arc.curvature * overlap;
    start = end;
  }
  return sign * turn;
}

double CompressedPath::cost() const {
  double c = 0.0;
  for (const Arc& arc : arcs) c += arc.curvature * arc.curvature;
  return c;
}

std::vector<Pose> CompressedPath::sample(double step) const {
  std::vector<Pose> out;
  const auto n = static_cast<std::size_t>(std::floor(total_length / step));
  out.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(pose_at(static_cast<double>(k) * step));
  if (total_length - static_cast<double>(n) * step > 1e-12) out.push_back(pose_at(total_length));
  return out;
}

CompressedPath build_compressed_path(std::span<const double> curvatures, const PathPolyline& target, Pose start) {
  if (target.size() < 2) throw Error("compressed path needs a target with at least two vertices");
  if (curvatures.size() + 1 != target.size()) throw Error("one curvature per target segment required");
  const auto& cum = target.cumulative_arclength();
  CompressedPath out;
  out.waypoint_turns = target.turning_angles();
  out.arcs.reserve(curvatures.size());
  Pose pose{start.position, wrap_angle(start.heading)};
  for (std::size_t i = 0; i < curvatures.size(); ++i) {
    Arc arc{curvatures[i], cum[i + 1] - cum[i], pose};
    out.arcs.push_back(arc);
    out.total_length += arc.length;
    pose = arc.end();
    if (i < out.waypoint_turns.size()) pose.heading = wrap_angle(pose.heading + out.waypoint_turns[i]);
  }
  return out;
}

CompressedPath transform_path(const PathPolyline& target, const Workspace& ws, Pose user_start,
                              const SolverOptions& options) {
  if (target.size() < 2) throw Error("transform_path: target needs at least two vertices");
  validate_workspace(ws);
  if (ws.inscribed_radius() + ws.margin < 0.5) throw Error("transform_path: workspace smaller than a 0.5 m disc");
  if (!(options.kappa_max > 0.0)) throw Error("transform_path: kappa_max must be positive");
  if (!ws.contains(user_start.position)) throw InfeasibleError("transform_path: user start outside the workspace");

  const std::size_t n = target.size() - 1;
  const auto& cum = target.cumulative_arclength();
  const std::vector<double> turns = target.turning_angles();
  auto seg_length = [&](std::size_t i) { return cum[i + 1] - cum[i]; };
  auto next_start = [&](const Arc& arc, std::size_t i) {
    Pose p = arc.end();
    if (i < turns.size()) p.heading = wrap_angle(p.heading + turns[i]);
    return p;
  };

  auto feasible = [&](const std::vector<double>& kappa) {
    Pose pose{user_start.position, wrap_angle(user_start.heading)};
    for (std::size_t i = 0; i < n; ++i) {
      const Arc arc{kappa[i], seg_length(i), pose};
      if (!arc_inside(arc, ws)) return false;
      pose = next_start(arc, i);
    }
    return true;
  };

  std::vector<double> kappa(n, 0.0);
  if (!feasible(kappa)) {
    // A pose is comfortable when some allowed full circle fits on one side:
    // from there a segment of any length can be absorbed.
    const double r_min = 1.0 / options.kappa_max;
    const double r_max = ws.inscribed_radius();
    auto circle_fits = [&](Point2 c, double r) {
      if (ws.shape == Workspace::Shape::Disc) return distance(c, ws.origin) + r <= ws.radius - ws.margin;
      return std::abs(c.x - ws.origin.x) + r <= 0.5 * ws.width - ws.margin &&
             std::abs(c.y - ws.origin.y) + r <= 0.5 * ws.height - ws.margin;
    };
    auto comfortable = [&](const Pose& p) {
      if (r_max < r_min) return false;
      const Vec2 n = perp(unit_from_angle(p.heading));
      for (int k = 0; k <= 16; ++k) {
        const double r = r_min + (r_max - r_min) * k / 16.0;
        if (circle_fits(p.position + n * r, r) || circle_fits(p.position - n * r, r)) return true;
      }
      return false;
    };

    std::vector<double> grid;
    for (int j = -options.grid_steps; j <= options.grid_steps; ++j)
      grid.push_back(options.kappa_max * j / options.grid_steps);

    // Beam search over the chain: after each segment keep the cheapest partial
    // solution per (position, heading) cell, comfortable poses first.
    struct Node {
      Pose pose;
      double cost;
      bool comfortable;
      std::size_t parent;
      double kappa;
    };
    std::vector<std::vector<Node>> layers{{Node{{user_start.position, wrap_angle(user_start.heading)}, 0.0, true, 0, 0.0}}};
    const double half_w = 0.5 * ws.width;
    const double half_h = 0.5 * ws.height;
    const auto nx = static_cast<std::int64_t>(std::ceil(2.0 * half_w / options.beam_cell)) + 1;
    const auto ny = static_cast<std::int64_t>(std::ceil(2.0 * half_h / options.beam_cell)) + 1;
    auto cell_of = [&](const Pose& p) {
      const auto ix = static_cast<std::int64_t>(std::floor((p.position.x - ws.origin.x + half_w) / options.beam_cell));
      const auto iy = static_cast<std::int64_t>(std::floor((p.position.y - ws.origin.y + half_h) / options.beam_cell));
      const auto ih = static_cast<std::int64_t>(
          std::floor(positive_angle(p.heading) / kTwoPi * options.beam_headings)) % options.beam_headings;
      return (ih * ny + iy) * nx + ix;
    };
    for (std::size_t i = 0; i < n; ++i) {
      std::unordered_map<std::int64_t, Node> best;
      const std::vector<Node>& layer = layers.back();
      for (std::size_t j = 0; j < layer.size(); ++j) {
        for (const double k : grid) {
          const Arc arc{k, seg_length(i), layer[j].pose};
          if (!arc_inside(arc, ws)) continue;
          const Pose next = next_start(arc, i);
          const Node node{next, layer[j].cost + k * k, i + 1 == n || comfortable(next), j, k};
          auto [it, fresh] = best.try_emplace(cell_of(next), node);
          if (!fresh && std::pair(!node.comfortable, node.cost) < std::pair(!it->second.comfortable, it->second.cost))
            it->second = node;
        }
      }
      if (best.empty())
        throw InfeasibleError(fmt::format(
            "transform_path: no curvature assignment with |kappa| <= {} fits (dead end at segment {} of {})",
            options.kappa_max, i + 1, n));
      std::vector<Node> next_layer;
      next_layer.reserve(best.size());
      for (auto& [key, node] : best) next_layer.push_back(node);
      std::sort(next_layer.begin(), next_layer.end(), [](const Node& x, const Node& y) {
        if (x.comfortable != y.comfortable) return x.comfortable;
        if (x.cost != y.cost) return x.cost < y.cost;
        return std::tie(x.pose.position.x, x.pose.position.y, x.pose.heading) <
               std::tie(y.pose.position.x, y.pose.position.y, y.pose.heading);
      });
      if (next_layer.size() > options.beam_width) next_layer.resize(options.beam_width);
      layers.push_back(std::move(next_layer));
    }
    std::size_t at = 0;
    for (std::size_t i = n; i > 0; --i) {
      kappa[i - 1] = layers[i][at].kappa;
      at = layers[i][at].parent;
    }

    // Coordinate descent: shrink each curvature toward zero while the chain
    // stays feasible.
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
      double gained = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double k0 = kappa[i];
        if (k0 == 0.0) continue;
        kappa[i] = 0.0;
        if (feasible(kappa)) {
          gained += k0 * k0;
          continue;
        }
        double lo = 0.0;
        double hi = 1.0;
        for (int it = 0; it < 40; ++it) {
          const double mid = 0.5 * (lo + hi);
          kappa[i] = k0 * mid;
          (feasible(kappa) ? hi : lo) = mid;
        }
        kappa[i] = k0 * hi;
        gained += k0 * k0 - kappa[i] * kappa[i];
      }
      if (gained < 1e-12) break;
    }
  }
  return build_compressed_path(kappa, target, user_start);
}

PathPolyline predict_target_path(const Navigator& navigator, Pose avatar, std::optional<Point2> goal, double horizon) {
  if (!(horizon > 0.0)) throw Error("predict_target_path: horizon must be positive");
  if (goal && distance(*goal, avatar.position) > 1e-9) {
    try {
      return navigator.path(avatar.position, *goal).truncated(horizon);
    } catch (const UnreachableError&) {
      // Fall through to the straight prediction.
    }
  }
  return PathPolyline({avatar.position, avatar.position + unit_from_angle(avatar.heading) * horizon});
}

double guidance_rotation(const Pose& user_pose, const CompressedPath& compressed, const PathPolyline& target, double s,
                         const GuidanceParams& params) {
  s = std::clamp(s, 0.0, compressed.total_length);
  const Pose on_path = compressed.pose_at(s);
  const double base = wrap_angle(on_path.heading - target.heading_at(s));
  const double lateral = cross(unit_from_angle(on_path.heading), user_pose.position - on_path.position);
  const double correction = std::clamp(-params.k_p * lateral, -params.max_correction, params.max_correction);
  return base + correction;
}

MotionStep map_user_motion(const CompressedPath& compressed, const PathPolyline& target, double s, MotionStep user) {
  if (std::abs(user.forward) > 0.5) throw Error(fmt::format("map_user_motion: step of {} m exceeds 0.5 m", user.forward));
  if (std::abs(target.length() - compressed.total_length) > 1e-6 * std::max(1.0, target.length()))
    throw Error("map_user_motion: compressed path does not belong to the target");
  return {user.forward, user.turn - compressed.curvature_turn(s, s + user.forward)};
}

MotionCompressor::MotionCompressor(const Navigator& navigator, Workspace workspace, CompressorOptions options)
    : navigator_(&navigator), workspace_(workspace), options_(options) {
  validate_workspace(workspace_);
}

void MotionCompressor::reset(Pose avatar, Pose user, std::optional<Point2> goal) {
  avatar_ = avatar;
  user_ = user;
  replans_ = 0;
  replan(predict_target_path(*navigator_, avatar_, goal, options_.horizon));
}

void MotionCompressor::replan(PathPolyline prediction) {
  target_ = std::move(prediction);
  s_ = 0.0;
  ++replans_;
  try {
    compressed_ = transform_path(target_, workspace_, user_, options_.solver);
  } catch (const InfeasibleError&) {
    compressed_.reset();
  }
}

MotionStep MotionCompressor::track(Pose user, Pose avatar, std::optional<Point2> goal) {
  const Vec2 moved = user.position - user_.position;
  const double forward = std::clamp(dot(moved, unit_from_angle(user_.heading)) >= 0.0 ? moved.norm() : -moved.norm(),
                                    -0.5, 0.5);
  const MotionStep physical{forward, wrap_angle(user.heading - user_.heading)};
  MotionStep out = physical;
  if (compressed_) out = map_user_motion(*compressed_, target_, s_, physical);
  s_ = std::clamp(s_ + forward, 0.0, target_.length());
  user_ = user;
  avatar_ = avatar;

  const PathPolyline prediction = predict_target_path(*navigator_, avatar_, goal, options_.horizon);
  const bool used_up = target_.length() - s_ < 1e-9;
  if (used_up || hausdorff_distance(prediction, tail_from(target_, s_)) > options_.replan_distance)
    replan(prediction);
  return out;
}

double MotionCompressor::guidance() const {
  if (!compressed_) return 0.0;
  return guidance_rotation(user_, *compressed_, target_, s_, options_.guidance);
}

}  // namespace evacsim
