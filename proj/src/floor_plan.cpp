#include <algorithm>
#include <cmath>

#include "evacsim/agents.hpp"

namespace evacsim {

namespace {

constexpr int kRays = 72;
constexpr double kRayCap = 6.0;
constexpr double kOpenReach = 2.5;
constexpr int kMinSectorRays = 3;
constexpr double kSameDirection = 15.0 * std::numbers::pi / 180.0;
constexpr double kDistinctBranch = 45.0 * std::numbers::pi / 180.0;
constexpr double kSameJunction = 1.5;
constexpr double kProbe = 2.0;
constexpr double kDetour = 4.0;

double ray_angle(int j) { return 2.0 * std::numbers::pi * j / kRays; }

double angle_between(double a, double b) { return std::abs(wrap_angle(a - b)); }

struct Sector {
  std::vector<int> rays;
};

// Contiguous runs of open rays, joined across the 0/2pi seam.
std::vector<Sector> open_sectors(const std::vector<bool>& open) {
  std::vector<Sector> out;
  int first_closed = -1;
  for (int j = 0; j < kRays; ++j)
    if (!open[j]) {
      first_closed = j;
      break;
    }
  if (first_closed < 0) return {};  // open space all around: not a junction
  Sector cur;
  for (int k = 1; k <= kRays; ++k) {
    const int j = (first_closed + k) % kRays;
    if (open[j]) {
      cur.rays.push_back(j);
    } else if (!cur.rays.empty()) {
      out.push_back(std::move(cur));
      cur = {};
    }
  }
  return out;
}

bool sector_near(const Sector& s, double angle) {
  return std::any_of(s.rays.begin(), s.rays.end(), [&](int j) { return angle_between(ray_angle(j), angle) <= kSameDirection; });
}

}  // namespace

std::vector<Junction> find_junctions(const Navigator& navigator, const PathPolyline& route) {
  std::vector<Junction> out;
  if (route.size() < 3) return out;
  const auto& cum = route.cumulative_arclength();
  const double inflation = 0.5 * navigator.clearance();
  std::optional<Point2> last;
  for (std::size_t k = 1; k + 1 < route.size(); ++k) {
    const Point2 v = route.vertices()[k];
    if (last && distance(*last, v) < kSameJunction) continue;
    const double in_angle = angle_of(route.point_at(std::max(0.0, cum[k] - kProbe)) - v);
    const double out_angle = angle_of(route.point_at(std::min(route.length(), cum[k] + kProbe)) - v);

    std::vector<double> reach(kRays);
    std::vector<bool> open(kRays);
    for (int j = 0; j < kRays; ++j) {
      reach[j] = free_distance(navigator.walls(), v, unit_from_angle(ray_angle(j)), kRayCap, inflation);
      open[j] = reach[j] >= kOpenReach;
    }
    Junction junction{k, v, {}, {}};
    for (const Sector& s : open_sectors(open)) {
      if (static_cast<int>(s.rays.size()) < kMinSectorRays) continue;
      if (sector_near(s, in_angle) || sector_near(s, out_angle)) continue;
      // Best ray: longest, ties toward the sector's middle.
      const int mid = s.rays[s.rays.size() / 2];
      int best = mid;
      for (int j : s.rays) {
        if (reach[j] > reach[best] + 1e-9 ||
            (std::abs(reach[j] - reach[best]) <= 1e-9 &&
             angle_between(ray_angle(j), ray_angle(mid)) < angle_between(ray_angle(best), ray_angle(mid))))
          best = j;
      }
      const double a = ray_angle(best);
      if (angle_between(a, in_angle) < kDistinctBranch || angle_between(a, out_angle) < kDistinctBranch) continue;
      junction.alternatives.push_back(unit_from_angle(a));
      junction.alternative_reach.push_back(reach[best]);
    }
    if (!junction.alternatives.empty()) {
      out.push_back(std::move(junction));
      last = v;
    }
  }
  return out;
}

PathPolyline plan_floor_plan_memory(const Navigator& navigator, Point2 start, double p_err, Rng& rng,
                                    int max_corruptions) {
  const auto near = navigator.nearest_exit(start);
  if (!near) throw UnreachableError("no exit reachable from the floor-plan start");
  const std::size_t exit = near->exit_index;
  PathPolyline current = navigator.path_to_exit(start, exit);
  if (p_err <= 0.0) return current;

  std::vector<Point2> prefix;
  std::vector<Point2> decided;
  int corruptions = 0;
  for (;;) {
    bool detoured = false;
    for (const Junction& j : find_junctions(navigator, current)) {
      const bool seen = std::any_of(decided.begin(), decided.end(),
                                    [&](Point2 p) { return distance(p, j.position) < kSameJunction; });
      if (seen) continue;
      decided.push_back(j.position);
      if (!rng.bernoulli(p_err) || corruptions >= max_corruptions) continue;
      const std::size_t pick = rng.index(j.alternatives.size());
      const double walk = std::min(kDetour, j.alternative_reach[pick] - 0.5);
      const Point2 w = j.position + j.alternatives[pick] * walk;
      PathPolyline back;
      try {
        back = navigator.path_to_exit(w, exit);
      } catch (const UnreachableError&) {
        continue;
      }
      for (std::size_t i = 0; i <= j.vertex; ++i) prefix.push_back(current.vertices()[i]);
      current = back;
      ++corruptions;
      detoured = true;
      break;
    }
    if (!detoured) break;
  }
  prefix.insert(prefix.end(), current.vertices().begin(), current.vertices().end());
  return PathPolyline::from_points_dedup(prefix);
}

PathPolyline plan_floor_plan_memory(const Scenario& scenario, Point2 start, Rng& rng, const PolicyParams& params) {
  const Navigator navigator(scenario, kDefaultClearance);
  return plan_floor_plan_memory(navigator, start, params.floor_plan_error, rng, params.max_corruptions);
}

}  // namespace evacsim
