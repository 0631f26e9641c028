#include <chrono>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "evacsim/mocomp.hpp"
#include "evacsim/navigation.hpp"
#include "evacsim/scenario.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace evacsim;
using namespace evacsim::testing;

namespace {

constexpr double kPi = std::numbers::pi;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Everything the corpus checks, for one compressed path.
void check_compressed(const CompressedPath& c, const PathPolyline& target, const Workspace& ws) {
  REQUIRE(c.arcs.size() + 1 == target.size());
  const auto& cum = target.cumulative_arclength();
  double sum = 0.0;
  for (std::size_t i = 0; i < c.arcs.size(); ++i) {
    const double want = cum[i + 1] - cum[i];
    CHECK(std::abs(c.arcs[i].length - want) <= 1e-6 * want);
    sum += c.arcs[i].length;
  }
  CHECK(std::abs(c.total_length - sum) <= 1e-9);
  CHECK(std::abs(c.total_length - target.length()) <= 1e-6 * target.length());
  CHECK(c.waypoint_turns.size() + 2 == target.size());
  CHECK(max_turn_error(c.arcs, target) <= 1e-6);
  CHECK(arc_chain_gap(c.arcs) <= 1e-9);
  CHECK(max_excursion(sample_arcs(c.arcs, 0.01), ws) <= 1e-6);
}

}  // namespace

TEST_CASE("transform_path: a target that already fits stays straight") {
  const Workspace ws = Workspace::rectangle(4.0, 4.0);
  const PathPolyline target({{-1.5, -1.5}, {1.0, -1.5}, {1.0, 1.0}});
  const CompressedPath c = transform_path(target, ws, {{-1.5, -1.5}, 0.0});
  for (const Arc& a : c.arcs) CHECK(a.curvature == 0.0);
  CHECK(c.cost() == 0.0);
  const auto pts = sample_arcs(c.arcs, 0.01);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k)
    CHECK(distance(pts[k], target.point_at(0.01 * static_cast<double>(k))) < 1e-9);
}

TEST_CASE("transform_path: straight 4 pi target in a 2.2 m disc becomes one arc") {
  const Workspace ws = Workspace::disc(2.2, {0.0, 0.0}, 0.1);
  const double len = 4.0 * kPi;
  const PathPolyline target({{0.0, -2.0}, {len, -2.0}});
  const auto t0 = std::chrono::steady_clock::now();
  const CompressedPath c = transform_path(target, ws, {{0.0, -2.0}, 0.0});
  CHECK(seconds_since(t0) < 1.0);
  REQUIRE(c.arcs.size() == 1);
  CHECK(std::abs(c.total_length - len) <= 1e-6);
  CHECK(std::abs(c.arcs[0].curvature) <= 1.0 / 2.0);
  check_compressed(c, target, ws);
  // The hand-made circle of radius 2 m is feasible and costs 0.25.
  const double circle[] = {0.5};
  const CompressedPath by_hand = build_compressed_path(circle, target, {{0.0, -2.0}, 0.0});
  CHECK(max_excursion(sample_arcs(by_hand.arcs, 0.01), ws) <= 1e-9);
  CHECK(c.cost() <= by_hand.cost() + 1e-12);
}

TEST_CASE("transform_path: L-shaped target keeps the right-angle turn") {
  const Workspace ws = Workspace::rectangle(4.0, 4.0);
  const PathPolyline target({{0.0, 0.0}, {6.0, 0.0}, {6.0, 6.0}});
  const CompressedPath c = transform_path(target, ws, {{0.6, -0.5}, 0.0});
  REQUIRE(c.arcs.size() == 2);
  CHECK(c.arcs[0].length == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(c.arcs[1].length == doctest::Approx(6.0).epsilon(1e-12));
  REQUIRE(c.waypoint_turns.size() == 1);
  CHECK(c.waypoint_turns[0] == doctest::Approx(kPi / 2).epsilon(1e-12));
  // Heading just after s = 6 minus heading just before it.
  const double before = c.arcs[0].start.heading + c.arcs[0].curvature * 6.0;
  CHECK(std::abs(std::remainder(c.pose_at(6.0).heading - before - kPi / 2, 2 * kPi)) < 1e-9);
  check_compressed(c, target, ws);
}

TEST_CASE("transform_path: random corpus keeps length, turns and containment") {
  const Workspace ws = Workspace::rectangle(4.0, 4.0);
  Rng rng(20240611);
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 100; ++k) {
    const PathPolyline target = random_compressible_path(rng, ws, {{0.0, -0.9}, 0.0});
    CAPTURE(k);
    CHECK(target.length() <= 100.0 + 1e-9);
    CHECK(target.size() <= 20);
    const CompressedPath c = transform_path(target, ws, {{0.0, -0.9}, 0.0});
    check_compressed(c, target, ws);
    for (const Arc& a : c.arcs) CHECK(std::abs(a.curvature) <= 1.0 + 1e-12);
  }
  CHECK(seconds_since(t0) < 30.0);
}

TEST_CASE("transform_path: never costlier than hand-built feasible solutions") {
  const Workspace square = Workspace::rectangle(4.0, 4.0);
  struct Case {
    PathPolyline target;
    Workspace ws;
    Pose start;
    std::vector<double> kappa;
  };
  const std::vector<Case> bank{
      {PathPolyline({{0.0, 0.0}, {20.0, 0.0}}), square, {{0.0, -0.9}, 0.0}, {1.0}},
      {PathPolyline({{0.0, 0.0}, {20.0, 0.0}}), square, {{0.0, -1.8}, 0.0}, {1.0 / 1.8}},
      {PathPolyline({{0.0, 0.0}, {4.0 * kPi, 0.0}}), Workspace::disc(2.2), {{0.0, -2.0}, 0.0}, {0.5}},
      {PathPolyline({{0.0, 0.0}, {6.0, 0.0}, {6.0, 6.0}}), square, {{0.6, -0.5}, 0.0}, {1.0, 1.0}},
      {PathPolyline({{0.0, 0.0}, {3.0, 0.0}, {3.0, 3.0}, {0.0, 3.0}}), square, {{-1.5, -1.5}, 0.0}, {0.0, 0.0, 0.0}},
  };
  for (std::size_t i = 0; i < bank.size(); ++i) {
    CAPTURE(i);
    const Case& b = bank[i];
    const CompressedPath by_hand = build_compressed_path(b.kappa, b.target, b.start);
    REQUIRE(max_excursion(sample_arcs(by_hand.arcs, 0.01), b.ws) <= 1e-9);
    const CompressedPath solved = transform_path(b.target, b.ws, b.start);
    CHECK(solved.cost() <= by_hand.cost() + 1e-12);
  }
}

TEST_CASE("transform_path: errors") {
  const Workspace ws = Workspace::rectangle(4.0, 4.0);
  const PathPolyline straight({{0.0, 0.0}, {30.0, 0.0}});
  SolverOptions gentle;
  gentle.kappa_max = 0.2;  // radius 5 m cannot loop inside 3.8 m
  CHECK_THROWS_AS(transform_path(straight, ws, {{0.0, 0.0}, 0.0}, gentle), InfeasibleError);
  CHECK_THROWS_AS(transform_path(straight, ws, {{5.0, 0.0}, 0.0}), InfeasibleError);
  CHECK_THROWS_AS(transform_path(PathPolyline({{0.0, 0.0}}), ws, {{0.0, 0.0}, 0.0}), Error);
  CHECK_THROWS_AS(Workspace::rectangle(0.2, 4.0, {}, 0.1), InvariantViolation);
  CHECK_THROWS_AS(Workspace::disc(1.0, {}, -0.1), InvariantViolation);
}

TEST_CASE("arc_inside agrees with dense sampling") {
  Rng rng(5);
  const Workspace rect = Workspace::rectangle(4.0, 3.0, {1.0, -0.5}, 0.2);
  const Workspace disc = Workspace::disc(2.0, {0.5, 0.5}, 0.1);
  int inside = 0;
  for (int k = 0; k < 2000; ++k) {
    const Workspace& ws = k % 2 ? rect : disc;
    const Arc arc{rng.uniform(-2.0, 2.0), rng.uniform(0.1, 5.0),
                  {ws.origin + Vec2{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)}, rng.uniform(-kPi, kPi)}};
    const double excursion = max_excursion(sample_arcs({arc}, 0.001), ws);
    if (std::abs(excursion) < 1e-5) continue;  // too close to call by sampling
    CHECK(arc_inside(arc, ws) == (excursion <= 0.0));
    inside += excursion <= 0.0;
  }
  CHECK(inside > 50);
}

TEST_CASE("guidance_rotation examples") {
  SUBCASE("straight and aligned") {
    const PathPolyline target({{0.0, 0.0}, {3.0, 0.0}});
    const CompressedPath c = transform_path(target, Workspace::rectangle(4.0, 4.0), {{-1.5, 0.0}, 0.0});
    for (double s = 0.0; s <= 3.0; s += 0.25) CHECK(guidance_rotation(c.pose_at(s), c, target, s) == 0.0);
  }
  SUBCASE("circle against a straight target") {
    const PathPolyline target({{0.0, -2.0}, {4.0 * kPi, -2.0}});
    const CompressedPath c = transform_path(target, Workspace::disc(2.2), {{0.0, -2.0}, 0.0});
    const double k = c.arcs[0].curvature;
    CHECK(guidance_rotation(c.pose_at(0.0), c, target, 0.0) == doctest::Approx(0.0));
    const double s = kPi * 2.0;
    CHECK(std::abs(guidance_rotation(c.pose_at(s), c, target, s) - std::remainder(k * s, 2 * kPi)) <= 1e-6);
  }
  SUBCASE("lateral offset pulls back toward the path") {
    const PathPolyline target({{0.0, 0.0}, {3.0, 0.0}});
    const CompressedPath c = transform_path(target, Workspace::rectangle(4.0, 4.0), {{-1.5, 0.0}, 0.0});
    const Pose left{{-0.5, 0.1}, 0.0};
    const Pose right{{-0.5, -0.1}, 0.0};
    CHECK(guidance_rotation(left, c, target, 1.0) == doctest::Approx(-0.05));
    CHECK(guidance_rotation(right, c, target, 1.0) == doctest::Approx(0.05));
    const Pose far{{-0.5, 2.0}, 0.0};
    CHECK(guidance_rotation(far, c, target, 1.0) == doctest::Approx(-0.2));
  }
}

TEST_CASE("map_user_motion examples") {
  const PathPolyline target({{0.0, 0.0}, {2.0, 0.0}});
  const double zero[] = {0.0};
  const double half[] = {0.5};
  const CompressedPath flat = build_compressed_path(zero, target, {{0.0, 0.0}, 0.0});
  const CompressedPath bent = build_compressed_path(half, target, {{0.0, 0.0}, 0.0});
  MotionStep m = map_user_motion(flat, target, 0.3, {0.1, 0.0});
  CHECK(m.forward == 0.1);
  CHECK(m.turn == 0.0);
  m = map_user_motion(bent, target, 0.3, {0.1, 0.05});
  CHECK(m.forward == 0.1);
  CHECK(std::abs(m.turn) < 1e-15);
  CHECK_THROWS_AS(map_user_motion(bent, target, 0.3, {0.6, 0.0}), Error);

  SUBCASE("random walk keeps total distance") {
    Rng rng(8);
    const PathPolyline long_target({{0.0, 0.0}, {150.0, 0.0}});
    const CompressedPath c = transform_path(long_target, Workspace::rectangle(4.0, 4.0), {{0.0, -0.9}, 0.0});
    double user = 0.0;
    double avatar = 0.0;
    double s = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const MotionStep step{rng.uniform(0.0, 0.02), rng.uniform(-0.05, 0.05)};
      const MotionStep out = map_user_motion(c, long_target, s, step);
      user += step.forward;
      avatar += out.forward;
      s += step.forward;
    }
    CHECK(std::abs(avatar - user) <= 1e-6 * user);
  }
}

TEST_CASE("round trip: tracking the compressed path walks the target") {
  Rng rng(77);
  const Workspace ws = Workspace::rectangle(4.0, 4.0);
  for (int trial = 0; trial < 5; ++trial) {
    const PathPolyline target = random_compressible_path(rng, ws, {{0.0, -0.9}, 0.0}, 1.0, 60.0, 12);
    const CompressedPath c = transform_path(target, ws, {{0.0, -0.9}, 0.0});
    const auto& cum = target.cumulative_arclength();
    const int turns = static_cast<int>(target.size()) - 2;
    const double h = target.length() / (10000 - turns - static_cast<int>(target.size()));

    Point2 avatar = target.front();
    double heading = target.heading_at(0.0);
    std::size_t next_vertex = 1;
    double worst = 0.0;
    double s = 0.0;
    int steps = 0;
    while (next_vertex < target.size()) {
      const double to_vertex = cum[next_vertex] - s;
      const double f = std::min(h, to_vertex);
      // The user walks the arc; its heading change is read off the path.
      const double user_turn = wrap_angle(c.pose_at(s + f - 1e-12).heading - c.pose_at(s).heading);
      const MotionStep out = map_user_motion(c, target, s, {f, user_turn});
      heading += out.turn;
      avatar += unit_from_angle(heading) * out.forward;
      s += f;
      ++steps;
      if (f == to_vertex) {
        worst = std::max(worst, distance(avatar, target.vertices()[next_vertex]));
        if (next_vertex + 1 < target.size()) {
          // Turn on the spot at the waypoint.
          const MotionStep turn = map_user_motion(c, target, s, {0.0, c.waypoint_turns[next_vertex - 1]});
          heading += turn.turn;
          ++steps;
        }
        ++next_vertex;
      }
    }
    CAPTURE(trial);
    CHECK(steps >= 9000);
    CHECK(steps <= 10000);
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("predict_target_path examples") {
  const Scenario sc = load_scenario_file(data_path("hotel.json"));
  const Navigator nav(sc, kDefaultClearance);
  PathPolyline p = predict_target_path(nav, {{21.0, 7.0}, 0.0}, std::nullopt, 5.0);
  REQUIRE(p.size() == 2);
  CHECK(distance(p.back(), {26.0, 7.0}) < 1e-12);
  p = predict_target_path(nav, {{21.0, 7.0}, 0.0}, Point2{24.0, 7.0}, 5.0);
  CHECK(p.length() == doctest::Approx(3.0));
  // Goal inside a room across the corridor: truncated shortest path.
  const Point2 goal{9.0, 11.0};
  p = predict_target_path(nav, {{21.0, 3.0}, 0.0}, goal, 5.0);
  const PathPolyline full = Navigator(sc, kDefaultClearance).path({21.0, 3.0}, goal);
  CHECK(full.length() > 5.0);
  CHECK(p.length() == doctest::Approx(5.0));
  CHECK(hausdorff_distance(p, full.truncated(5.0), 0.01) < 1e-9);
  CHECK_THROWS_AS(predict_target_path(nav, {{21.0, 7.0}, 0.0}, std::nullopt, 0.0), Error);
}

TEST_CASE("MotionCompressor keeps a tracking user inside the workspace") {
  const Scenario sc = load_scenario_file(data_path("hotel.json"));
  const Navigator nav(sc, kDefaultClearance);
  const Workspace ws = Workspace::rectangle(4.0, 4.0);
  MotionCompressor mc(nav, ws);
  Pose avatar{{38.0, 7.0}, kPi};
  Pose user{{0.0, -0.9}, kPi};
  mc.reset(avatar, user);
  REQUIRE(mc.compressed());
  double walked = 0.0;
  for (int k = 0; k < 2000; ++k) {
    // An ideal user follows the current compressed path 1 cm per tick.
    const auto& c = *mc.compressed();
    const Pose next = c.pose_at(std::min(mc.progress() + 0.01, c.total_length));
    CHECK(ws.contains(next.position, 1e-9));
    const MotionStep step = mc.track(next, avatar);
    avatar.heading = wrap_angle(avatar.heading + step.turn);
    avatar.position += unit_from_angle(avatar.heading) * step.forward;
    walked += step.forward;
    if (!mc.compressed()) break;
  }
  REQUIRE(mc.compressed());
  // Steps are measured as chords between tracked poses, a hair short of the arc.
  CHECK(walked == doctest::Approx(20.0).epsilon(1e-4));
  CHECK(mc.replans() > 1);
  // The avatar walked straight down the corridor.
  CHECK(std::abs(avatar.position.y - 7.0) < 1e-3);
  CHECK(avatar.position.x == doctest::Approx(18.0).epsilon(1e-4));
}
