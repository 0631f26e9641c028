#include <doctest.h>

#include <cmath>

#include "evacsim/agents.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace evacsim;
using namespace evacsim::testing;

namespace {

Scenario open_field() {
  Scenario sc;
  sc.id = "field";
  sc.bounds = {{-50, -50}, {50, 50}};
  return sc;
}

AgentState make_agent(int id, Point2 p, PolicyKind kind = PolicyKind::ScriptedGoal) {
  AgentState a;
  a.id = id;
  a.position = p;
  a.policy.kind = kind;
  return a;
}

struct SoloRun {
  bool exited = false;
  std::size_t exit = 0;
  double time = 0.0;
  double min_wall_gap = 1e9;
};

// Drives one agent with its policy until it leaves or time runs out.
SoloRun run_solo(const Scenario& sc, const Navigator& nav, AgentState a, const PolicyContext& base, double max_t,
                 std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<AgentState> world{a};
  SoloRun out;
  PolicyContext ctx = base;
  for (double t = 0.0; t < max_t; t += kPhysicsStep) {
    ctx.time = t;
    const Vec2 dir = desired_direction(world[0], ctx, world, rng);
    step_agents(world, std::vector<Vec2>{dir}, sc, kPhysicsStep);
    if (world[0].exited_via) {
      out.exited = true;
      out.exit = *world[0].exited_via;
      out.time = t + kPhysicsStep;
      return out;
    }
    out.min_wall_gap = std::min(out.min_wall_gap, nav.wall_distance(world[0].position) - world[0].radius);
  }
  out.time = max_t;
  return out;
}

const Scenario& hotel() {
  static const Scenario sc = load_scenario_file(data_path("hotel.json"));
  return sc;
}

}  // namespace

TEST_CASE("social force: equilibrium at desired velocity") {
  const Scenario sc = open_field();
  AgentState a = make_agent(0, {0, 0});
  a.velocity = {a.desired_speed, 0.0};
  const AgentState b = social_force_step(a, {}, sc, {1, 0}, 0.01);
  CHECK(b.velocity.x == doctest::Approx(a.desired_speed).epsilon(1e-15));
  CHECK(b.velocity.y == 0.0);
  CHECK(b.position.x == doctest::Approx(a.desired_speed * 0.01).epsilon(1e-12));
}

TEST_CASE("social force: relaxation from rest follows the closed form") {
  const Scenario sc = open_field();
  AgentState a = make_agent(0, {0, 0});
  a.desired_speed = 1.3;
  double worst = 0.0;
  for (int k = 1; k <= 500; ++k) {
    a = social_force_step(a, {}, sc, {0, 1}, 0.01);
    const double t = k * 0.01;
    const double expected = a.desired_speed * (1.0 - std::exp(-t / kRelaxationTime));
    worst = std::max(worst, std::abs(a.velocity.norm() - expected) / expected);
  }
  CHECK(worst <= 0.01);
}

TEST_CASE("social force: head-on pair passes without interpenetration") {
  const Scenario sc = open_field();
  std::vector<AgentState> w{make_agent(0, {-2.5, 0.0}), make_agent(1, {2.5, 0.01})};
  w[0].velocity = {1.1, 0.0};
  w[1].velocity = {-1.1, 0.0};
  double min_sep = 1e9;
  for (int k = 0; k < 500; ++k) {
    step_agents(w, std::vector<Vec2>{{1, 0}, {-1, 0}}, sc, 0.01);
    min_sep = std::min(min_sep, distance(w[0].position, w[1].position));
  }
  CHECK(min_sep >= w[0].radius + w[1].radius - 1e-3);
  CHECK(w[0].position.x > w[1].position.x);  // passed each other
}

TEST_CASE("social force: wall non-penetration and speed cap on random pushes") {
  const Scenario& sc = hotel();
  const Navigator nav(sc, kDefaultClearance);
  Rng rng(77);
  std::vector<AgentState> w;
  for (int i = 0; i < 12; ++i) {
    AgentState a = make_agent(i, sc.start_positions[i % sc.start_positions.size()] + Vec2{0.3 * (i / 8), 0.0});
    a.desired_speed = rng.uniform(0.9, 1.3);
    w.push_back(a);
  }
  for (int k = 0; k < 1500; ++k) {
    std::vector<Vec2> dirs;
    for (std::size_t i = 0; i < w.size(); ++i) dirs.push_back(unit_from_angle(rng.uniform(-3.14, 3.14)));
    step_agents(w, dirs, sc, 0.01);
    for (const AgentState& a : w) {
      if (!a.active()) continue;
      REQUIRE(nav.wall_distance(a.position) >= a.radius - 1e-3);
      REQUIRE(a.velocity.norm() <= kSpeedCapFactor * a.desired_speed + 1e-12);
    }
  }
}

TEST_CASE("stepping is deterministic") {
  const Scenario& sc = hotel();
  const Navigator nav(sc, kDefaultClearance);
  auto run = [&] {
    Rng rng(5);
    std::vector<AgentState> w;
    for (int i = 0; i < 6; ++i) w.push_back(make_agent(i, sc.start_positions[i]));
    w[2].policy.kind = PolicyKind::ExitSigns;
    w[3].policy.kind = PolicyKind::FollowOthers;
    w[4].policy.kind = PolicyKind::FloorPlanMemory;
    PolicyContext ctx{&sc, &nav, 0.0, {}, sc.exit_signs};
    for (int k = 0; k < 800; ++k) {
      ctx.time = k * 0.01;
      std::vector<Vec2> dirs;
      for (AgentState& a : w) dirs.push_back(a.active() ? desired_direction(a, ctx, w, rng) : Vec2{});
      step_agents(w, dirs, sc, 0.01);
    }
    return w;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].position == b[i].position);
    CHECK(a[i].velocity == b[i].velocity);
  }
}

TEST_CASE("validate_agent enforces the state invariants") {
  AgentState a = make_agent(0, {0, 0});
  CHECK_NOTHROW(validate_agent(a));
  a.radius = 0.4;
  CHECK_THROWS_AS(validate_agent(a), InvariantViolation);
  a.radius = 0.25;
  a.velocity = {2.0, 0.0};
  CHECK_THROWS_AS(validate_agent(a), InvariantViolation);
  a.velocity = {};
  a.policy.params.floor_plan_error = 1.5;
  CHECK_THROWS_AS(validate_agent(a), InvariantViolation);
}

TEST_CASE("desired_direction: GuidingLine on a straight line") {
  const Scenario sc = corridor_scenario();
  const Navigator nav(sc, kDefaultClearance);
  const std::vector<PathPolyline> lines{PathPolyline({{1.0, 1.0}, {19.7, 1.0}})};
  PolicyContext ctx{&sc, &nav, 0.0, lines, {}};
  AgentState a = make_agent(0, {6.0, 1.0}, PolicyKind::GuidingLine);
  Rng rng(1);
  const Vec2 d = desired_direction(a, ctx, std::span<const AgentState>(&a, 1), rng);
  CHECK(d.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("desired_direction: ExitSigns with one visible sign") {
  const Scenario sc = square_room_scenario();
  const Navigator nav(sc, kDefaultClearance);
  const std::vector<SignPlacement> signs{{{5.0, 8.0}, {0.0, -1.0}, {0.0, 1.0}, 10.0}};
  PolicyContext ctx{&sc, &nav, 0.0, {}, signs};
  AgentState a = make_agent(0, {5.0, 4.0}, PolicyKind::ExitSigns);
  Rng rng(1);
  const Vec2 d = desired_direction(a, ctx, std::span<const AgentState>(&a, 1), rng);
  CHECK(d.x == doctest::Approx(0.0));
  CHECK(d.y == doctest::Approx(1.0));

  SUBCASE("behind the sign it cannot be read") {
    AgentState b = make_agent(0, {5.0, 9.0}, PolicyKind::ExitSigns);
    CHECK_FALSE(sign_visible(sc, signs[0], b.position, std::numbers::pi / 3));
  }
}

TEST_CASE("desired_direction: FollowOthers picks the documented candidate") {
  const Scenario& sc = hotel();
  const Navigator nav(sc, kDefaultClearance);
  PolicyContext ctx{&sc, &nav, 0.0, {}, {}};
  Rng layout(3);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<AgentState> world;
    AgentState f = make_agent(0, {layout.uniform(2.0, 38.0), layout.uniform(6.4, 7.6)}, PolicyKind::FollowOthers);
    world.push_back(f);
    for (int i = 1; i <= 4; ++i) {
      AgentState o = make_agent(10 - i, {layout.uniform(2.0, 38.0), layout.uniform(6.4, 7.6)});
      if (trial % 4 == 0 && i == 2) o.position = world[1].position + Vec2{0.0, 0.0};  // exact tie
      o.velocity = unit_from_angle(layout.uniform(-3.0, 3.0)) * (i == 4 ? 0.1 : 1.0);
      world.push_back(o);
    }
    // Brute-force rule check.
    const double own = *nav.distance_to_exit(f.position, 0) < *nav.distance_to_exit(f.position, 1)
                           ? *nav.distance_to_exit(f.position, 0)
                           : *nav.distance_to_exit(f.position, 1);
    std::optional<int> expect;
    double best = 1e9;
    for (std::size_t i = 1; i < world.size(); ++i) {
      const AgentState& o = world[i];
      if (o.velocity.norm() <= 0.2 || !line_of_sight(sc, f.position, o.position)) continue;
      const double theirs = std::min(*nav.distance_to_exit(o.position, 0), *nav.distance_to_exit(o.position, 1));
      if (!(theirs < own)) continue;
      const double d = distance(f.position, o.position);
      if (d < best || (d == best && o.id < *expect)) {
        best = d;
        expect = o.id;
      }
    }
    CHECK(select_leader(world[0], ctx, world) == expect);
    if (expect) {
      Rng rng(1);
      const auto target = std::find_if(world.begin(), world.end(), [&](const AgentState& o) { return o.id == *expect; });
      const Vec2 d = desired_direction(world[0], ctx, world, rng);
      // Right behind the leader the follower copies its heading.
      const Vec2 want = distance(target->position, f.position) > 0.3 ? normalized(target->position - f.position)
                                                                     : normalized(target->velocity);
      CHECK(d.x == doctest::Approx(want.x));
      CHECK(d.y == doctest::Approx(want.y));
    }
  }
}

TEST_CASE("wall following keeps the wall on the right") {
  const Scenario sc = square_room_scenario();
  const Navigator nav(sc, kDefaultClearance);
  auto dir = [&](Point2 p, double heading) {
    AgentState a = make_agent(0, p, PolicyKind::ExitSigns);
    a.heading = heading;
    return wall_following_direction(nav, a, 0.0);
  };
  // Walking east along the south wall: keep going east.
  Vec2 d = dir({5.0, 0.4}, 0.0);
  CHECK(d.x == doctest::Approx(1.0));
  CHECK(std::abs(d.y) < 1e-12);
  // Facing the east wall with the south wall on the right: turn left.
  d = dir({9.5, 0.45}, 0.0);
  CHECK(d.y > 0.9);
  // Far from the walls: walk up to the nearest one.
  d = dir({5.0, 3.0}, 1.0);
  CHECK(d.y == doctest::Approx(-1.0));
  // Arriving next to a wall: turn so that it is on the right.
  d = dir({5.0, 0.6}, -std::numbers::pi / 2);
  CHECK(d.x == doctest::Approx(1.0));
}

TEST_CASE("plan_floor_plan_memory: p_err 0 is the shortest path") {
  const Scenario& sc = hotel();
  Rng rng(9);
  PolicyParams p;
  p.floor_plan_error = 0.0;
  for (const Point2 s : sc.start_positions) {
    const PathPolyline plan = plan_floor_plan_memory(sc, s, rng, p);
    const PathPolyline ref = shortest_path(sc, s, *nearest_exit(sc, s).exit);
    CHECK(plan.vertices() == ref.vertices());
  }
}

TEST_CASE("plan_floor_plan_memory: T junction") {
  const Scenario sc = t_junction_scenario();
  const Navigator nav(sc, kDefaultClearance);
  const Point2 start = sc.start_positions[0];
  REQUIRE(sc.exits[nav.nearest_exit(start)->exit_index].id == "A");
  auto wrong_first = [](const PathPolyline& p) {
    for (const Point2& v : p.vertices())
      if (v.x > 11.5) return true;
    return false;
  };

  const auto junctions = find_junctions(nav, nav.path_to_exit(start, 0));
  REQUIRE(junctions.size() == 1);
  REQUIRE(junctions[0].alternatives.size() == 1);
  CHECK(junctions[0].alternatives[0].x > 0.9);

  SUBCASE("p_err = 1 always takes the wrong branch first") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed);
      const PathPolyline p = plan_floor_plan_memory(nav, start, 1.0, rng);
      CHECK(wrong_first(p));
      CHECK(distance(p.back(), sc.exits[0].midpoint()) < 1e-9);
    }
  }
  SUBCASE("p_err = 0.5 is a fair coin") {
    int wrong = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rng(derive_seed(42, seed));
      wrong += wrong_first(plan_floor_plan_memory(nav, start, 0.5, rng)) ? 1 : 0;
    }
    CHECK(std::abs(wrong / 1000.0 - 0.5) <= 0.05);
  }
}

TEST_CASE("GuidingLine agents reach the correct exit on every fixture") {
  std::vector<Scenario> fixtures{corridor_scenario(), two_exit_corridor_scenario(), t_junction_scenario(),
                                 square_room_scenario(), hotel()};
  for (const Scenario& sc : fixtures) {
    const Navigator nav(sc, kDefaultClearance);
    for (const Point2 s : sc.start_positions) {
      const auto near = nav.nearest_exit(s);
      REQUIRE(near);
      const Exit& exit = sc.exits[near->exit_index];
      std::vector<PathPolyline> lines;
      const auto it = sc.guiding_lines.find(exit.id);
      lines.push_back(it != sc.guiding_lines.end() ? it->second : nav.path_to_exit(s, near->exit_index));
      PolicyContext ctx{&sc, &nav, 0.0, lines, {}};
      AgentState a = make_agent(0, s, PolicyKind::GuidingLine);
      const double bound = 3.0 * near->distance / a.desired_speed + 1.0;
      const SoloRun r = run_solo(sc, nav, a, ctx, bound);
      INFO(sc.id << " start " << s.x << "," << s.y);
      CHECK(r.exited);
      CHECK(r.exit == near->exit_index);
      CHECK(r.min_wall_gap >= -1e-3);
    }
  }
}

TEST_CASE("ExitSigns agents in the hotel leave the building") {
  const Scenario& sc = hotel();
  const Navigator nav(sc, kDefaultClearance);
  PolicyContext ctx{&sc, &nav, 0.0, {}, sc.exit_signs};
  for (const Point2 s : sc.start_positions) {
    const SoloRun r = run_solo(sc, nav, make_agent(0, s, PolicyKind::ExitSigns), ctx, 300.0);
    INFO("start " << s.x << "," << s.y << " t=" << r.time);
    CHECK(r.exited);
  }
}
