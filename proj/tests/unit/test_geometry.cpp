#include <doctest.h>

#include "evacsim/geometry.hpp"
#include "evacsim/polyline.hpp"
#include "evacsim/rng.hpp"

using namespace evacsim;

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
}

TEST_CASE("open-segment blocking treats touching as blocking except at query endpoints") {
  const Segment wall{{0, -1}, {0, 1}};
  CHECK(blocks_open_segment(wall, {-1, 0}, {1, 0}));
  CHECK_FALSE(blocks_open_segment(wall, {-1, 0}, {0, 0}));      // ends on the wall
  CHECK(blocks_open_segment(wall, {-1, 1}, {1, 1}));            // grazes the wall end
  CHECK_FALSE(blocks_open_segment(wall, {-1, 1.01}, {1, 1.01}));
  CHECK(blocks_open_segment(wall, {0, -2}, {0, 2}));            // collinear overlap
  CHECK_FALSE(blocks_open_segment(wall, {0, 1.5}, {0, 3}));
  CHECK_FALSE(blocks_open_segment(wall, {2, 2}, {2, 2}));
}

TEST_CASE("segment distance") {
  CHECK(segment_segment_distance({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}) == doctest::Approx(1.0));
  CHECK(segment_segment_distance({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}) == 0.0);
  CHECK(segment_segment_distance({{0, 0}, {1, 0}}, {{2, 1}, {3, 5}}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("polyline arc length, projection and truncation") {
  const PathPolyline p({{0, 0}, {3, 0}, {3, 4}});
  CHECK(p.length() == doctest::Approx(7.0));
  CHECK(p.cumulative_arclength()[1] == doctest::Approx(3.0));
  CHECK(p.point_at(5.0).y == doctest::Approx(2.0));
  CHECK(p.tangent_at(5.0).y == doctest::Approx(1.0));
  const auto proj = p.project({4, 1});
  CHECK(proj.s == doctest::Approx(4.0));
  CHECK(proj.distance == doctest::Approx(1.0));
  CHECK(p.truncated(5.0).length() == doctest::Approx(5.0));
  CHECK(p.turning_angles().at(0) == doctest::Approx(std::numbers::pi / 2));
  CHECK_THROWS_AS(PathPolyline({{0, 0}, {0, 0}}), std::invalid_argument);
}

TEST_CASE("polyline cumulative arc length matches segment sums on random paths") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts;
    for (std::size_t k = 0, n = 2 + rng.index(20); k < n; ++k) pts.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50)});
    const PathPolyline p(pts);
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) sum += distance(pts[i - 1], pts[i]);
      CHECK(std::abs(p.cumulative_arclength()[i] - sum) <= 1e-9);
      if (i > 0) CHECK(p.cumulative_arclength()[i] > p.cumulative_arclength()[i - 1]);
    }
  }
}

TEST_CASE("rng streams are reproducible and uniform in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
}
