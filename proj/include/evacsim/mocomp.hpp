#pragma once

#include <optional>
#include <span>
#include <vector>

#include "evacsim/errors.hpp"
#include "evacsim/geometry.hpp"
#include "evacsim/polyline.hpp"

namespace evacsim {

class Navigator;

struct Pose {
  Point2 position;
  /// Radians in (-pi, pi].
  double heading = 0.0;
};

/// Physical tracking region. `origin` is the centre of the rectangle or disc;
/// paths must stay `margin` away from its boundary.
struct Workspace {
  enum class Shape { Rectangle, Disc };
  Shape shape = Shape::Rectangle;
  double width = 4.0;
  double height = 4.0;
  double radius = 0.0;
  Point2 origin;
  double margin = 0.1;

  static Workspace rectangle(double width, double height, Point2 origin = {}, double margin = 0.1);
  static Workspace disc(double radius, Point2 origin = {}, double margin = 0.1);

  /// Inside the inset region, with `tol` slack.
  bool contains(Point2 p, double tol = 1e-9) const;
  /// Radius of the largest disc that fits the inset region.
  double inscribed_radius() const;
};

/// Throws InvariantViolation unless every dimension exceeds twice the margin.
void validate_workspace(const Workspace& workspace);

/// Constant-curvature piece; positive curvature turns left.
struct Arc {
  double curvature = 0.0;
  double length = 0.0;
  Pose start;

  Point2 point_at(double t) const;
  double heading_at(double t) const { return wrap_angle(start.heading + curvature * t); }
  Pose end() const { return {point_at(length), heading_at(length)}; }
};

/// Exact containment of an arc in the inset workspace.
bool arc_inside(const Arc& arc, const Workspace& workspace, double tol = 1e-9);

struct CompressedPath {
  std::vector<Arc> arcs;
  double total_length = 0.0;
  /// Discrete heading change between arc i and arc i+1.
  std::vector<double> waypoint_turns;

  /// Arc index at `s`. A waypoint belongs to the arc that starts there.
  std::size_t arc_at(double s) const;
  double arc_start(std::size_t i) const;
  Pose pose_at(double s) const;
  double curvature_at(double s) const { return arcs[arc_at(s)].curvature; }
  /// Integral of the curvature over [s0, s1], waypoint turns excluded.
  double curvature_turn(double s0, double s1) const;
  /// Sum of squared curvatures, the quantity the solver minimizes.
  double cost() const;
  /// Poses every `step` metres plus the end pose.
  std::vector<Pose> sample(double step) const;
};

/// Chains one arc per target segment from `start`, applying the target's
/// turning angle at each interior waypoint.
CompressedPath build_compressed_path(std::span<const double> curvatures, const PathPolyline& target, Pose start);

struct SolverOptions {
  double kappa_max = 1.0;
  /// Curvature grid of the feasibility search has 2 * grid_steps + 1 values.
  int grid_steps = 20;
  /// Beam search keeps at most this many partial chains, one per cell of
  /// beam_cell metres and 2 pi / beam_headings radians.
  std::size_t beam_width = 1500;
  double beam_cell = 0.2;
  int beam_headings = 24;
  int max_sweeps = 60;
};

/// Fits the target into the workspace: arc lengths and waypoint turns equal
/// the target's, every point stays inside, and sum of kappa^2 is locally
/// minimal. The solver tries the all-straight solution, then a beam search
/// over a curvature grid for a cheap feasible chain, then coordinate descent
/// that shrinks each curvature by bisection while the whole chain stays
/// feasible. Throws InfeasibleError when the search finds nothing.
CompressedPath transform_path(const PathPolyline& target, const Workspace& workspace, Pose user_start,
                              const SolverOptions& options = {});

/// Expected target path: the shortest path toward `goal` truncated at
/// `horizon`, or a straight ray along the heading without a goal (or when the
/// goal cannot be reached).
PathPolyline predict_target_path(const Navigator& navigator, Pose avatar, std::optional<Point2> goal, double horizon);

struct GuidanceParams {
  double k_p = 0.5;
  double max_correction = 0.2;
};

/// Rotation of the rendered view relative to the physical heading at progress
/// `s`: tangent difference plus a clamped cross-track correction that steers
/// the user back onto the compressed path.
double guidance_rotation(const Pose& user_pose, const CompressedPath& compressed, const PathPolyline& target,
                         double s, const GuidanceParams& params = {});

/// Forward distance and heading change of one tick.
struct MotionStep {
  double forward = 0.0;
  double turn = 0.0;
};

/// Maps a physical step taken at progress `s` into the target environment:
/// distance is kept and the curvature-induced turn is removed.
MotionStep map_user_motion(const CompressedPath& compressed, const PathPolyline& target, double s, MotionStep user);

struct CompressorOptions {
  double horizon = 10.0;
  double replan_distance = 0.5;
  SolverOptions solver;
  GuidanceParams guidance;
};

/// Running telepresence mapping: predicts the target path ahead of the avatar,
/// keeps a compressed path for it, and replans when the prediction moves more
/// than `replan_distance` (Hausdorff) away from the one in use. Without a
/// feasible compression the mapping falls back to identity turns.
class MotionCompressor {
 public:
  MotionCompressor(const Navigator& navigator, Workspace workspace, CompressorOptions options = {});

  void reset(Pose avatar, Pose user, std::optional<Point2> goal = std::nullopt);
  /// Consumes the next tracked physical pose and returns the avatar step.
  /// `avatar` is where the avatar actually is before the step.
  MotionStep track(Pose user, Pose avatar, std::optional<Point2> goal = std::nullopt);

  double guidance() const;
  double progress() const { return s_; }
  int replans() const { return replans_; }
  const std::optional<CompressedPath>& compressed() const { return compressed_; }
  const PathPolyline& target() const { return target_; }

 private:
  void replan(PathPolyline prediction);

  const Navigator* navigator_;
  Workspace workspace_;
  CompressorOptions options_;
  Pose avatar_;
  Pose user_;
  PathPolyline target_;
  std::optional<CompressedPath> compressed_;
  double s_ = 0.0;
  int replans_ = 0;
};

}  // namespace evacsim
