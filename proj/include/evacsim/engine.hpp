#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "evacsim/agents.hpp"
#include "evacsim/mocomp.hpp"
#include "evacsim/navigation.hpp"
#include "evacsim/rng.hpp"
#include "evacsim/scenario.hpp"

namespace evacsim {

enum class Condition { GuidingLines, SimulatedAgents, ExitSigns, FloorPlan, None };

/// The four study conditions in their canonical order.
inline constexpr Condition kStudyConditions[] = {Condition::GuidingLines, Condition::SimulatedAgents,
                                                 Condition::ExitSigns, Condition::FloorPlan};

std::string_view to_string(Condition condition);
/// Case-insensitive. Throws Error on unknown names.
Condition condition_from_string(std::string_view name);

/// Policy a scripted stand-in uses under each condition. None explores.
RouteChoicePolicy policy_for(Condition condition);

inline constexpr double kDefaultTimeout = 600.0;
inline constexpr double kDefaultSamplingRate = 10.0;
inline constexpr double kMaxAvatarSpeed = 2.0;
inline constexpr double kMaxAvatarTurnRate = 2.0 * 3.14159265358979323846;
inline constexpr double kScriptedDesiredSpeed = 1.1;

struct RunConfig {
  std::string scenario_id;
  Condition condition = Condition::None;
  int start_position_index = 0;
  std::string participant_id = "p01";
  int run_index = 1;
  std::uint64_t seed = 0;
  double timeout = kDefaultTimeout;
  /// Used by condition SimulatedAgents only.
  int agent_count = 6;
  double sampling_rate = kDefaultSamplingRate;
};

/// Throws InvariantViolation for run_index < 1, timeout <= 0, a negative agent
/// count or a non-positive sampling rate, and OutOfBoundsError for a start index
/// the scenario does not have.
void validate_run_config(const RunConfig& config, const Scenario& scenario);

struct AgentPose {
  int id = 0;
  Pose pose;
};

struct Sample {
  double t = 0.0;
  Pose avatar;
  double speed = 0.0;
  bool exit_sign_visible = false;
  std::vector<AgentPose> agents;
};

struct RunOutcome {
  enum class Kind { Exited, TimedOut };
  Kind kind = Kind::TimedOut;
  std::string exit_id;  ///< empty unless Exited
  double t = 0.0;       ///< crossing time, or the time the run stopped

  bool exited() const { return kind == Kind::Exited; }
  static RunOutcome exited_via(std::string exit_id, double t) { return {Kind::Exited, std::move(exit_id), t}; }
  static RunOutcome timed_out(double t) { return {Kind::TimedOut, {}, t}; }
};

struct RunRecord {
  RunConfig config;
  std::vector<Sample> samples;
  RunOutcome outcome;
  double distance_walked = 0.0;
};

/// Sum of distances between consecutive sampled avatar positions.
double path_distance(std::span<const Sample> samples);

struct StudyPlan {
  std::vector<std::string> participants;
  std::map<std::string, std::vector<Condition>> condition_orders;
  std::map<std::pair<std::string, int>, int> start_assignments;
};

/// Participant i gets the study conditions rotated left by i; start positions
/// are drawn without replacement per participant. Throws InvariantViolation
/// when the scenario has fewer than four start positions.
StudyPlan build_study_plan(std::span<const std::string> participants, const Scenario& scenario, std::uint64_t seed);

/// Steer the avatar directly.
struct VelocityInput {
  double forward = 0.0;  ///< m/s, clamped to +-2
  double turn = 0.0;     ///< rad/s
};
/// Physical pose from a tracker, mapped through motion compression.
struct TrackedPoseInput {
  Pose user;
};
/// Let the session's scripted policy steer the avatar.
struct AutopilotInput {};

using AvatarInput = std::variant<VelocityInput, TrackedPoseInput, AutopilotInput>;

struct SessionOptions {
  /// Policy behind AutopilotInput; the avatar then walks at 1.1 m/s desired speed.
  std::optional<RouteChoicePolicy> autopilot;
  /// Tracking space for TrackedPoseInput.
  std::optional<Workspace> workspace;
  CompressorOptions compressor;
  /// Placed as given in addition to the condition's population; ids are
  /// reassigned after the spawned agents.
  std::vector<AgentState> extra_agents;
};

enum class RunState { Active, Exited, TimedOut };

/// One run of one avatar. The scenario and navigator must outlive it.
class Session {
 public:
  Session(const Scenario& scenario, const Navigator& navigator, RunConfig config, SessionOptions options = {});

  /// Advances by dt in (0, 0.1] seconds in physics steps of at most 0.01 s.
  /// Throws Error after the run has ended.
  void tick(double dt, const AvatarInput& input);

  RunState state() const { return finished_kind_.value_or(RunState::Active); }
  bool active() const { return state() == RunState::Active; }
  double time() const { return time_; }
  const RunConfig& config() const { return record_.config; }
  const Scenario& scenario() const { return *scenario_; }

  const AgentState& avatar() const { return world_.front(); }
  /// Simulated agents, exited ones included.
  std::span<const AgentState> agents() const { return std::span(world_).subspan(1); }

  std::size_t correct_exit() const { return correct_exit_; }
  const std::vector<PathPolyline>& guiding_lines() const { return guiding_lines_; }
  const std::vector<SignPlacement>& signs() const { return signs_; }
  const std::vector<Point2>& floor_plan_posts() const { return posts_; }
  bool exit_sign_visible() const;

  const RunRecord& record() const { return record_; }
  const MotionCompressor* compressor() const { return compressor_ ? &*compressor_ : nullptr; }

 private:
  void spawn_agents(Rng& rng);
  void move_avatar(const AvatarInput& input, double h, int substeps);
  void append_sample();
  void finish(RunOutcome outcome);

  const Scenario* scenario_;
  const Navigator* navigator_;
  SessionOptions options_;
  Rng rng_;
  std::vector<AgentState> world_;  // avatar first
  std::size_t correct_exit_ = 0;
  std::vector<PathPolyline> guiding_lines_;
  std::vector<SignPlacement> signs_;
  std::vector<Point2> posts_;
  std::optional<MotionCompressor> compressor_;
  MotionStep tracked_step_;
  bool tracking_started_ = false;
  std::optional<RunState> finished_kind_;
  double time_ = 0.0;
  long next_sample_ = 0;
  RunRecord record_;
};

Session start_run(const RunConfig& config, const Scenario& scenario, const Navigator& navigator,
                  SessionOptions options = {});

/// Headless run with the avatar driven by `policy`, ticking 0.01 s at a time.
RunRecord run_scripted(const RunConfig& config, const Scenario& scenario, const Navigator& navigator,
                       const RouteChoicePolicy& policy);
RunRecord run_scripted(const RunConfig& config, const Scenario& scenario, const RouteChoicePolicy& policy);

/// `<participant>_<run_index>_<condition>`
std::string run_file_stem(const RunConfig& config);

struct RecordFiles {
  std::filesystem::path csv;
  std::filesystem::path agents_csv;
  std::filesystem::path sidecar;
};
RecordFiles record_files(const std::filesystem::path& csv);

/// Writes `<stem>.csv` (t,x,y,heading,speed,sign_visible), `<stem>.agents.csv`
/// (t,id,x,y,heading) and the `<stem>.json` sidecar with config, outcome and the
/// run's measures. Throws Error naming the path on I/O failure.
RecordFiles write_run_record(const RunRecord& record, const Scenario& scenario, const std::filesystem::path& dir);
RecordFiles write_run_record(const RunRecord& record, const Scenario& scenario, const Navigator& navigator,
                             const std::filesystem::path& dir);

/// Reads a record back from its CSV and sidecar (the agents file is optional).
/// Throws ParseError naming file and line for a corrupt or truncated record.
RunRecord read_run_record(const std::filesystem::path& csv);

nlohmann::json run_config_to_json(const RunConfig& config);
/// Throws ParseError naming the offending field.
RunConfig run_config_from_json(const nlohmann::json& json);
nlohmann::json outcome_to_json(const RunOutcome& outcome);
RunOutcome outcome_from_json(const nlohmann::json& json);

struct BatchOptions {
  std::vector<Condition> conditions;
  int runs = 1;  ///< replicates per condition
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  double timeout = kDefaultTimeout;
};

struct BatchResult {
  std::vector<RecordFiles> records;
  std::filesystem::path measures_csv;
};

/// Replicate r is participant `s<r>` who runs the conditions in the given
/// order rotated left by r - 1, from start positions drawn without
/// replacement, with seeds derived from (seed, r, condition). Writes every
/// record plus measures.csv. Throws Error on an empty condition list.
BatchResult run_batch(const Scenario& scenario, const BatchOptions& options);

}  // namespace evacsim
