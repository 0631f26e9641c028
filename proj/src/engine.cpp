#include "evacsim/engine.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace evacsim {

namespace {

constexpr std::array<std::pair<Condition, std::string_view>, 5> kConditionNames{{
    {Condition::GuidingLines, "GuidingLines"},
    {Condition::SimulatedAgents, "SimulatedAgents"},
    {Condition::ExitSigns, "ExitSigns"},
    {Condition::FloorPlan, "FloorPlan"},
    {Condition::None, "None"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

// Spawn rule for simulated agents: free spots this far (walking) from the start.
constexpr double kSpawnMinDistance = 1.5;
constexpr double kSpawnMaxDistance = 10.0;
constexpr double kSpawnSpacing = 1.0;
constexpr double kSpawnGrid = 0.5;
constexpr double kSpawnWallClearance = 0.5;

}  // namespace

std::string_view to_string(Condition condition) {
  for (const auto& [c, name] : kConditionNames)
    if (c == condition) return name;
  return "None";
}

Condition condition_from_string(std::string_view name) {
  for (const auto& [c, n] : kConditionNames)
    if (iequals(n, name)) return c;
  throw Error(fmt::format("unknown condition '{}'", name));
}

RouteChoicePolicy policy_for(Condition condition) {
  switch (condition) {
    case Condition::GuidingLines: return {PolicyKind::GuidingLine, {}};
    case Condition::SimulatedAgents: return {PolicyKind::FollowOthers, {}};
    case Condition::ExitSigns: return {PolicyKind::ExitSigns, {}};
    case Condition::FloorPlan: return {PolicyKind::FloorPlanMemory, {}};
    case Condition::None: break;
  }
  // Without signs the sign reader just explores.
  return {PolicyKind::ExitSigns, {}};
}

void validate_run_config(const RunConfig& config, const Scenario& scenario) {
  if (config.run_index < 1) throw InvariantViolation("run_index >= 1", fmt::format("got {}", config.run_index));
  if (!(config.timeout > 0.0)) throw InvariantViolation("timeout > 0", fmt::format("got {}", config.timeout));
  if (config.agent_count < 0) throw InvariantViolation("agent_count >= 0", fmt::format("got {}", config.agent_count));
  if (!(config.sampling_rate > 0.0))
    throw InvariantViolation("sampling_rate > 0", fmt::format("got {}", config.sampling_rate));
  if (config.start_position_index < 0 ||
      static_cast<std::size_t>(config.start_position_index) >= scenario.start_positions.size())
    throw OutOfBoundsError(fmt::format("invalid start index {} (scenario has {} start positions)",
                                       config.start_position_index, scenario.start_positions.size()));
}

double path_distance(std::span<const Sample> samples) {
  double total = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    total += distance(samples[i - 1].avatar.position, samples[i].avatar.position);
  return total;
}

StudyPlan build_study_plan(std::span<const std::string> participants, const Scenario& scenario, std::uint64_t seed) {
  constexpr std::size_t k = std::size(kStudyConditions);
  if (scenario.start_positions.size() < k)
    throw InvariantViolation("at least 4 start positions",
                             fmt::format("scenario has {}", scenario.start_positions.size()));
  StudyPlan plan;
  plan.participants.assign(participants.begin(), participants.end());
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const std::string& p = participants[i];
    std::vector<Condition> order;
    for (std::size_t j = 0; j < k; ++j) order.push_back(kStudyConditions[(i + j) % k]);
    if (!plan.condition_orders.emplace(p, std::move(order)).second)
      throw InvariantViolation("unique participants", fmt::format("'{}' listed twice", p));

    Rng rng(derive_seed(seed, i));
    std::vector<int> starts(scenario.start_positions.size());
    for (std::size_t s = 0; s < starts.size(); ++s) starts[s] = static_cast<int>(s);
    for (std::size_t s = 0; s < k; ++s) std::swap(starts[s], starts[s + rng.index(starts.size() - s)]);
    for (std::size_t j = 0; j < k; ++j) plan.start_assignments[{p, static_cast<int>(j) + 1}] = starts[j];
  }
  return plan;
}

Session::Session(const Scenario& scenario, const Navigator& navigator, RunConfig config, SessionOptions options)
    : scenario_(&scenario),
      navigator_(&navigator),
      options_(std::move(options)),
      rng_(derive_seed(config.seed, 1)) {
  validate_run_config(config, scenario);
  if (options_.autopilot) validate_policy(*options_.autopilot);
  if (options_.workspace) validate_workspace(*options_.workspace);
  record_.config = std::move(config);
  const RunConfig& cfg = record_.config;

  AgentState avatar;
  avatar.id = 0;
  avatar.position = scenario.start_positions[static_cast<std::size_t>(cfg.start_position_index)];
  avatar.is_human_avatar = true;
  avatar.desired_speed = kScriptedDesiredSpeed;
  if (options_.autopilot) avatar.policy = *options_.autopilot;
  world_.push_back(avatar);

  const auto near = navigator.nearest_exit(avatar.position);
  if (!near) throw UnreachableError(fmt::format("no exit reachable from start {}", cfg.start_position_index));
  correct_exit_ = near->exit_index;

  switch (cfg.condition) {
    case Condition::GuidingLines: {
      const auto it = scenario.guiding_lines.find(scenario.exits[correct_exit_].id);
      if (it == scenario.guiding_lines.end())
        throw InvariantViolation("guiding line per exit",
                                 fmt::format("no guiding line for exit '{}'", scenario.exits[correct_exit_].id));
      guiding_lines_.push_back(it->second);
      break;
    }
    case Condition::ExitSigns: signs_ = scenario.exit_signs; break;
    case Condition::FloorPlan: posts_ = scenario.floor_plan_posts; break;
    case Condition::SimulatedAgents: {
      Rng spawn_rng(derive_seed(cfg.seed, 2));
      spawn_agents(spawn_rng);
      break;
    }
    case Condition::None: break;
  }
  for (AgentState a : options_.extra_agents) {
    validate_agent(a);
    a.id = static_cast<int>(world_.size());
    a.is_human_avatar = false;
    world_.push_back(std::move(a));
  }

  if (options_.workspace) compressor_.emplace(navigator, *options_.workspace, options_.compressor);
  append_sample();
}

void Session::spawn_agents(Rng& rng) {
  const Scenario& sc = *scenario_;
  const Point2 start = world_.front().position;
  std::vector<Point2> candidates;
  for (double x = sc.bounds.min.x + kSpawnGrid; x < sc.bounds.max.x; x += kSpawnGrid)
    for (double y = sc.bounds.min.y + kSpawnGrid; y < sc.bounds.max.y; y += kSpawnGrid) {
      const Point2 p{x, y};
      const double d = distance(p, start);
      if (d < kSpawnMinDistance || d > kSpawnMaxDistance) continue;
      if (navigator_->wall_distance(p) < kSpawnWallClearance) continue;
      candidates.push_back(p);
    }
  for (std::size_t i = 0; i + 1 < candidates.size(); ++i)
    std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);

  const int wanted = record_.config.agent_count;
  for (const Point2& p : candidates) {
    if (static_cast<int>(world_.size()) - 1 >= wanted) break;
    bool spaced = true;
    for (std::size_t i = 1; i < world_.size(); ++i)
      if (distance(world_[i].position, p) < kSpawnSpacing) spaced = false;
    if (!spaced) continue;
    double walk = 0.0;
    try {
      walk = navigator_->path(start, p).length();
    } catch (const UnreachableError&) {
      continue;
    }
    if (walk > kSpawnMaxDistance) continue;
    AgentState a;
    a.id = static_cast<int>(world_.size());
    a.position = p;
    a.desired_speed = rng.uniform(0.9, 1.3);
    a.policy = {PolicyKind::ScriptedGoal, {}};
    world_.push_back(std::move(a));
  }
  if (static_cast<int>(world_.size()) - 1 < wanted)
    throw InvariantViolation("agent_count fits the scenario",
                             fmt::format("only {} of {} agents could be placed near start {}", world_.size() - 1,
                                         wanted, record_.config.start_position_index));
}

bool Session::exit_sign_visible() const {
  for (const SignPlacement& s : signs_)
    if (sign_visible(*scenario_, s, avatar().position, PolicyParams{}.sign_view_half_angle)) return true;
  return false;
}

void Session::append_sample() {
  Sample s;
  s.t = time_;
  const AgentState& av = world_.front();
  s.avatar = {av.position, wrap_angle(av.heading)};
  s.speed = av.velocity.norm();
  s.exit_sign_visible = exit_sign_visible();
  for (std::size_t i = 1; i < world_.size(); ++i)
    if (world_[i].active()) s.agents.push_back({world_[i].id, {world_[i].position, wrap_angle(world_[i].heading)}});
  if (!record_.samples.empty()) record_.distance_walked += distance(record_.samples.back().avatar.position, s.avatar.position);
  record_.samples.push_back(std::move(s));
  next_sample_ = static_cast<long>(std::floor(time_ * record_.config.sampling_rate + 1e-9)) + 1;
}

void Session::finish(RunOutcome outcome) {
  if (record_.samples.back().t != time_) append_sample();
  record_.outcome = std::move(outcome);
  finished_kind_ = record_.outcome.exited() ? RunState::Exited : RunState::TimedOut;
}

void Session::move_avatar(const AvatarInput& input, double h, int substeps) {
  AgentState& av = world_.front();
  if (const auto* v = std::get_if<VelocityInput>(&input)) {
    const double forward = std::clamp(v->forward, -kMaxAvatarSpeed, kMaxAvatarSpeed);
    const double turn = std::clamp(v->turn, -kMaxAvatarTurnRate, kMaxAvatarTurnRate);
    av.heading = wrap_angle(av.heading + turn * h);
    av.velocity = unit_from_angle(av.heading) * forward;
  } else {
    av.heading = wrap_angle(av.heading + tracked_step_.turn / substeps);
    av.velocity = unit_from_angle(av.heading) * (tracked_step_.forward / (h * substeps));
  }
  av.position += av.velocity * h;
  keep_out_of_walls(av, *scenario_);
}

void Session::tick(double dt, const AvatarInput& input) {
  if (!active()) throw Error(fmt::format("tick after end of run at t = {}", time_));
  if (!(dt > 0.0) || dt > 0.1 + 1e-12) throw InvariantViolation("dt in (0, 0.1]", fmt::format("got {}", dt));
  const bool autopilot = std::holds_alternative<AutopilotInput>(input);
  if (autopilot && !options_.autopilot) throw Error("autopilot input without an autopilot policy");

  if (const auto* tp = std::get_if<TrackedPoseInput>(&input)) {
    if (!compressor_) throw Error("tracked pose input without a workspace");
    const AgentState& av = world_.front();
    const Pose avatar_pose{av.position, av.heading};
    std::optional<Point2> goal;
    if (!guiding_lines_.empty()) goal = guiding_lines_.front().back();
    if (!tracking_started_) {
      compressor_->reset(avatar_pose, tp->user, goal);
      tracking_started_ = true;
      tracked_step_ = {};
    } else {
      tracked_step_ = compressor_->track(tp->user, avatar_pose, goal);
      tracked_step_.forward = std::clamp(tracked_step_.forward, -kMaxAvatarSpeed * dt, kMaxAvatarSpeed * dt);
    }
  }

  const int substeps = std::max(1, static_cast<int>(std::ceil(dt / kPhysicsStep - 1e-9)));
  const double h = dt / substeps;
  std::vector<Vec2> directions(world_.size());
  for (int k = 0; k < substeps; ++k) {
    const Point2 before = world_.front().position;
    if (!autopilot) move_avatar(input, h, substeps);

    const PolicyContext ctx{scenario_, navigator_, time_, guiding_lines_, signs_};
    for (std::size_t i = 0; i < world_.size(); ++i) {
      directions[i] = {};
      if (!world_[i].active() || (i == 0 && !autopilot)) continue;
      directions[i] = evade_blocker(world_[i], ctx, world_, desired_direction(world_[i], ctx, world_, rng_));
    }
    step_agents(world_, directions, *scenario_, h, autopilot);
    time_ += h;

    AgentState& av = world_.front();
    if (!autopilot && !av.exited_via) av.exited_via = crossed_exit(*scenario_, before, av.position);

    if (av.exited_via) {
      finish(RunOutcome::exited_via(scenario_->exits[*av.exited_via].id, time_));
      return;
    }
    if (time_ >= record_.config.timeout - 1e-9) {
      finish(RunOutcome::timed_out(time_));
      return;
    }
    if (time_ * record_.config.sampling_rate >= static_cast<double>(next_sample_) - 1e-9) append_sample();
  }
}

Session start_run(const RunConfig& config, const Scenario& scenario, const Navigator& navigator,
                  SessionOptions options) {
  return Session(scenario, navigator, config, std::move(options));
}

RunRecord run_scripted(const RunConfig& config, const Scenario& scenario, const Navigator& navigator,
                       const RouteChoicePolicy& policy) {
  SessionOptions options;
  options.autopilot = policy;
  Session session(scenario, navigator, config, std::move(options));
  while (session.active()) session.tick(kPhysicsStep, AutopilotInput{});
  return session.record();
}

RunRecord run_scripted(const RunConfig& config, const Scenario& scenario, const RouteChoicePolicy& policy) {
  const Navigator navigator(scenario, kDefaultClearance);
  return run_scripted(config, scenario, navigator, policy);
}

std::string run_file_stem(const RunConfig& config) {
  return fmt::format("{}_{}_{}", config.participant_id, config.run_index, to_string(config.condition));
}

}  // namespace evacsim
