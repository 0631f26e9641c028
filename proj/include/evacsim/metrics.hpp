#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evacsim/engine.hpp"
#include "evacsim/scenario.hpp"

namespace evacsim {

struct RunMeasures {
  std::string participant_id;
  Condition condition = Condition::None;
  int run_index = 1;
  int start_position_index = 0;
  std::optional<std::string> exit_chosen;
  bool correct_exit = false;
  std::optional<double> travel_time;
  double distance = 0.0;
  /// distance / travel_time; absent for timed-out runs.
  std::optional<double> mean_speed;
};

/// Throws InvariantViolation ("scenario/record mismatch") when the record
/// names another scenario, a start index it lacks, or an unknown exit.
RunMeasures measure_run(const RunRecord& record, const Scenario& scenario);
RunMeasures measure_run(const RunRecord& record, const Scenario& scenario, const Navigator& navigator);

enum class Selector { FirstRunsOnly, AllRuns };
enum class MeasureKind { Time, Distance, Speed, CorrectRate };

std::string_view to_string(Selector selector);
Selector selector_from_string(std::string_view name);  ///< "first" or "all"
std::string_view to_string(MeasureKind kind);
MeasureKind measure_kind_from_string(std::string_view name);
inline constexpr MeasureKind kMeasureKinds[] = {MeasureKind::Time, MeasureKind::Distance, MeasureKind::Speed,
                                                MeasureKind::CorrectRate};

struct ConditionSummary {
  Condition condition = Condition::None;
  MeasureKind kind = MeasureKind::Time;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  ///< sample (n - 1) form, 0 for n = 1
  /// Timed-out runs left out of time and speed.
  std::size_t excluded = 0;
};

/// One row per condition present, in Condition order. Values inside a group
/// are summed in sorted order, so the result does not depend on input order.
/// Throws Error naming the selector when nothing is left to aggregate.
std::vector<ConditionSummary> aggregate(std::span<const RunMeasures> measures, Selector selector, MeasureKind kind);

struct RunIndexSpeed {
  int run_index = 1;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
};
/// Mean walking speed per run index, ascending; timed-out runs are skipped.
std::vector<RunIndexSpeed> speed_by_run_index(std::span<const RunMeasures> measures);

struct ReferenceEntry {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};
using ReferenceTable = std::map<MeasureKind, ReferenceEntry>;

/// `{"distance": {"mean":..,"min":..,"max":..}, ...}`
ReferenceTable load_reference(std::string_view document);
ReferenceTable load_reference_file(const std::filesystem::path& path);

struct ReferenceComparison {
  Condition condition = Condition::None;
  MeasureKind kind = MeasureKind::Time;
  double value = 0.0;
  ReferenceEntry reference;
  bool inside = false;  ///< min <= value <= max
};
/// Throws Error when the table has no entry for a summary's measure.
std::vector<ReferenceComparison> compare_to_reference(std::span<const ConditionSummary> summaries,
                                                      const ReferenceTable& reference);

nlohmann::json measures_to_json(const RunMeasures& measures);
RunMeasures measures_from_json(const nlohmann::json& json);

/// `participant,condition,run_index,start,exit,correct,travel_time,distance,mean_speed`
std::string measures_to_csv(std::span<const RunMeasures> measures);
/// `measure,condition,n,mean,std,excluded`
std::string summaries_to_csv(std::span<const ConditionSummary> summaries);

nlohmann::json summaries_to_json(std::span<const ConditionSummary> summaries);
nlohmann::json comparison_to_json(std::span<const ReferenceComparison> rows);

/// Measures stored in the sidecars of every record in `dir`, sorted by file name.
std::vector<RunMeasures> load_measures_dir(const std::filesystem::path& dir);

}  // namespace evacsim
