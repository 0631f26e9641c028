#include "evacsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace evacsim {

using nlohmann::json;

namespace {

struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
};

// Sorted summation makes the result independent of input order.
Stats stats_of(std::vector<double> values) {
  Stats s;
  s.n = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::string opt_number(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

RunMeasures measure_run(const RunRecord& record, const Scenario& scenario) {
  const Navigator navigator(scenario, kDefaultClearance);
  return measure_run(record, scenario, navigator);
}

RunMeasures measure_run(const RunRecord& record, const Scenario& scenario, const Navigator& navigator) {
  const RunConfig& c = record.config;
  if (c.scenario_id != scenario.id)
    throw InvariantViolation("scenario/record mismatch",
                             fmt::format("record is for scenario '{}', not '{}'", c.scenario_id, scenario.id));
  if (c.start_position_index < 0 || static_cast<std::size_t>(c.start_position_index) >= scenario.start_positions.size())
    throw InvariantViolation("scenario/record mismatch",
                             fmt::format("scenario '{}' has no start index {}", scenario.id, c.start_position_index));
  RunMeasures m;
  m.participant_id = c.participant_id;
  m.condition = c.condition;
  m.run_index = c.run_index;
  m.start_position_index = c.start_position_index;
  m.distance = record.distance_walked;
  if (record.outcome.exited()) {
    if (scenario.exit_index(record.outcome.exit_id) == scenario.exits.size())
      throw InvariantViolation("scenario/record mismatch",
                               fmt::format("scenario '{}' has no exit '{}'", scenario.id, record.outcome.exit_id));
    m.exit_chosen = record.outcome.exit_id;
    m.travel_time = record.outcome.t;
    if (record.outcome.t > 0.0) m.mean_speed = m.distance / record.outcome.t;
    const auto near = navigator.nearest_exit(scenario.start_positions[static_cast<std::size_t>(c.start_position_index)]);
    m.correct_exit = near && scenario.exits[near->exit_index].id == record.outcome.exit_id;
  }
  return m;
}

std::string_view to_string(Selector selector) {
  return selector == Selector::FirstRunsOnly ? "first_runs_only" : "all_runs";
}

Selector selector_from_string(std::string_view name) {
  if (name == "first" || name == "first_runs_only") return Selector::FirstRunsOnly;
  if (name == "all" || name == "all_runs") return Selector::AllRuns;
  throw Error(fmt::format("unknown selector '{}' (expected first or all)", name));
}

std::string_view to_string(MeasureKind kind) {
  switch (kind) {
    case MeasureKind::Time: return "time";
    case MeasureKind::Distance: return "distance";
    case MeasureKind::Speed: return "speed";
    case MeasureKind::CorrectRate: return "correct_rate";
  }
  return "time";
}

MeasureKind measure_kind_from_string(std::string_view name) {
  for (MeasureKind k : kMeasureKinds)
    if (to_string(k) == name) return k;
  throw Error(fmt::format("unknown measure '{}' (expected time, distance, speed or correct_rate)", name));
}

std::vector<ConditionSummary> aggregate(std::span<const RunMeasures> measures, Selector selector, MeasureKind kind) {
  std::map<Condition, std::pair<std::vector<double>, std::size_t>> groups;
  for (const RunMeasures& m : measures) {
    if (selector == Selector::FirstRunsOnly && m.run_index != 1) continue;
    auto& [values, excluded] = groups[m.condition];
    switch (kind) {
      case MeasureKind::Time:
        if (m.travel_time) values.push_back(*m.travel_time);
        else ++excluded;
        break;
      case MeasureKind::Speed:
        if (m.mean_speed) values.push_back(*m.mean_speed);
        else ++excluded;
        break;
      case MeasureKind::Distance: values.push_back(m.distance); break;
      case MeasureKind::CorrectRate: values.push_back(m.correct_exit ? 1.0 : 0.0); break;
    }
  }
  std::vector<ConditionSummary> out;
  for (auto& [condition, group] : groups) {
    if (group.first.empty()) continue;
    const Stats s = stats_of(std::move(group.first));
    out.push_back({condition, kind, s.n, s.mean, s.std, group.second});
  }
  if (out.empty())
    throw Error(fmt::format("aggregate: no {} values left after filter '{}'", to_string(kind), to_string(selector)));
  return out;
}

std::vector<RunIndexSpeed> speed_by_run_index(std::span<const RunMeasures> measures) {
  std::map<int, std::vector<double>> groups;
  for (const RunMeasures& m : measures)
    if (m.mean_speed) groups[m.run_index].push_back(*m.mean_speed);
  std::vector<RunIndexSpeed> out;
  for (auto& [index, values] : groups) {
    const Stats s = stats_of(std::move(values));
    out.push_back({index, s.n, s.mean, s.std});
  }
  return out;
}

ReferenceTable load_reference(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("reference table: {}", e.what()), 0, "");
  }
  if (!doc.is_object()) throw ParseError("reference table must be an object", 0, "");
  ReferenceTable table;
  for (const auto& [key, value] : doc.items()) {
    MeasureKind kind;
    try {
      kind = measure_kind_from_string(key);
    } catch (const Error& e) {
      throw ParseError(e.what(), 0, key);
    }
    ReferenceEntry e;
    try {
      e.mean = value.at("mean").get<double>();
      e.min = value.at("min").get<double>();
      e.max = value.at("max").get<double>();
    } catch (const json::exception& ex) {
      throw ParseError(fmt::format("reference '{}': {}", key, ex.what()), 0, key);
    }
    if (!(e.min <= e.mean && e.mean <= e.max))
      throw InvariantViolation("min <= mean <= max", fmt::format("reference '{}'", key));
    table[kind] = e;
  }
  return table;
}

ReferenceTable load_reference_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open reference table '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_reference(ss.str());
}

std::vector<ReferenceComparison> compare_to_reference(std::span<const ConditionSummary> summaries,
                                                      const ReferenceTable& reference) {
  std::vector<ReferenceComparison> out;
  for (const ConditionSummary& s : summaries) {
    const auto it = reference.find(s.kind);
    if (it == reference.end())
      throw Error(fmt::format("reference table has no entry for '{}'", to_string(s.kind)));
    const ReferenceEntry& r = it->second;
    out.push_back({s.condition, s.kind, s.mean, r, r.min <= s.mean && s.mean <= r.max});
  }
  return out;
}

json measures_to_json(const RunMeasures& m) {
  json j{{"participant_id", m.participant_id},
         {"condition", to_string(m.condition)},
         {"run_index", m.run_index},
         {"start_position_index", m.start_position_index},
         {"exit_chosen", nullptr},
         {"correct_exit", m.correct_exit},
         {"travel_time", nullptr},
         {"distance", m.distance},
         {"mean_speed", nullptr}};
  if (m.exit_chosen) j["exit_chosen"] = *m.exit_chosen;
  if (m.travel_time) j["travel_time"] = *m.travel_time;
  if (m.mean_speed) j["mean_speed"] = *m.mean_speed;
  return j;
}

RunMeasures measures_from_json(const json& j) {
  try {
    RunMeasures m;
    m.participant_id = j.at("participant_id").get<std::string>();
    m.condition = condition_from_string(j.at("condition").get<std::string>());
    m.run_index = j.at("run_index").get<int>();
    m.start_position_index = j.value("start_position_index", 0);
    if (!j.at("exit_chosen").is_null()) m.exit_chosen = j.at("exit_chosen").get<std::string>();
    m.correct_exit = j.at("correct_exit").get<bool>();
    if (!j.at("travel_time").is_null()) m.travel_time = j.at("travel_time").get<double>();
    m.distance = j.at("distance").get<double>();
    if (!j.at("mean_speed").is_null()) m.mean_speed = j.at("mean_speed").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("measures: {}", e.what()), 0, "measures");
  }
}

std::string measures_to_csv(std::span<const RunMeasures> measures) {
  std::string out = "participant,condition,run_index,start,exit,correct,travel_time,distance,mean_speed\n";
  for (const RunMeasures& m : measures)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", m.participant_id, to_string(m.condition), m.run_index,
                       m.start_position_index, m.exit_chosen.value_or(""), m.correct_exit ? 1 : 0,
                       opt_number(m.travel_time), m.distance, opt_number(m.mean_speed));
  return out;
}

std::string summaries_to_csv(std::span<const ConditionSummary> summaries) {
  std::string out = "measure,condition,n,mean,std,excluded\n";
  for (const ConditionSummary& s : summaries)
    out += fmt::format("{},{},{},{},{},{}\n", to_string(s.kind), to_string(s.condition), s.n, s.mean, s.std,
                       s.excluded);
  return out;
}

json summaries_to_json(std::span<const ConditionSummary> summaries) {
  json rows = json::array();
  for (const ConditionSummary& s : summaries)
    rows.push_back({{"condition", to_string(s.condition)},
                    {"measure", to_string(s.kind)},
                    {"n", s.n},
                    {"mean", s.mean},
                    {"std", s.std},
                    {"excluded", s.excluded}});
  return rows;
}

json comparison_to_json(std::span<const ReferenceComparison> rows) {
  json out = json::array();
  for (const ReferenceComparison& r : rows)
    out.push_back({{"condition", to_string(r.condition)},
                   {"measure", to_string(r.kind)},
                   {"value", r.value},
                   {"reference", {{"mean", r.reference.mean}, {"min", r.reference.min}, {"max", r.reference.max}}},
                   {"inside", r.inside}});
  return out;
}

std::vector<RunMeasures> load_measures_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<std::filesystem::path> sidecars;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") sidecars.push_back(entry.path());
  std::sort(sidecars.begin(), sidecars.end());
  std::vector<RunMeasures> out;
  for (const auto& path : sidecars) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("'{}': {}", path.string(), e.what()), 0, "");
    }
    if (!doc.is_object() || !doc.contains("measures")) continue;
    out.push_back(measures_from_json(doc.at("measures")));
  }
  if (out.empty()) throw Error(fmt::format("no run records in '{}'", dir.string()));
  return out;
}

}  // namespace evacsim
