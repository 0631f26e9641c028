#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "evacsim/engine.hpp"
#include "evacsim/metrics.hpp"

namespace evacsim {

using nlohmann::json;

namespace {

constexpr std::string_view kRecordFormat = "evacsim-run/1";
constexpr std::string_view kCsvHeader = "t,x,y,heading,speed,sign_visible";
constexpr std::string_view kAgentsHeader = "t,id,x,y,heading";

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
  out << content;
  out.close();
  if (!out) throw Error(fmt::format("write to '{}' failed", path.string()));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void corrupt(const std::filesystem::path& file, std::size_t line, const std::string& field,
                          std::string_view what) {
  throw ParseError(fmt::format("corrupt record '{}' line {}: {}", file.string(), line, what), line, field);
}

// Lines of a CSV file; a missing final newline marks a truncated file.
std::vector<std::string_view> csv_lines(const std::filesystem::path& file, std::string_view text,
                                        std::string_view header) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) corrupt(file, lines.size() + 1, "", "truncated line (no newline)");
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty() || lines.front() != header) corrupt(file, 1, "header", fmt::format("expected header '{}'", header));
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::filesystem::path& file, std::size_t line, std::string_view field, std::string_view text) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    corrupt(file, line, std::string(field), fmt::format("bad {} value '{}'", field, text));
  return value;
}

template <typename T>
T field_of(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(fmt::format("missing field '{}'", key), 0, key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("field '{}': {}", key, e.what()), 0, key);
  }
}

}  // namespace

json run_config_to_json(const RunConfig& c) {
  return json{{"scenario_id", c.scenario_id},
              {"condition", to_string(c.condition)},
              {"start_position_index", c.start_position_index},
              {"participant_id", c.participant_id},
              {"run_index", c.run_index},
              {"seed", c.seed},
              {"timeout", c.timeout},
              {"agent_count", c.agent_count},
              {"sampling_rate", c.sampling_rate}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("run config must be an object", 0, "config");
  RunConfig c;
  c.scenario_id = field_of<std::string>(j, "scenario_id");
  try {
    c.condition = condition_from_string(field_of<std::string>(j, "condition"));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0, "condition");
  }
  c.start_position_index = field_of<int>(j, "start_position_index");
  c.participant_id = field_of<std::string>(j, "participant_id");
  c.run_index = field_of<int>(j, "run_index");
  c.seed = field_of<std::uint64_t>(j, "seed");
  if (j.contains("timeout")) c.timeout = field_of<double>(j, "timeout");
  if (j.contains("agent_count")) c.agent_count = field_of<int>(j, "agent_count");
  if (j.contains("sampling_rate")) c.sampling_rate = field_of<double>(j, "sampling_rate");
  return c;
}

json outcome_to_json(const RunOutcome& o) {
  if (o.exited()) return json{{"kind", "Exited"}, {"exit_id", o.exit_id}, {"t", o.t}};
  return json{{"kind", "TimedOut"}, {"t", o.t}};
}

RunOutcome outcome_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("outcome must be an object", 0, "outcome");
  const auto kind = field_of<std::string>(j, "kind");
  const double t = field_of<double>(j, "t");
  if (kind == "Exited") return RunOutcome::exited_via(field_of<std::string>(j, "exit_id"), t);
  if (kind == "TimedOut") return RunOutcome::timed_out(t);
  throw ParseError(fmt::format("unknown outcome kind '{}'", kind), 0, "kind");
}

RecordFiles record_files(const std::filesystem::path& csv) {
  const std::filesystem::path dir = csv.parent_path();
  const std::string stem = csv.stem().string();
  return {csv, dir / (stem + ".agents.csv"), dir / (stem + ".json")};
}

RecordFiles write_run_record(const RunRecord& record, const Scenario& scenario, const Navigator& navigator,
                             const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  const RecordFiles files = record_files(dir / (run_file_stem(record.config) + ".csv"));

  std::string csv = fmt::format("{}\n", kCsvHeader);
  std::string agents = fmt::format("{}\n", kAgentsHeader);
  for (const Sample& s : record.samples) {
    csv += fmt::format("{},{},{},{},{},{}\n", s.t, s.avatar.position.x, s.avatar.position.y, s.avatar.heading,
                       s.speed, s.exit_sign_visible ? 1 : 0);
    for (const AgentPose& a : s.agents)
      agents += fmt::format("{},{},{},{},{}\n", s.t, a.id, a.pose.position.x, a.pose.position.y, a.pose.heading);
  }
  const json sidecar{{"format", kRecordFormat},
                     {"config", run_config_to_json(record.config)},
                     {"outcome", outcome_to_json(record.outcome)},
                     {"distance_walked", record.distance_walked},
                     {"samples", record.samples.size()},
                     {"measures", measures_to_json(measure_run(record, scenario, navigator))}};
  write_file(files.csv, csv);
  write_file(files.agents_csv, agents);
  write_file(files.sidecar, sidecar.dump(2) + "\n");
  return files;
}

RecordFiles write_run_record(const RunRecord& record, const Scenario& scenario, const std::filesystem::path& dir) {
  const Navigator navigator(scenario, kDefaultClearance);
  return write_run_record(record, scenario, navigator, dir);
}

RunRecord read_run_record(const std::filesystem::path& csv_path) {
  const RecordFiles files = record_files(csv_path);
  if (!std::filesystem::exists(files.sidecar))
    throw Error(fmt::format("record sidecar '{}' not found", files.sidecar.string()));
  json sidecar;
  try {
    sidecar = json::parse(read_file(files.sidecar));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("corrupt record sidecar '{}': {}", files.sidecar.string(), e.what()), 0, "");
  }
  if (!sidecar.is_object() || sidecar.value("format", "") != kRecordFormat)
    throw ParseError(fmt::format("corrupt record sidecar '{}': unknown format", files.sidecar.string()), 0, "format");

  RunRecord record;
  record.config = run_config_from_json(sidecar.at("config"));
  record.outcome = outcome_from_json(sidecar.at("outcome"));
  const auto expected = field_of<std::size_t>(sidecar, "samples");

  const std::string text = read_file(csv_path);
  const auto lines = csv_lines(csv_path, text, kCsvHeader);
  static constexpr const char* kFields[] = {"t", "x", "y", "heading", "speed", "sign_visible"};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != 6) corrupt(csv_path, line, "", fmt::format("expected 6 fields, found {}", f.size()));
    Sample s;
    s.t = parse_number<double>(csv_path, line, kFields[0], f[0]);
    s.avatar.position.x = parse_number<double>(csv_path, line, kFields[1], f[1]);
    s.avatar.position.y = parse_number<double>(csv_path, line, kFields[2], f[2]);
    s.avatar.heading = parse_number<double>(csv_path, line, kFields[3], f[3]);
    s.speed = parse_number<double>(csv_path, line, kFields[4], f[4]);
    const int vis = parse_number<int>(csv_path, line, kFields[5], f[5]);
    if (vis != 0 && vis != 1) corrupt(csv_path, line, "sign_visible", "sign_visible must be 0 or 1");
    s.exit_sign_visible = vis == 1;
    if (!record.samples.empty() && !(s.t > record.samples.back().t))
      corrupt(csv_path, line, "t", "time does not increase");
    record.samples.push_back(std::move(s));
  }
  if (record.samples.size() != expected)
    corrupt(csv_path, lines.size() + 1, "",
            fmt::format("record truncated: {} of {} samples present", record.samples.size(), expected));

  if (std::filesystem::exists(files.agents_csv)) {
    const std::string atext = read_file(files.agents_csv);
    const auto alines = csv_lines(files.agents_csv, atext, kAgentsHeader);
    std::size_t k = 0;
    for (std::size_t i = 1; i < alines.size(); ++i) {
      const std::size_t line = i + 1;
      const auto f = split_fields(alines[i]);
      if (f.size() != 5) corrupt(files.agents_csv, line, "", fmt::format("expected 5 fields, found {}", f.size()));
      const double t = parse_number<double>(files.agents_csv, line, "t", f[0]);
      while (k < record.samples.size() && record.samples[k].t < t) ++k;
      if (k == record.samples.size() || record.samples[k].t != t)
        corrupt(files.agents_csv, line, "t", "time matches no sample");
      AgentPose a;
      a.id = parse_number<int>(files.agents_csv, line, "id", f[1]);
      a.pose.position.x = parse_number<double>(files.agents_csv, line, "x", f[2]);
      a.pose.position.y = parse_number<double>(files.agents_csv, line, "y", f[3]);
      a.pose.heading = parse_number<double>(files.agents_csv, line, "heading", f[4]);
      record.samples[k].agents.push_back(a);
    }
  }
  record.distance_walked = path_distance(record.samples);
  return record;
}

BatchResult run_batch(const Scenario& scenario, const BatchOptions& options) {
  if (options.conditions.empty()) throw Error("batch needs at least one condition");
  if (options.runs < 1) throw Error(fmt::format("batch needs runs >= 1, got {}", options.runs));
  const Navigator navigator(scenario, kDefaultClearance);
  const std::size_t k = options.conditions.size();
  const std::size_t n_starts = scenario.start_positions.size();
  if (n_starts == 0) throw Error("scenario has no start positions");

  BatchResult result;
  std::vector<RunMeasures> measures;
  for (int r = 1; r <= options.runs; ++r) {
    Rng start_rng(derive_seed(options.seed, static_cast<std::uint64_t>(r), 0));
    std::vector<int> starts(n_starts);
    for (std::size_t s = 0; s < n_starts; ++s) starts[s] = static_cast<int>(s);
    for (std::size_t s = 0; s + 1 < n_starts; ++s) std::swap(starts[s], starts[s + start_rng.index(n_starts - s)]);

    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t ci = (j + static_cast<std::size_t>(r - 1)) % k;
      RunConfig config;
      config.scenario_id = scenario.id;
      config.condition = options.conditions[ci];
      config.participant_id = fmt::format("s{:03}", r);
      config.run_index = static_cast<int>(j) + 1;
      config.start_position_index = starts[j % n_starts];
      config.seed = derive_seed(options.seed, static_cast<std::uint64_t>(r), ci + 1);
      config.timeout = options.timeout;
      const RunRecord record = run_scripted(config, scenario, navigator, policy_for(config.condition));
      result.records.push_back(write_run_record(record, scenario, navigator, options.out_dir));
      measures.push_back(measure_run(record, scenario, navigator));
    }
  }
  result.measures_csv = options.out_dir / "measures.csv";
  write_file(result.measures_csv, measures_to_csv(measures));
  return result;
}

}  // namespace evacsim
