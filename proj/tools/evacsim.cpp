// evacsim command line: serve, batch, metrics, replay, mocomp-demo.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "evacsim/engine.hpp"
#include "evacsim/gateway/server.hpp"
#include "evacsim/metrics.hpp"
#include "evacsim/mocomp.hpp"

namespace fs = std::filesystem;
using namespace evacsim;
using nlohmann::json;

namespace {

// Blocks SIGINT/SIGTERM in every thread started afterwards and returns the set
// to wait on.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_stop(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", p.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failed for '{}'", p.string()));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "WxH" for a rectangle or "dR" / "disc:R" for a disc, centred on the origin.
Workspace parse_workspace(const std::string& text) {
  try {
    if (text.rfind("disc:", 0) == 0) return Workspace::disc(std::stod(text.substr(5)));
    if (!text.empty() && text[0] == 'd') return Workspace::disc(std::stod(text.substr(1)));
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos) throw std::invalid_argument(text);
    const double w = std::stod(text.substr(0, x));
    const double h = std::stod(text.substr(x + 1));
    return Workspace::rectangle(w, h);
  } catch (const std::logic_error&) {
    throw ParseError(fmt::format("workspace '{}' is not WxH or disc:R", text), 0, "workspace");
  }
}

// Target path as JSON ([[x,y],...] or {"vertices": [...]}) or CSV rows "x,y".
PathPolyline load_target(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<Point2> pts;
  if (path.extension() == ".json") {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(fmt::format("'{}' is not valid JSON", path.string()), 0, "target");
    if (j.is_object()) j = j.value("vertices", json());
    if (!j.is_array()) throw ParseError("target must be a list of [x, y]", 0, "vertices");
    for (const json& p : j) {
      if (!p.is_array() || p.size() != 2) throw ParseError("target vertex must be [x, y]", 0, "vertices");
      pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  } else {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
      const auto c = line.find(',');
      try {
        if (c == std::string::npos) throw std::invalid_argument(line);
        pts.push_back({std::stod(line.substr(0, c)), std::stod(line.substr(c + 1))});
      } catch (const std::logic_error&) {
        throw ParseError(fmt::format("'{}' line {}: expected x,y", path.string(), n), n, "x,y");
      }
    }
  }
  if (pts.size() < 2) throw ParseError("target needs at least two vertices", 0, "vertices");
  return PathPolyline::from_points_dedup(pts);
}

int cmd_serve(const fs::path& scenario_file, int port, double tick_rate, std::optional<fs::path> record_dir) {
  const sigset_t signals = block_stop_signals();
  gateway::ServerOptions opts;
  opts.port = static_cast<std::uint16_t>(port);
  opts.tick_rate = tick_rate;
  opts.record_dir = std::move(record_dir);
  gateway::Server server(load_scenario_file(scenario_file), opts);
  const auto bound = server.start();
  fmt::print("serving {} on 127.0.0.1:{} ({} ticks/s)\n", scenario_file.string(), bound, tick_rate);
  std::fflush(stdout);
  wait_for_stop(signals);
  server.stop();
  return 0;
}

int cmd_batch(const fs::path& scenario_file, const std::string& conditions, int runs, std::uint64_t seed,
              const fs::path& out) {
  BatchOptions opts;
  for (const std::string& c : split_list(conditions)) opts.conditions.push_back(condition_from_string(c));
  if (opts.conditions.empty()) throw CLI::ValidationError("--conditions", "needs at least one condition");
  opts.runs = runs;
  opts.seed = seed;
  opts.out_dir = out;
  const BatchResult result = run_batch(load_scenario_file(scenario_file), opts);
  fmt::print("{} runs written to {}\nmeasures: {}\n", result.records.size(), out.string(), result.measures_csv.string());
  return 0;
}

int cmd_metrics(const fs::path& in, const std::string& selector_name, const fs::path& out,
                const std::vector<std::string>& kinds, std::optional<fs::path> reference) {
  const Selector selector = selector_from_string(selector_name);
  const std::vector<RunMeasures> measures = load_measures_dir(in);
  if (measures.empty()) throw Error(fmt::format("no run records with measures in '{}'", in.string()));

  std::vector<MeasureKind> wanted;
  for (const std::string& k : kinds) wanted.push_back(measure_kind_from_string(k));
  if (wanted.empty()) wanted.assign(std::begin(kMeasureKinds), std::end(kMeasureKinds));

  std::vector<ConditionSummary> all;
  json report{{"selector", to_string(selector)}, {"runs", measures.size()}, {"measures", json::object()}};
  for (MeasureKind k : wanted) {
    const auto rows = aggregate(measures, selector, k);
    report["measures"][std::string(to_string(k))] = summaries_to_json(rows);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  json by_run = json::array();
  for (const RunIndexSpeed& r : speed_by_run_index(measures))
    by_run.push_back({{"run_index", r.run_index}, {"n", r.n}, {"mean", r.mean}, {"std", r.std}});
  report["speed_by_run_index"] = std::move(by_run);

  if (reference) {
    const ReferenceTable table = load_reference_file(*reference);
    std::vector<ConditionSummary> comparable;
    for (const ConditionSummary& s : all)
      if (table.count(s.kind)) comparable.push_back(s);
    report["reference"] = comparison_to_json(compare_to_reference(comparable, table));
  }

  if (out.extension() == ".json")
    write_text(out, report.dump(2) + "\n");
  else
    write_text(out, summaries_to_csv(all));
  fmt::print("{} runs, selector {}, written to {}\n", measures.size(), to_string(selector), out.string());
  return 0;
}

int cmd_replay(const fs::path& run, int port, double speed, std::optional<fs::path> scenario_file) {
  auto [record, stored] = gateway::load_replay(run);
  std::optional<Scenario> scenario;
  if (scenario_file) scenario = load_scenario_file(*scenario_file);
  const sigset_t signals = block_stop_signals();
  gateway::ReplayOptions opts;
  opts.port = static_cast<std::uint16_t>(port);
  opts.speed = speed;
  gateway::ReplayServer server(std::move(record), std::move(stored), opts, std::move(scenario));
  const auto bound = server.start();
  fmt::print("replaying {} on 127.0.0.1:{} at {}x\n", run.string(), bound, speed);
  std::fflush(stdout);
  wait_for_stop(signals);
  server.stop();
  return 0;
}

int cmd_mocomp_demo(const fs::path& target_file, const std::string& workspace_text, const fs::path& out) {
  const PathPolyline target = load_target(target_file);
  const Workspace ws = parse_workspace(workspace_text);
  validate_workspace(ws);
  const Pose start{ws.origin, target.heading_at(0.0)};
  const CompressedPath path = transform_path(target, ws, start);

  std::string csv = "s,target_x,target_y,target_heading,x,y,heading\n";
  const auto poses = path.sample(0.01);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double s = std::min(static_cast<double>(i) * 0.01, path.total_length);
    const Point2 t = target.point_at(s);
    csv += fmt::format("{:.4f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", s, t.x, t.y, target.heading_at(s),
                       poses[i].position.x, poses[i].position.y, poses[i].heading);
  }
  write_text(out, csv);
  fmt::print("target {:.3f} m into {} workspace, cost {:.6g}, {} samples -> {}\n", target.length(), workspace_text,
             path.cost(), poses.size(), out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evacuation wayfinding simulator"};
  app.require_subcommand(1);

  fs::path scenario_file;
  int port = 0;

  auto* serve = app.add_subcommand("serve", "Run the live session server");
  double tick_rate = 100.0;
  std::optional<fs::path> record_dir;
  serve->add_option("--scenario", scenario_file, "Scenario JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  serve->add_option("--tick-rate", tick_rate, "Physics ticks per wall second")->check(CLI::PositiveNumber);
  serve->add_option("--record-dir", record_dir, "Write finished runs here");

  auto* batch = app.add_subcommand("batch", "Run scripted sessions headless");
  std::string conditions;
  int runs = 1;
  std::uint64_t seed = 0;
  fs::path out;
  batch->add_option("--scenario", scenario_file, "Scenario JSON")->required()->check(CLI::ExistingFile);
  batch->add_option("--conditions", conditions, "Comma-separated conditions")->required();
  batch->add_option("--runs", runs, "Replicates per condition")->check(CLI::PositiveNumber);
  batch->add_option("--seed", seed, "Base seed");
  batch->add_option("--out", out, "Output directory")->required();

  auto* metrics = app.add_subcommand("metrics", "Aggregate measures of recorded runs");
  fs::path in;
  std::string selector = "first";
  std::vector<std::string> kinds;
  std::optional<fs::path> reference;
  metrics->add_option("--in", in, "Directory of run records")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--selector", selector, "first or all")->check(CLI::IsMember({"first", "all"}));
  metrics->add_option("--out", out, "Output file (.csv or .json)")->required();
  metrics->add_option("--measure", kinds, "time, distance, speed, correct_rate (default all)")->delimiter(',');
  metrics->add_option("--reference", reference, "Reference envelope JSON")->check(CLI::ExistingFile);

  auto* replay = app.add_subcommand("replay", "Stream a recorded run");
  fs::path run;
  double speed = 1.0;
  std::optional<fs::path> replay_scenario;
  replay->add_option("--run", run, "Run record CSV")->required()->check(CLI::ExistingFile);
  replay->add_option("--port", port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
  replay->add_option("--speed", speed, "Playback speed multiplier")->check(CLI::PositiveNumber);
  replay->add_option("--scenario", replay_scenario, "Scenario for the handshake and overlays")->check(CLI::ExistingFile);

  auto* demo = app.add_subcommand("mocomp-demo", "Compress a target path into a workspace");
  fs::path target;
  std::string workspace;
  demo->add_option("--target", target, "Target path (.json or x,y CSV)")->required()->check(CLI::ExistingFile);
  demo->add_option("--workspace", workspace, "WxH or disc:R in metres")->required();
  demo->add_option("--out", out, "Output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(scenario_file, port, tick_rate, record_dir);
    if (*batch) return cmd_batch(scenario_file, conditions, runs, seed, out);
    if (*metrics) return cmd_metrics(in, selector, out, kinds, reference);
    if (*replay) return cmd_replay(run, port, speed, replay_scenario);
    if (*demo) return cmd_mocomp_demo(target, workspace, out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
