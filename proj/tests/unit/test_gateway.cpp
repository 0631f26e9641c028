#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evacsim/gateway/client_view.hpp"
#include "evacsim/gateway/server.hpp"
#include "evacsim/metrics.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

using namespace evacsim;
using namespace evacsim::gateway;
using namespace evacsim::testing;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

const Scenario& hotel() {
  static const Scenario sc = load_scenario_file(data_path("hotel.json"));
  return sc;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("evacsim_test_gateway_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

json hello() { return json{{"version", kProtocolVersion}}; }

// Connects and completes the handshake; returns the scenario message.
json greet(Client& c) {
  c.send("hello", hello());
  auto m = c.receive(2s);
  REQUIRE(m);
  REQUIRE((*m)["type"] == "scenario");
  return *m;
}

std::string error_reason(Client& c) {
  auto m = c.receive(2s);
  REQUIRE(m);
  REQUIRE((*m)["type"] == "error");
  return (*m)["reason"].get<std::string>();
}

}  // namespace

TEST_CASE("frames are length-prefixed big-endian") {
  const std::string f = encode_frame(std::string_view("{}"));
  REQUIRE(f.size() == 6);
  CHECK(f.substr(0, 4) == std::string("\0\0\0\2", 4));

  std::string big(300, 'x');
  const std::string g = encode_frame(std::string_view(big));
  CHECK(static_cast<unsigned char>(g[2]) == 1);
  CHECK(static_cast<unsigned char>(g[3]) == 44);

  // Byte-at-a-time delivery reassembles both frames.
  FrameDecoder d;
  const std::string stream = f + g;
  std::vector<std::string> got;
  for (char ch : stream) {
    d.feed(std::string_view(&ch, 1));
    while (auto p = d.next()) got.push_back(*p);
  }
  REQUIRE(got.size() == 2);
  CHECK(got[0] == "{}");
  CHECK(got[1] == big);
  CHECK(d.buffered() == 0);

  FrameDecoder bad;
  bad.feed(std::string("\xff\xff\xff\xff", 4));
  CHECK_THROWS_AS(bad.next(), FrameError);
}

TEST_CASE("inbound messages are checked for type and seq") {
  CHECK(parse_message("{nope").error);
  CHECK(parse_message("[1,2]").error);
  CHECK(parse_message(R"({"seq": 1})").error);
  CHECK(parse_message(R"({"type": "input"})").error);
  CHECK(parse_message(R"({"type": "input", "seq": 1.5})").error);
  const Inbound ok = parse_message(R"({"type": "input", "seq": 4, "forward": 1})");
  CHECK_FALSE(ok.error);
  CHECK(ok.type == "input");
  CHECK(ok.seq == 4);
}

TEST_CASE("input and start_run payloads") {
  const VelocityInput in = input_from_payload(json{{"forward", 9.0}, {"turn", -40.0}});
  CHECK(in.forward == kMaxAvatarSpeed);
  CHECK(in.turn == -kMaxAvatarTurnRate);
  CHECK_THROWS_AS(input_from_payload(json{{"forward", 1.0}}), ParseError);
  CHECK_THROWS_AS(input_from_payload(json{{"forward", "fast"}, {"turn", 0}}), ParseError);

  const RunConfig c = run_config_from_start(json{{"condition", "ExitSigns"}, {"start_index", 2}, {"seed", 9}}, hotel());
  CHECK(c.condition == Condition::ExitSigns);
  CHECK(c.start_position_index == 2);
  CHECK(c.seed == 9);
  CHECK_THROWS_AS(run_config_from_start(json{{"condition", "ExitSigns"}, {"start_index", 99}}, hotel()), Error);
  CHECK_THROWS_AS(run_config_from_start(json{{"condition", "Stairs"}, {"start_index", 0}}, hotel()), ParseError);
  CHECK_THROWS_AS(run_config_from_start(json{{"start_index", 0}}, hotel()), ParseError);
}

TEST_CASE("snapshot payload round trip") {
  const Scenario& sc = hotel();
  const Navigator nav(sc, kDefaultClearance);
  for (Condition cond : kStudyConditions) {
    RunConfig cfg;
    cfg.scenario_id = sc.id;
    cfg.condition = cond;
    cfg.start_position_index = 1;
    cfg.seed = 3;
    Session s(sc, nav, cfg);
    for (int i = 0; i < 20; ++i) s.tick(0.05, VelocityInput{1.0, 0.3});
    const Snapshot a = snapshot_of(s);
    const Snapshot b = snapshot_from_payload(json::parse(snapshot_payload(a).dump()));
    CHECK(b.t == a.t);
    CHECK(b.avatar.position == a.avatar.position);
    CHECK(b.agents.size() == a.agents.size());
    CHECK(b.overlays.guiding_lines.size() == a.overlays.guiding_lines.size());
    CHECK(b.overlays.signs.size() == a.overlays.signs.size());
    CHECK(b.overlays.floor_plan_posts.size() == a.overlays.floor_plan_posts.size());
    CHECK(b.run_state == RunState::Active);
  }
  CHECK_THROWS_AS(snapshot_from_payload(json{{"t", 0.0}}), ParseError);
}

TEST_CASE("live server handshake and error handling") {
  Server server(hotel(), {});
  const auto port = server.start();

  SUBCASE("hello returns the full scenario") {
    Client c("127.0.0.1", port);
    const json m = greet(c);
    CHECK(m["version"] == kProtocolVersion);
    CHECK(m["scenario"]["walls"].size() == hotel().walls.size());
    CHECK(hotel().walls.size() == 34);
    CHECK(load_scenario(m["scenario"].dump()).exits.size() == hotel().exits.size());
  }
  SUBCASE("version mismatch closes after an error") {
    Client c("127.0.0.1", port);
    c.send("hello", json{{"version", "evacsim/0"}});
    CHECK(error_reason(c).find("version") != std::string::npos);
    CHECK_THROWS_AS((void)c.receive(2s), Error);
  }
  SUBCASE("messages before hello are refused") {
    Client c("127.0.0.1", port);
    c.send("start_run", json{{"condition", "None"}, {"start_index", 0}});
    CHECK(error_reason(c).find("hello") != std::string::npos);
    greet(c);
  }
  SUBCASE("invalid start index gives an error and no session") {
    Client c("127.0.0.1", port);
    greet(c);
    c.send("start_run", json{{"condition", "GuidingLines"}, {"start_index", 42}});
    CHECK(error_reason(c).find("start_run") != std::string::npos);
    c.send("input", json{{"forward", 1.0}, {"turn", 0.0}});
    CHECK(error_reason(c) == "no active run");
    CHECK_FALSE(c.receive(200ms));
  }
  SUBCASE("malformed and unknown messages keep the connection") {
    Client c("127.0.0.1", port);
    greet(c);
    c.send_raw(encode_frame(std::string_view("{not json")));
    CHECK(error_reason(c).find("malformed") != std::string::npos);
    c.send("teleport", json{{"x", 1}});
    CHECK(error_reason(c).find("unknown message type") != std::string::npos);
    c.send("snapshot");
    CHECK(error_reason(c).find("server only") != std::string::npos);
    c.send_raw(encode_frame(make_message("input", 1, json{{"forward", 0}, {"turn", 0}})));
    CHECK(error_reason(c).find("seq") != std::string::npos);
    c.send("start_run", json{{"condition", "None"}, {"start_index", 0}});
    auto m = c.receive(2s);
    REQUIRE(m);
    CHECK((*m)["type"] == "snapshot");
  }
  SUBCASE("an oversized frame closes the connection") {
    Client c("127.0.0.1", port);
    greet(c);
    c.send_raw(std::string("\x7f\x00\x00\x00", 4));
    CHECK(error_reason(c).find("exceeds") != std::string::npos);
    CHECK_THROWS_AS((void)c.receive(2s), Error);
  }
  server.stop();
}

TEST_CASE("live run: snapshots are monotone and run_complete matches the exported CSV") {
  const Scenario sc = corridor_scenario(20.0);
  const auto dir = scratch_dir("live");
  ServerOptions opts;
  opts.tick_rate = 2000.0;
  opts.record_dir = dir;
  Server server(sc, opts);
  Client c("127.0.0.1", server.start());
  greet(c);

  c.send("start_run", json{{"condition", "None"}, {"start_index", 0}, {"seed", 11}, {"participant_id", "p03"}});
  c.send("input", json{{"forward", 1.5}, {"turn", 0.0}});
  std::vector<json> snapshots;
  const auto done = c.receive_until("run_complete", 20s, &snapshots);
  REQUIRE(done);

  std::int64_t last_seq = 0;
  double last_t = -1.0;
  for (const json& s : snapshots) {
    REQUIRE(s["type"] == "snapshot");
    CHECK(s["seq"].get<std::int64_t>() > last_seq);
    CHECK(s["t"].get<double>() > last_t);
    last_seq = s["seq"];
    last_t = s["t"];
  }
  CHECK((*done)["seq"].get<std::int64_t>() > last_seq);
  REQUIRE(snapshots.size() > 10);
  CHECK(snapshots.back()["run_state"]["state"] == "exited");
  CHECK(snapshots.back()["run_state"]["exit_id"] == "E");
  // Snapshot spacing follows the 20 Hz default.
  CHECK(snapshots[2]["t"].get<double>() - snapshots[1]["t"].get<double>() == doctest::Approx(0.05).epsilon(1e-6));

  const json& live = (*done)["measures"];
  REQUIRE(live["travel_time"].is_number());
  // Walking 10 m at up to 1.5 m/s; the input arrives a few ticks after the start.
  CHECK(live["travel_time"].get<double>() == doctest::Approx(10.0 / 1.5).epsilon(0.02));

  const auto csv = dir / "p03_1_None.csv";
  REQUIRE(std::filesystem::exists(csv));
  CHECK((*done)["record"] == csv.string());
  const RunMeasures offline = measure_run(read_run_record(csv), sc);
  REQUIRE(offline.travel_time);
  CHECK(std::abs(*offline.travel_time - live["travel_time"].get<double>()) <= kPhysicsStep);
  CHECK(std::abs(offline.distance - live["distance"].get<double>()) <= 1e-9);
  CHECK(live["correct_exit"] == true);

  // The connection stays usable for another run.
  c.send("start_run", json{{"condition", "None"}, {"start_index", 1}});
  auto m = c.receive(2s);
  REQUIRE(m);
  CHECK((*m)["type"] == "snapshot");
  c.send("start_run", json{{"condition", "None"}, {"start_index", 1}});
  const auto refused = c.receive_until("error", 2s);
  REQUIRE(refused);
  CHECK((*refused)["reason"].get<std::string>().find("already active") != std::string::npos);
  server.stop();
}

TEST_CASE("connections are served concurrently") {
  const Scenario sc = corridor_scenario(20.0);
  ServerOptions opts;
  opts.tick_rate = 2000.0;
  Server server(sc, opts);
  const auto port = server.start();
  std::vector<Client> clients;
  for (int i = 0; i < 4; ++i) {
    clients.emplace_back("127.0.0.1", port);
    greet(clients.back());
    clients.back().send("start_run", json{{"condition", "None"}, {"start_index", i % 4}});
    clients.back().send("input", json{{"forward", 2.0}, {"turn", 0.0}});
  }
  for (Client& c : clients) {
    const auto done = c.receive_until("run_complete", 20s);
    REQUIRE(done);
    CHECK((*done)["outcome"]["kind"] == "Exited");
  }
  server.stop();
}

TEST_CASE("replay streams the recorded run") {
  const Scenario sc = corridor_scenario(20.0);
  const Navigator nav(sc, kDefaultClearance);
  const auto dir = scratch_dir("replay");
  RunConfig cfg;
  cfg.scenario_id = sc.id;
  cfg.condition = Condition::None;
  cfg.start_position_index = 0;
  cfg.timeout = 10.0;
  Session s(sc, nav, cfg);
  while (s.active()) s.tick(0.1, VelocityInput{0.3, 0.2});
  const RecordFiles files = write_run_record(s.record(), sc, nav, dir);

  auto [record, stored] = load_replay(files.csv);
  const json offline = measures_to_json(measure_run(read_run_record(files.csv), sc, nav));
  CHECK(stored == offline);

  ReplayOptions opts;
  opts.speed = 2.0;
  ReplayServer server(record, stored, opts, sc);
  Client c("127.0.0.1", server.start());
  const auto t0 = std::chrono::steady_clock::now();
  greet(c);
  std::vector<json> snapshots;
  const auto done = c.receive_until("run_complete", 20s, &snapshots);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(done);
  CHECK(wall == doctest::Approx(5.0).epsilon(0.05));
  CHECK((*done)["measures"] == offline);
  CHECK(snapshots.size() == record.samples.size());
  CHECK(snapshots.back()["run_state"]["state"] == "timed_out");

  // A client-side trail over the snapshots matches the recorded distance.
  ClientView view;
  double trail = 0.0;
  for (const json& m : snapshots) view.apply(m);
  trail = view.trail_length();
  CHECK(trail == doctest::Approx(record.distance_walked).epsilon(0.01));

  c.send("input", json{{"forward", 1.0}, {"turn", 0.0}});
  CHECK(error_reason(c).find("replay") != std::string::npos);
  server.stop();
}

TEST_CASE("replay refuses a truncated record") {
  const Scenario sc = corridor_scenario(20.0);
  const auto dir = scratch_dir("replay_corrupt");
  RunConfig cfg;
  cfg.scenario_id = sc.id;
  cfg.start_position_index = 0;
  const RecordFiles files = write_run_record(run_scripted(cfg, sc, {}), sc, dir);
  std::string text;
  {
    std::ifstream in(files.csv, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::size_t cut = 0;
  for (int line = 0; line < 5; ++line) cut = text.find('\n', cut) + 1;
  {
    std::ofstream out(files.csv, std::ios::binary | std::ios::trunc);
    out << text.substr(0, cut + 3);
  }
  try {
    (void)load_replay(files.csv);
    FAIL("expected a corrupt-record error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("corrupt record") != std::string::npos);
    CHECK(e.line() == 6);
  }
}

TEST_CASE("client view contract") {
  SUBCASE("keyboard commands use fixed magnitudes within the clamps") {
    for (int mask = 0; mask < 16; ++mask) {
      const HeldKeys k{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
      const VelocityInput in = command_for(k);
      CHECK(std::abs(in.forward) <= kMaxAvatarSpeed);
      CHECK(std::abs(in.turn) <= kMaxAvatarTurnRate);
      CHECK(in.forward == (k.up == k.down ? 0.0 : (k.up ? 1.4 : -1.4)));
      CHECK(in.turn == (k.left == k.right ? 0.0 : (k.left ? 1.5 : -1.5)));
    }
  }
  SUBCASE("floor-plan inset is proximity gated") {
    const std::vector<Point2> posts{{3.0, 4.0}};
    CHECK(floor_plan_inset_visible({3.0, 3.0}, posts));
    CHECK_FALSE(floor_plan_inset_visible({3.0, 2.0}, posts));
    CHECK_FALSE(floor_plan_inset_visible({3.0, 3.0}, {}));
  }
  SUBCASE("a live run through the view") {
    const Scenario& sc = hotel();
    ServerOptions opts;
    opts.tick_rate = 2000.0;
    Server server(sc, opts);
    Client c("127.0.0.1", server.start());
    ClientView view;
    view.apply(greet(c));
    REQUIRE(view.has_scenario());
    CHECK(view.scenario().walls.size() == sc.walls.size());

    c.send("start_run", json{{"condition", "GuidingLines"}, {"start_index", 0}});
    auto first = c.receive(2s);
    REQUIRE(first);
    view.apply(*first);
    const auto near = nearest_exit(sc, sc.start_positions[0]);
    CHECK(view.guiding_line_vertices() == sc.guiding_lines.at(near.exit->id).vertices().size());
    CHECK(view.agent_dots() == 0);
    CHECK(view.run_state_label() == "Active");

    // Nothing pressed: the clock advances, the avatar stays put.
    const VelocityInput idle = command_for({});
    c.send("input", json{{"forward", idle.forward}, {"turn", idle.turn}});
    const auto before = view.latest()->avatar.position;
    for (int i = 0; i < 10; ++i) {
      auto m = c.receive(2s);
      REQUIRE(m);
      view.apply(*m);
    }
    CHECK(view.elapsed() > 0.4);
    CHECK(view.latest()->avatar.position == before);

    c.send("start_run", json{{"condition", "SimulatedAgents"}, {"start_index", 0}});
    const auto refused = c.receive_until("error", 2s);
    REQUIRE(refused);
    CHECK(view.apply(*refused));
    CHECK(view.last_error());

    Client other("127.0.0.1", server.port());
    ClientView crowd;
    crowd.apply(greet(other));
    other.send("start_run", json{{"condition", "SimulatedAgents"}, {"start_index", 0}});
    REQUIRE(crowd.apply(*other.receive(2s)));
    CHECK(crowd.agent_dots() == 6);
    CHECK(crowd.guiding_line_vertices() == 0);
    server.stop();
  }
}
