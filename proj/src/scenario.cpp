#include "evacsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "evacsim/navigation.hpp"

namespace evacsim {

using nlohmann::json;

std::size_t Scenario::exit_index(std::string_view exit_id) const {
  for (std::size_t i = 0; i < exits.size(); ++i) {
    if (exits[i].id == exit_id) return i;
  }
  return exits.size();
}

const Exit& Scenario::exit_by_id(std::string_view exit_id) const {
  const std::size_t i = exit_index(exit_id);
  if (i == exits.size()) throw Error(fmt::format("unknown exit id '{}'", exit_id));
  return exits[i];
}

namespace {

std::size_t line_of_offset(std::string_view doc, std::size_t offset) {
  offset = std::min(offset, doc.size());
  return 1 + static_cast<std::size_t>(std::count(doc.begin(), doc.begin() + static_cast<long>(offset), '\n'));
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParseError(fmt::format("field '{}': {}", field, what), 0, field);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(field, "expected a finite number");
  return v;
}

Point2 point(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) field_error(field, "expected [x, y]");
  return {number(j[0], field + "[0]"), number(j[1], field + "[1]")};
}

Segment segment(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4) field_error(field, "expected [x1, y1, x2, y2]");
  return {{number(j[0], field + "[0]"), number(j[1], field + "[1]")},
          {number(j[2], field + "[2]"), number(j[3], field + "[3]")}};
}

std::string string_field(const json& j, const std::string& field) {
  if (!j.is_string()) field_error(field, "expected a string");
  return j.get<std::string>();
}

const json& array_field(const json& j, const std::string& field) {
  if (!j.is_array()) field_error(field, "expected an array");
  return j;
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      field_error(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

const json& required(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  const std::string field = where.empty() ? std::string(key) : where + "." + key;
  if (it == obj.end()) field_error(field, "missing required key");
  return *it;
}

std::vector<Point2> point_list(const json& j, const std::string& field) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i < array_field(j, field).size(); ++i) {
    out.push_back(point(j[i], fmt::format("{}[{}]", field, i)));
  }
  return out;
}

Scenario from_json(const json& root) {
  if (!root.is_object()) field_error("", "top level must be an object");
  reject_unknown(root,
                 {"id", "bounds", "walls", "exits", "starts", "guiding_lines", "exit_signs", "floor_plan_posts"},
                 "");
  Scenario sc;
  sc.id = string_field(required(root, "id", ""), "id");

  const json& bounds = required(root, "bounds", "");
  if (!bounds.is_object()) field_error("bounds", "expected an object");
  reject_unknown(bounds, {"min", "max"}, "bounds");
  sc.bounds = {point(required(bounds, "min", "bounds"), "bounds.min"),
               point(required(bounds, "max", "bounds"), "bounds.max")};

  const json& walls = array_field(required(root, "walls", ""), "walls");
  for (std::size_t i = 0; i < walls.size(); ++i) sc.walls.push_back(segment(walls[i], fmt::format("walls[{}]", i)));

  const json& exits = array_field(required(root, "exits", ""), "exits");
  for (std::size_t i = 0; i < exits.size(); ++i) {
    const std::string where = fmt::format("exits[{}]", i);
    if (!exits[i].is_object()) field_error(where, "expected an object");
    reject_unknown(exits[i], {"id", "portal", "label"}, where);
    Exit e;
    e.id = string_field(required(exits[i], "id", where), where + ".id");
    e.portal = segment(required(exits[i], "portal", where), where + ".portal");
    if (const auto it = exits[i].find("label"); it != exits[i].end()) e.label = string_field(*it, where + ".label");
    sc.exits.push_back(std::move(e));
  }

  sc.start_positions = point_list(required(root, "starts", ""), "starts");

  if (const auto it = root.find("guiding_lines"); it != root.end()) {
    if (!it->is_object()) field_error("guiding_lines", "expected an object keyed by exit id");
    for (const auto& [exit_id, verts] : it->items()) {
      const std::string where = "guiding_lines." + exit_id;
      std::vector<Point2> pts = point_list(verts, where);
      if (pts.size() < 2) field_error(where, "a guiding line needs at least two vertices");
      try {
        sc.guiding_lines.emplace(exit_id, PathPolyline(std::move(pts)));
      } catch (const std::invalid_argument& e) {
        throw InvariantViolation("path polyline vertices distinct", where + ": " + e.what());
      }
    }
  }

  if (const auto it = root.find("exit_signs"); it != root.end()) {
    for (std::size_t i = 0; i < array_field(*it, "exit_signs").size(); ++i) {
      const json& s = (*it)[i];
      const std::string where = fmt::format("exit_signs[{}]", i);
      if (!s.is_object()) field_error(where, "expected an object");
      reject_unknown(s, {"pos", "facing", "arrow", "range"}, where);
      sc.exit_signs.push_back({point(required(s, "pos", where), where + ".pos"),
                               point(required(s, "facing", where), where + ".facing"),
                               point(required(s, "arrow", where), where + ".arrow"),
                               number(required(s, "range", where), where + ".range")});
    }
  }

  if (const auto it = root.find("floor_plan_posts"); it != root.end()) {
    sc.floor_plan_posts = point_list(*it, "floor_plan_posts");
  }
  return sc;
}

}  // namespace

void validate_scenario(const Scenario& sc) {
  const Rect& b = sc.bounds;
  if (!(b.min.x < b.max.x && b.min.y < b.max.y)) {
    throw InvariantViolation("bounds non-empty", "bounds.min must be below bounds.max");
  }
  auto inside = [&](Point2 p, const std::string& what) {
    if (!b.contains(p, 1e-9)) {
      throw InvariantViolation("bounds contain all geometry", fmt::format("{} ({}, {}) lies outside the bounds", what, p.x, p.y));
    }
  };
  for (std::size_t i = 0; i < sc.walls.size(); ++i) {
    inside(sc.walls[i].a, fmt::format("walls[{}]", i));
    inside(sc.walls[i].b, fmt::format("walls[{}]", i));
  }

  if (sc.exits.empty()) throw InvariantViolation("at least one exit", "scenario has no exits");
  std::set<std::string> ids;
  for (const Exit& e : sc.exits) {
    if (e.id.empty()) throw InvariantViolation("exit id non-empty", "an exit has an empty id");
    if (!ids.insert(e.id).second) throw InvariantViolation("exit ids unique", "duplicate exit id '" + e.id + "'");
    if (e.portal.length() <= 0.0) throw InvariantViolation("portal length > 0", "exit '" + e.id + "' has a degenerate portal");
    inside(e.portal.a, "exit '" + e.id + "' portal");
    inside(e.portal.b, "exit '" + e.id + "' portal");
    for (const Point2 end : {e.portal.a, e.portal.b}) {
      if (wall_distance(sc, end) > 1e-6) {
        throw InvariantViolation("portal endpoints on wall geometry",
                                 fmt::format("exit '{}' endpoint ({}, {}) touches no wall", e.id, end.x, end.y));
      }
    }
    for (std::size_t i = 0; i < sc.walls.size(); ++i) {
      if (blocks_open_segment(sc.walls[i], e.portal.a, e.portal.b)) {
        throw InvariantViolation("exit lies on the boundary of navigable space",
                                 fmt::format("exit '{}' portal is obstructed by walls[{}]", e.id, i));
      }
    }
  }

  for (std::size_t i = 0; i < sc.start_positions.size(); ++i) {
    const Point2 p = sc.start_positions[i];
    inside(p, fmt::format("starts[{}]", i));
    const double d = wall_distance(sc, p);
    if (d < kDefaultClearance) {
      throw InvariantViolation("start position inside navigable space",
                               fmt::format("starts[{}] is {:.3f} m from a wall (inside the wall's {} m clearance)", i, d,
                                           kDefaultClearance));
    }
  }

  for (const auto& [exit_id, line] : sc.guiding_lines) {
    const std::size_t idx = sc.exit_index(exit_id);
    if (idx == sc.exits.size()) {
      throw InvariantViolation("guiding line keyed by an existing exit", "no exit with id '" + exit_id + "'");
    }
    for (const Point2& v : line.vertices()) inside(v, "guiding line '" + exit_id + "'");
    if (point_segment_distance(line.back(), sc.exits[idx].portal) > kGuidingLineExitTolerance) {
      throw InvariantViolation("guiding line terminates at its exit",
                               fmt::format("guiding line '{}' ends more than {} m from the portal", exit_id,
                                           kGuidingLineExitTolerance));
    }
  }

  for (std::size_t i = 0; i < sc.exit_signs.size(); ++i) {
    const SignPlacement& s = sc.exit_signs[i];
    inside(s.position, fmt::format("exit_signs[{}]", i));
    if (std::abs(s.facing.norm() - 1.0) > 1e-6 || std::abs(s.arrow_direction.norm() - 1.0) > 1e-6) {
      throw InvariantViolation("sign directions unit-norm", fmt::format("exit_signs[{}] facing/arrow not unit length", i));
    }
    if (!(s.visibility_range > 0.0)) {
      throw InvariantViolation("sign visibility_range > 0", fmt::format("exit_signs[{}] range must be positive", i));
    }
  }
  for (std::size_t i = 0; i < sc.floor_plan_posts.size(); ++i) inside(sc.floor_plan_posts[i], fmt::format("floor_plan_posts[{}]", i));
}

Scenario load_scenario(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    const std::size_t line = line_of_offset(document, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(fmt::format("line {}: {}", line, e.what()), line, "");
  }
  Scenario sc = from_json(root);
  validate_scenario(sc);
  return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string scenario_to_string(const Scenario& sc) {
  auto pt = [](Point2 p) { return json::array({p.x, p.y}); };
  auto seg = [](const Segment& s) { return json::array({s.a.x, s.a.y, s.b.x, s.b.y}); };
  json root;
  root["id"] = sc.id;
  root["bounds"] = {{"min", pt(sc.bounds.min)}, {"max", pt(sc.bounds.max)}};
  root["walls"] = json::array();
  for (const Segment& w : sc.walls) root["walls"].push_back(seg(w));
  root["exits"] = json::array();
  for (const Exit& e : sc.exits) root["exits"].push_back({{"id", e.id}, {"portal", seg(e.portal)}, {"label", e.label}});
  root["starts"] = json::array();
  for (Point2 p : sc.start_positions) root["starts"].push_back(pt(p));
  root["guiding_lines"] = json::object();
  for (const auto& [id, line] : sc.guiding_lines) {
    json verts = json::array();
    for (Point2 p : line.vertices()) verts.push_back(pt(p));
    root["guiding_lines"][id] = verts;
  }
  root["exit_signs"] = json::array();
  for (const SignPlacement& s : sc.exit_signs) {
    root["exit_signs"].push_back({{"pos", pt(s.position)},
                                  {"facing", pt(s.facing)},
                                  {"arrow", pt(s.arrow_direction)},
                                  {"range", s.visibility_range}});
  }
  root["floor_plan_posts"] = json::array();
  for (Point2 p : sc.floor_plan_posts) root["floor_plan_posts"].push_back(pt(p));
  return root.dump(2);
}

double wall_distance(const Scenario& sc, Point2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& w : sc.walls) best = std::min(best, point_segment_distance(p, w));
  return best;
}

bool line_of_sight(const Scenario& sc, Point2 from, Point2 to) {
  if (!sc.bounds.contains(from) || !sc.bounds.contains(to)) {
    throw OutOfBoundsError(fmt::format("line_of_sight query ({}, {}) -> ({}, {}) leaves the scenario bounds", from.x,
                                       from.y, to.x, to.y));
  }
  return std::none_of(sc.walls.begin(), sc.walls.end(),
                      [&](const Segment& w) { return blocks_open_segment(w, from, to); });
}

PathPolyline shortest_path(const Scenario& sc, Point2 from, const Exit& to_exit, double clearance) {
  const std::size_t idx = sc.exit_index(to_exit.id);
  if (idx == sc.exits.size()) throw Error("exit '" + to_exit.id + "' is not part of scenario '" + sc.id + "'");
  return Navigator(sc, clearance).path_to_exit(from, idx);
}

NearestExit nearest_exit(const Scenario& sc, Point2 from) {
  const Navigator nav(sc, kDefaultClearance);
  const auto best = nav.nearest_exit(from);
  if (!best) throw UnreachableError(fmt::format("no exit reachable from ({}, {})", from.x, from.y));
  return {&sc.exits[best->exit_index], best->distance};
}

}  // namespace evacsim
