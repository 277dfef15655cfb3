#include <set>

#include "scenforge/sim.hpp"

namespace scenforge {

std::vector<std::string> ScenarioProgram::policy_slots() const {
  std::set<std::string> slots;
  for (const auto& c : controllers)
    if (c.kind == ControllerSpec::Kind::kPolicy) slots.insert(c.slot);
  return {slots.begin(), slots.end()};
}

std::optional<std::size_t> ScenarioProgram::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < initial.size(); ++i)
    if (initial[i].id == id) return i;
  return std::nullopt;
}

namespace {

struct Placed {
  VehicleState state;
  double s = 0.0;
  double d = 0.0;
};

}  // namespace

ScenarioProgram compile_scenario(const dsl::DslDocument& doc, const MapLibrary& maps,
                                 const RetrievalIndex* code_index, const SimParams& params) {
  const auto report = dsl::validate_structure(doc);
  if (!report.passed()) {
    std::string msg = "structure check failed:";
    for (const auto& f : report.findings()) msg += " " + f + ";";
    throw CompileError(msg);
  }
  const auto key = doc.map_key();
  auto map_it = key ? maps.find(*key) : maps.end();
  if (map_it == maps.end()) throw CompileError("unknown map key '" + key.value_or("") + "'");

  ScenarioProgram prog;
  prog.name = doc.name;
  prog.map_key = *key;
  prog.map = map_it->second;
  prog.params = params;
  if (auto it = doc.geometry.find("horizon"); it != doc.geometry.end()) {
    if (it->second.kind != dsl::Value::Kind::kNumber || it->second.number < 1.0)
      throw CompileError("horizon must be a number >= 1");
    prog.params.horizon = static_cast<int>(it->second.number);
  }

  std::map<std::string, LanePath> paths;
  auto path_of = [&](const std::string& lane) -> const LanePath& {
    auto it = paths.find(lane);
    if (it != paths.end()) return it->second;
    const Lane* l = prog.map.find(lane);
    if (!l) throw CompileError("unknown lane '" + lane + "' in map '" + prog.map_key + "'");
    return paths.emplace(lane, LanePath(l->centerline)).first->second;
  };

  std::vector<Placed> placed;
  for (const auto& decl : doc.spawn) {
    Placed p;
    p.state.id = decl.id;
    p.state.speed = decl.speed;
    p.state.length = decl.effective_length();
    p.state.width = decl.effective_width();
    std::optional<std::size_t> anchor;
    if (const auto* abs = std::get_if<dsl::AbsolutePlacement>(&decl.placement)) {
      path_of(abs->lane);
      p.state.lane_id = abs->lane;
      p.s = abs->arc_s;
    } else {
      const auto& rel = std::get<dsl::RelativePlacement>(decl.placement);
      for (std::size_t j = 0; j < placed.size(); ++j)
        if (placed[j].state.id == rel.anchor) anchor = j;
      if (!anchor) throw CompileError("unresolved anchor '" + rel.anchor + "' for '" + decl.id + "'");
      const Placed& a = placed[*anchor];
      p.state.lane_id = a.state.lane_id;
      p.s = a.s;
      p.d = a.d;
      const double along = rel.offset + (a.state.length + p.state.length) / 2.0;
      const double across = rel.offset + (a.state.width + p.state.width) / 2.0;
      switch (rel.relation) {
        case dsl::Relation::kRear: p.s -= along; break;
        case dsl::Relation::kFront: p.s += along; break;
        case dsl::Relation::kLeft: p.d += across; break;
        case dsl::Relation::kRight: p.d -= across; break;
      }
    }
    const LanePath& path = path_of(p.state.lane_id);
    const Vec2 pos = path.pose(p.s, p.d);
    p.state.x = pos.x;
    p.state.y = pos.y;
    p.state.heading = path.heading_at(p.s);
    if (p.d != 0.0) {
      // a lateral offset may land the vehicle in a neighbouring lane
      if (auto lane = match_lane(pos, prog.map, params.lane_half_width + 0.75);
          lane && *lane != p.state.lane_id) {
        const auto f = path_of(*lane).project(pos);
        p.state.lane_id = *lane;
        p.s = f.s;
        p.d = f.d;
      }
    }
    placed.push_back(p);
    prog.anchors.push_back(anchor);
    prog.roles.push_back(decl.role);
  }

  for (std::size_t i = 0; i < placed.size(); ++i)
    for (std::size_t j = i + 1; j < placed.size(); ++j)
      if (boxes_overlap(footprint(placed[i].state), footprint(placed[j].state)))
        throw CompileError("initial overlap between '" + placed[i].state.id + "' and '" +
                           placed[j].state.id + "'");

  for (std::size_t i = 0; i < placed.size(); ++i) {
    prog.initial.push_back(placed[i].state);
    const auto& decl = doc.spawn[i];
    if (doc.ego()->id == decl.id) prog.ego = i;
    ControllerSpec c;
    if (const auto* sched = doc.schedule_for(decl.id)) {
      const auto& first = sched->actions.front();
      if (first.verb == "policy") {
        c.kind = ControllerSpec::Kind::kPolicy;
        c.slot = first.text_arg("slot").value_or(decl.id);
      } else {
        c.kind = ControllerSpec::Kind::kScripted;
        c.schedule = *sched;
      }
    }
    prog.controllers.push_back(std::move(c));
  }

  prog.ego_route = doc.ego_route();
  if (prog.ego_route.empty()) prog.ego_route.push_back(prog.initial[prog.ego].lane_id);
  for (const auto& lane : prog.ego_route) path_of(lane);

  if (code_index && code_index->size() > 0) {
    std::string verbs;
    for (const auto& s : doc.behavior)
      for (const auto& a : s.actions) verbs += a.verb + " ";
    for (const auto& r : code_index->query("spawn vehicle " + verbs, 3))
      prog.context_keys.push_back(r.entry->key);
  }
  return prog;
}

}  // namespace scenforge
