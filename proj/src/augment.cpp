#include <cmath>
#include <cstdio>
#include <set>

#include "scenforge/evalloop.hpp"

namespace scenforge {

std::string scene_label(const dsl::DslDocument& doc) {
  if (auto it = doc.geometry.find("scene"); it != doc.geometry.end() && it->second.is_text())
    return it->second.text;
  return doc.name;
}

namespace {

std::optional<AdversarialBehavior> behavior_of(std::string_view verb) {
  if (verb == "tailgate") return AdversarialBehavior::kTailgate;
  if (verb == "sudden_brake") return AdversarialBehavior::kSuddenBrake;
  if (verb == "cut_in") return AdversarialBehavior::kUnsafeLaneChange;
  if (verb == "speeding") return AdversarialBehavior::kSpeeding;
  return std::nullopt;
}

bool is_adversarial_vehicle(const ScenarioProgram& program, std::string_view id) {
  const auto i = program.index_of(id);
  return i && program.roles.at(*i) == dsl::VehicleRole::kAdversarial;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace

bool is_success(const EpisodeLog& log, const ScenarioProgram& program) {
  if (log.termination != Termination::kGoal) return false;
  bool adversarial = false;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::kCollision) return false;
    if (e.kind == EventKind::kBehavior && !e.vehicles.empty() && is_adversarial_vehicle(program, e.vehicles.front()) &&
        behavior_of(e.detail))
      adversarial = true;
  }
  return adversarial;
}

ScenarioRecord record_from_episode(const EpisodeLog& log, const ScenarioProgram& program,
                                   const dsl::DslDocument& doc) {
  const auto metrics = episode_metrics(log, program);
  ScenarioRecord r;
  r.scene_type = scene_label(doc);

  ScenarioSegment seg;
  seg.ego_id = program.initial.at(program.ego).id;
  seg.start = 0;
  seg.end = log.frames.empty() ? 0 : log.frames.size() - 1;
  seg.t_end = static_cast<double>(log.steps) * program.params.dt;
  try {
    seg.label = parse_scenario_label(r.scene_type);
  } catch (const DataError&) {
    seg.label = ScenarioLabel::kFollow;
  }
  seg.risk.min_ttc = metrics.min_ttc;
  seg.risk.min_pet = metrics.min_pet;
  r.behavior_summary = summarize_behavior(seg);
  r.road_description = describe_road(program.map, program.ego_route);
  r.risk = seg.risk;

  const dsl::VehicleDecl* adv = nullptr;
  for (const auto& v : doc.spawn)
    if (v.role == dsl::VehicleRole::kAdversarial) {
      adv = &v;
      break;
    }
  if (adv) {
    if (const auto* sched = doc.schedule_for(adv->id)) {
      for (const auto& a : sched->actions) {
        if (auto b = behavior_of(a.verb)) {
          r.adversarial.behavior = *b;
          for (const auto& [k, val] : a.args)
            if (val.kind == dsl::Value::Kind::kNumber) r.adversarial.params[k] = val.number;
          if (a.duration) r.adversarial.params["duration"] = *a.duration;
          break;
        }
      }
    }
    if (const auto* rel = std::get_if<dsl::RelativePlacement>(&adv->placement)) {
      r.adversarial.relation = rel->relation;
      r.adversarial.distance = rel->offset;
    } else if (auto i = program.index_of(adv->id); i && !log.frames.empty()) {
      const auto& e = log.frames.front().at(program.ego);
      const auto& o = log.frames.front().at(*i);
      const Vec2 h{std::cos(e.heading), std::sin(e.heading)};
      const Vec2 d = Vec2{o.x, o.y} - Vec2{e.x, e.y};
      const double along = d.dot(h);
      const double across = h.cross(d);
      if (std::abs(along) >= std::abs(across)) {
        r.adversarial.relation = along >= 0 ? dsl::Relation::kFront : dsl::Relation::kRear;
        r.adversarial.distance = std::abs(along) - (program.initial[program.ego].length + program.initial[*i].length) / 2;
      } else {
        r.adversarial.relation = across >= 0 ? dsl::Relation::kLeft : dsl::Relation::kRight;
        r.adversarial.distance = std::abs(across) - (program.initial[program.ego].width + program.initial[*i].width) / 2;
      }
      r.adversarial.distance = std::max(0.1, round_to(r.adversarial.distance, 0.1));
    }
  }
  r.adversarial_text = render_condition(r.adversarial);
  r.provenance = {"SIM", program.name, 0, log.frames.empty() ? 0 : log.frames.size() - 1};
  r.description = assemble_description(
      {r.scene_type, r.behavior_summary, r.road_description, r.adversarial_text, r.provenance});

  dsl::DslDocument realized = doc;
  if (!log.frames.empty())
    for (auto& v : realized.spawn)
      if (auto i = program.index_of(v.id)) v.speed = round_to(log.frames.front().at(*i).speed, 0.01);
  r.dsl_geometry = dsl::print_geometry_section(realized);
  r.dsl_spawn = dsl::print_spawn_section(realized);
  r.dsl_behavior = dsl::print_behavior_section(realized);
  validate_record(r);
  return r;
}

std::string record_hash(const ScenarioRecord& record) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(record_to_json(record))));
  return buf;
}

AugmentResult augment_corpus(const std::vector<EpisodeLog>& episodes, const ScenarioProgram& program,
                             const dsl::DslDocument& doc, std::vector<ScenarioRecord>& corpus,
                             RetrievalIndex* index) {
  std::set<std::string> seen;
  for (const auto& r : corpus) seen.insert(record_hash(r));
  AugmentResult result;
  for (const auto& log : episodes) {
    if (!is_success(log, program)) {
      ++result.unsuccessful;
      continue;
    }
    ScenarioRecord r = record_from_episode(log, program, doc);
    const std::string h = record_hash(r);
    if (!seen.insert(h).second) {
      ++result.duplicates;
      continue;
    }
    if (index) {
      const std::string key = "scene-" + h;
      bool present = false;
      for (const auto& e : index->entries()) present = present || e.key == key;
      if (!present)
        index->add(key, r.description,
                   {{"geometry", r.dsl_geometry}, {"spawn", r.dsl_spawn}, {"behavior", r.dsl_behavior},
                    {"scene_type", r.scene_type}});
    }
    corpus.push_back(r);
    result.appended.push_back(std::move(r));
  }
  return result;
}

AugmentResult augment_corpus(const std::vector<EpisodeLog>& episodes, const ScenarioProgram& program,
                             const dsl::DslDocument& doc, const CorpusStore& store, RetrievalIndex* index) {
  auto corpus = store.load();
  auto result = augment_corpus(episodes, program, doc, corpus, index);
  if (!result.appended.empty()) store.append(result.appended);
  return result;
}

}  // namespace scenforge
