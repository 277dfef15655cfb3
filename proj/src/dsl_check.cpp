#include <algorithm>
#include <set>

#include "scenforge/dsl.hpp"

namespace scenforge::dsl {

SemanticDictionary::SemanticDictionary(std::vector<VerbInfo> verbs) : verbs_(std::move(verbs)) {
  std::set<std::string> seen;
  for (const auto& v : verbs_)
    if (!seen.insert(v.name).second) throw ConfigError("duplicate verb in dictionary: " + v.name);
}

const SemanticDictionary& SemanticDictionary::standard() {
  static const SemanticDictionary dict({
      {"go_straight", VerbLevel::kEgo, {}},
      {"turn_left", VerbLevel::kEgo, {}},
      {"turn_right", VerbLevel::kEgo, {}},
      {"u_turn", VerbLevel::kEgo, {}},
      {"follow", VerbLevel::kEgo, {}},
      {"brake", VerbLevel::kEgo, {"decel"}},
      {"lane_change", VerbLevel::kEgo, {"direction"}},
      {"idle", VerbLevel::kEgo, {}},
      {"policy", VerbLevel::kEgo, {}},
      {"sudden_brake", VerbLevel::kAdversarial, {"decel"}},
      {"tailgate", VerbLevel::kAdversarial, {"gap"}},
      {"cut_in", VerbLevel::kAdversarial, {"side"}},
      {"speeding", VerbLevel::kAdversarial, {"factor"}},
  });
  return dict;
}

const VerbInfo* SemanticDictionary::find(std::string_view verb) const {
  for (const auto& v : verbs_)
    if (v.name == verb) return &v;
  return nullptr;
}

std::optional<std::string> SemanticDictionary::suggest(std::string_view verb, int max_distance) const {
  std::optional<std::string> best;
  int best_d = max_distance + 1;
  for (const auto& v : verbs_) {
    const int d = edit_distance(verb, v.name);
    if (d < best_d) {
      best_d = d;
      best = v.name;
    }
  }
  return best;
}

int edit_distance(std::string_view a, std::string_view b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool StructureReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const StructureCheck* StructureReport::check(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<std::string> StructureReport::findings() const {
  std::vector<std::string> out;
  for (const auto& c : checks) out.insert(out.end(), c.findings.begin(), c.findings.end());
  return out;
}

std::size_t StructureReport::passed_count() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const auto& c) { return c.passed; }));
}

StructureReport validate_structure(const DslDocument& doc, const SemanticDictionary& dict) {
  StructureReport report;

  StructureCheck sections{"sections", true, {}};
  if (!doc.map_key()) sections.findings.push_back("geometry missing map");
  if (doc.spawn.empty()) sections.findings.push_back("spawn section empty");
  if (doc.behavior.empty()) sections.findings.push_back("behavior section empty");

  StructureCheck ego{"unique ego", true, {}};
  const auto egos = std::count_if(doc.spawn.begin(), doc.spawn.end(),
                                  [](const auto& v) { return v.role == VehicleRole::kEgo; });
  if (egos == 0) ego.findings.push_back("no ego");
  if (egos > 1) ego.findings.push_back("multiple ego");

  StructureCheck targets{"declared targets", true, {}};
  std::set<std::string> declared;
  for (const auto& v : doc.spawn) {
    if (const auto* rel = std::get_if<RelativePlacement>(&v.placement)) {
      if (!declared.count(rel->anchor))
        targets.findings.push_back("anchor '" + rel->anchor + "' of '" + v.id +
                                   "' not declared earlier");
    }
    declared.insert(v.id);
  }
  std::set<std::string> scheduled;
  for (const auto& s : doc.behavior) {
    if (!declared.count(s.target)) targets.findings.push_back("undeclared target '" + s.target + "'");
    if (!scheduled.insert(s.target).second)
      targets.findings.push_back("duplicate schedule for '" + s.target + "'");
  }

  StructureCheck args{"required args", true, {}};
  for (const auto& s : doc.behavior) {
    for (const auto& a : s.actions) {
      const auto* info = dict.find(a.verb);
      if (!info) continue;
      for (const auto& r : info->required_args)
        if (!a.args.count(r))
          args.findings.push_back("missing arg " + r + " for " + a.verb + " on '" + s.target + "'");
    }
  }

  for (auto* c : {&sections, &ego, &targets, &args}) {
    c->passed = c->findings.empty();
    report.checks.push_back(std::move(*c));
  }
  return report;
}

std::size_t DictionaryReport::custom_count() const {
  return static_cast<std::size_t>(
      std::count_if(verbs.begin(), verbs.end(), [](const auto& v) { return !v.known; }));
}

DictionaryReport check_dictionary(const DslDocument& doc, const SemanticDictionary& dict) {
  DictionaryReport report;
  for (const auto& s : doc.behavior) {
    for (const auto& a : s.actions) {
      VerbFinding f{s.target, a.verb, dict.find(a.verb) != nullptr, std::nullopt};
      if (!f.known) f.suggestion = dict.suggest(a.verb);
      report.verbs.push_back(std::move(f));
    }
  }
  return report;
}

}  // namespace scenforge::dsl
