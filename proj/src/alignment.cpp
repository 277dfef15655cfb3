#include <algorithm>
#include <cmath>
#include <regex>

#include "scenforge/genpipe.hpp"

namespace scenforge {

namespace {

struct KeywordRule {
  const char* verb;
  std::vector<const char*> phrases;
};

const std::vector<KeywordRule>& keyword_table() {
  static const std::vector<KeywordRule> table = {
      {"tailgate", {"tailgat"}},
      {"sudden_brake", {"sudden brak", "brakes suddenly", "sudden stop", "hard brak"}},
      {"cut_in", {"cut-in", "cut in", "cuts in", "cutting in"}},
      {"speeding", {"speeding"}},
      {"lane_change", {"changes into an adjacent lane", "lane change", "changes lane"}},
      {"turn_left", {"turns left", "left turn"}},
      {"turn_right", {"turns right", "right turn"}},
      {"u_turn", {"u-turn", "u turn"}},
      {"follow", {"follows a leading", "car-following", "car following"}},
      {"brake", {"brakes behind"}},
      {"go_straight", {"drives straight", "goes straight"}},
  };
  return table;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::vector<std::string> detect_behaviors(std::string_view query) {
  const std::string q = lower(query);
  std::vector<std::string> out;
  for (const auto& rule : keyword_table())
    for (const char* p : rule.phrases)
      if (q.find(p) != std::string::npos) {
        out.emplace_back(rule.verb);
        break;
      }
  return out;
}

std::vector<RelationMention> detect_relations(std::string_view query) {
  static const std::regex re(R"((\d+(?:\.\d+)?)\s*m(?![/\w])[^.\d]*?\b(rear|front|left|right)\b)",
                             std::regex::icase);
  std::vector<RelationMention> out;
  const std::string q(query);
  for (auto it = std::sregex_iterator(q.begin(), q.end(), re); it != std::sregex_iterator(); ++it) {
    RelationMention m;
    m.distance = std::stod((*it)[1].str());
    m.relation = *dsl::parse_relation(lower((*it)[2].str()));
    out.push_back(m);
  }
  return out;
}

AlignmentResult semantic_alignment(const dsl::DslDocument& doc, std::string_view query,
                                   const dsl::SemanticDictionary& dict, Backend* judge) {
  AlignmentResult r;
  std::vector<std::string> verbs;
  for (const auto& s : doc.behavior)
    for (const auto& a : s.actions) verbs.push_back(a.verb);
  for (const auto& tag : detect_behaviors(query)) {
    if (!dict.find(tag)) continue;
    if (std::find(verbs.begin(), verbs.end(), tag) == verbs.end())
      r.reasons.push_back("missing behavior " + tag);
  }
  for (const auto& m : detect_relations(query)) {
    const bool found = std::any_of(doc.spawn.begin(), doc.spawn.end(), [&](const dsl::VehicleDecl& d) {
      const auto* rel = std::get_if<dsl::RelativePlacement>(&d.placement);
      return d.role != dsl::VehicleRole::kEgo && rel && rel->relation == m.relation &&
             std::abs(rel->offset - m.distance) <= 1e-6;
    });
    if (!found)
      r.reasons.push_back("missing placement " + std::string(dsl::to_string(m.relation)) + " " +
                          format_number(m.distance) + " m");
  }
  if (judge && r.reasons.empty()) {
    const std::string prompt =
        "Does the scenario document implement the description? Answer PASS, or REVISE: followed by "
        "reasons separated by ';'.\nDescription: " +
        std::string(query) + "\nDocument:\n" + dsl::print_dsl(doc);
    const auto answer = judge->complete(prompt, 1);
    const std::string text = answer.empty() ? std::string() : answer.front();
    const auto start = text.find_first_not_of(" \t\r\n");
    const std::string trimmed = start == std::string::npos ? std::string() : text.substr(start);
    if (trimmed.rfind("PASS", 0) != 0) {
      std::string rest = trimmed.rfind("REVISE:", 0) == 0 ? trimmed.substr(7) : trimmed;
      std::size_t pos = 0;
      while (pos <= rest.size()) {
        const auto semi = rest.find(';', pos);
        std::string item = rest.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos);
        item.erase(0, item.find_first_not_of(" \t\r\n"));
        item.erase(item.find_last_not_of(" \t\r\n") + 1);
        if (!item.empty()) r.reasons.push_back("judge: " + item);
        if (semi == std::string::npos) break;
        pos = semi + 1;
      }
      if (r.reasons.empty()) r.reasons.push_back("judge rejected the document");
    }
  }
  r.passed = r.reasons.empty();
  return r;
}

}  // namespace scenforge
