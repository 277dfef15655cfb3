#include <algorithm>
#include <regex>
#include <set>

#include "scenforge/evalloop.hpp"

namespace scenforge {

std::string_view to_string(RubricItem item) {
  switch (item) {
    case RubricItem::kSemanticFidelity: return "semantic_fidelity";
    case RubricItem::kExecutableValidity: return "executable_validity";
    case RubricItem::kStructuralCompleteness: return "structural_completeness";
    case RubricItem::kModularity: return "modularity";
    case RubricItem::kBehavioralRichness: return "behavioral_richness";
    case RubricItem::kVotingCentrality: return "voting_centrality";
  }
  return "?";
}

double RubricScore::total() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < kRubricItems; ++i) sum += kRubricWeights[i] * std::clamp(scores[i], 0.0, 5.0);
  return 100.0 * sum / 5.0;
}

JudgeScores HeuristicJudge::judge(const dsl::DslDocument& doc, std::string_view query) const {
  JudgeScores s;
  const std::size_t expected = detect_behaviors(query).size() + detect_relations(query).size();
  const auto align = semantic_alignment(doc, query);
  s.semantic_fidelity =
      expected == 0 ? 5.0
                    : 5.0 * static_cast<double>(expected - std::min(expected, align.reasons.size())) /
                          static_cast<double>(expected);
  std::set<std::string> parameterised;
  for (const auto& sched : doc.behavior)
    for (const auto& a : sched.actions)
      if (!a.args.empty() || a.duration) parameterised.insert(a.verb);
  s.behavioral_richness = std::min(5.0, 5.0 * static_cast<double>(parameterised.size()) / 3.0);
  return s;
}

JudgeScores BackendJudge::parse_reply(std::string_view reply) {
  static const std::regex sem(R"(semantic_fidelity\s*[:=]\s*([0-9]+(?:\.[0-9]+)?))", std::regex::icase);
  static const std::regex rich(R"(behavioral_richness\s*[:=]\s*([0-9]+(?:\.[0-9]+)?))", std::regex::icase);
  const std::string text(reply);
  std::smatch a, b;
  if (!std::regex_search(text, a, sem) || !std::regex_search(text, b, rich))
    throw ProtocolError("judge reply lacks semantic_fidelity or behavioral_richness");
  return {std::clamp(std::stod(a[1].str()), 0.0, 5.0), std::clamp(std::stod(b[1].str()), 0.0, 5.0)};
}

JudgeScores BackendJudge::judge(const dsl::DslDocument& doc, std::string_view query) const {
  const std::string prompt =
      "Rate the scenario document against the description from 0 (very poor) to 5 (excellent).\n"
      "Reply with two lines: semantic_fidelity: <score> and behavioral_richness: <score>.\n"
      "Description: " + std::string(query) + "\nDocument:\n" + dsl::print_dsl(doc);
  JudgeScores sum;
  const int runs = std::max(1, runs_);
  for (int r = 0; r < runs; ++r) {
    const auto replies = backend_->complete(prompt, 1);
    if (replies.empty()) throw ProtocolError("judge returned no reply");
    const auto s = parse_reply(replies.front());
    sum.semantic_fidelity += s.semantic_fidelity / runs;
    sum.behavioral_richness += s.behavioral_richness / runs;
  }
  return sum;
}

double executable_validity(const dsl::DslDocument& doc, const MapLibrary& maps, const SimParams& sim) {
  ScenarioProgram program;
  try {
    program = compile_scenario(doc, maps, nullptr, sim);
  } catch (const DataError&) {
    return 0.0;
  }
  Simulation s(program, 0);
  std::map<std::string, PolicyAction> actions;
  for (const auto& slot : program.policy_slots()) actions[slot] = PolicyAction::kIdle;
  const auto out = s.step(actions);
  for (const auto& e : out.events)
    if (e.kind == EventKind::kCollision || e.kind == EventKind::kViolation) return 3.0;
  return 5.0;
}

double structural_completeness(const dsl::DslDocument& doc) {
  const auto report = dsl::validate_structure(doc);
  if (report.checks.empty()) return 0.0;
  return 5.0 * static_cast<double>(report.passed_count()) / static_cast<double>(report.checks.size());
}

double modularity(const dsl::DslDocument& doc) {
  static const std::regex name_rule("^[a-z][a-z0-9_]*$");
  double score = 5.0;
  for (const auto& v : doc.spawn)
    if (!std::regex_match(v.id, name_rule)) score -= 1.0;
  // the same literal repeated three or more times suggests copy-paste
  std::map<std::string, int> literals;
  for (const auto& v : doc.spawn)
    for (const auto& [k, val] : v.extras) ++literals[dsl::print_value(val)];
  for (const auto& s : doc.behavior)
    for (const auto& a : s.actions) {
      for (const auto& [k, val] : a.args) ++literals[k + "=" + dsl::print_value(val)];
      if (a.duration) ++literals["duration=" + format_number(*a.duration)];
    }
  for (const auto& [lit, n] : literals)
    if (n >= 3) score -= 1.0;
  return std::clamp(score, 0.0, 5.0);
}

RubricScore score_dsl(const dsl::DslDocument& doc, const ScoreInputs& in) {
  RubricScore s;
  static const HeuristicJudge heuristic;
  const Judge& judge = in.judge ? *in.judge : heuristic;
  const auto j = judge.judge(doc, in.query);
  s[RubricItem::kSemanticFidelity] = j.semantic_fidelity;
  s[RubricItem::kBehavioralRichness] = j.behavioral_richness;
  s[RubricItem::kExecutableValidity] = in.maps ? executable_validity(doc, *in.maps, in.sim) : 0.0;
  s[RubricItem::kStructuralCompleteness] = structural_completeness(doc);
  s[RubricItem::kModularity] = modularity(doc);
  s[RubricItem::kVotingCentrality] = std::clamp(5.0 * in.centrality, 0.0, 5.0);
  return s;
}

}  // namespace scenforge
