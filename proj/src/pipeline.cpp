#include <cstdio>
#include <set>

#include "scenforge/genpipe.hpp"

namespace scenforge {

namespace {

const char* kGuidance =
    "You write driving scenarios in a scenario language with three sections: geometry (map, "
    "ego_route), spawn (one vehicle block per participant, placed by lane and arc position or "
    "relative to an anchor vehicle) and behavior (one schedule per vehicle, actions joined by "
    "'->').\n"
    "Ego verbs: go_straight, turn_left, turn_right, u_turn, follow, brake(decel), "
    "lane_change(direction), idle, policy.\n"
    "Adversarial verbs: sudden_brake(decel), tailgate(gap), cut_in(side), speeding(factor).\n";

void replace_all(std::string& text, const std::string& slot, const std::string& value) {
  for (std::size_t pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + value.size()))
    text.replace(pos, slot.size(), value);
}

std::string scene_block(const IndexEntry& e) {
  std::string out = e.text + "\n";
  for (const char* key : {"geometry", "spawn", "behavior"})
    if (auto it = e.metadata.find(key); it != e.metadata.end()) out += it->second;
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string default_prompt_template() {
  return "{{fix_hint}}{{guidance}}\n"
         "{{few_shots}}"
         "### Task\n"
         "Convert the description below into one scenario document.\n"
         "Description: {{query}}\n\n"
         "Think step by step to reason about the road layout, the participants and the adversarial "
         "behavior before writing the document. Use only verbs from the dictionary, keep each "
         "section inside braces and end every declaration with ';'. Output the document last.\n\n"
         "### Reference scenes\n"
         "{{context}}";
}

std::string PromptBundle::render() const {
  std::string text = template_text;
  std::string hint;
  if (fix_hint)
    hint = "The previous attempt failed with this error; fix it:\n" + *fix_hint + "\n\n";
  std::string shots;
  for (std::size_t i = 0; i < few_shots.size(); ++i)
    shots += "### Example " + std::to_string(i + 1) + "\nDescription: " + few_shots[i].input +
             "\nDocument:\n" + few_shots[i].output + "\n\n";
  std::string context;
  for (std::size_t i = 0; i < context_blocks.size(); ++i)
    context += "[Scene " + std::to_string(i + 1) + "]\n" + context_blocks[i] + "\n";
  replace_all(text, "{{fix_hint}}", hint);
  replace_all(text, "{{guidance}}", system_text);
  replace_all(text, "{{few_shots}}", shots);
  replace_all(text, "{{query}}", query);
  replace_all(text, "{{context}}", context);
  return text;
}

PromptBundle build_prompt(std::string_view query, const std::vector<RankedEntry>& retrieved,
                          const std::vector<FewShot>& few_shots, std::optional<std::string> fix_hint,
                          std::string template_text) {
  if (query.empty()) throw ArgumentError("query must not be empty");
  PromptBundle b;
  b.system_text = kGuidance;
  for (const auto& r : retrieved) b.context_blocks.push_back(scene_block(*r.entry));
  b.few_shots = few_shots;
  b.query = std::string(query);
  b.fix_hint = std::move(fix_hint);
  b.template_text = std::move(template_text);
  return b;
}

RetrievalIndex build_corpus_index(const std::vector<ScenarioRecord>& records,
                                  std::shared_ptr<const EmbeddingProvider> provider) {
  RetrievalIndex index(std::move(provider));
  std::set<std::string> seen;
  for (const auto& r : records) {
    const std::string key =
        "scene-" + hex64(fnv1a(r.description + r.dsl_geometry + r.dsl_spawn + r.dsl_behavior));
    if (!seen.insert(key).second) continue;
    index.add(key, r.description,
              {{"geometry", r.dsl_geometry},
               {"spawn", r.dsl_spawn},
               {"behavior", r.dsl_behavior},
               {"scene_type", r.scene_type}});
  }
  return index;
}

GenerationResult generate_scenario(std::string_view query, const RetrievalIndex& corpus_index,
                                   const GenerationConfig& cfg, Backend& backend,
                                   std::optional<std::string> fix_hint,
                                   const std::vector<std::string>& extra_context) {
  cfg.backend.validate();
  std::vector<RankedEntry> retrieved;
  if (corpus_index.size() > 0) retrieved = corpus_index.query(query, cfg.top_k);
  PromptBundle bundle = build_prompt(query, retrieved, cfg.few_shots, fix_hint, cfg.template_text);
  for (const auto& c : extra_context) bundle.context_blocks.push_back(c);

  GenerationResult result;
  for (int round = 0; round < 2; ++round) {
    result.prompt = bundle.render();
    result.candidates = backend.complete(result.prompt, cfg.backend.sample_count);
    result.vote = vote(result.candidates, cfg.voting, cfg.theta);
    result.alignment =
        semantic_alignment(result.vote.document, query, dsl::SemanticDictionary::standard(),
                           cfg.judge ? &backend : nullptr);
    if (result.alignment.passed) {
      result.document = result.vote.document;
      return result;
    }
    if (round == 0) {
      std::string hint = fix_hint ? *fix_hint + "\n" : std::string();
      hint += "semantic alignment:";
      for (const auto& r : result.alignment.reasons) hint += " " + r + ";";
      bundle.fix_hint = hint;
      result.revisions = 1;
    }
  }
  std::string msg = "semantic alignment failed after revision:";
  for (const auto& r : result.alignment.reasons) msg += " " + r + ";";
  throw GenerationError(msg);
}

namespace {

std::string join_diagnostics(const std::vector<std::string>& d) {
  std::string out = "repair failed after " + std::to_string(d.size()) + " attempts";
  for (const auto& s : d) out += "\n  " + s;
  return out;
}

}  // namespace

RepairError::RepairError(std::vector<std::string> diagnostics)
    : DataError(join_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

RepairResult repair_compile(std::string_view query, const RepairContext& ctx, const GenerationConfig& cfg,
                            Backend& backend, int max_attempts, std::optional<std::string> initial_dsl) {
  if (max_attempts < 1) throw ArgumentError("max_attempts must be at least 1");
  if (!ctx.maps) throw ArgumentError("repair needs a map library");
  static const RetrievalIndex empty_index;
  const RetrievalIndex& corpus = ctx.corpus_index ? *ctx.corpus_index : empty_index;

  std::vector<std::string> diagnostics;
  std::optional<std::string> hint;
  std::vector<std::string> code_context;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      dsl::DslDocument doc = attempt == 1 && initial_dsl
                                 ? dsl::parse_dsl(*initial_dsl)
                                 : generate_scenario(query, corpus, cfg, backend, hint, code_context).document;
      ScenarioProgram program = compile_scenario(doc, *ctx.maps, ctx.code_index, ctx.sim);
      return {std::move(program), std::move(doc), attempt, diagnostics};
    } catch (const DataError& e) {
      diagnostics.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
      hint = e.what();
      code_context.clear();
      if (ctx.code_index && ctx.code_index->size() > 0)
        for (const auto& r : ctx.code_index->query(e.what(), 2))
          code_context.push_back("construct " + r.entry->key + ":\n" + r.entry->text);
    }
  }
  throw RepairError(diagnostics);
}

}  // namespace scenforge
