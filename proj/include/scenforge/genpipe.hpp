#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenforge/corpus.hpp"
#include "scenforge/dsl.hpp"
#include "scenforge/retrieval.hpp"
#include "scenforge/sim.hpp"

namespace scenforge {

struct TransportError : BackendError {
  using BackendError::BackendError;
};
struct ProtocolError : BackendError {
  using BackendError::BackendError;
};
struct ReplayError : BackendError {
  using BackendError::BackendError;
};
struct GenerationError : DataError {
  using DataError::DataError;
};

struct FewShot {
  std::string input;
  std::string output;
};

/// Template slots: {{fix_hint}}, {{few_shots}}, {{query}}, {{context}}.
std::string default_prompt_template();

struct PromptBundle {
  std::string system_text;
  std::vector<std::string> context_blocks;  // rank order
  std::vector<FewShot> few_shots;
  std::string query;
  std::optional<std::string> fix_hint;
  std::string template_text;

  std::string render() const;
};

PromptBundle build_prompt(std::string_view query, const std::vector<RankedEntry>& retrieved,
                          const std::vector<FewShot>& few_shots = {},
                          std::optional<std::string> fix_hint = std::nullopt,
                          std::string template_text = default_prompt_template());

/// Corpus records indexed by description; the DSL snippets travel as metadata.
RetrievalIndex build_corpus_index(const std::vector<ScenarioRecord>& records,
                                  std::shared_ptr<const EmbeddingProvider> provider = nullptr);

struct BackendConfig {
  enum class Mode { kHttpChat, kReplay };
  Mode mode = Mode::kReplay;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  double temperature = 0.7;
  std::size_t sample_count = 5;
  double timeout_seconds = 60.0;
  std::string replay_dir;

  void validate() const;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<std::string> complete(const std::string& prompt, std::size_t m) = 0;
};

/// Serves the files of a directory in lexicographic order, m per call,
/// wrapping around at the end.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(std::string dir);
  std::vector<std::string> complete(const std::string& prompt, std::size_t m) override;
  const std::vector<std::string>& files() const { return files_; }
  std::size_t cursor() const { return cursor_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
  std::size_t cursor_ = 0;
};

/// Chat-completion client; the bearer token comes from SCENFORGE_API_KEY.
class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(BackendConfig cfg);
  std::vector<std::string> complete(const std::string& prompt, std::size_t m) override;
  static std::string request_body(const BackendConfig& cfg, const std::string& prompt, std::size_t n);
  static std::vector<std::string> parse_response(std::string_view body);

 private:
  BackendConfig cfg_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

/// Index of the candidate with the highest mean cosine similarity to the others.
std::size_t vote_embedding(const std::vector<std::string>& candidates,
                           const EmbeddingProvider* provider = nullptr);

std::map<std::string, dsl::Value> flatten_document(const dsl::DslDocument& doc);
double jaccard(const std::map<std::string, dsl::Value>& a, const std::map<std::string, dsl::Value>& b);

struct VoteReport {
  dsl::DslDocument document;
  std::size_t central = 0;                // candidate index of the skeleton
  std::vector<std::size_t> cluster;       // candidate indices
  std::vector<std::string> discarded;     // parse errors, "candidate i: ..."
  double centrality = 1.0;                // mean cosine of the winner to the other candidates
};

VoteReport vote_structured(const std::vector<std::string>& candidates, double theta = 0.8,
                           const EmbeddingProvider* provider = nullptr);

enum class VotingMode { kEmbedding, kStructured };
std::string_view to_string(VotingMode m);
VotingMode parse_voting_mode(std::string_view text);

/// Embedding vote restricted to parseable candidates.
VoteReport vote(const std::vector<std::string>& candidates, VotingMode mode, double theta = 0.8,
                const EmbeddingProvider* provider = nullptr);

struct AlignmentResult {
  bool passed = true;
  std::vector<std::string> reasons;
};

/// Behavior tags named in a description, by keyword table.
std::vector<std::string> detect_behaviors(std::string_view query);

struct RelationMention {
  double distance = 0.0;
  dsl::Relation relation = dsl::Relation::kRear;
};
std::vector<RelationMention> detect_relations(std::string_view query);

AlignmentResult semantic_alignment(const dsl::DslDocument& doc, std::string_view query,
                                   const dsl::SemanticDictionary& dict = dsl::SemanticDictionary::standard(),
                                   Backend* judge = nullptr);

struct GenerationConfig {
  BackendConfig backend;
  VotingMode voting = VotingMode::kStructured;
  double theta = 0.8;
  std::size_t top_k = kDefaultTopK;
  std::vector<FewShot> few_shots;
  std::string template_text = default_prompt_template();
  bool judge = false;
};

struct GenerationResult {
  dsl::DslDocument document;
  std::string prompt;                  // last prompt sent
  std::vector<std::string> candidates; // last batch
  VoteReport vote;
  AlignmentResult alignment;
  int revisions = 0;
};

GenerationResult generate_scenario(std::string_view query, const RetrievalIndex& corpus_index,
                                   const GenerationConfig& cfg, Backend& backend,
                                   std::optional<std::string> fix_hint = std::nullopt,
                                   const std::vector<std::string>& extra_context = {});

class RepairError : public DataError {
 public:
  explicit RepairError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct RepairResult {
  ScenarioProgram program;
  dsl::DslDocument document;
  int attempts = 0;
  std::vector<std::string> diagnostics;  // failures before the success
};

struct RepairContext {
  const RetrievalIndex* corpus_index = nullptr;
  const MapLibrary* maps = nullptr;
  const RetrievalIndex* code_index = nullptr;
  SimParams sim;
};

/// Generates (or starts from `initial_dsl`) and compiles; each failure is fed
/// back as the fix hint of the next attempt.
RepairResult repair_compile(std::string_view query, const RepairContext& ctx, const GenerationConfig& cfg,
                            Backend& backend, int max_attempts = 3,
                            std::optional<std::string> initial_dsl = std::nullopt);

}  // namespace scenforge
