#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "scenforge/corpus.hpp"
#include "scenforge/genpipe.hpp"
#include "scenforge/sim.hpp"

namespace scenforge {

enum class RubricItem {
  kSemanticFidelity,
  kExecutableValidity,
  kStructuralCompleteness,
  kModularity,
  kBehavioralRichness,
  kVotingCentrality,
};
inline constexpr std::size_t kRubricItems = 6;
inline constexpr std::array<double, kRubricItems> kRubricWeights = {0.25, 0.20, 0.15, 0.15, 0.20, 0.05};
std::string_view to_string(RubricItem item);

struct RubricScore {
  std::array<double, kRubricItems> scores{};  // each in [0, 5]

  double& operator[](RubricItem i) { return scores[static_cast<std::size_t>(i)]; }
  double operator[](RubricItem i) const { return scores[static_cast<std::size_t>(i)]; }
  /// 100 * sum(w_i * s_i) / 5
  double total() const;
};

struct JudgeScores {
  double semantic_fidelity = 0.0;
  double behavioral_richness = 0.0;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeScores judge(const dsl::DslDocument& doc, std::string_view query) const = 0;
};

/// Keyword coverage for fidelity, distinct parameterised verbs for richness.
class HeuristicJudge : public Judge {
 public:
  JudgeScores judge(const dsl::DslDocument& doc, std::string_view query) const override;
};

/// Asks the backend for both scores and averages `runs` replies.
class BackendJudge : public Judge {
 public:
  explicit BackendJudge(Backend& backend, int runs = 5) : backend_(&backend), runs_(runs) {}
  JudgeScores judge(const dsl::DslDocument& doc, std::string_view query) const override;
  static JudgeScores parse_reply(std::string_view reply);

 private:
  Backend* backend_;
  int runs_;
};

/// 5 when compiled and the dry run is clean, 3 when the dry run raises
/// collisions or violations, 0 when compilation fails.
double executable_validity(const dsl::DslDocument& doc, const MapLibrary& maps, const SimParams& sim = {});
double structural_completeness(const dsl::DslDocument& doc);
double modularity(const dsl::DslDocument& doc);

struct ScoreInputs {
  std::string query;
  const MapLibrary* maps = nullptr;
  double centrality = 1.0;  // mean cosine of the voted winner to the other samples
  const Judge* judge = nullptr;
  SimParams sim;
};

RubricScore score_dsl(const dsl::DslDocument& doc, const ScoreInputs& in);

struct HistogramBins {
  std::vector<double> ttc = {0, 1, 2, 3, 4, 5, 7.5, 10};
  std::vector<double> pet = {0, 0.5, 1, 1.5, 2, 3, 5};
};

/// Values above the last edge fall into the last bin; absent values are
/// counted separately.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t missing = 0;
  std::vector<double> samples;

  explicit Histogram(std::vector<double> edges = {});
  void add(std::optional<double> value);
  std::optional<double> mean() const;
  bool empty() const { return samples.empty(); }
};

struct EpisodeMetrics {
  std::optional<double> min_ttc;
  std::optional<double> min_pet;
  bool collision = false;
};

/// Ego-centred TTC and PET over an episode log.
EpisodeMetrics episode_metrics(const EpisodeLog& log, const ScenarioProgram& program);
std::vector<Trajectory> log_trajectories(const EpisodeLog& log, double dt);

enum class Phase { kI, kII };
std::string_view to_string(Phase p);

struct BehaviorRow {
  std::string label;
  std::size_t episodes = 0;
  std::size_t collisions = 0;
  std::size_t timeouts = 0;
  std::size_t goals = 0;

  double collision_rate() const;
};

struct BatchReport {
  Phase phase = Phase::kII;
  std::vector<BehaviorRow> rows;  // first-seen label order
  Histogram ttc{HistogramBins{}.ttc};
  Histogram pet{HistogramBins{}.pet};

  BehaviorRow overall() const;
  std::string to_csv() const;
  std::string to_json() const;
};

struct LabeledProgram {
  std::string label;
  const ScenarioProgram* program = nullptr;
};

struct LabeledLog {
  std::string label;
  const ScenarioProgram* program = nullptr;  // optional; enables TTC/PET
  EpisodeLog log;
};

BatchReport report_from_logs(const std::vector<LabeledLog>& logs, Phase phase, const HistogramBins& bins = {});

/// Runs `episodes` per program and per seed; counts are pooled, so rates are
/// the mean over runs of equal size.
BatchReport evaluate_batch(const std::vector<LabeledProgram>& programs, const PolicyMap& policies,
                           std::size_t episodes, const std::vector<std::uint64_t>& seeds, Phase phase,
                           std::size_t workers = 1, const HistogramBins& bins = {});

struct MetricComparison {
  std::string metric;
  std::vector<double> edges;
  std::vector<std::size_t> counts_a;
  std::vector<std::size_t> counts_b;
  std::optional<double> mean_a;
  std::optional<double> mean_b;
  std::optional<double> mean_difference;  // b - a
  bool empty = false;                       // either side has no samples
};

std::vector<MetricComparison> compare_distributions(const BatchReport& a, const BatchReport& b);
std::string comparison_to_csv(const std::vector<MetricComparison>& rows);

/// Scene label of a document: the geometry `scene` key, else the name.
std::string scene_label(const dsl::DslDocument& doc);

/// Goal reached, an adversarial behavior executed and no collision.
bool is_success(const EpisodeLog& log, const ScenarioProgram& program);
ScenarioRecord record_from_episode(const EpisodeLog& log, const ScenarioProgram& program,
                                   const dsl::DslDocument& doc);
std::string record_hash(const ScenarioRecord& record);

struct AugmentResult {
  std::vector<ScenarioRecord> appended;
  std::size_t unsuccessful = 0;
  std::size_t duplicates = 0;
};

/// Adds one record per successful episode unless an identical record is
/// already present; `index` is updated with the new records when given.
AugmentResult augment_corpus(const std::vector<EpisodeLog>& episodes, const ScenarioProgram& program,
                             const dsl::DslDocument& doc, std::vector<ScenarioRecord>& corpus,
                             RetrievalIndex* index = nullptr);
AugmentResult augment_corpus(const std::vector<EpisodeLog>& episodes, const ScenarioProgram& program,
                             const dsl::DslDocument& doc, const CorpusStore& store,
                             RetrievalIndex* index = nullptr);

}  // namespace scenforge
