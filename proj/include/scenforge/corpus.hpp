#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "scenforge/dsl.hpp"
#include "scenforge/extract.hpp"
#include "scenforge/ingest.hpp"

namespace scenforge {

enum class AdversarialBehavior { kSuddenBrake, kTailgate, kUnsafeLaneChange, kSpeeding };

std::string_view to_string(AdversarialBehavior b);
AdversarialBehavior parse_adversarial_behavior(std::string_view text);

struct AdversarialCondition {
  AdversarialBehavior behavior = AdversarialBehavior::kTailgate;
  dsl::Relation relation = dsl::Relation::kRear;
  double distance = 1.0;  // meters, > 0
  std::map<std::string, double> params;

  bool operator==(const AdversarialCondition&) const = default;
};

/// "tailgating at 0.5 m distance from the rear", "lateral cut-in at 1.2 m
/// from the left", ...
std::string render_condition(const AdversarialCondition& c);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct AdversarialPalette {
  std::vector<AdversarialBehavior> behaviors;
  std::vector<dsl::Relation> relations;
  double distance_min = 0.5;
  double distance_max = 5.0;
  double distance_step = 0.1;  // drawn distances are rounded to this grid
  std::map<AdversarialBehavior, std::map<std::string, ParamRange>> params;

  static AdversarialPalette standard();
};

AdversarialCondition synthesize_adversarial(const ScenarioSegment& segment, std::uint64_t seed,
                                            const AdversarialPalette& palette);

std::string summarize_behavior(const ScenarioSegment& segment);
std::string describe_road(const LaneMap& map, const std::vector<std::string>& lane_ids);

struct Provenance {
  std::string dataset;      // bracketed at the end of the description
  std::string source_file;
  std::size_t frame_start = 0;
  std::size_t frame_end = 0;

  bool operator==(const Provenance&) const = default;
};

struct DescriptionParts {
  std::string scene_type;
  std::string behavior_summary;
  std::string road_description;
  std::string adversarial_text;
  Provenance provenance;
};

std::string assemble_description(const DescriptionParts& parts);

struct ScenarioRecord {
  std::string scene_type;
  std::string behavior_summary;
  std::string road_description;
  AdversarialCondition adversarial;
  std::string adversarial_text;
  std::string description;
  std::string dsl_geometry;
  std::string dsl_spawn;
  std::string dsl_behavior;
  Provenance provenance;
  RiskMetrics risk;

  bool operator==(const ScenarioRecord&) const = default;
};

/// Throws ValidationError when a descriptive element is empty or a snippet
/// fails to parse as its section.
void validate_record(const ScenarioRecord& record);

struct RecordInputs {
  ScenarioSegment segment;
  std::vector<std::string> lane_ids;  // ego route, first lane hosts the spawn
  std::string map_key;
  double ego_speed = 8.0;
  double ego_arc_s = 10.0;
  Provenance provenance;
};

ScenarioRecord build_record(const RecordInputs& inputs, const LaneMap& map, std::uint64_t seed,
                            const AdversarialPalette& palette = AdversarialPalette::standard());

std::string record_to_json(const ScenarioRecord& record);
ScenarioRecord record_from_json(std::string_view line);

std::string save_corpus(const std::vector<ScenarioRecord>& records);
std::vector<ScenarioRecord> load_corpus(std::string_view text);

/// Append-only corpus file. Appends take an exclusive file lock so
/// concurrent writers never interleave lines.
class CorpusStore {
 public:
  explicit CorpusStore(std::string path);

  void append(const std::vector<ScenarioRecord>& records) const;
  std::vector<ScenarioRecord> load() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Few-shot example pool with FIFO eviction once capacity is reached.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity);

  void add(ScenarioRecord record);
  std::vector<ScenarioRecord> snapshot() const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<ScenarioRecord> items_;
};

}  // namespace scenforge
