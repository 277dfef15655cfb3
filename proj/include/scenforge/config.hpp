#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenforge/evalloop.hpp"
#include "scenforge/extract.hpp"
#include "scenforge/genpipe.hpp"
#include "scenforge/rl.hpp"
#include "scenforge/sim.hpp"

namespace scenforge {

struct PathsConfig {
  std::string tracks;       // trajectory CSV
  std::string lane_map;     // lane map of the recording
  std::string maps;         // directory of simulator maps, keyed by file stem
  std::string corpus;       // JSONL corpus
  std::string index;        // serialised retrieval index
  std::string checkpoints;  // directory
  std::string reports;      // directory
  std::string episodes;     // directory of episode logs
};

struct SeedsConfig {
  std::uint64_t master = 0;
  std::vector<std::uint64_t> train = {1, 2, 3};
  std::vector<std::uint64_t> eval = {1};
};

struct EvalConfig {
  std::size_t episodes = 200;
  std::size_t workers = 1;
  HistogramBins bins;
};

struct LoopConfig {
  int rounds = 1;
  std::string query;
  long adversary_steps = 0;  // Phase I budget per round
  long ego_steps = 0;        // Phase II budget per round
  std::size_t episodes = 0;  // evaluation episodes fed to augmentation
};

/// One structured configuration for every command. Relative paths resolve
/// against the directory of the config file.
struct RunConfig {
  std::string base_dir = ".";
  PathsConfig paths;
  ExtractionConfig extraction;
  std::string dataset = "INTERACTION";
  GenerationConfig generation;
  int repair_attempts = 3;
  SimParams sim;
  TrainConfig train;
  SeedsConfig seeds;
  EvalConfig eval;
  LoopConfig loop;

  std::string resolve(const std::string& path) const;
  /// Throws ConfigError for out-of-range values or unresolvable inputs.
  void validate() const;
  std::string to_json() const;
};

RunConfig config_from_json(std::string_view text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

}  // namespace scenforge
