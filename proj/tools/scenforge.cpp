#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>

#include "scenforge/config.hpp"
#include "scenforge/smooth.hpp"

namespace fs = std::filesystem;
using namespace scenforge;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string replay;
  std::string backend;
  std::string voting;
  std::optional<int> rounds;
  std::string out;
  bool dry_run = false;

  // per command
  std::string tracks;
  std::string lane_map;
  std::string segments;
  std::string dsl;
  std::vector<std::string> dsl_files;
  std::string query;
  std::string ego_ckpt;
  std::string adv_ckpt;
  std::string logs;
  std::string label = "all";
  std::string phase = "II";
  std::size_t episodes = 0;
  long steps = -1;
  int degree = 5;
  bool repair = false;
};

RunConfig load(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) c.seeds.master = *o.seed;
  if (!o.backend.empty()) {
    if (o.backend == "replay") c.generation.backend.mode = BackendConfig::Mode::kReplay;
    else if (o.backend == "http") c.generation.backend.mode = BackendConfig::Mode::kHttpChat;
    else throw ArgumentError("--backend must be http or replay");
  }
  if (!o.replay.empty()) {
    c.generation.backend.mode = BackendConfig::Mode::kReplay;
    c.generation.backend.replay_dir = o.replay;
  }
  if (!o.voting.empty()) c.generation.voting = parse_voting_mode(o.voting);
  if (o.rounds) c.loop.rounds = *o.rounds;
  if (!o.tracks.empty()) c.paths.tracks = fs::absolute(o.tracks).string();
  if (!o.lane_map.empty()) c.paths.lane_map = fs::absolute(o.lane_map).string();
  c.validate();
  return c;
}

void require(const std::string& path, const std::string& what) {
  if (path.empty()) throw ArgumentError(what + " is required");
  if (!fs::exists(path)) throw ArgumentError(what + " not found: " + path);
}

std::string out_dir(const Options& o, const RunConfig& c) {
  if (!o.out.empty()) return o.out;
  return c.resolve(c.paths.reports);
}

std::string prepare_out(const Options& o, const RunConfig& c) {
  const std::string dir = out_dir(o, c);
  if (!dir.empty()) fs::create_directories(dir);
  return dir;
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> sorted_files(const std::string& dir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

LaneMap load_lane_map(const RunConfig& c) {
  require(c.resolve(c.paths.lane_map), "paths.lane_map");
  return parse_lane_map(read_file(c.resolve(c.paths.lane_map)));
}

std::vector<Trajectory> load_tracks(const RunConfig& c, const LaneMap* map) {
  require(c.resolve(c.paths.tracks), "paths.tracks");
  auto parsed = parse_tracks(read_file(c.resolve(c.paths.tracks)));
  if (map)
    for (auto& t : parsed.trajectories) assign_lanes(t, *map);
  return std::move(parsed.trajectories);
}

MapLibrary load_maps(const RunConfig& c) {
  require(c.resolve(c.paths.maps), "paths.maps");
  return load_map_library(c.resolve(c.paths.maps));
}

RetrievalIndex load_corpus_index(const RunConfig& c) {
  const std::string index = c.resolve(c.paths.index);
  if (!index.empty() && fs::exists(index)) return RetrievalIndex::from_json(read_file(index));
  const std::string corpus = c.resolve(c.paths.corpus);
  if (!corpus.empty() && fs::exists(corpus)) return build_corpus_index(CorpusStore(corpus).load());
  return RetrievalIndex();
}

std::string with_config(const RunConfig& c, const std::string& body_json) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(c.to_json());
  j["report"] = nlohmann::ordered_json::parse(body_json);
  return j.dump(2) + "\n";
}

PolicyParams fresh_params(const RunConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  return PolicyParams::create(static_cast<int>(Simulation::observation_size()), c.train.ppo.hidden, kNumActions,
                              rng);
}

std::optional<PolicyParams> load_checkpoint(const std::string& path) {
  if (path.empty()) return std::nullopt;
  require(path, "checkpoint");
  return checkpoint_from_json(read_file(path));
}

std::uint64_t train_seed(const RunConfig& c) { return derive_seed(c.seeds.master, c.seeds.train.front()); }

// Policies for every slot of a program: checkpoints where given, otherwise
// freshly initialised networks.
struct SlotPolicies {
  std::optional<PolicyParams> ego, adv;
  std::unique_ptr<MlpPolicy> ego_policy, adv_policy;
  std::vector<std::unique_ptr<ConstantPolicy>> idle;
  PolicyMap map;

  SlotPolicies(const ScenarioProgram& program, const RunConfig& c, std::optional<PolicyParams> e,
               std::optional<PolicyParams> a)
      : ego(std::move(e)), adv(std::move(a)) {
    for (const auto& slot : program.policy_slots()) {
      if (slot == kEgoSlot) {
        if (!ego) ego = fresh_params(c, derive_seed(c.seeds.master, 11));
        ego_policy = std::make_unique<MlpPolicy>(*ego);
        map[slot] = ego_policy.get();
      } else if (slot == kAdversarySlot) {
        if (!adv) adv = fresh_params(c, derive_seed(c.seeds.master, 12));
        adv_policy = std::make_unique<MlpPolicy>(*adv);
        map[slot] = adv_policy.get();
      } else {
        idle.push_back(std::make_unique<ConstantPolicy>(PolicyAction::kIdle));
        map[slot] = idle.back().get();
      }
    }
  }
};

std::string describe(const ScenarioProgram& p) {
  std::string s = "scenario " + p.name + " map " + p.map_key + " vehicles " + std::to_string(p.initial.size());
  const auto slots = p.policy_slots();
  s += " slots";
  for (const auto& x : slots) s += " " + x;
  if (slots.empty()) s += " none";
  return s;
}

int cmd_ingest(const Options& o, bool dry) {
  const RunConfig c = load(o);
  std::optional<LaneMap> map;
  if (!c.paths.lane_map.empty()) map = load_lane_map(c);
  require(c.resolve(c.paths.tracks), "paths.tracks");
  if (dry) return 0;
  auto parsed = parse_tracks(read_file(c.resolve(c.paths.tracks)));
  std::size_t matched = 0, frames = 0;
  for (auto& t : parsed.trajectories) {
    if (map) assign_lanes(t, *map);
    for (const auto& f : t.frames) {
      ++frames;
      if (f.lane_id) ++matched;
    }
  }
  std::cout << "agents " << parsed.trajectories.size() << " frames " << frames << " lane_matched " << matched
            << " dropped_rows " << parsed.dropped_rows << " dropped_agents " << parsed.dropped_agents << "\n";
  const std::string dir = prepare_out(o, c);
  if (!dir.empty()) write_file(join(dir, "tracks.csv"), write_tracks(parsed.trajectories, c.dataset));
  return 0;
}

int cmd_extract(const Options& o, bool dry) {
  const RunConfig c = load(o);
  const LaneMap map = load_lane_map(c);
  require(c.resolve(c.paths.tracks), "paths.tracks");
  if (dry) return 0;
  const auto tracks = load_tracks(c, &map);
  std::string lines;
  const auto segments = extract_scenarios(tracks, map, c.extraction);
  for (const auto& s : segments) lines += segment_to_json(s) + "\n";
  const std::string dir = prepare_out(o, c);
  if (dir.empty()) std::cout << lines;
  else {
    write_file(join(dir, "segments.jsonl"), lines);
    std::cout << "segments " << segments.size() << "\n";
  }
  return 0;
}

std::vector<std::string> route_of(const Trajectory& t, const ScenarioSegment& s) {
  std::vector<std::string> lanes;
  for (std::size_t i = s.start; i <= s.end && i < t.frames.size(); ++i)
    if (t.frames[i].lane_id && (lanes.empty() || lanes.back() != *t.frames[i].lane_id))
      lanes.push_back(*t.frames[i].lane_id);
  return lanes;
}

int cmd_corpus_build(const Options& o, bool dry) {
  const RunConfig c = load(o);
  const LaneMap map = load_lane_map(c);
  if (c.paths.corpus.empty()) throw ArgumentError("paths.corpus is required");
  if (!o.segments.empty()) require(o.segments, "--segments");
  require(c.resolve(c.paths.tracks), "paths.tracks");
  if (dry) return 0;
  const auto tracks = load_tracks(c, &map);
  std::vector<ScenarioSegment> segments;
  if (o.segments.empty()) segments = extract_scenarios(tracks, map, c.extraction);
  else {
    std::istringstream in(read_file(o.segments));
    for (std::string line; std::getline(in, line);)
      if (!trim(line).empty()) segments.push_back(segment_from_json(line));
  }
  const std::string map_key = fs::path(c.paths.lane_map).stem().string();
  const std::string source = fs::path(c.paths.tracks).filename().string();
  const CorpusStore store(c.resolve(c.paths.corpus));
  std::set<std::string> seen;
  if (fs::exists(store.path()))
    for (const auto& r : store.load()) seen.insert(record_hash(r));
  std::vector<ScenarioRecord> fresh;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    auto ego = std::find_if(tracks.begin(), tracks.end(), [&](const auto& t) { return t.agent_id == s.ego_id; });
    if (ego == tracks.end() || s.start >= ego->frames.size()) {
      ++skipped;
      continue;
    }
    RecordInputs in;
    in.segment = s;
    in.lane_ids = route_of(*ego, s);
    if (in.lane_ids.empty()) {
      ++skipped;
      continue;
    }
    const auto& f0 = ego->frames[s.start];
    in.map_key = map_key;
    in.ego_speed = std::round(f0.speed() * 100.0) / 100.0;
    in.ego_arc_s = std::round(closest_point(map.at(in.lane_ids.front()).centerline, f0.position()).arc * 100.0) / 100.0;
    in.provenance = {c.dataset, source, static_cast<std::size_t>(f0.frame_index),
                     static_cast<std::size_t>(ego->frames[std::min(s.end, ego->frames.size() - 1)].frame_index)};
    auto r = build_record(in, map, derive_seed(c.seeds.master, i));
    if (seen.insert(record_hash(r)).second) fresh.push_back(std::move(r));
  }
  store.append(fresh);
  std::cout << "records " << fresh.size() << " skipped " << skipped << "\n";
  return 0;
}

int cmd_index(const Options& o, bool dry) {
  const RunConfig c = load(o);
  require(c.resolve(c.paths.corpus), "paths.corpus");
  if (c.paths.index.empty()) throw ArgumentError("paths.index is required");
  if (dry) return 0;
  auto index = build_corpus_index(CorpusStore(c.resolve(c.paths.corpus)).load());
  write_file(c.resolve(c.paths.index), index.to_json());
  std::cout << "entries " << index.size() << "\n";
  return 0;
}

int cmd_generate(const Options& o, bool dry) {
  const RunConfig c = load(o);
  if (o.query.empty()) throw ArgumentError("--query is required");
  c.generation.backend.validate();
  if (dry) return 0;
  const auto index = load_corpus_index(c);
  auto backend = make_backend(c.generation.backend);
  const auto result = generate_scenario(o.query, index, c.generation, *backend);
  const std::string text = dsl::print_dsl(result.document);
  std::cout << text;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(join(o.out, "scenario.dsl"), text);
  }
  return 0;
}

int cmd_compile(const Options& o, bool dry) {
  const RunConfig c = load(o);
  const MapLibrary maps = load_maps(c);
  if (!o.repair) require(o.dsl, "--dsl");
  if (o.repair) c.generation.backend.validate();
  if (dry) return 0;
  const auto code_index = build_code_index(standard_code_fragments());
  if (!o.repair) {
    const auto doc = dsl::parse_dsl(read_file(o.dsl));
    const auto program = compile_scenario(doc, maps, &code_index, c.sim);
    std::cout << describe(program) << "\n";
    return 0;
  }
  if (o.query.empty()) throw ArgumentError("--query is required with --repair");
  const auto corpus_index = load_corpus_index(c);
  auto backend = make_backend(c.generation.backend);
  RepairContext ctx{&corpus_index, &maps, &code_index, c.sim};
  std::optional<std::string> initial;
  if (!o.dsl.empty()) initial = read_file(o.dsl);
  const auto r = repair_compile(o.query, ctx, c.generation, *backend, c.repair_attempts, initial);
  for (const auto& d : r.diagnostics) std::cerr << d << "\n";
  std::cout << describe(r.program) << " attempts " << r.attempts << "\n";
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(join(o.out, "scenario.dsl"), dsl::print_dsl(r.document));
  }
  return 0;
}

ScenarioProgram compile_file(const std::string& path, const MapLibrary& maps, const RunConfig& c) {
  require(path, "--dsl");
  return compile_scenario(dsl::parse_dsl(read_file(path)), maps, nullptr, c.sim);
}

int cmd_simulate(const Options& o, bool dry) {
  const RunConfig c = load(o);
  const MapLibrary maps = load_maps(c);
  require(o.dsl, "--dsl");
  if (dry) return 0;
  const auto program = compile_file(o.dsl, maps, c);
  SlotPolicies policies(program, c, load_checkpoint(o.ego_ckpt), load_checkpoint(o.adv_ckpt));
  const std::size_t n = o.episodes ? o.episodes : 1;
  const auto logs = run_episodes(program, policies.map, c.seeds.master, n, c.eval.workers);
  const std::string dir = prepare_out(o, c);
  std::map<std::string, std::size_t> by_termination;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    ++by_termination[std::string(to_string(logs[i].termination))];
    if (!dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "episode_%04zu.json", i);
      write_file(join(dir, name), episode_to_json(logs[i]));
    }
  }
  std::cout << "episodes " << logs.size();
  for (const auto& [k, v] : by_termination) std::cout << " " << k << " " << v;
  std::cout << "\n";
  return 0;
}

std::vector<ScenarioProgram> compile_files(const Options& o, const MapLibrary& maps, const RunConfig& c) {
  if (o.dsl_files.empty()) throw ArgumentError("--dsl is required");
  std::vector<ScenarioProgram> programs;
  for (const auto& f : o.dsl_files) programs.push_back(compile_file(f, maps, c));
  return programs;
}

std::string checkpoint_out(const Options& o, const RunConfig& c, const std::string& name) {
  std::string dir = !o.out.empty() ? o.out : c.resolve(c.paths.checkpoints);
  if (dir.empty()) throw ArgumentError("--out or paths.checkpoints is required");
  fs::create_directories(dir);
  return join(dir, name);
}

int cmd_train(const Options& o, bool dry, bool adversary) {
  RunConfig c = load(o);
  const MapLibrary maps = load_maps(c);
  for (const auto& f : o.dsl_files) require(f, "--dsl");
  if (!o.ego_ckpt.empty()) require(o.ego_ckpt, "--ego-checkpoint");
  if (!o.adv_ckpt.empty()) require(o.adv_ckpt, "--adv-checkpoint");
  if (o.steps >= 0) c.train.total_steps = o.steps;
  if (dry) return 0;
  const auto programs = compile_files(o, maps, c);
  TrainResult r;
  if (adversary) {
    const auto ego = load_checkpoint(o.ego_ckpt);
    r = train_adversarial(programs, c.train, train_seed(c), ego ? &*ego : nullptr);
  } else {
    const auto adv = load_checkpoint(o.adv_ckpt);
    r = train_ego(programs, adv ? &*adv : nullptr, c.train, train_seed(c));
  }
  const std::string path = checkpoint_out(o, c, adversary ? "adv.json" : "ego.json");
  write_file(path, checkpoint_to_json(r.params));
  write_file(fs::path(path).replace_extension(".csv").string(), stats_to_csv(r.history));
  std::cout << "steps " << r.steps << " resets " << r.resets << " updates " << r.history.size() << " checkpoint "
            << path << "\n";
  return 0;
}

int cmd_smooth(const Options& o, bool dry) {
  const RunConfig c = load(o);
  require(c.resolve(c.paths.tracks), "paths.tracks");
  if (dry) return 0;
  const auto tracks = load_tracks(c, nullptr);
  BezierFitOptions opts;
  opts.degree = o.degree;
  std::vector<Trajectory> smoothed;
  for (const auto& t : tracks) {
    const auto before = heading_stats(t.path());
    smoothed.push_back(t.frames.size() > static_cast<std::size_t>(o.degree) ? smooth_trajectory(t, opts) : t);
    const auto after = heading_stats(smoothed.back().path());
    std::cout << t.agent_id << " max_heading_change " << format_number(before.max_abs_heading_change_per_step)
              << " -> " << format_number(after.max_abs_heading_change_per_step) << "\n";
  }
  const std::string dir = prepare_out(o, c);
  if (!dir.empty()) write_file(join(dir, "smoothed.csv"), write_tracks(smoothed, "smoothed"));
  return 0;
}

int cmd_score(const Options& o, bool dry) {
  const RunConfig c = load(o);
  require(o.dsl, "--dsl");
  std::optional<MapLibrary> maps;
  if (!c.paths.maps.empty()) maps = load_maps(c);
  if (dry) return 0;
  const auto doc = dsl::parse_dsl(read_file(o.dsl));
  ScoreInputs in;
  in.query = o.query;
  in.maps = maps ? &*maps : nullptr;
  in.sim = c.sim;
  std::unique_ptr<Backend> backend;
  std::unique_ptr<BackendJudge> judge;
  if (c.generation.judge) {
    backend = make_backend(c.generation.backend);
    judge = std::make_unique<BackendJudge>(*backend);
    in.judge = judge.get();
  }
  const auto s = score_dsl(doc, in);
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kRubricItems; ++i) j[std::string(to_string(static_cast<RubricItem>(i)))] = s.scores[i];
  j["total"] = s.total();
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::vector<EpisodeLog> load_logs(const std::string& dir) {
  std::vector<EpisodeLog> logs;
  for (const auto& f : sorted_files(dir, ".json")) logs.push_back(episode_from_json(read_file(f)));
  return logs;
}

Phase parse_phase(const std::string& s) {
  if (s == "I") return Phase::kI;
  if (s == "II") return Phase::kII;
  throw ArgumentError("--phase must be I or II");
}

void write_report(const std::string& dir, const std::string& stem, const RunConfig& c, const BatchReport& r) {
  if (dir.empty()) return;
  write_file(join(dir, stem + ".csv"), r.to_csv());
  write_file(join(dir, stem + ".json"), with_config(c, r.to_json()));
}

int cmd_evaluate(const Options& o, bool dry) {
  const RunConfig c = load(o);
  const Phase phase = parse_phase(o.phase);
  const std::string logs_dir = !o.logs.empty() ? o.logs : c.resolve(c.paths.episodes);
  std::optional<MapLibrary> maps;
  if (o.dsl_files.empty()) require(logs_dir, "--logs or paths.episodes");
  else maps = load_maps(c);
  if (dry) return 0;
  BatchReport report;
  if (o.dsl_files.empty()) {
    std::vector<LabeledLog> logs;
    for (auto& l : load_logs(logs_dir)) logs.push_back({o.label, nullptr, std::move(l)});
    report = report_from_logs(logs, phase, c.eval.bins);
  } else {
    std::vector<ScenarioProgram> programs;
    for (const auto& f : o.dsl_files) programs.push_back(compile_file(f, *maps, c));
    std::vector<LabeledProgram> labeled;
    std::vector<std::unique_ptr<SlotPolicies>> policies;
    PolicyMap merged;
    for (const auto& p : programs) {
      policies.push_back(std::make_unique<SlotPolicies>(p, c, load_checkpoint(o.ego_ckpt), load_checkpoint(o.adv_ckpt)));
      merged.insert(policies.back()->map.begin(), policies.back()->map.end());
    }
    for (const auto& p : programs) labeled.push_back({p.name, &p});
    report = evaluate_batch(labeled, merged, o.episodes ? o.episodes : c.eval.episodes, c.seeds.eval, phase,
                            c.eval.workers, c.eval.bins);
  }
  std::cout << report.to_csv();
  write_report(prepare_out(o, c), "evaluate", c, report);
  return 0;
}

bool matches(const EpisodeLog& log, const ScenarioProgram& p) {
  if (log.vehicles.size() != p.initial.size()) return false;
  for (std::size_t i = 0; i < p.initial.size(); ++i)
    if (log.vehicles[i].id != p.initial[i].id) return false;
  return true;
}

int cmd_loop(const Options& o, bool dry) {
  const RunConfig c = load(o);
  const MapLibrary maps = load_maps(c);
  const std::string query = !o.query.empty() ? o.query : c.loop.query;
  if (query.empty()) throw ArgumentError("--query or loop.query is required");
  if (c.paths.corpus.empty()) throw ArgumentError("paths.corpus is required");
  c.generation.backend.validate();
  if (dry) return 0;
  const CorpusStore store(c.resolve(c.paths.corpus));
  if (!fs::exists(store.path())) write_file(store.path(), "");
  const auto code_index = build_code_index(standard_code_fragments());
  auto backend = make_backend(c.generation.backend);
  const std::string dir = prepare_out(o, c);
  std::vector<EpisodeLog> fixture_logs;
  if (!c.paths.episodes.empty()) fixture_logs = load_logs(c.resolve(c.paths.episodes));

  for (int round = 0; round < c.loop.rounds; ++round) {
    const std::string tag = "round" + std::to_string(round + 1);
    RetrievalIndex corpus_index = load_corpus_index(c);
    RepairContext ctx{&corpus_index, &maps, &code_index, c.sim};
    const auto repaired = repair_compile(query, ctx, c.generation, *backend, c.repair_attempts);
    const ScenarioProgram& program = repaired.program;
    const auto slots = program.policy_slots();
    const bool has_adv = std::find(slots.begin(), slots.end(), kAdversarySlot) != slots.end();
    const bool has_ego = std::find(slots.begin(), slots.end(), kEgoSlot) != slots.end();
    const std::uint64_t seed = derive_seed(train_seed(c), static_cast<std::uint64_t>(round));

    std::optional<PolicyParams> adv, ego;
    TrainConfig tc = c.train;
    if (has_adv && c.loop.adversary_steps > 0) {
      tc.total_steps = c.loop.adversary_steps;
      adv = train_adversarial({program}, tc, seed).params;
    }
    if (has_ego && c.loop.ego_steps > 0) {
      tc.total_steps = c.loop.ego_steps;
      if (has_adv && !adv) adv = fresh_params(c, derive_seed(c.seeds.master, 12));
      ego = train_ego({program}, adv ? &*adv : nullptr, tc, derive_seed(seed, 1)).params;
    }
    if (!c.paths.checkpoints.empty()) {
      fs::create_directories(c.resolve(c.paths.checkpoints));
      if (adv) write_file(join(c.resolve(c.paths.checkpoints), tag + "_adv.json"), checkpoint_to_json(*adv));
      if (ego) write_file(join(c.resolve(c.paths.checkpoints), tag + "_ego.json"), checkpoint_to_json(*ego));
    }

    std::vector<EpisodeLog> evaluated;
    if (c.loop.episodes > 0) {
      SlotPolicies policies(program, c, ego, adv);
      evaluated = run_episodes(program, policies.map, derive_seed(c.seeds.master, 100 + round), c.loop.episodes,
                               c.eval.workers);
      std::vector<LabeledLog> labeled;
      for (const auto& l : evaluated) labeled.push_back({scene_label(repaired.document), &program, l});
      write_report(dir, tag + "_evaluate", c, report_from_logs(labeled, Phase::kII, c.eval.bins));
    }
    for (const auto& l : fixture_logs)
      if (matches(l, program)) evaluated.push_back(l);

    std::unique_ptr<RetrievalIndex> index;
    const std::string index_path = c.resolve(c.paths.index);
    if (!index_path.empty()) index = std::make_unique<RetrievalIndex>(load_corpus_index(c));
    const auto aug = augment_corpus(evaluated, program, repaired.document, store, index.get());
    if (index && !aug.appended.empty()) write_file(index_path, index->to_json());
    std::cout << tag << " attempts " << repaired.attempts << " episodes " << evaluated.size() << " appended "
              << aug.appended.size() << " duplicates " << aug.duplicates << " unsuccessful " << aug.unsuccessful
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial driving scenario generation and training"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "configuration file (JSON)");
  app.add_option("--seed", o.seed, "master seed override");
  app.add_option("--replay", o.replay, "replay backend directory");
  app.add_option("--backend", o.backend, "http or replay")->check(CLI::IsMember({"http", "replay"}));
  app.add_option("--voting", o.voting, "embedding or structured")->check(CLI::IsMember({"embedding", "structured"}));
  app.add_option("--rounds", o.rounds, "loop rounds");
  app.add_option("--out", o.out, "output directory");
  app.add_flag("--dry-run", o.dry_run, "validate config and inputs only");

  auto* ingest = app.add_subcommand("ingest", "parse and lane-match a trajectory file");
  auto* extract = app.add_subcommand("extract", "detect scenario segments");
  auto* corpus = app.add_subcommand("corpus-build", "build corpus records from segments");
  auto* index = app.add_subcommand("index", "build the retrieval index of the corpus");
  auto* generate = app.add_subcommand("generate", "generate a scenario document");
  auto* compile = app.add_subcommand("compile", "compile a scenario document");
  auto* simulate = app.add_subcommand("simulate", "run episodes of a scenario");
  auto* train_adv = app.add_subcommand("train-adv", "train the adversary policy");
  auto* train_eg = app.add_subcommand("train-ego", "train the ego policy");
  auto* smooth = app.add_subcommand("smooth", "Bezier-smooth trajectories");
  auto* score = app.add_subcommand("score", "rubric score of a scenario document");
  auto* evaluate = app.add_subcommand("evaluate", "collision rates and TTC/PET distributions");
  auto* loop = app.add_subcommand("loop", "closed generation, training and augmentation loop");

  for (auto* sc : {ingest, extract, corpus, smooth}) {
    sc->add_option("--tracks", o.tracks, "trajectory CSV");
    sc->add_option("--lane-map", o.lane_map, "lane map JSON");
  }
  corpus->add_option("--segments", o.segments, "segments JSONL from extract");
  generate->add_option("--query", o.query, "scenario description")->required();
  compile->add_option("--dsl", o.dsl, "scenario document");
  compile->add_option("--query", o.query, "description used by --repair");
  compile->add_flag("--repair", o.repair, "generate and repair until the document compiles");
  simulate->add_option("--dsl", o.dsl, "scenario document")->required();
  simulate->add_option("--episodes", o.episodes, "episode count");
  for (auto* sc : {simulate, evaluate}) {
    sc->add_option("--ego-checkpoint", o.ego_ckpt, "ego policy checkpoint");
    sc->add_option("--adv-checkpoint", o.adv_ckpt, "adversary policy checkpoint");
  }
  for (auto* sc : {train_adv, train_eg}) {
    sc->add_option("--dsl", o.dsl_files, "scenario documents")->required();
    sc->add_option("--steps", o.steps, "environment step budget");
  }
  train_adv->add_option("--ego-checkpoint", o.ego_ckpt, "frozen ego policy");
  train_eg->add_option("--adv-checkpoint", o.adv_ckpt, "frozen adversary policy");
  smooth->add_option("--degree", o.degree, "Bezier degree")->check(CLI::Range(1, 20));
  score->add_option("--dsl", o.dsl, "scenario document")->required();
  score->add_option("--query", o.query, "description the document should match");
  evaluate->add_option("--logs", o.logs, "directory of episode logs");
  evaluate->add_option("--dsl", o.dsl_files, "scenario documents to run instead of logs");
  evaluate->add_option("--episodes", o.episodes, "episodes per program and seed");
  evaluate->add_option("--label", o.label, "row label for log input");
  evaluate->add_option("--phase", o.phase, "I or II")->check(CLI::IsMember({"I", "II"}));
  loop->add_option("--query", o.query, "scenario description");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  try {
    const bool dry = o.dry_run;
    int rc = 0;
    if (*ingest) rc = cmd_ingest(o, dry);
    else if (*extract) rc = cmd_extract(o, dry);
    else if (*corpus) rc = cmd_corpus_build(o, dry);
    else if (*index) rc = cmd_index(o, dry);
    else if (*generate) rc = cmd_generate(o, dry);
    else if (*compile) rc = cmd_compile(o, dry);
    else if (*simulate) rc = cmd_simulate(o, dry);
    else if (*train_adv) rc = cmd_train(o, dry, true);
    else if (*train_eg) rc = cmd_train(o, dry, false);
    else if (*smooth) rc = cmd_smooth(o, dry);
    else if (*score) rc = cmd_score(o, dry);
    else if (*evaluate) rc = cmd_evaluate(o, dry);
    else if (*loop) rc = cmd_loop(o, dry);
    if (dry) std::cout << "dry run ok\n";
    return rc;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
}
