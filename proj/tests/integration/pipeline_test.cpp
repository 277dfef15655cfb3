#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "scenforge/evalloop.hpp"
#include "scenforge/genpipe.hpp"
#include "scenforge/rl.hpp"

using namespace scenforge;

namespace {

const char* kQuery = "The lead vehicle brakes suddenly 8 m in front of the ego vehicle.";

std::string read(const std::string& path) {
  std::ifstream f(path);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

const MapLibrary& maps() {
  static const MapLibrary lib = load_map_library(fx::fixture("maps"));
  return lib;
}

GenerationConfig replay(const std::string& dir) {
  GenerationConfig g;
  g.backend.replay_dir = fx::fixture("replay/" + dir);
  g.backend.sample_count = 1;
  return g;
}

RepairResult generate_and_compile(const GenerationConfig& g) {
  const RetrievalIndex corpus;
  const auto code = build_code_index(standard_code_fragments());
  auto backend = make_backend(g.backend);
  const RepairContext ctx{&corpus, &maps(), &code, SimParams{}};
  return repair_compile(kQuery, ctx, g, *backend);
}

std::vector<std::string> as_json(const std::vector<EpisodeLog>& logs) {
  std::vector<std::string> out;
  for (const auto& l : logs) out.push_back(episode_to_json(l));
  return out;
}

}  // namespace

TEST(Pipeline, GenerateCompileSimulateIsDeterministic) {
  const auto a = generate_and_compile(replay("golden"));
  const auto b = generate_and_compile(replay("golden"));
  EXPECT_EQ(dsl::print_dsl(a.document), dsl::print_dsl(b.document));
  EXPECT_EQ(a.attempts, 1);
  const ConstantPolicy idle(PolicyAction::kIdle);
  const auto one = as_json(run_episodes(a.program, {{"ego", &idle}}, 11, 12, 1));
  const auto three = as_json(run_episodes(b.program, {{"ego", &idle}}, 11, 12, 3));
  EXPECT_EQ(one, three);
  EXPECT_NE(one[0], one[1]);
}

TEST(Pipeline, RepairThenSimulate) {
  const auto r = generate_and_compile(replay("repair"));
  EXPECT_EQ(r.attempts, 3);
  ASSERT_EQ(r.diagnostics.size(), 2u);
  const ConstantPolicy idle(PolicyAction::kIdle);
  const auto log = run_episode(r.program, {{"ego", &idle}}, 1);
  EXPECT_GT(log.steps, 0);
  EXPECT_EQ(episode_from_json(episode_to_json(log)), log);
}

TEST(Pipeline, TrainEvaluateAugmentRound) {
  const auto r = generate_and_compile(replay("golden"));
  TrainConfig tc;
  tc.total_steps = 2048;
  tc.num_envs = 4;
  tc.ppo.rollout_length = 512;
  tc.ppo.minibatch = 128;
  tc.ppo.hidden = 32;
  const auto ego = train_ego({r.program}, nullptr, tc, 5);
  EXPECT_TRUE(train_ego({r.program}, nullptr, tc, 5).params == ego.params);
  const MlpPolicy policy(ego.params);
  auto logs = run_episodes(r.program, {{"ego", &policy}}, 21, 6, 2);
  const auto report = report_from_logs({}, Phase::kII);
  EXPECT_TRUE(report.rows.empty());
  logs.push_back(episode_from_json(read(fx::fixture("episodes/success/goal_1.json"))));

  const auto dir = fx::scratch_dir("pipeline_round");
  const CorpusStore store((dir / "corpus.jsonl").string());
  RetrievalIndex index;
  const auto first = augment_corpus(logs, r.program, r.document, store, &index);
  ASSERT_GE(first.appended.size(), 1u);
  EXPECT_EQ(store.load().size(), first.appended.size());
  EXPECT_EQ(index.size(), first.appended.size());
  const auto second = augment_corpus(logs, r.program, r.document, store, &index);
  EXPECT_TRUE(second.appended.empty());
  EXPECT_EQ(second.duplicates, first.appended.size());

  // the new record is now retrievable context for the next generation
  const auto hits = index.query(kQuery, 1);
  ASSERT_EQ(hits.size(), 1u);
  const auto g = generate_scenario(kQuery, index, replay("golden"), *make_backend(replay("golden").backend));
  EXPECT_NE(g.prompt.find(first.appended[0].dsl_behavior), std::string::npos);
}
