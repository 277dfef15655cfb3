#include <gtest/gtest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "scenforge/config.hpp"

using namespace scenforge;
namespace fs = std::filesystem;

namespace {

std::string what_of(const std::string& text, const std::string& base = ".") {
  try {
    config_from_json(text, base);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, LoadsFixture) {
  const auto c = load_config(fx::fixture("configs/base.json"));
  EXPECT_EQ(c.seeds.master, 7u);
  EXPECT_EQ(c.seeds.train, (std::vector<std::uint64_t>{4, 5, 6}));
  EXPECT_EQ(c.generation.top_k, 2u);
  EXPECT_EQ(c.generation.backend.sample_count, 5u);
  EXPECT_EQ(c.generation.voting, VotingMode::kStructured);
  EXPECT_EQ(c.generation.few_shots.size(), 1u);
  EXPECT_EQ(c.generation.template_text.rfind("{{fix_hint}}Write one scenario", 0), 0u);
  EXPECT_EQ(c.sim.horizon, 250);
  EXPECT_EQ(c.sim.idm.v0, 9.0);
  EXPECT_EQ(c.sim.idm.s0, IdmParams{}.s0);
  EXPECT_EQ(c.train.ppo.reset_scope, ResetScope::kOutputLayers);
  EXPECT_EQ(c.train.num_envs, 4);
  EXPECT_EQ(c.eval.workers, 2u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RelativePathsResolveAgainstFile) {
  const auto c = load_config(fx::fixture("configs/base.json"));
  EXPECT_TRUE(fs::equivalent(c.resolve(c.paths.maps), fx::fixture("maps")));
  EXPECT_TRUE(fs::equivalent(c.generation.backend.replay_dir, fx::fixture("replay/golden")));
  EXPECT_EQ(c.resolve("/abs/x"), "/abs/x");
  EXPECT_EQ(c.resolve(""), "");
}

TEST(Config, RelativeConfigPathResolvesOnce) {
  const auto cwd = fs::current_path();
  fs::current_path(fx::fixture("configs"));
  const auto c = load_config("../configs/base.json");
  fs::current_path(cwd);
  EXPECT_TRUE(fs::equivalent(c.generation.backend.replay_dir, fx::fixture("replay/golden")));
  EXPECT_EQ(c.resolve(c.generation.backend.replay_dir), c.generation.backend.replay_dir);
  EXPECT_TRUE(fs::equivalent(c.resolve(c.paths.maps), fx::fixture("maps")));
}

TEST(Config, Defaults) {
  const auto c = config_from_json("{}");
  EXPECT_EQ(c.train.ppo.rollout_length, 2048);
  EXPECT_EQ(c.train.ppo.minibatch, 256);
  EXPECT_EQ(c.train.ppo.reset_interval, 5000);
  EXPECT_EQ(c.train.ppo.learning_rate, 3e-4);
  EXPECT_EQ(c.generation.backend.sample_count, 5u);
  EXPECT_EQ(c.generation.theta, 0.8);
  EXPECT_EQ(c.sim.dt, 0.1);
  EXPECT_EQ(c.repair_attempts, 3);
}

TEST(Config, UnknownKeyNamed) {
  EXPECT_NE(what_of(R"({"ppo": {"learning_rte": 0.1}})").find("ppo.learning_rte"), std::string::npos);
  EXPECT_NE(what_of(R"({"colour": 1})").find("colour"), std::string::npos);
}

TEST(Config, WrongTypesAndValues) {
  EXPECT_FALSE(what_of(R"({"sim": {"horizon": "long"}})").empty());
  EXPECT_FALSE(what_of(R"({"backend": {"mode": "carrier-pigeon"}})").empty());
  EXPECT_FALSE(what_of(R"({"voting": {"mode": "loudest"}})").empty());
  EXPECT_FALSE(what_of("[1, 2]").empty());
  EXPECT_THROW(config_from_json("{not json"), ConfigError);
  auto c = config_from_json(R"({"ppo": {"gamma": 1.5}})");
  EXPECT_THROW(c.validate(), ConfigError);
  c = config_from_json(R"({"backend": {"sample_count": 0}})");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, MissingInputsRejected) {
  const auto dir = fx::scratch_dir("config_missing");
  auto c = config_from_json(R"({"paths": {"tracks": "nowhere.csv"}})", dir.string());
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere.csv"), std::string::npos);
  }
  c = config_from_json(R"({"paths": {"reports": "no/such/dir/reports"}})", dir.string());
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(load_config((dir / "absent.json").string()), ConfigError);
}

TEST(Config, JsonDumpReloads) {
  const auto c = load_config(fx::fixture("configs/base.json"));
  const auto text = c.to_json();
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["seeds"]["master"], 7);
  EXPECT_TRUE(j["paths"]["maps"].get<std::string>().starts_with("/"));
}
