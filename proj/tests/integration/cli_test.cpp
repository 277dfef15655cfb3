#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "scenforge/dsl.hpp"

using namespace scenforge;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Run run(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(SCENFORGE_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write_config(const fs::path& dir, const std::string& extra, const std::string& replay = "golden") {
  const auto path = dir / "config.json";
  std::ofstream f(path);
  f << R"({"paths": {"maps": ")" << fx::fixture("maps") << R"(", "corpus": "corpus.jsonl", "index": "index.json")"
    << R"(, "episodes": ")" << fx::fixture("episodes/success") << R"("},)"
    << R"("backend": {"mode": "replay", "replay_dir": ")" << fx::fixture("replay/" + replay) << R"("},)"
    << R"("seeds": {"master": 3, "eval": [1]}, "evaluate": {"episodes": 5})" << extra << "}";
  return path;
}

const std::string kQuery = "\"The lead vehicle brakes suddenly 8 m in front of the ego vehicle.\"";

std::size_t lines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string l; std::getline(f, l);) n += !l.empty();
  return n;
}

}  // namespace

TEST(Cli, GenerateReplaysGolden) {
  const auto dir = fx::scratch_dir("cli_generate");
  const auto cfg = write_config(dir, "");
  const auto r = run(dir, "--config " + cfg.string() + " generate --query " + kQuery);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, dsl::print_dsl(dsl::parse_dsl(slurp(fx::fixture("scenarios/brake.dsl")))));
}

TEST(Cli, EvaluateLogDirectory) {
  const auto dir = fx::scratch_dir("cli_evaluate");
  const auto cfg = write_config(dir, "");
  const auto r = run(dir, "--config " + cfg.string() + " evaluate --label ten --logs " + fx::fixture("episodes/ten"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("II,ten,10,7,3,0,0.7\n"), std::string::npos) << r.out;
}

TEST(Cli, SimulateWritesLogs) {
  const auto dir = fx::scratch_dir("cli_simulate");
  const auto cfg = write_config(dir, "");
  const auto r = run(dir, "--config " + cfg.string() + " --out " + (dir / "logs").string() +
                              " simulate --episodes 4 --dsl " + fx::fixture("scenarios/brake.dsl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("episodes 4", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "logs" / "episode_0003.json"));
}

TEST(Cli, LoopAppendsOnceThenDeduplicates) {
  const auto dir = fx::scratch_dir("cli_loop");
  const auto cfg = write_config(dir, R"(, "loop": {"rounds": 1, "query": "The lead vehicle brakes suddenly 8 m in front of the ego vehicle."})");
  auto r = run(dir, "--config " + cfg.string() + " loop");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("appended 1 "), std::string::npos) << r.out;
  EXPECT_EQ(lines(dir / "corpus.jsonl"), 1u);
  r = run(dir, "--config " + cfg.string() + " loop");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("appended 0 duplicates 1"), std::string::npos) << r.out;
  EXPECT_EQ(lines(dir / "corpus.jsonl"), 1u);
}

TEST(Cli, DryRunTouchesNothing) {
  const auto dir = fx::scratch_dir("cli_dry");
  const auto cfg = write_config(dir, "");
  const auto r = run(dir, "--config " + cfg.string() + " --dry-run loop --query " + kQuery);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "dry run ok\n");
  EXPECT_FALSE(fs::exists(dir / "corpus.jsonl"));
  EXPECT_FALSE(fs::exists(dir / "index.json"));
}

TEST(Cli, ExitCodes) {
  const auto dir = fx::scratch_dir("cli_codes");
  const auto cfg = write_config(dir, "");
  EXPECT_EQ(run(dir, "--no-such-flag").code, 2);
  EXPECT_EQ(run(dir, "--config " + (dir / "absent.json").string() + " generate --query x").code, 2);

  std::ofstream(dir / "broken.dsl") << "scenario \"b\" { geometry { map: \"two_lane\" }";
  auto r = run(dir, "--config " + cfg.string() + " compile --dsl " + (dir / "broken.dsl").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;

  const auto bad = write_config(dir, "", "broken");
  r = run(dir, "--config " + bad.string() + " compile --repair --query " + kQuery);
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("attempt 3"), std::string::npos) << r.err;

  const auto http = dir / "http.json";
  std::ofstream(http) << R"({"backend": {"mode": "http", "endpoint": "http://127.0.0.1:1/v1/chat", "model": "m"}})";
  r = run(dir, "--config " + http.string() + " generate --query " + kQuery);
  EXPECT_EQ(r.code, 4) << r.err;
}
