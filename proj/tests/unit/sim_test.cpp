#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "scenforge/sim.hpp"

using namespace scenforge;

namespace {

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SimParams still() {
  SimParams p;
  p.spawn_jitter_s = 0.0;
  p.spawn_jitter_v = 0.0;
  return p;
}

const MapLibrary& maps() {
  static const MapLibrary lib = load_map_library(fx::fixture("maps"));
  return lib;
}

ScenarioProgram compile_text(const std::string& text, const SimParams& p = still()) {
  return compile_scenario(dsl::parse_dsl(text), maps(), nullptr, p);
}

std::string pair_doc(const std::string& adv) {
  return R"(scenario "p" {
    geometry { map: "two_lane"; ego_route: ["L1"]; }
    spawn {
      vehicle ego { role: ego; lane: "L1"; s: 10; speed: 5; }
      vehicle adv1 { role: adversarial; )" +
         adv + R"( }
    }
    behavior { ego: policy; }
  })";
}

// Dense point-in-rectangle sampling along both boundaries plus the centres.
bool sampled_overlap(const Box& a, const Box& b, int samples) {
  auto inside = [](const Box& r, Vec2 p) {
    const double c = std::cos(r.heading), s = std::sin(r.heading);
    const double dx = p.x - r.center.x, dy = p.y - r.center.y;
    const double u = dx * c + dy * s, v = -dx * s + dy * c;
    return std::abs(u) <= r.length / 2 && std::abs(v) <= r.width / 2;
  };
  auto boundary = [&](const Box& r, const Box& other) {
    const double c = std::cos(r.heading), s = std::sin(r.heading);
    const double per = 2 * (r.length + r.width);
    for (int k = 0; k < samples; ++k) {
      double t = per * k / samples;
      double u, v;
      if (t < r.length) {
        u = -r.length / 2 + t;
        v = -r.width / 2;
      } else if ((t -= r.length) < r.width) {
        u = r.length / 2;
        v = -r.width / 2 + t;
      } else if ((t -= r.width) < r.length) {
        u = r.length / 2 - t;
        v = r.width / 2;
      } else {
        t -= r.length;
        u = -r.length / 2;
        v = r.width / 2 - t;
      }
      if (inside(other, {r.center.x + u * c - v * s, r.center.y + u * s + v * c})) return true;
    }
    return false;
  };
  return inside(a, b.center) || inside(b, a.center) || boundary(a, b) || boundary(b, a);
}

}  // namespace

TEST(LanePath, PoseAndProject) {
  LanePath p({{0, 0}, {10, 0}, {10, 10}});
  EXPECT_EQ(p.length(), 20.0);
  const auto q = p.pose(5, 1.5);
  EXPECT_NEAR(q.x, 5.0, 1e-12);
  EXPECT_NEAR(q.y, 1.5, 1e-12);
  const auto f = p.project({10.5, 4});
  EXPECT_NEAR(f.s, 14.0, 1e-12);
  EXPECT_NEAR(f.d, -0.5, 1e-12);
  EXPECT_NEAR(p.heading_at(15), kPi / 2, 1e-12);
}

TEST(MapLibrary, LoadsByStem) {
  ASSERT_EQ(maps().count("two_lane"), 1u);
  EXPECT_EQ(maps().at("two_lane").lanes().size(), 2u);
}

TEST(Compile, RearPlacementBumperToBumper) {
  const auto prog = compile_text(pair_doc("anchor: ego; relation: rear; offset: 0.5;"));
  const auto& ego = prog.initial[0];
  const auto& adv = prog.initial[1];
  EXPECT_NEAR(ego.x, 10.0, 1e-12);
  EXPECT_NEAR(adv.x, 10.0 - (0.5 + 4.5 / 2 + 4.5 / 2), 1e-12);
  EXPECT_NEAR(adv.y, 0.0, 1e-12);
  EXPECT_EQ(adv.lane_id, "L1");
  EXPECT_EQ(prog.anchors[1].value(), 0u);
}

TEST(Compile, LeftPlacementIsSideGap) {
  const auto prog = compile_text(pair_doc("anchor: ego; relation: left; offset: 1.2; length: 4;"));
  const auto& adv = prog.initial[1];
  EXPECT_NEAR(adv.x, 10.0, 1e-12);
  EXPECT_NEAR(adv.y, 1.2 + 1.0 + 1.0, 1e-12);
  EXPECT_EQ(adv.lane_id, "L2");
  EXPECT_EQ(adv.length, 4.0);
}

TEST(Compile, Errors) {
  try {
    compile_text(pair_doc("lane: \"L1\"; s: 12;"));
    FAIL();
  } catch (const CompileError& e) {
    EXPECT_NE(std::string(e.what()).find("initial overlap"), std::string::npos);
  }
  EXPECT_THROW(compile_scenario(dsl::parse_dsl(R"(scenario "m" {
    geometry { map: "atlantis"; }
    spawn { vehicle ego { role: ego; lane: "L1"; } }
    behavior { ego: policy; }
  })"), maps()), CompileError);
  EXPECT_THROW(compile_text(pair_doc("lane: \"L9\";")), CompileError);
  EXPECT_THROW(compile_text(pair_doc("anchor: ghost; relation: rear; offset: 2;")), DataError);
}

TEST(Compile, ControllersAndSlots) {
  const auto prog = compile_text(read(fx::fixture("scenarios/brake.dsl")));
  ASSERT_EQ(prog.controllers.size(), 2u);
  EXPECT_EQ(prog.controllers[0].kind, ControllerSpec::Kind::kPolicy);
  EXPECT_EQ(prog.controllers[1].kind, ControllerSpec::Kind::kScripted);
  EXPECT_EQ(prog.policy_slots(), std::vector<std::string>{"ego"});
  EXPECT_EQ(prog.params.horizon, 300);
}

TEST(Boxes, CentresOneMetreApart) {
  EXPECT_TRUE(boxes_overlap({{0, 0}, 0, 4, 2}, {{1, 0}, 0, 4, 2}));
  EXPECT_FALSE(boxes_overlap({{0, 0}, 0, 4, 2}, {{4.01, 0}, 0, 4, 2}));
  EXPECT_TRUE(boxes_overlap({{0, 0}, 0, 4, 2}, {{0, 0}, 0, 1, 1}));
}

TEST(Boxes, RotatedNearTouching) {
  // 45 degree square corner pointing at the edge x=2 of an axis-aligned box
  const double half_diag = std::sqrt(2.0);
  const Box a{{0, 0}, 0, 4, 2};
  const Box touching{{2 + half_diag - 0.01, 0}, kPi / 4, 2, 2};
  const Box apart{{2 + half_diag + 0.01, 0}, kPi / 4, 2, 2};
  EXPECT_EQ(boxes_overlap(a, touching), sampled_overlap(a, touching, 10000));
  EXPECT_EQ(boxes_overlap(a, apart), sampled_overlap(a, apart, 10000));
  EXPECT_TRUE(boxes_overlap(a, touching));
  EXPECT_FALSE(boxes_overlap(a, apart));
}

TEST(Boxes, AgreesWithSamplingOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-5, 5), ang(-kPi, kPi), len(1, 5);
  for (int i = 0; i < 1000; ++i) {
    const Box a{{pos(rng), pos(rng)}, ang(rng), len(rng), len(rng)};
    const Box b{{pos(rng), pos(rng)}, ang(rng), len(rng), len(rng)};
    ASSERT_EQ(boxes_overlap(a, b), sampled_overlap(a, b, 10000)) << i;
  }
}

TEST(Idm, EquilibriumAndFreeRoad) {
  IdmParams p;
  EXPECT_LT(std::abs(idm_acceleration(p, p.v0, std::nullopt, 0.0)), 1e-9);
  EXPECT_NEAR(idm_acceleration(p, 0.0, std::nullopt, 0.0), p.a_max, 1e-12);
  // hand value: v=8, leader 6 at 20 m
  const double s_star = p.s0 + 8 * p.time_headway + 8 * 2 / (2 * std::sqrt(p.a_max * p.b));
  EXPECT_NEAR(idm_acceleration(p, 8, 20.0, 6.0), p.a_max * (1 - 1 - std::pow(s_star / 20.0, 2)), 1e-12);
}

TEST(Step, FasterAddsCommandTimesDt) {
  const auto prog = compile_text(pair_doc("lane: \"L2\"; s: 60;"));
  Simulation sim(prog, 1);
  sim.step({{"ego", PolicyAction::kFaster}});
  EXPECT_NEAR(sim.vehicles()[0].speed, 5.0 + 1.5 * 0.1, 1e-12);
  sim.step({{"ego", PolicyAction::kEmergencyBrake}});
  EXPECT_NEAR(sim.vehicles()[0].speed, 5.15 - 0.6, 1e-12);
}

TEST(Step, SpeedCappedAtVmax) {
  auto p = still();
  p.v_max = 5.1;
  const auto prog = compile_text(pair_doc("lane: \"L2\"; s: 60;"), p);
  Simulation sim(prog, 1);
  sim.step({{"ego", PolicyAction::kFaster}});
  sim.step({{"ego", PolicyAction::kFaster}});
  EXPECT_NEAR(sim.vehicles()[0].speed, 5.1, 1e-12);
}

TEST(Step, LaneChangeMovesToAdjacentLane) {
  const auto prog = compile_text(pair_doc("lane: \"L2\"; s: 90;"));
  Simulation sim(prog, 1);
  const auto out = sim.step({{"ego", PolicyAction::kLaneLeft}});
  bool started = false;
  for (const auto& e : out.events) started = started || e.kind == EventKind::kLaneChange;
  EXPECT_TRUE(started);
  for (int i = 0; i < 25; ++i) sim.step({{"ego", PolicyAction::kIdle}});
  EXPECT_NEAR(sim.vehicles()[0].y, 3.5, 0.25);
  EXPECT_EQ(sim.vehicles()[0].lane_id, "L2");
  for (int i = 0; i < 60; ++i) sim.step({{"ego", PolicyAction::kIdle}});
  EXPECT_NEAR(sim.vehicles()[0].y, 3.5, 0.02);
}

TEST(RunEpisode, SuddenBrakeAheadOfIdleEgo) {
  const auto prog = compile_text(read(fx::fixture("scenarios/brake.dsl")));
  const ConstantPolicy idle(PolicyAction::kIdle);
  const auto log = run_episode(prog, {{"ego", &idle}}, 3);
  EXPECT_EQ(log.termination, Termination::kCollision);
  EXPECT_TRUE(log.ego_collided());
  // lead: 1 s at 10 m/s, then stops from 10 m/s at 8 m/s^2 over 1.25 s and
  // 6.25 m; the ego closes the remaining 8 - 6.25 m at 10 m/s.
  const double contact = 2.25 + (8.0 - 6.25) / 10.0;
  EXPECT_NEAR(log.steps * 0.1, contact, 0.25);
}

TEST(RunEpisode, EmptyBehaviorTimesOut) {
  const auto prog = compile_text(R"(scenario "t" {
    geometry { map: "two_lane"; ego_route: ["L1"]; horizon: 5; }
    spawn { vehicle ego { role: ego; lane: "L1"; s: 10; speed: 3; } }
    behavior { ego: go_straight(speed=3); }
  })");
  const auto log = run_episode(prog, {}, 1);
  EXPECT_EQ(log.termination, Termination::kTimeout);
  EXPECT_EQ(log.steps, 5);
  EXPECT_EQ(log.frames.size(), 6u);
}

TEST(RunEpisode, GoalAtRouteEnd) {
  const auto prog = compile_text(R"(scenario "g" {
    geometry { map: "two_lane"; ego_route: ["L1"]; horizon: 400; }
    spawn { vehicle ego { role: ego; lane: "L1"; s: 150; speed: 10; } }
    behavior { ego: policy; }
  })");
  const ConstantPolicy idle(PolicyAction::kIdle);
  const auto log = run_episode(prog, {{"ego", &idle}}, 1);
  EXPECT_EQ(log.termination, Termination::kGoal);
  EXPECT_NEAR(log.steps, 29, 1);
}

TEST(RunEpisode, UnboundSlot) {
  const auto prog = compile_text(read(fx::fixture("scenarios/brake.dsl")));
  EXPECT_THROW(run_episode(prog, {}, 1), ConfigError);
}

TEST(RunEpisode, DeterministicAcrossWorkers) {
  const auto prog = compile_scenario(dsl::parse_dsl(read(fx::fixture("scenarios/cutin.dsl"))), maps());
  const ConstantPolicy idle(PolicyAction::kIdle);
  EXPECT_EQ(run_episode(prog, {{"ego", &idle}}, 42), run_episode(prog, {{"ego", &idle}}, 42));
  const auto one = run_episodes(prog, {{"ego", &idle}}, 7, 6, 1);
  const auto three = run_episodes(prog, {{"ego", &idle}}, 7, 6, 3);
  EXPECT_EQ(one, three);
  EXPECT_EQ(one[4], run_episode(prog, {{"ego", &idle}}, derive_seed(7, 4)));
  EXPECT_NE(one[0].frames, one[1].frames);
}

TEST(RunEpisode, KinematicLimits) {
  const auto prog = compile_scenario(dsl::parse_dsl(read(fx::fixture("scenarios/cutin.dsl"))), maps());
  class Random : public Policy {
   public:
    PolicyAction act(std::span<const double>, Rng& rng) const override {
      return static_cast<PolicyAction>(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
    }
  } random;
  const auto& p = prog.params;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto log = run_episode(prog, {{"ego", &random}}, seed);
    for (std::size_t t = 1; t < log.frames.size(); ++t)
      for (std::size_t v = 0; v < log.vehicles.size(); ++v) {
        const double dv = log.frames[t][v].speed - log.frames[t - 1][v].speed;
        ASSERT_LE(dv, p.accel_limit * p.dt + 1e-9);
        ASSERT_GE(dv, -p.decel_limit * p.dt - 1e-9);
        ASSERT_GE(log.frames[t][v].speed, 0.0);
      }
  }
}

TEST(EpisodeLog, JsonRoundTrip) {
  const auto prog = compile_text(read(fx::fixture("scenarios/brake.dsl")));
  const ConstantPolicy idle(PolicyAction::kIdle);
  const auto log = run_episode(prog, {{"ego", &idle}}, 9);
  const auto text = episode_to_json(log);
  EXPECT_EQ(episode_from_json(text), log);
  EXPECT_LT(text.find("\"seed\""), text.find("\"termination\""));
  EXPECT_LT(text.find("\"events\""), text.find("\"frames\""));
  EXPECT_GE(log.count(EventKind::kBehavior), 1u);
  EXPECT_THROW(episode_from_json("{\"seed\":1}"), DataError);
}

TEST(Observation, FixedLength) {
  const auto prog = compile_text(read(fx::fixture("scenarios/brake.dsl")));
  Simulation sim(prog, 1);
  EXPECT_EQ(sim.observe(0).size(), Simulation::observation_size());
  EXPECT_EQ(sim.observe_slot("ego").size(), Simulation::observation_size());
  const auto solo = compile_text(R"(scenario "s" {
    geometry { map: "two_lane"; }
    spawn { vehicle ego { role: ego; lane: "L1"; s: 10; } }
    behavior { ego: policy; }
  })");
  Simulation alone(solo, 1);
  EXPECT_EQ(alone.observe(0).size(), Simulation::observation_size());
}
