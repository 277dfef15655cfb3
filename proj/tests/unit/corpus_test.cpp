#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "helpers.hpp"
#include "scenforge/corpus.hpp"

using namespace scenforge;

namespace {

LaneMap road() {
  return parse_lane_map(R"({"lanes":[
    {"id":"A","centerline":[[0,0],[100,0]],"line_type":"dashed","speed_class":"slow","adjacent":["B"],"control":null},
    {"id":"B","centerline":[[0,3.5],[100,3.5]],"line_type":"solid","speed_class":"normal","adjacent":["A"],"control":"closure"},
    {"id":"C","centerline":[[0,50],[100,50]],"line_type":"solid","speed_class":"normal","adjacent":[],"control":null}]})");
}

ScenarioSegment segment(ScenarioLabel label) {
  ScenarioSegment s;
  s.ego_id = "12";
  s.start = 3;
  s.end = 23;
  s.t_start = 0.3;
  s.t_end = 2.3;
  s.label = label;
  return s;
}

AdversarialPalette forced(AdversarialBehavior b, dsl::Relation r, double d) {
  AdversarialPalette p;
  p.behaviors = {b};
  p.relations = {r};
  p.distance_min = p.distance_max = d;
  return p;
}

ScenarioRecord sample_record(std::uint64_t seed, ScenarioLabel label = ScenarioLabel::kFollow) {
  RecordInputs in;
  in.segment = segment(label);
  in.segment.risk.min_ttc = 3.25;
  in.lane_ids = {"A"};
  in.map_key = "road";
  in.provenance = {"INTERACTION", "vehicle_tracks_000.csv", 3, 23};
  return build_record(in, road(), seed);
}

}  // namespace

TEST(SummarizeBehavior, FollowTemplate) {
  auto s = segment(ScenarioLabel::kFollow);
  s.risk.min_ttc = 4.0;
  EXPECT_EQ(summarize_behavior(s), "The ego vehicle follows a leading vehicle for 2.0 s with a minimum TTC of 4.0 s.");
}

TEST(SummarizeBehavior, BrakeAndUTurnWords) {
  EXPECT_NE(summarize_behavior(segment(ScenarioLabel::kBrake)).find("brakes"), std::string::npos);
  EXPECT_NE(summarize_behavior(segment(ScenarioLabel::kUTurn)).find("U-turn"), std::string::npos);
}

TEST(DescribeRoad, Phrases) {
  const auto m = road();
  EXPECT_NE(describe_road(m, {"B"}).find("temporary road closure"), std::string::npos);
  EXPECT_NE(describe_road(m, {"A"}).find("slow-speed lane with dashed markings"), std::string::npos);
  const auto plain = describe_road(m, {"C"});
  EXPECT_EQ(plain.find("closure"), std::string::npos);
  EXPECT_EQ(plain.find("signal"), std::string::npos);
  EXPECT_THROW(describe_road(m, {"Z"}), LookupError);
}

TEST(SynthesizeAdversarial, ForcedTailgate) {
  const auto c = synthesize_adversarial(segment(ScenarioLabel::kFollow), 7,
                                        forced(AdversarialBehavior::kTailgate, dsl::Relation::kRear, 0.5));
  EXPECT_EQ(c.behavior, AdversarialBehavior::kTailgate);
  EXPECT_EQ(c.relation, dsl::Relation::kRear);
  EXPECT_EQ(c.distance, 0.5);
  EXPECT_EQ(render_condition(c), "tailgating at 0.5 m distance from the rear");
}

TEST(SynthesizeAdversarial, DeterministicPerSeed) {
  const auto p = AdversarialPalette::standard();
  EXPECT_EQ(synthesize_adversarial(segment(ScenarioLabel::kFollow), 99, p),
            synthesize_adversarial(segment(ScenarioLabel::kFollow), 99, p));
}

TEST(SynthesizeAdversarial, LateralCutIn) {
  const auto c = synthesize_adversarial(segment(ScenarioLabel::kFollow), 1,
                                        forced(AdversarialBehavior::kUnsafeLaneChange, dsl::Relation::kLeft, 1.2));
  const auto text = render_condition(c);
  EXPECT_NE(text.find("1.2"), std::string::npos);
  EXPECT_NE(text.find("left"), std::string::npos);
}

TEST(SynthesizeAdversarial, EmptyPaletteIsConfigError) {
  EXPECT_THROW(synthesize_adversarial(segment(ScenarioLabel::kFollow), 1, AdversarialPalette{}), ConfigError);
}

TEST(SynthesizeAdversarial, CoversPaletteOverSeeds) {
  const auto p = AdversarialPalette::standard();
  std::set<AdversarialBehavior> seen;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto c = synthesize_adversarial(segment(ScenarioLabel::kFollow), s, p);
    seen.insert(c.behavior);
    ASSERT_GE(c.distance, p.distance_min);
    ASSERT_LE(c.distance, p.distance_max);
  }
  EXPECT_EQ(seen.size(), p.behaviors.size());
}

TEST(AssembleDescription, EndsWithDatasetTag) {
  const DescriptionParts parts{"follow", "The ego vehicle follows.", "The road has a lane.", "tailgating at 0.5 m distance from the rear",
                               {"INTERACTION", "", 0, 0}};
  const auto d = assemble_description(parts);
  EXPECT_TRUE(d.ends_with("[INTERACTION]"));
  EXPECT_EQ(d, assemble_description(parts));
  const auto behavior = d.find("follows");
  const auto road_at = d.find("road has");
  const auto adv = d.find("tailgating");
  EXPECT_LT(behavior, road_at);
  EXPECT_LT(road_at, adv);
}

TEST(AssembleDescription, MissingRoad) {
  try {
    assemble_description({"follow", "x", "", "y", {"INTERACTION", "", 0, 0}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()), "road_description empty");
  }
}

TEST(BuildRecord, SnippetsParseAndDocumentAssembles) {
  const auto r = sample_record(5);
  EXPECT_NO_THROW(validate_record(r));
  const auto doc = dsl::document_from_snippets("x", r.dsl_geometry, r.dsl_spawn, r.dsl_behavior);
  EXPECT_EQ(doc.map_key().value(), "road");
  EXPECT_TRUE(doc.ego());
}

TEST(CorpusFile, ThreeRecordsThreeLines) {
  std::vector<ScenarioRecord> rs = {sample_record(1), sample_record(2, ScenarioLabel::kBrake),
                                    sample_record(3, ScenarioLabel::kUTurn)};
  const auto text = save_corpus(rs);
  std::istringstream in(text);
  int lines = 0;
  for (std::string line; std::getline(in, line);) {
    ++lines;
    for (const char* key : {"\"description\"", "\"geometry.snippet\"", "\"spawn.snippet\"", "\"behavior.snippet\"", "\"meta\""})
      EXPECT_NE(line.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_EQ(load_corpus(text), rs);
}

TEST(CorpusFile, EmptyAndMalformed) {
  EXPECT_EQ(save_corpus({}), "");
  EXPECT_TRUE(load_corpus("").empty());
  try {
    load_corpus(save_corpus({sample_record(1)}) + "{not json\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(CorpusStore, ConcurrentAppendsKeepLinesWhole) {
  const auto dir = fx::scratch_dir("corpus_store");
  const CorpusStore store((dir / "corpus.jsonl").string());
  const auto rec = sample_record(4);
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([&] {
      for (int i = 0; i < 10; ++i) store.append({rec});
    });
  for (auto& t : ts) t.join();
  const auto all = store.load();
  EXPECT_EQ(all.size(), 40u);
  for (const auto& r : all) EXPECT_EQ(r, rec);
}

TEST(MemoryBank, FifoEviction) {
  MemoryBank bank(2);
  bank.add(sample_record(1));
  bank.add(sample_record(2));
  bank.add(sample_record(3));
  const auto snap = bank.snapshot();
  ASSERT_EQ(snap.size(), 2u);
  EXPECT_EQ(snap[0], sample_record(2));
  EXPECT_EQ(snap[1], sample_record(3));
}
