#include <gtest/gtest.h>

#include "helpers.hpp"
#include "scenforge/ingest.hpp"

using namespace scenforge;

namespace {

const char* kHeader = "track_id,frame_id,timestamp_ms,agent_type,x,y,vx,vy,psi_rad,length,width\n";

std::string two_lanes(bool reversed = false) {
  std::string a = R"({"id":"L1","centerline":[[0,0],[100,0]],"line_type":"dashed","speed_class":"normal","adjacent":["L2"],"control":null})";
  std::string b = R"({"id":"L2","centerline":[[0,2],[100,2]],"line_type":"solid","speed_class":"slow","adjacent":["L1"],"control":"signal"})";
  return std::string(R"({"lanes":[)") + (reversed ? b + "," + a : a + "," + b) + "]}";
}

}  // namespace

TEST(ParseTracks, TwoRowsOneAgent) {
  const auto r = parse_tracks(std::string(kHeader) + "1,0,0,car,0,0,1,0,0,4.5,2\n1,1,100,car,0.1,0,1,0,0,4.5,2\n");
  ASSERT_EQ(r.trajectories.size(), 1u);
  EXPECT_EQ(r.trajectories[0].frames.size(), 2u);
  EXPECT_DOUBLE_EQ(r.trajectories[0].frames[1].timestamp, 0.1);
  EXPECT_EQ(r.dropped_rows, 0u);
}

TEST(ParseTracks, SortsByTimestamp) {
  const auto r = parse_tracks(std::string(kHeader) +
                              "1,2,200,car,2,0,1,0,0,4.5,2\n1,0,0,car,0,0,1,0,0,4.5,2\n1,1,100,car,1,0,1,0,0,4.5,2\n");
  ASSERT_EQ(r.trajectories.size(), 1u);
  const auto& f = r.trajectories[0].frames;
  ASSERT_EQ(f.size(), 3u);
  EXPECT_LT(f[0].timestamp, f[1].timestamp);
  EXPECT_LT(f[1].timestamp, f[2].timestamp);
  EXPECT_DOUBLE_EQ(f[2].x, 2.0);
}

TEST(ParseTracks, DropsRowWithEmptyX) {
  const auto r = parse_tracks(std::string(kHeader) +
                              "1,0,0,car,0,0,1,0,0,4.5,2\n1,1,100,car,,0,1,0,0,4.5,2\n1,2,200,car,0.2,0,1,0,0,4.5,2\n");
  EXPECT_EQ(r.dropped_rows, 1u);
  EXPECT_EQ(r.trajectories.at(0).frames.size(), 2u);
}

TEST(ParseTracks, MissingColumnNamed) {
  try {
    parse_tracks("track_id,frame_id,timestamp_ms,agent_type,x,y,vx,vy,length,width\n");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("psi_rad"), std::string::npos);
  }
}

TEST(ParseTracks, NonNumericCellReportsRow) {
  try {
    parse_tracks(std::string(kHeader) + "1,0,0,car,0,0,1,0,0,4.5,2\n1,1,100,car,abc,0,1,0,0,4.5,2\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row"), std::string::npos);
  }
}

TEST(ParseTracks, PedestrianKind) {
  const auto r = parse_tracks(std::string(kHeader) +
                              "p1,0,0,pedestrian/bicycle,0,0,1,0,0,1,1\np1,1,100,pedestrian/bicycle,0.1,0,1,0,0,1,1\n");
  EXPECT_EQ(r.trajectories.at(0).kind, AgentKind::kPedestrian);
}

TEST(ParseTracks, RoundTripBitExact) {
  std::vector<Trajectory> ts = {fx::straight_track("7", {1.0 / 3.0, -2.5}, {3.3, 0.7}, 12),
                                fx::straight_track("8", {5, 5}, {0, -1.1}, 5)};
  for (auto& t : ts)
    for (auto& f : t.frames) f.timestamp = std::round(f.timestamp * 1000.0) / 1000.0;
  const auto back = parse_tracks(write_tracks(ts)).trajectories;
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    ASSERT_EQ(back[k].frames.size(), ts[k].frames.size());
    for (std::size_t i = 0; i < ts[k].frames.size(); ++i) {
      const auto& a = ts[k].frames[i];
      const auto& b = back[k].frames[i];
      EXPECT_EQ(a.x, b.x);
      EXPECT_EQ(a.y, b.y);
      EXPECT_EQ(a.vx, b.vx);
      EXPECT_EQ(a.vy, b.vy);
      EXPECT_EQ(a.heading, b.heading);
      EXPECT_EQ(a.timestamp, b.timestamp);
    }
  }
}

TEST(ParseTracks, Deterministic) {
  const std::string csv = write_tracks(std::vector<Trajectory>{fx::straight_track("a", {0, 0}, {1, 1}, 20)});
  EXPECT_EQ(write_tracks(parse_tracks(csv).trajectories), write_tracks(parse_tracks(csv).trajectories));
}

TEST(LaneMap, TwoParallelLanes) {
  const auto m = parse_lane_map(two_lanes());
  ASSERT_EQ(m.lanes().size(), 2u);
  EXPECT_TRUE(m.are_adjacent("L1", "L2"));
  EXPECT_EQ(m.at("L2").control, LaneControl::kSignal);
  EXPECT_EQ(m.at("L2").line_type, LineType::kSolid);
}

TEST(LaneMap, DegenerateLane) {
  EXPECT_THROW(parse_lane_map(R"({"lanes":[{"id":"A","centerline":[[0,0]],"line_type":"solid","speed_class":"normal","adjacent":[],"control":null}]})"),
               ValidationError);
}

TEST(LaneMap, AsymmetricAdjacency) {
  try {
    parse_lane_map(R"({"lanes":[
      {"id":"A","centerline":[[0,0],[1,0]],"line_type":"solid","speed_class":"normal","adjacent":["B"],"control":null},
      {"id":"B","centerline":[[0,2],[1,2]],"line_type":"solid","speed_class":"normal","adjacent":[],"control":null}]})");
    FAIL();
  } catch (const ValidationError& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("A"), std::string::npos);
    EXPECT_NE(w.find("B"), std::string::npos);
  }
}

TEST(LaneMap, WriteParseRoundTrip) {
  const auto m = parse_lane_map(two_lanes());
  EXPECT_EQ(write_lane_map(parse_lane_map(write_lane_map(m))), write_lane_map(m));
}

TEST(MatchLane, OnCenterline) {
  const auto m = parse_lane_map(two_lanes());
  EXPECT_EQ(match_lane({50, 0}, m).value(), "L1");
}

TEST(MatchLane, TieGoesToSmallestId) {
  const auto m = parse_lane_map(two_lanes(true));
  EXPECT_EQ(match_lane({50, 1.0}, m).value(), "L1");
}

TEST(MatchLane, FarPointIsEmpty) {
  const auto m = parse_lane_map(two_lanes());
  EXPECT_FALSE(match_lane({50, 12}, m, 3.0).has_value());
}

TEST(MatchLane, InvariantUnderDeclarationOrder) {
  const auto a = parse_lane_map(two_lanes());
  const auto b = parse_lane_map(two_lanes(true));
  for (double y = -2.5; y <= 4.5; y += 0.25) EXPECT_EQ(match_lane({30, y}, a), match_lane({30, y}, b));
}

TEST(AssignLanes, SetsLaneIds) {
  const auto m = parse_lane_map(two_lanes());
  auto t = fx::straight_track("x", {0, 0.1}, {10, 0}, 5);
  assign_lanes(t, m);
  for (const auto& f : t.frames) EXPECT_EQ(f.lane_id.value(), "L1");
}
