#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "scenforge/safety_metrics.hpp"

using namespace scenforge;

namespace {

TrackFrame frame_at(double x, double y, double vx, double vy) {
  TrackFrame f;
  f.x = x;
  f.y = y;
  f.vx = vx;
  f.vy = vy;
  f.heading = std::atan2(vy, vx);
  return f;
}

// Steps both vehicles forward with a tiny step until the bumper gap closes.
double integrate_contact(double gap, double v_follow, double v_lead) {
  const double h = 1e-5;
  double t = 0.0;
  while (gap > 0.0 && t < 1e4) {
    gap -= (v_follow - v_lead) * h;
    t += h;
  }
  return t;
}

}  // namespace

TEST(Ttc, GapOverClosingSpeed) {
  const auto f = frame_at(0, 0, 10, 0);
  const auto l = frame_at(24.5, 0, 5, 0);
  const auto v = ttc(f, l, 20.0);
  ASSERT_TRUE(v);
  EXPECT_DOUBLE_EQ(*v, 4.0);
  EXPECT_NEAR(*v, integrate_contact(20.0, 10.0, 5.0), 1e-4);
}

TEST(Ttc, EqualSpeedsEmpty) { EXPECT_FALSE(ttc(frame_at(0, 0, 8, 0), frame_at(10, 0, 8, 0), 5.5)); }

TEST(Ttc, ZeroGapIsZero) { EXPECT_EQ(ttc(frame_at(0, 0, 8, 0), frame_at(4.5, 0, 8, 0), 0.0).value(), 0.0); }

TEST(Ttc, ScaleConsistent) {
  const auto a = ttc(frame_at(0, 0, 9, 0), frame_at(0, 0, 6, 0), 12.0);
  const auto b = ttc(frame_at(0, 0, 12, 0), frame_at(0, 0, 6, 0), 24.0);
  EXPECT_DOUBLE_EQ(*a, *b);
}

TEST(BumperGap, CenterDistanceMinusHalfLengths) {
  EXPECT_DOUBLE_EQ(bumper_gap(frame_at(0, 0, 1, 0), frame_at(10, 0, 1, 0)), 5.5);
}

TEST(ConflictPoint, PerpendicularCrossing) {
  const std::vector<Vec2> a = {{0, 5}, {10, 5}};
  const std::vector<Vec2> b = {{5, 0}, {5, 10}};
  const auto cp = find_conflict_point(a, b);
  ASSERT_TRUE(cp);
  EXPECT_NEAR(cp->position.x, 5.0, 1e-12);
  EXPECT_NEAR(cp->position.y, 5.0, 1e-12);
  EXPECT_NEAR(cp->arc_a, 5.0, 1e-12);
  EXPECT_NEAR(cp->arc_b, 5.0, 1e-12);
}

TEST(ConflictPoint, ParallelDisjoint) {
  const std::vector<Vec2> a = {{0, 0}, {10, 0}};
  const std::vector<Vec2> b = {{0, 3}, {10, 3}};
  EXPECT_FALSE(find_conflict_point(a, b));
}

TEST(ConflictPoint, SharedEndpoint) {
  const std::vector<Vec2> a = {{0, 0}, {4, 4}};
  const std::vector<Vec2> b = {{4, 4}, {8, 0}};
  const auto cp = find_conflict_point(a, b);
  ASSERT_TRUE(cp);
  EXPECT_NEAR(cp->position.x, 4.0, 1e-12);
  EXPECT_NEAR(cp->position.y, 4.0, 1e-12);
}

TEST(ConflictPoint, FirstAlongA) {
  const std::vector<Vec2> a = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  const std::vector<Vec2> b = {{5, -5}, {5, 15}};
  const auto cp = find_conflict_point(a, b);
  ASSERT_TRUE(cp);
  EXPECT_NEAR(cp->position.y, 0.0, 1e-12);
}

TEST(Pet, LeaveAndEnter) {
  // A passes the origin heading +x and leaves the disk at t=3.0; B heading
  // +y enters it at t=4.5.
  auto a = fx::straight_track("a", {-2, 0}, {1, 0}, 200);
  auto b = fx::straight_track("b", {0, -5.5}, {0, 1}, 200);
  const ConflictPoint cp{{0, 0}, 2, 5.5};
  const auto p = pet(a, b, cp, 1.05);
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->value, 1.5, 1e-9);
  EXPECT_FALSE(p->overlap);
  const auto q = pet(b, a, cp, 1.05);
  EXPECT_NEAR(q->value, p->value, 1e-12);
}

TEST(Pet, SimultaneousOverlap) {
  auto a = fx::straight_track("a", {-3, 0}, {1, 0}, 100);
  auto b = fx::straight_track("b", {0, -3}, {0, 1}, 100);
  const auto p = pet(a, b, {{0, 0}, 3, 3}, 1.0);
  ASSERT_TRUE(p);
  EXPECT_EQ(p->value, 0.0);
  EXPECT_TRUE(p->overlap);
}

TEST(Pet, NeverOccupied) {
  auto a = fx::straight_track("a", {-3, 0}, {1, 0}, 100);
  auto b = fx::straight_track("b", {20, -3}, {0, 1}, 100);
  EXPECT_FALSE(pet(a, b, {{0, 0}, 3, 3}, 1.0));
}

TEST(YawChange, ConstantHeading) {
  EXPECT_EQ(yaw_change(fx::straight_track("a", {0, 0}, {3, 1}, 30)), 0.0);
}

TEST(YawChange, QuarterAndHalfCircle) {
  EXPECT_NEAR(yaw_change(fx::arc_track("q", 10, kPi / 2, 60)), kPi / 2, 1e-9);
  EXPECT_NEAR(yaw_change(fx::arc_track("u", 10, kPi, 90)), kPi, 1e-9);
  EXPECT_NEAR(yaw_change(fx::arc_track("r", 10, -kPi / 2, 60)), -kPi / 2, 1e-9);
}

TEST(YawChange, AdditiveOverSegments) {
  const auto t = fx::arc_track("a", 8, 1.3 * kPi, 101);
  std::span<const TrackFrame> all(t.frames);
  EXPECT_NEAR(yaw_change(all), yaw_change(all.subspan(0, 41)) + yaw_change(all.subspan(40)), 1e-12);
}
