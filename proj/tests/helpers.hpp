#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "scenforge/ingest.hpp"

namespace scenforge::fx {

inline std::string fixture(const std::string& rel) { return std::string(SCENFORGE_FIXTURES) + "/" + rel; }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("scenforge_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Constant-velocity straight track sampled at dt.
inline Trajectory straight_track(const std::string& id, Vec2 start, Vec2 velocity, int frames, double dt = 0.1,
                                 double t0 = 0.0) {
  Trajectory t;
  t.agent_id = id;
  for (int i = 0; i < frames; ++i) {
    TrackFrame f;
    f.agent_id = id;
    f.frame_index = i;
    f.timestamp = t0 + i * dt;
    f.x = start.x + velocity.x * i * dt;
    f.y = start.y + velocity.y * i * dt;
    f.vx = velocity.x;
    f.vy = velocity.y;
    f.heading = std::atan2(velocity.y, velocity.x);
    t.frames.push_back(f);
  }
  return t;
}

// Track along a circular arc of `sweep` radians (positive = left turn),
// starting at the origin heading +x.
inline Trajectory arc_track(const std::string& id, double radius, double sweep, int frames, double speed = 5.0) {
  Trajectory t;
  t.agent_id = id;
  const double dt = std::abs(sweep) * radius / speed / (frames - 1);
  const double sign = sweep >= 0 ? 1.0 : -1.0;
  for (int i = 0; i < frames; ++i) {
    const double a = sweep * i / (frames - 1);
    TrackFrame f;
    f.agent_id = id;
    f.frame_index = i;
    f.timestamp = i * dt;
    f.x = radius * std::sin(std::abs(a));
    f.y = sign * radius * (1.0 - std::cos(a));
    f.heading = wrap_angle(a);
    f.vx = speed * std::cos(a);
    f.vy = speed * std::sin(a);
    t.frames.push_back(f);
  }
  return t;
}

}  // namespace scenforge::fx
