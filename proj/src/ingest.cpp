#include "scenforge/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

namespace scenforge {
namespace {

constexpr std::array<std::string_view, 11> kColumns = {
    "track_id", "frame_id", "timestamp_ms", "agent_type", "x",     "y",
    "vx",       "vy",       "psi_rad",      "length",     "width"};

enum Col { kTrack, kFrame, kTime, kType, kX, kY, kVx, kVy, kPsi, kLen, kWid };

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

// nullopt for empty / NaN cells; throws on anything else that is not a number.
std::optional<double> numeric_cell(const std::string& cell, std::size_t row,
                                   std::string_view column) {
  if (cell.empty()) return std::nullopt;
  std::string lower = to_lower(cell);
  if (lower == "nan" || lower == "-nan") return std::nullopt;
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw DataError("parse error at row " + std::to_string(row) +
                    ": non-numeric value '" + cell + "' in column " +
                    std::string(column));
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

AgentKind kind_from(std::string_view type) {
  std::string t = to_lower(type);
  if (t.find("pedestrian") != std::string::npos ||
      t.find("bicycle") != std::string::npos)
    return AgentKind::kPedestrian;
  return AgentKind::kVehicle;
}

}  // namespace

double Trajectory::frame_interval() const {
  if (frames.size() < 2) return 0.0;
  std::vector<double> gaps;
  gaps.reserve(frames.size() - 1);
  for (std::size_t i = 1; i < frames.size(); ++i)
    gaps.push_back(frames[i].timestamp - frames[i - 1].timestamp);
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

bool Trajectory::has_uniform_spacing(double tolerance) const {
  if (frames.size() < 2) return false;
  const double dt = frames[1].timestamp - frames[0].timestamp;
  for (std::size_t i = 2; i < frames.size(); ++i) {
    if (std::abs(frames[i].timestamp - frames[i - 1].timestamp - dt) > tolerance)
      return false;
  }
  return true;
}

std::vector<Vec2> Trajectory::path() const {
  std::vector<Vec2> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.position());
  return out;
}

TrackParseResult parse_tracks(std::string_view csv) {
  TrackParseResult result;
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t nl = csv.find('\n', pos);
    if (nl == std::string_view::npos) nl = csv.size();
    std::string_view line = csv.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  std::size_t header_row = 0;
  while (header_row < lines.size() && trim(lines[header_row]).empty())
    ++header_row;
  if (header_row == lines.size()) throw SchemaError("missing header row");

  const auto header = split_csv_line(lines[header_row]);
  std::array<std::size_t, kColumns.size()> index{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end())
      throw SchemaError("missing required column: " + std::string(kColumns[c]));
    index[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::unordered_map<std::string, std::size_t> slot;
  std::vector<Trajectory> agents;
  for (std::size_t li = header_row + 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::size_t row = li + 1;  // 1-based line number
    auto cells = split_csv_line(lines[li]);
    if (cells.size() < header.size()) cells.resize(header.size());
    auto num = [&](Col c) { return numeric_cell(cells[index[c]], row, kColumns[c]); };

    const std::string& track = cells[index[kTrack]];
    auto frame = num(kFrame);
    auto time = num(kTime);
    auto x = num(kX);
    auto y = num(kY);
    auto vx = num(kVx);
    auto vy = num(kVy);
    auto psi = num(kPsi);
    auto len = num(kLen);
    auto wid = num(kWid);
    const AgentKind kind = kind_from(cells[index[kType]]);

    if (track.empty() || !frame || !time || !x || !y || !vx || !vy) {
      ++result.dropped_rows;
      continue;
    }
    if (kind == AgentKind::kPedestrian) {
      // Pedestrian rows routinely omit yaw and extent.
      if (!psi) psi = std::atan2(*vy, *vx);
      if (!len || *len <= 0.0) len = 0.5;
      if (!wid || *wid <= 0.0) wid = 0.5;
    }
    if (!psi || !len || !wid || *len <= 0.0 || *wid <= 0.0) {
      ++result.dropped_rows;
      continue;
    }

    TrackFrame f;
    f.agent_id = track;
    f.frame_index = static_cast<long>(*frame);
    f.timestamp = std::llround(*time) / 1000.0;
    f.x = *x;
    f.y = *y;
    f.vx = *vx;
    f.vy = *vy;
    f.heading = wrap_angle(*psi);
    f.length = *len;
    f.width = *wid;

    auto [it, inserted] = slot.try_emplace(track, agents.size());
    if (inserted) {
      Trajectory t;
      t.agent_id = track;
      t.kind = kind;
      agents.push_back(std::move(t));
    }
    agents[it->second].frames.push_back(std::move(f));
  }

  for (auto& t : agents) {
    std::stable_sort(t.frames.begin(), t.frames.end(),
                     [](const TrackFrame& a, const TrackFrame& b) {
                       return a.timestamp < b.timestamp;
                     });
    auto last = std::unique(t.frames.begin(), t.frames.end(),
                            [](const TrackFrame& a, const TrackFrame& b) {
                              return a.timestamp == b.timestamp;
                            });
    result.dropped_rows += static_cast<std::size_t>(t.frames.end() - last);
    t.frames.erase(last, t.frames.end());
    if (t.frames.size() < 2) {
      ++result.dropped_agents;
      continue;
    }
    result.trajectories.push_back(std::move(t));
  }
  return result;
}

std::string write_tracks(std::span<const Trajectory> trajectories,
                         std::string_view provenance) {
  std::ostringstream out;
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    if (c) out << ',';
    out << kColumns[c];
  }
  if (!provenance.empty()) out << ",provenance";
  out << '\n';
  for (const auto& t : trajectories) {
    const char* type = t.kind == AgentKind::kPedestrian ? "pedestrian/bicycle" : "car";
    for (const auto& f : t.frames) {
      out << t.agent_id << ',' << f.frame_index << ','
          << std::llround(f.timestamp * 1000.0) << ',' << type << ','
          << format_number(f.x) << ',' << format_number(f.y) << ','
          << format_number(f.vx) << ',' << format_number(f.vy) << ','
          << format_number(f.heading) << ',' << format_number(f.length) << ','
          << format_number(f.width);
      if (!provenance.empty()) out << ',' << provenance;
      out << '\n';
    }
  }
  return out.str();
}

LaneMap::LaneMap(std::vector<Lane> lanes) : lanes_(std::move(lanes)) {
  std::sort(lanes_.begin(), lanes_.end(),
            [](const Lane& a, const Lane& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < lanes_.size(); ++i) {
    if (lanes_[i].id == lanes_[i - 1].id)
      throw ValidationError("duplicate lane id: " + lanes_[i].id);
  }
  for (auto& lane : lanes_) {
    if (lane.centerline.size() < 2)
      throw ValidationError("degenerate lane " + lane.id +
                            ": centerline needs at least 2 points");
    for (std::size_t i = 1; i < lane.centerline.size(); ++i) {
      if (lane.centerline[i] == lane.centerline[i - 1])
        throw ValidationError("degenerate lane " + lane.id +
                              ": repeated consecutive centerline point");
    }
    std::sort(lane.adjacent.begin(), lane.adjacent.end());
    lane.adjacent.erase(std::unique(lane.adjacent.begin(), lane.adjacent.end()),
                        lane.adjacent.end());
  }
  for (const auto& lane : lanes_) {
    for (const auto& other : lane.adjacent) {
      const Lane* o = find(other);
      if (!o)
        throw ValidationError("lane " + lane.id + " lists unknown adjacent lane " + other);
      if (!std::binary_search(o->adjacent.begin(), o->adjacent.end(), lane.id))
        throw ValidationError("asymmetric adjacency: " + lane.id + " -> " + other +
                              " without " + other + " -> " + lane.id);
    }
  }
}

const Lane* LaneMap::find(std::string_view id) const {
  auto it = std::lower_bound(lanes_.begin(), lanes_.end(), id,
                             [](const Lane& l, std::string_view k) { return l.id < k; });
  if (it == lanes_.end() || it->id != id) return nullptr;
  return &*it;
}

const Lane& LaneMap::at(std::string_view id) const {
  const Lane* l = find(id);
  if (!l) throw LookupError("unknown lane id: " + std::string(id));
  return *l;
}

std::optional<std::size_t> LaneMap::index_of(std::string_view id) const {
  const Lane* l = find(id);
  if (!l) return std::nullopt;
  return static_cast<std::size_t>(l - lanes_.data());
}

bool LaneMap::are_adjacent(std::string_view a, std::string_view b) const {
  const Lane* l = find(a);
  if (!l) return false;
  return std::binary_search(l->adjacent.begin(), l->adjacent.end(), b);
}

LaneMap parse_lane_map(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("lane map is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("lanes") || !doc["lanes"].is_array())
    throw SchemaError("lane map requires a top-level \"lanes\" array");
  std::vector<Lane> lanes;
  for (const auto& jl : doc["lanes"]) {
    try {
      Lane lane;
      lane.id = jl.at("id").get<std::string>();
      for (const auto& p : jl.at("centerline")) {
        if (!p.is_array() || p.size() != 2)
          throw SchemaError("lane " + lane.id + ": centerline points must be [x,y]");
        lane.centerline.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      const std::string lt = jl.value("line_type", "solid");
      if (lt == "solid") lane.line_type = LineType::kSolid;
      else if (lt == "dashed") lane.line_type = LineType::kDashed;
      else throw SchemaError("lane " + lane.id + ": bad line_type " + lt);
      const std::string sc = jl.value("speed_class", "normal");
      if (sc == "normal") lane.speed_class = SpeedClass::kNormal;
      else if (sc == "slow") lane.speed_class = SpeedClass::kSlow;
      else throw SchemaError("lane " + lane.id + ": bad speed_class " + sc);
      if (jl.contains("adjacent"))
        lane.adjacent = jl["adjacent"].get<std::vector<std::string>>();
      if (jl.contains("control") && !jl["control"].is_null()) {
        const std::string c = jl["control"].get<std::string>();
        if (c == "closure") lane.control = LaneControl::kClosure;
        else if (c == "signal") lane.control = LaneControl::kSignal;
        else throw SchemaError("lane " + lane.id + ": bad control " + c);
      }
      lanes.push_back(std::move(lane));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("malformed lane entry: ") + e.what());
    }
  }
  return LaneMap(std::move(lanes));
}

std::string write_lane_map(const LaneMap& map) {
  nlohmann::ordered_json doc;
  doc["lanes"] = nlohmann::ordered_json::array();
  for (const auto& l : map.lanes()) {
    nlohmann::ordered_json jl;
    jl["id"] = l.id;
    jl["centerline"] = nlohmann::ordered_json::array();
    for (auto p : l.centerline) jl["centerline"].push_back({p.x, p.y});
    jl["line_type"] = l.line_type == LineType::kDashed ? "dashed" : "solid";
    jl["speed_class"] = l.speed_class == SpeedClass::kSlow ? "slow" : "normal";
    jl["adjacent"] = l.adjacent;
    switch (l.control) {
      case LaneControl::kNone: jl["control"] = nullptr; break;
      case LaneControl::kClosure: jl["control"] = "closure"; break;
      case LaneControl::kSignal: jl["control"] = "signal"; break;
    }
    doc["lanes"].push_back(std::move(jl));
  }
  return doc.dump(2);
}

PolylinePoint closest_point(std::span<const Vec2> polyline, Vec2 p) {
  PolylinePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  double arc = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Vec2 a = polyline[i];
    const Vec2 d = polyline[i + 1] - a;
    const double len2 = d.dot(d);
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    const Vec2 foot = a + d * t;
    const double dist = (p - foot).norm();
    const double seg_len = std::sqrt(len2);
    if (dist < best.distance) {
      best.distance = dist;
      best.arc = arc + t * seg_len;
      best.foot = foot;
      best.segment = i;
    }
    arc += seg_len;
  }
  return best;
}

std::optional<std::string> match_lane(Vec2 point, const LaneMap& map,
                                      double max_lateral) {
  constexpr double kTieTolerance = 1e-9;
  std::optional<std::string> best;
  double best_dist = std::numeric_limits<double>::infinity();
  // Lanes are sorted by id, so strict improvement keeps the smallest id on ties.
  for (const auto& lane : map.lanes()) {
    const double d = closest_point(lane.centerline, point).distance;
    if (d <= max_lateral && d < best_dist - kTieTolerance) {
      best_dist = d;
      best = lane.id;
    }
  }
  return best;
}

void assign_lanes(Trajectory& trajectory, const LaneMap& map, double max_lateral) {
  for (auto& f : trajectory.frames) f.lane_id = match_lane(f.position(), map, max_lateral);
}

}  // namespace scenforge
