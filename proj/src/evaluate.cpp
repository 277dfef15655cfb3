#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "scenforge/evalloop.hpp"
#include "scenforge/safety_metrics.hpp"

namespace scenforge {

Histogram::Histogram(std::vector<double> e) : edges(std::move(e)) {
  if (edges.size() == 1) throw ArgumentError("histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ArgumentError("histogram edges must increase");
  counts.assign(edges.empty() ? 0 : edges.size() - 1, 0);
}

void Histogram::add(std::optional<double> value) {
  if (!value) {
    ++missing;
    return;
  }
  samples.push_back(*value);
  if (counts.empty()) return;
  const auto it = std::upper_bound(edges.begin(), edges.end(), *value);
  std::size_t bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
  ++counts[std::min(bin, counts.size() - 1)];
}

std::optional<double> Histogram::mean() const {
  if (samples.empty()) return std::nullopt;
  return std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
}

std::vector<Trajectory> log_trajectories(const EpisodeLog& log, double dt) {
  std::vector<Trajectory> out(log.vehicles.size());
  for (std::size_t i = 0; i < log.vehicles.size(); ++i) {
    out[i].agent_id = log.vehicles[i].id;
    for (std::size_t t = 0; t < log.frames.size(); ++t) {
      const auto& f = log.frames[t].at(i);
      TrackFrame tf;
      tf.agent_id = log.vehicles[i].id;
      tf.frame_index = static_cast<long>(t);
      tf.timestamp = static_cast<double>(t) * dt;
      tf.x = f.x;
      tf.y = f.y;
      tf.vx = f.speed * std::cos(f.heading);
      tf.vy = f.speed * std::sin(f.heading);
      tf.heading = f.heading;
      tf.length = log.vehicles[i].length;
      tf.width = log.vehicles[i].width;
      out[i].frames.push_back(std::move(tf));
    }
  }
  return out;
}

EpisodeMetrics episode_metrics(const EpisodeLog& log, const ScenarioProgram& program) {
  EpisodeMetrics m;
  m.collision = log.termination == Termination::kCollision;
  const auto tracks = log_trajectories(log, program.params.dt);
  const std::size_t e = program.ego;
  if (e >= tracks.size()) return m;
  const auto& ego = tracks[e];
  for (std::size_t t = 0; t < ego.frames.size(); ++t) {
    const auto& a = ego.frames[t];
    const Vec2 h{std::cos(a.heading), std::sin(a.heading)};
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      if (j == e) continue;
      const auto& b = tracks[j].frames[t];
      const Vec2 rel = b.position() - a.position();
      if (rel.dot(h) <= 0.0 || std::abs(h.cross(rel)) > (a.width + b.width) / 2.0 + 0.3) continue;
      if (auto v = ttc(a, b, std::max(0.0, bumper_gap(a, b)))) m.min_ttc = std::min(m.min_ttc.value_or(*v), *v);
    }
  }
  const auto ego_path = ego.path();
  for (std::size_t j = 0; j < tracks.size(); ++j) {
    if (j == e) continue;
    const auto other = tracks[j].path();
    if (auto cp = find_conflict_point(ego_path, other))
      if (auto p = pet(ego, tracks[j], *cp)) m.min_pet = std::min(m.min_pet.value_or(p->value), p->value);
  }
  return m;
}

std::string_view to_string(Phase p) { return p == Phase::kI ? "I" : "II"; }

double BehaviorRow::collision_rate() const {
  return episodes == 0 ? 0.0 : static_cast<double>(collisions) / static_cast<double>(episodes);
}

BehaviorRow BatchReport::overall() const {
  BehaviorRow all;
  all.label = "all";
  for (const auto& r : rows) {
    all.episodes += r.episodes;
    all.collisions += r.collisions;
    all.timeouts += r.timeouts;
    all.goals += r.goals;
  }
  return all;
}

std::string BatchReport::to_csv() const {
  std::ostringstream out;
  out << "phase,label,episodes,collisions,timeouts,goals,collision_rate\n";
  for (const auto& r : rows)
    out << to_string(phase) << ',' << r.label << ',' << r.episodes << ',' << r.collisions << ','
        << r.timeouts << ',' << r.goals << ',' << format_number(r.collision_rate()) << '\n';
  return out.str();
}

namespace {

nlohmann::ordered_json histogram_json(const Histogram& h) {
  nlohmann::ordered_json j;
  j["edges"] = h.edges;
  j["counts"] = h.counts;
  j["missing"] = h.missing;
  j["mean"] = h.mean() ? nlohmann::ordered_json(*h.mean()) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json row_json(const BehaviorRow& r) {
  return {{"label", r.label},         {"episodes", r.episodes}, {"collisions", r.collisions},
          {"timeouts", r.timeouts},   {"goals", r.goals},       {"collision_rate", r.collision_rate()}};
}

}  // namespace

std::string BatchReport::to_json() const {
  nlohmann::ordered_json j;
  j["phase"] = to_string(phase);
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(row_json(r));
  j["overall"] = row_json(overall());
  j["ttc"] = histogram_json(ttc);
  j["pet"] = histogram_json(pet);
  return j.dump(2);
}

BatchReport report_from_logs(const std::vector<LabeledLog>& logs, Phase phase, const HistogramBins& bins) {
  BatchReport report;
  report.phase = phase;
  report.ttc = Histogram(bins.ttc);
  report.pet = Histogram(bins.pet);
  for (const auto& l : logs) {
    auto row = std::find_if(report.rows.begin(), report.rows.end(), [&](const auto& r) { return r.label == l.label; });
    if (row == report.rows.end()) {
      report.rows.push_back({l.label});
      row = report.rows.end() - 1;
    }
    ++row->episodes;
    if (l.log.termination == Termination::kCollision) ++row->collisions;
    if (l.log.termination == Termination::kTimeout) ++row->timeouts;
    if (l.log.termination == Termination::kGoal) ++row->goals;
    if (l.program) {
      const auto m = episode_metrics(l.log, *l.program);
      report.ttc.add(m.min_ttc);
      report.pet.add(m.min_pet);
    }
  }
  return report;
}

BatchReport evaluate_batch(const std::vector<LabeledProgram>& programs, const PolicyMap& policies,
                           std::size_t episodes, const std::vector<std::uint64_t>& seeds, Phase phase,
                           std::size_t workers, const HistogramBins& bins) {
  if (episodes < 1) throw ArgumentError("evaluation needs at least one episode");
  if (seeds.empty()) throw ArgumentError("evaluation needs at least one seed");
  std::vector<LabeledLog> logs;
  for (std::uint64_t seed : seeds)
    for (std::size_t p = 0; p < programs.size(); ++p)
      for (auto& log : run_episodes(*programs[p].program, policies, derive_seed(seed, p), episodes, workers))
        logs.push_back({programs[p].label, programs[p].program, std::move(log)});
  return report_from_logs(logs, phase, bins);
}

std::vector<MetricComparison> compare_distributions(const BatchReport& a, const BatchReport& b) {
  std::vector<MetricComparison> out;
  auto compare = [&](const char* name, const Histogram& ha, const Histogram& hb) {
    if (ha.edges != hb.edges) throw ArgumentError(std::string("histogram bins differ for ") + name);
    MetricComparison c;
    c.metric = name;
    c.edges = ha.edges;
    c.counts_a = ha.counts;
    c.counts_b = hb.counts;
    c.mean_a = ha.mean();
    c.mean_b = hb.mean();
    if (c.mean_a && c.mean_b) c.mean_difference = *c.mean_b - *c.mean_a;
    c.empty = ha.empty() || hb.empty();
    out.push_back(std::move(c));
  };
  compare("min_ttc", a.ttc, b.ttc);
  compare("min_pet", a.pet, b.pet);
  return out;
}

std::string comparison_to_csv(const std::vector<MetricComparison>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::ostringstream out;
  out << "metric,bin_lo,bin_hi,count_a,count_b,mean_a,mean_b,mean_difference,empty\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.counts_a.size(); ++i)
      out << r.metric << ',' << format_number(r.edges[i]) << ',' << format_number(r.edges[i + 1]) << ','
          << r.counts_a[i] << ',' << r.counts_b[i] << ',' << opt(r.mean_a) << ',' << opt(r.mean_b) << ','
          << opt(r.mean_difference) << ',' << (r.empty ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace scenforge
