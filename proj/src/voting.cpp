#include <algorithm>

#include "scenforge/genpipe.hpp"

namespace scenforge {

namespace {

std::vector<Embedding> embed_all(const std::vector<std::string>& texts, const EmbeddingProvider* provider) {
  static const HashedTrigramEmbedder fallback;
  const EmbeddingProvider& p = provider ? *provider : fallback;
  std::vector<Embedding> out;
  for (const auto& t : texts) out.push_back(p.embed(t));
  return out;
}

// mean cosine of member `i` to the other members, for each member
std::vector<double> mean_similarity(const std::vector<Embedding>& e, const std::vector<std::size_t>& members) {
  std::vector<double> mean(members.size(), 1.0);
  if (members.size() < 2) return mean;
  for (std::size_t a = 0; a < members.size(); ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < members.size(); ++b)
      if (a != b) sum += cosine(e[members[a]], e[members[b]]);
    mean[a] = sum / static_cast<double>(members.size() - 1);
  }
  return mean;
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best] + 1e-12) best = i;
  return best;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    out.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) return out;
    start = dot + 1;
  }
}

dsl::VehicleRole role_from(const std::string& text) {
  if (text == "ego") return dsl::VehicleRole::kEgo;
  if (text == "adversarial") return dsl::VehicleRole::kAdversarial;
  return dsl::VehicleRole::kBackground;
}

void apply_path(dsl::DslDocument& doc, const std::string& path, const dsl::Value& v) {
  const auto parts = split_path(path);
  if (parts[0] == "name") {
    doc.name = v.text;
  } else if (parts[0] == "geometry") {
    doc.geometry[parts[1]] = v;
  } else if (parts[0] == "spawn") {
    auto it = std::find_if(doc.spawn.begin(), doc.spawn.end(), [&](const auto& d) { return d.id == parts[1]; });
    if (it == doc.spawn.end()) return;
    const std::string& field = parts[2];
    auto* abs = std::get_if<dsl::AbsolutePlacement>(&it->placement);
    auto* rel = std::get_if<dsl::RelativePlacement>(&it->placement);
    if (field == "role") it->role = role_from(v.text);
    else if (field == "speed") it->speed = v.number;
    else if (field == "length") it->length = v.number;
    else if (field == "width") it->width = v.number;
    else if (field == "extras") it->extras[parts[3]] = v;
    else if (abs && field == "lane") abs->lane = v.text;
    else if (abs && field == "s") abs->arc_s = v.number;
    else if (rel && field == "anchor") rel->anchor = v.text;
    else if (rel && field == "relation") rel->relation = dsl::parse_relation(v.text).value_or(rel->relation);
    else if (rel && field == "offset") rel->offset = v.number;
  } else if (parts[0] == "behavior") {
    auto it = std::find_if(doc.behavior.begin(), doc.behavior.end(),
                           [&](const auto& s) { return s.target == parts[1]; });
    if (it == doc.behavior.end()) return;
    const std::size_t i = std::stoul(parts[2]);
    if (i >= it->actions.size()) return;
    auto& action = it->actions[i];
    if (parts[3] == "verb") action.verb = v.text;
    else if (parts[3] == "duration") action.duration = v.number;
    else if (parts[3] == "args") action.args[parts[4]] = v;
  }
}

}  // namespace

std::size_t vote_embedding(const std::vector<std::string>& candidates, const EmbeddingProvider* provider) {
  if (candidates.empty()) throw ArgumentError("voting needs at least one candidate");
  std::vector<std::size_t> all(candidates.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return argmax_first(mean_similarity(embed_all(candidates, provider), all));
}

std::map<std::string, dsl::Value> flatten_document(const dsl::DslDocument& doc) {
  using dsl::Value;
  std::map<std::string, Value> out;
  out["name"] = Value::str(doc.name);
  for (const auto& [k, v] : doc.geometry) out["geometry." + k] = v;
  for (const auto& d : doc.spawn) {
    const std::string p = "spawn." + d.id + ".";
    out[p + "role"] = Value::ident(std::string(dsl::to_string(d.role)));
    if (const auto* abs = std::get_if<dsl::AbsolutePlacement>(&d.placement)) {
      out[p + "lane"] = Value::str(abs->lane);
      out[p + "s"] = Value::num(abs->arc_s);
    } else {
      const auto& rel = std::get<dsl::RelativePlacement>(d.placement);
      out[p + "anchor"] = Value::ident(rel.anchor);
      out[p + "relation"] = Value::ident(std::string(dsl::to_string(rel.relation)));
      out[p + "offset"] = Value::num(rel.offset);
    }
    out[p + "speed"] = Value::num(d.speed);
    if (d.length) out[p + "length"] = Value::num(*d.length);
    if (d.width) out[p + "width"] = Value::num(*d.width);
    for (const auto& [k, v] : d.extras) out[p + "extras." + k] = v;
  }
  for (const auto& s : doc.behavior) {
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
      const auto& a = s.actions[i];
      const std::string p = "behavior." + s.target + "." + std::to_string(i) + ".";
      out[p + "verb"] = Value::ident(a.verb);
      for (const auto& [k, v] : a.args) out[p + "args." + k] = v;
      if (a.duration) out[p + "duration"] = Value::num(*a.duration);
    }
  }
  return out;
}

double jaccard(const std::map<std::string, dsl::Value>& a, const std::map<std::string, dsl::Value>& b) {
  std::size_t common = 0;
  for (const auto& [k, v] : a) common += b.count(k);
  const std::size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(uni);
}

VoteReport vote_structured(const std::vector<std::string>& candidates, double theta,
                           const EmbeddingProvider* provider) {
  if (candidates.empty()) throw ArgumentError("voting needs at least one candidate");
  VoteReport report;
  std::vector<std::size_t> ok;
  std::vector<dsl::DslDocument> docs(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    try {
      docs[i] = dsl::parse_dsl(candidates[i]);
      ok.push_back(i);
    } catch (const dsl::DslError& e) {
      report.discarded.push_back("candidate " + std::to_string(i) + ": " + e.what());
    }
  }
  if (ok.empty()) {
    std::string msg = "no parseable candidate among " + std::to_string(candidates.size());
    for (const auto& d : report.discarded) msg += "; " + d;
    throw GenerationError(msg);
  }

  std::vector<std::map<std::string, dsl::Value>> fields(candidates.size());
  for (std::size_t i : ok) fields[i] = flatten_document(docs[i]);

  // greedy clustering against each cluster's first member
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i : ok) {
    auto it = std::find_if(clusters.begin(), clusters.end(),
                           [&](const auto& c) { return jaccard(fields[c.front()], fields[i]) >= theta; });
    if (it == clusters.end()) clusters.push_back({i});
    else it->push_back(i);
  }
  const auto largest = std::max_element(clusters.begin(), clusters.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
  report.cluster = *largest;

  const auto emb = embed_all(candidates, provider);
  report.central = report.cluster[argmax_first(mean_similarity(emb, report.cluster))];

  dsl::DslDocument merged = docs[report.central];
  for (const auto& [path, central_value] : fields[report.central]) {
    std::vector<std::pair<dsl::Value, int>> counts;
    for (std::size_t m : report.cluster) {
      auto f = fields[m].find(path);
      if (f == fields[m].end()) continue;
      auto c = std::find_if(counts.begin(), counts.end(), [&](const auto& p) { return p.first == f->second; });
      if (c == counts.end()) counts.emplace_back(f->second, 1);
      else ++c->second;
    }
    int top = 0;
    for (const auto& [v, n] : counts) top = std::max(top, n);
    const dsl::Value* pick = nullptr;
    for (const auto& [v, n] : counts)
      if (n == top && v == central_value) pick = &v;
    if (!pick)
      for (const auto& [v, n] : counts)
        if (n == top && !pick) pick = &v;
    if (pick && !(*pick == central_value)) apply_path(merged, path, *pick);
  }
  report.document = std::move(merged);

  std::vector<std::size_t> all(candidates.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto means = mean_similarity(emb, all);
  report.centrality = means[report.central];
  return report;
}

std::string_view to_string(VotingMode m) {
  return m == VotingMode::kEmbedding ? "embedding" : "structured";
}

VotingMode parse_voting_mode(std::string_view text) {
  if (text == "embedding") return VotingMode::kEmbedding;
  if (text == "structured") return VotingMode::kStructured;
  throw ConfigError("unknown voting mode '" + std::string(text) + "'");
}

VoteReport vote(const std::vector<std::string>& candidates, VotingMode mode, double theta,
                const EmbeddingProvider* provider) {
  if (mode == VotingMode::kStructured) return vote_structured(candidates, theta, provider);
  VoteReport report;
  std::vector<std::string> texts;
  std::vector<std::size_t> index;
  std::vector<dsl::DslDocument> docs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    try {
      docs.push_back(dsl::parse_dsl(candidates[i]));
      texts.push_back(candidates[i]);
      index.push_back(i);
    } catch (const dsl::DslError& e) {
      report.discarded.push_back("candidate " + std::to_string(i) + ": " + e.what());
    }
  }
  if (texts.empty()) {
    std::string msg = "no parseable candidate among " + std::to_string(candidates.size());
    for (const auto& d : report.discarded) msg += "; " + d;
    throw GenerationError(msg);
  }
  const std::size_t w = vote_embedding(texts, provider);
  report.central = index[w];
  report.cluster = index;
  report.document = docs[w];
  const auto emb = embed_all(candidates, provider);
  std::vector<std::size_t> all(candidates.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  report.centrality = mean_similarity(emb, all)[report.central];
  return report;
}

}  // namespace scenforge
