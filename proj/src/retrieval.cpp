#include "scenforge/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>

namespace scenforge {

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

HashedTrigramEmbedder::HashedTrigramEmbedder(std::size_t dimension) : dim_(dimension) {
  if (dimension == 0) throw ConfigError("embedding dimension must be positive");
}

Embedding HashedTrigramEmbedder::embed(std::string_view text) const {
  const std::string norm = normalize_whitespace(text);
  if (norm.empty()) throw ArgumentError("cannot embed empty text");
  Embedding v(dim_, 0.0);
  if (norm.size() < 3) {
    v[fnv1a(norm) % dim_] += 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= norm.size(); ++i)
      v[fnv1a(std::string_view(norm).substr(i, 3)) % dim_] += 1.0;
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

Embedding embed(std::string_view text) {
  static const HashedTrigramEmbedder provider;
  return provider.embed(text);
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw ArgumentError("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

RetrievalIndex::RetrievalIndex(std::shared_ptr<const EmbeddingProvider> provider,
                               std::size_t k_default)
    : provider_(provider ? std::move(provider) : std::make_shared<HashedTrigramEmbedder>()),
      k_default_(k_default) {
  if (k_default == 0) throw ConfigError("k_default must be >= 1");
}

void RetrievalIndex::add(std::string key, std::string text,
                         std::map<std::string, std::string> metadata) {
  if (by_key_.count(key)) throw ValidationError("duplicate index key '" + key + "'");
  Embedding v = provider_->embed(text);
  if (v.size() != provider_->dimension()) throw ValidationError("embedding dimension mismatch");
  by_key_.emplace(key, entries_.size());
  entries_.push_back({std::move(key), std::move(text), std::move(v), std::move(metadata)});
}

std::vector<RankedEntry> RetrievalIndex::query(std::string_view text, std::size_t k) const {
  if (k == 0) throw ArgumentError("k must be >= 1");
  if (entries_.empty()) return {};
  const Embedding q = provider_->embed(text);
  std::vector<RankedEntry> ranked;
  ranked.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i)
    ranked.push_back({&entries_[i], i, cosine(q, entries_[i].vector)});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.similarity > b.similarity; });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

std::string RetrievalIndex::to_json() const {
  nlohmann::ordered_json j;
  j["dimension"] = dimension();
  j["k_default"] = k_default_;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json item;
    item["key"] = e.key;
    item["text"] = e.text;
    item["vector"] = e.vector;
    item["metadata"] = e.metadata;
    j["entries"].push_back(std::move(item));
  }
  return j.dump();
}

RetrievalIndex RetrievalIndex::from_json(std::string_view text,
                                         std::shared_ptr<const EmbeddingProvider> provider) {
  try {
    const auto j = nlohmann::json::parse(text);
    const std::size_t dim = j.at("dimension").get<std::size_t>();
    if (!provider) provider = std::make_shared<HashedTrigramEmbedder>(dim);
    if (provider->dimension() != dim) throw ValidationError("index dimension does not match provider");
    RetrievalIndex idx(provider, j.at("k_default").get<std::size_t>());
    for (const auto& item : j.at("entries")) {
      IndexEntry e;
      e.key = item.at("key").get<std::string>();
      e.text = item.at("text").get<std::string>();
      e.vector = item.at("vector").get<Embedding>();
      e.metadata = item.at("metadata").get<std::map<std::string, std::string>>();
      if (e.vector.size() != dim) throw ValidationError("vector of '" + e.key + "' has wrong dimension");
      if (idx.by_key_.count(e.key)) throw ValidationError("duplicate index key '" + e.key + "'");
      idx.by_key_.emplace(e.key, idx.entries_.size());
      idx.entries_.push_back(std::move(e));
    }
    return idx;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed index file: ") + e.what());
  }
}

RetrievalIndex build_code_index(const std::vector<Fragment>& fragments,
                                std::shared_ptr<const EmbeddingProvider> provider) {
  RetrievalIndex idx(std::move(provider));
  for (const auto& f : fragments) idx.add(f.key, f.text, {{"kind", "fragment"}});
  return idx;
}

std::vector<Fragment> standard_code_fragments() {
  return {
      {"geometry-template",
       "geometry section: map reference to a lane map file, ego_route list of lane ids, "
       "source dataset tag. geometry { map: \"two_lane\"; ego_route: [\"L1\"]; }"},
      {"spawn-template",
       "spawn vehicle declaration with role, lane placement or relative anchor placement. "
       "spawn { vehicle ego { role: ego; lane: \"L1\"; s: 10; speed: 8; } }"},
      {"spawn-relative",
       "relative spawn of an adversarial vehicle placed at an offset to the rear, front, left "
       "or right of an anchor vehicle: vehicle adv1 { role: adversarial; anchor: ego; "
       "relation: rear; offset: 0.5; }"},
      {"behavior-ego",
       "behavior schedule for the ego vehicle: go_straight, turn_left, turn_right, u_turn, "
       "follow, brake(decel=3), lane_change(direction=left), idle, policy"},
      {"behavior-adversarial",
       "adversarial behavior verbs: sudden_brake(decel=6, duration=2), tailgate(gap=0.5), "
       "cut_in(side=left), speeding(factor=1.3); chain actions with ->"},
  };
}

}  // namespace scenforge
