#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "scenforge/common.hpp"

namespace scenforge {

using Embedding = std::vector<double>;

inline constexpr std::size_t kDefaultEmbeddingDim = 256;
inline constexpr std::size_t kDefaultTopK = 4;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Hashed character 3-gram counts over lower-cased, whitespace-collapsed
/// text, L2-normalised.
class HashedTrigramEmbedder : public EmbeddingProvider {
 public:
  explicit HashedTrigramEmbedder(std::size_t dimension = kDefaultEmbeddingDim);
  std::size_t dimension() const override { return dim_; }
  Embedding embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

Embedding embed(std::string_view text);
double cosine(const Embedding& a, const Embedding& b);
std::string normalize_whitespace(std::string_view text);

struct IndexEntry {
  std::string key;
  std::string text;
  Embedding vector;
  std::map<std::string, std::string> metadata;
};

struct RankedEntry {
  const IndexEntry* entry = nullptr;
  std::size_t position = 0;  // insertion order
  double similarity = 0.0;
};

class RetrievalIndex {
 public:
  explicit RetrievalIndex(std::shared_ptr<const EmbeddingProvider> provider = nullptr,
                          std::size_t k_default = kDefaultTopK);

  void add(std::string key, std::string text, std::map<std::string, std::string> metadata = {});
  std::vector<RankedEntry> query(std::string_view text, std::size_t k) const;
  std::vector<RankedEntry> query(std::string_view text) const { return query(text, k_default_); }

  std::size_t size() const { return entries_.size(); }
  std::size_t dimension() const { return provider_->dimension(); }
  std::size_t k_default() const { return k_default_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  std::string to_json() const;
  static RetrievalIndex from_json(std::string_view text,
                                  std::shared_ptr<const EmbeddingProvider> provider = nullptr);

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
  std::size_t k_default_;
  std::vector<IndexEntry> entries_;
  std::map<std::string, std::size_t> by_key_;
};

struct Fragment {
  std::string key;
  std::string text;
};

RetrievalIndex build_code_index(const std::vector<Fragment>& fragments,
                                std::shared_ptr<const EmbeddingProvider> provider = nullptr);

/// Templates for each DSL construct, used as compile-time context.
std::vector<Fragment> standard_code_fragments();

}  // namespace scenforge
