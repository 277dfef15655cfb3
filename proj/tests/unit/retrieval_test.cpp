#include <gtest/gtest.h>

#include <map>
#include <random>

#include "scenforge/retrieval.hpp"

using namespace scenforge;

namespace {

// Brute-force shared 3-gram count between two normalized strings.
int shared_trigrams(const std::string& a, const std::string& b) {
  std::map<std::string, int> ca, cb;
  for (std::size_t i = 0; i + 3 <= a.size(); ++i) ++ca[a.substr(i, 3)];
  for (std::size_t i = 0; i + 3 <= b.size(); ++i) ++cb[b.substr(i, 3)];
  int shared = 0;
  for (const auto& [g, n] : ca)
    if (auto it = cb.find(g); it != cb.end()) shared += std::min(n, it->second);
  return shared;
}

class Constant : public EmbeddingProvider {
 public:
  std::size_t dimension() const override { return 2; }
  Embedding embed(std::string_view) const override { return {1.0, 0.0}; }
};

}  // namespace

TEST(Embed, DeterministicAndNormalized) {
  const auto a = embed("abc");
  EXPECT_EQ(a, embed("abc"));
  double n = 0.0;
  for (double x : embed("a longer sentence about braking")) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-9);
  EXPECT_NEAR(cosine(embed("turn left at the junction"), embed("turn left at the junction")), 1.0, 1e-12);
}

TEST(Embed, OverlapOrdersSimilarity) {
  EXPECT_GT(shared_trigrams("left turn", "turn left"), shared_trigrams("left turn", "xyzzy"));
  EXPECT_GT(cosine(embed("left turn"), embed("turn left")), cosine(embed("left turn"), embed("xyzzy")));
}

TEST(Embed, EmptyTextRejected) { EXPECT_THROW(embed("   "), ArgumentError); }

TEST(Query, TopOne) {
  RetrievalIndex idx;
  idx.add("a", "left turn");
  idx.add("b", "sudden brake");
  const auto r = idx.query("brake", 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].entry->key, "b");
}

TEST(Query, KLargerThanIndexAndEmptyIndex) {
  RetrievalIndex idx;
  EXPECT_TRUE(idx.query("x", 3).empty());
  idx.add("a", "one");
  idx.add("b", "two");
  EXPECT_EQ(idx.query("one", 10).size(), 2u);
}

TEST(Query, TiesByInsertionOrder) {
  RetrievalIndex idx(std::make_shared<Constant>());
  for (const char* k : {"first", "second", "third"}) idx.add(k, "same text");
  const auto r = idx.query("anything", 3);
  EXPECT_EQ(r[0].entry->key, "first");
  EXPECT_EQ(r[1].entry->key, "second");
  EXPECT_EQ(r[2].entry->key, "third");
}

TEST(Query, MatchesBruteForceScan) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words = {"ego", "brake", "left", "turn", "lane", "cut", "in", "rear", "front", "speed"};
  RetrievalIndex idx;
  std::vector<std::string> texts;
  for (int i = 0; i < 500; ++i) {
    std::string t;
    for (int w = 0; w < 5; ++w) t += words[rng() % words.size()] + " ";
    texts.push_back(t);
    idx.add("k" + std::to_string(i), t);
  }
  const std::string q = "sudden brake in the left lane";
  const auto qv = embed(q);
  std::vector<std::pair<double, int>> scan;
  for (int i = 0; i < 500; ++i) scan.push_back({-cosine(qv, embed(texts[i])), i});
  std::stable_sort(scan.begin(), scan.end(), [](auto& a, auto& b) { return a.first < b.first; });
  const auto r = idx.query(q, 25);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].position, static_cast<std::size_t>(scan[i].second));
    if (i) EXPECT_LE(r[i].similarity, r[i - 1].similarity);
  }
}

TEST(Index, DuplicateKeyNamed) {
  RetrievalIndex idx;
  idx.add("x", "a");
  try {
    idx.add("x", "b");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'x'"), std::string::npos);
  }
}

TEST(Index, JsonRoundTripBitExact) {
  RetrievalIndex idx;
  idx.add("a", "sudden brake ahead", {{"scene", "brake"}});
  idx.add("b", "cut-in from the left");
  const auto back = RetrievalIndex::from_json(idx.to_json());
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.entries()[i].vector, idx.entries()[i].vector);
    EXPECT_EQ(back.entries()[i].metadata, idx.entries()[i].metadata);
  }
  EXPECT_EQ(back.to_json(), idx.to_json());
}

TEST(CodeIndex, SpawnTemplateFirst) {
  const auto idx = build_code_index(standard_code_fragments());
  EXPECT_EQ(idx.size(), 5u);
  EXPECT_EQ(idx.query("spawn vehicle", 1)[0].entry->key, "spawn-template");
  EXPECT_THROW(build_code_index({{"a", "x"}, {"a", "y"}}), ValidationError);
}
