#include <gtest/gtest.h>

#include "infocir/analytics.hpp"
#include "infocir/error.hpp"

using namespace infocir;

namespace {

EmbeddingCorpus corpus() {
  std::vector<float> v;
  std::vector<ImageRecord> recs = {
      {"1", "", "dog", {}, "A dog running on the beach"},
      {"2", "", "dog", {}, "dog and cat, sleeping"},
      {"3", "", "cat", {}, "Cat on a mat"},
      {"4", "", "bird", {}, ""},
      {"5", "", "Boston Terrier", {}, "small dog"},
  };
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (std::size_t j = 0; j < recs.size(); ++j) v.push_back(i == j ? 1.0f : 0.0f);
  return EmbeddingCorpus::create(recs.size(), v, recs);
}

RankedList results(const std::vector<std::string>& ids) {
  RankedList r;
  for (std::size_t i = 0; i < ids.size(); ++i) r.entries.push_back({ids[i], 0.0, i + 1});
  return r;
}

}  // namespace

TEST(Analytics, HistogramCountsDescThenLabel) {
  const auto c = corpus();
  const auto h = class_histogram(results({"3", "1", "4", "2"}), c);
  using Bins = std::vector<std::pair<std::string, std::size_t>>;
  EXPECT_EQ(h.bins, (Bins{{"dog", 2}, {"bird", 1}, {"cat", 1}}));
  std::size_t total = 0;
  for (const auto& [_, n] : h.bins) total += n;
  EXPECT_EQ(total, 4u);
}

TEST(Analytics, CloudTokens) {
  EXPECT_EQ(cloud_tokens("A dog, running-on THE beach!"), (std::vector<std::string>{"dog", "running", "beach"}));
  EXPECT_TRUE(cloud_tokens("it is an ox").empty());
  EXPECT_TRUE(is_stopword("the"));
  EXPECT_FALSE(is_stopword("dog"));
}

TEST(Analytics, WordCloudWeightsByHand) {
  const auto c = corpus();
  const auto w = word_cloud(results({"1", "2", "3"}), c);
  // dog: 1 (caption) + 1 (label) + 1 (caption) + 1 (label) = 4; cat: 1 + 1 + 1 = 3.
  ASSERT_GE(w.terms.size(), 3u);
  EXPECT_EQ(w.terms[0], (std::pair<std::string, double>{"dog", 1.0}));
  EXPECT_EQ(w.terms[1], (std::pair<std::string, double>{"cat", 0.75}));
  for (std::size_t i = 1; i < w.terms.size(); ++i) {
    const auto& a = w.terms[i - 1];
    const auto& b = w.terms[i];
    EXPECT_TRUE(a.second > b.second || (a.second == b.second && a.first < b.first));
  }
  for (const auto& [t, _] : w.terms) EXPECT_FALSE(is_stopword(t));
}

TEST(Analytics, ClassLabelsAreTokenized) {
  const auto c = corpus();
  const auto w = word_cloud(results({"5"}), c);
  std::vector<std::string> terms;
  for (const auto& [t, _] : w.terms) terms.push_back(t);
  EXPECT_EQ(terms, (std::vector<std::string>{"boston", "dog", "small", "terrier"}));
}

TEST(Analytics, CapsTermCount) {
  std::vector<ImageRecord> recs;
  std::vector<float> v;
  std::string caption;
  for (int i = 0; i < 40; ++i) caption += "word" + std::to_string(100 + i) + " ";
  recs.push_back({"x", "", "zzz", {}, caption});
  v.push_back(1.0f);
  const auto c = EmbeddingCorpus::create(1, v, recs);
  EXPECT_EQ(word_cloud(results({"x"}), c).terms.size(), kWordCloudMaxTerms);
}

TEST(Analytics, EmptyResultsRejected) {
  const auto c = corpus();
  EXPECT_THROW(class_histogram(RankedList{}, c), Error);
  EXPECT_THROW(word_cloud(RankedList{}, c), Error);
}
