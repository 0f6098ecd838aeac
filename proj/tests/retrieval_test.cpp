#include <gtest/gtest.h>

#include <set>

#include "infocir/error.hpp"
#include "infocir/fixtures.hpp"
#include "infocir/retrieval.hpp"
#include "test_support.hpp"

using namespace infocir;
namespace ts = testing_support;

namespace {

std::vector<std::vector<float>> rows_of(const EmbeddingCorpus& c) {
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < c.count(); ++i) rows.emplace_back(c.row(i).begin(), c.row(i).end());
  return rows;
}

std::vector<std::string> ids_of(const EmbeddingCorpus& c) {
  std::vector<std::string> ids;
  for (const auto& r : c.records()) ids.push_back(r.id);
  return ids;
}

Vector unit(std::uint64_t seed, std::size_t dim) {
  SplitMix64 rng(seed);
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return normalized_f32(std::span<const double>(v));
}

// Fails on one modifier; everything else is the stub.
class FlakyProvider : public StubProvider {
 public:
  explicit FlakyProvider(std::string bad) : StubProvider({}, 32), bad_(std::move(bad)) {}
  Vector compose(const Reference& r, const std::string& m) const override {
    if (m == bad_) fail(ErrorKind::kProvider, "provider down");
    return StubProvider::compose(r, m);
  }

 private:
  std::string bad_;
};

}  // namespace

TEST(Retrieval, MatchesBruteForceOracle) {
  const StubProvider stub({}, 32);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = random_corpus(120, 32, seed);
    const RetrievalEngine engine(corpus, stub, 3);
    const auto base = unit(seed * 11, 32);
    const auto ranked = engine.rank_all({Reference::vector(base), "snowy night", 5});
    const auto want = ts::ref_ranking(rows_of(corpus), ids_of(corpus), ts::ref_compose(base, "snowy night", 32));
    ASSERT_EQ(ranked.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(ranked.entries[i].image_id, want[i]);
      EXPECT_EQ(ranked.entries[i].rank, i + 1);
    }
  }
}

TEST(Retrieval, TopKIsPrefixWithSimilarities) {
  const StubProvider stub({}, 32);
  const auto corpus = random_corpus(50, 32, 4);
  const RetrievalEngine engine(corpus, stub);
  const ComposedQuery q{Reference::vector(unit(3, 32)), "red", 7};
  const auto top = engine.top_k(q);
  const auto all = engine.rank_all(q);
  ASSERT_EQ(top.size(), 7u);
  const auto qv = ts::ref_compose(unit(3, 32), "red", 32);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(top.entries[i], all.entries[i]);
    EXPECT_NEAR(top.entries[i].similarity, ts::ref_cosine(qv, corpus.get_vector(top.entries[i].image_id)), 1e-12);
  }
  EXPECT_EQ(engine.rank_of(q, all.entries[20].image_id), 21u);
}

TEST(Retrieval, TiesBreakByAscendingId) {
  const auto corpus = EmbeddingCorpus::create(
      2, {0.6f, 0.8f, 0.6f, 0.8f, 1.0f, 0.0f, 0.6f, 0.8f},
      {{"m", "", "k", {}, ""}, {"c", "", "k", {}, ""}, {"a", "", "k", {}, ""}, {"x", "", "k", {}, ""}});
  const StubProvider stub({}, 2);
  const RetrievalEngine engine(corpus, stub);
  const auto r = engine.rank_all({Reference::vector({0.6f, 0.8f}), "", 4});
  std::vector<std::string> got;
  for (const auto& e : r.entries) got.push_back(e.image_id);
  EXPECT_EQ(got, (std::vector<std::string>{"c", "m", "x", "a"}));
}

TEST(Retrieval, KValidation) {
  const StubProvider stub({}, 16);
  const auto corpus = random_corpus(10, 16, 1);
  const RetrievalEngine engine(corpus, stub);
  for (std::size_t k : {std::size_t(0), std::size_t(11)}) {
    try {
      engine.top_k({Reference::vector(unit(1, 16)), "x", k});
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
  }
  EXPECT_EQ(engine.top_k({Reference::vector(unit(1, 16)), "x", 10}).size(), 10u);
}

TEST(Retrieval, DimensionMismatchIsRejected) {
  const StubProvider stub({}, 8);
  const auto corpus = random_corpus(10, 16, 1);
  EXPECT_THROW(RetrievalEngine(corpus, stub), Error);
}

TEST(Retrieval, IdealAnchorSetValidation) {
  const auto corpus = random_corpus(10, 8, 1);
  EXPECT_THROW(IdealAnchorSet::make(corpus, {}), Error);
  try {
    IdealAnchorSet::make(corpus, {"img-00001", "ghost"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
  }
  EXPECT_EQ(IdealAnchorSet::make(corpus, {"img-00002", "img-00001", "img-00002"}).image_ids,
            (std::vector<std::string>{"img-00002", "img-00001"}));
}

TEST(Retrieval, RankDeltaAgainstOracle) {
  const StubProvider stub({}, 32);
  const auto corpus = random_corpus(150, 32, 9);
  const RetrievalEngine engine(corpus, stub, 2);
  const auto base = unit(77, 32);
  const ComposedQuery q{Reference::vector(base), "a dog", 12};
  const std::vector<std::string> variants = {"a dog", "bright city", "painting of snow"};
  const auto ideals = IdealAnchorSet::make(corpus, {"img-00003", "img-00100"});
  const auto m = engine.rank_delta(q, variants, ideals);

  const auto rows = rows_of(corpus);
  const auto ids = ids_of(corpus);
  const auto base_order = ts::ref_ranking(rows, ids, ts::ref_compose(base, "a dog", 32));
  ASSERT_EQ(m.baseline_top_k, std::vector<std::string>(base_order.begin(), base_order.begin() + 12));
  ASSERT_EQ(m.deltas.size(), 3u);
  EXPECT_EQ(m.baseline_ideal_ranks.at("img-00003"), ts::ref_rank(base_order, "img-00003"));
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const auto order = ts::ref_ranking(rows, ids, ts::ref_compose(base, variants[v], 32));
    for (std::size_t j = 0; j < 12; ++j) {
      EXPECT_EQ(m.deltas[v][j], long(j + 1) - long(ts::ref_rank(order, base_order[j])));
    }
    EXPECT_EQ(m.ideal_ranks[v].at("img-00100"), ts::ref_rank(order, "img-00100"));
  }
  for (long d : m.deltas[0]) EXPECT_EQ(d, 0);
}

TEST(Retrieval, RankDeltaIsAtomicOnProviderFailure) {
  const FlakyProvider provider("boom");
  const auto corpus = random_corpus(40, 32, 2);
  const RetrievalEngine engine(corpus, provider, 4);
  const ComposedQuery q{Reference::vector(unit(5, 32)), "a", 5};
  const auto ideals = IdealAnchorSet::make(corpus, {"img-00001"});
  try {
    engine.rank_delta(q, {"b", "c", "boom", "d"}, ideals);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kProvider);
  }
  EXPECT_THROW(engine.rank_delta(q, {}, ideals), Error);
}

TEST(Retrieval, RankAllIsAPermutation) {
  const StubProvider stub({}, 16);
  const auto corpus = random_corpus(64, 16, 3);
  const RetrievalEngine engine(corpus, stub);
  const auto r = engine.rank_all({Reference::vector(unit(2, 16)), "x y", 1});
  std::set<std::string> ids;
  for (const auto& e : r.entries) ids.insert(e.image_id);
  EXPECT_EQ(ids.size(), 64u);
  for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r.entries[i - 1].similarity, r.entries[i].similarity);
}
