#include <gtest/gtest.h>

#include <cstring>

#include "infocir/embedding_store.hpp"
#include "infocir/error.hpp"
#include "infocir/fixtures.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace infocir;
using testing_support::TempDir;

namespace {

EmbeddingCorpus tiny() {
  return EmbeddingCorpus::create(2, {1.0f, 0.0f, 0.0f, 1.0f, 0.6f, 0.8f},
                                 {{"a", "file://a.png", "cat", "sketch", "a cat"},
                                  {"b", "", "dog", std::nullopt, ""},
                                  {"c", "", "cat", "photo", "another cat"}});
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInternal;
}

void write_manifest(const TempDir& dir, const nlohmann::json& m) {
  testing_support::write_text(dir / "manifest.json", m.dump());
}

}  // namespace

TEST(EmbeddingStore, EncodesHandAssembledLayout) {
  const auto corpus = tiny();
  std::vector<std::uint8_t> expected = {'C', 'I', 'R', 'E', 1, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0};
  for (float f : {1.0f, 0.0f, 0.0f, 1.0f, 0.6f, 0.8f}) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    for (int i = 0; i < 4; ++i) expected.push_back(std::uint8_t(u >> (8 * i)));
  }
  EXPECT_EQ(encode_embeddings(corpus), expected);
}

TEST(EmbeddingStore, RoundTripIsByteExact) {
  TempDir dir;
  const auto corpus = random_corpus(37, 16, 5);
  write_corpus(corpus, dir.path());
  const auto first = testing_support::read_text(dir / "embeddings.bin");
  const auto back = ingest(dir / "manifest.json");
  ASSERT_EQ(back.count(), 37u);
  EXPECT_EQ(back.records(), corpus.records());
  for (std::size_t i = 0; i < corpus.data().size(); ++i) ASSERT_EQ(back.data()[i], corpus.data()[i]);

  TempDir again;
  write_corpus(back, again.path());
  EXPECT_EQ(testing_support::read_text(again / "embeddings.bin"), first);
  EXPECT_EQ(testing_support::read_text(again / "manifest.json"), testing_support::read_text(dir / "manifest.json"));
}

TEST(EmbeddingStore, StyleAndMetadataSurvive) {
  TempDir dir;
  write_corpus(tiny(), dir.path());
  const auto back = ingest_dir_or_manifest(dir.path());
  EXPECT_EQ(back.record("a").style_label, std::optional<std::string>("sketch"));
  EXPECT_FALSE(back.record("b").style_label.has_value());
  EXPECT_EQ(back.record("c").caption, "another cat");
}

TEST(EmbeddingStore, RenormalizesOnlyOffUnitRows) {
  const auto c = EmbeddingCorpus::create(2, {3.0f, 4.0f, 0.6f, 0.8f}, {{"x", "", "k", {}, ""}, {"y", "", "k", {}, ""}});
  EXPECT_FLOAT_EQ(c.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(c.row(0)[1], 0.8f);
  EXPECT_EQ(c.row(1)[0], 0.6f);
  EXPECT_EQ(c.row(1)[1], 0.8f);
}

TEST(EmbeddingStore, LookupErrors) {
  const auto c = tiny();
  EXPECT_EQ(c.index_of("c"), 2u);
  EXPECT_EQ(c.get_vector("b"), (Vector{0.0f, 1.0f}));
  EXPECT_EQ(kind_of([&] { c.index_of("zzz"); }), ErrorKind::kNotFound);
  EXPECT_FALSE(c.find("zzz").has_value());
}

TEST(EmbeddingStore, CreateRejectsBadInput) {
  EXPECT_EQ(kind_of([] { EmbeddingCorpus::create(2, {1, 0, 1, 0}, {{"a", "", "k", {}, ""}, {"a", "", "k", {}, ""}}); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { EmbeddingCorpus::create(2, {0, 0}, {{"a", "", "k", {}, ""}}); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { EmbeddingCorpus::create(2, {1, 0, 1}, {{"a", "", "k", {}, ""}}); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { EmbeddingCorpus::create(2, {1, 0}, {{"a", "", "", {}, ""}}); }),
            ErrorKind::kInvalidArgument);
}

TEST(EmbeddingStore, IngestMissingManifestIsIoError) {
  TempDir dir;
  EXPECT_EQ(kind_of([&] { ingest(dir / "nope.json"); }), ErrorKind::kIo);
}

TEST(EmbeddingStore, IngestRejectsBadMagic) {
  TempDir dir;
  write_corpus(tiny(), dir.path());
  auto bytes = testing_support::read_text(dir / "embeddings.bin");
  bytes[0] = 'X';
  testing_support::write_text(dir / "embeddings.bin", bytes);
  try {
    ingest(dir / "manifest.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
}

TEST(EmbeddingStore, IngestRejectsTruncatedPayload) {
  TempDir dir;
  write_corpus(tiny(), dir.path());
  auto bytes = testing_support::read_text(dir / "embeddings.bin");
  bytes.pop_back();
  testing_support::write_text(dir / "embeddings.bin", bytes);
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);
}

TEST(EmbeddingStore, IngestRejectsHeaderManifestMismatch) {
  TempDir dir;
  write_corpus(tiny(), dir.path());
  auto m = nlohmann::json::parse(testing_support::read_text(dir / "manifest.json"));
  m["dim"] = 3;
  write_manifest(dir, m);
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);
}

TEST(EmbeddingStore, IngestRejectsDuplicateIdsAndMissingClass) {
  TempDir dir;
  write_corpus(tiny(), dir.path());
  auto m = nlohmann::json::parse(testing_support::read_text(dir / "manifest.json"));
  auto dup = m;
  dup["records"][1]["id"] = "a";
  write_manifest(dir, dup);
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);

  auto no_class = m;
  no_class["records"][0].erase("class");
  write_manifest(dir, no_class);
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);

  testing_support::write_text(dir / "manifest.json", "{not json");
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);
}

TEST(EmbeddingStore, IngestRejectsNonFiniteAndZeroRows) {
  TempDir dir;
  write_corpus(tiny(), dir.path());
  const auto good = testing_support::read_text(dir / "embeddings.bin");

  auto nan = good;
  const float q = std::nanf("");
  std::memcpy(nan.data() + 24, &q, 4);
  testing_support::write_text(dir / "embeddings.bin", nan);
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);

  auto zero = good;
  std::memset(zero.data() + 24 + 8, 0, 8);
  testing_support::write_text(dir / "embeddings.bin", zero);
  EXPECT_EQ(kind_of([&] { ingest(dir / "manifest.json"); }), ErrorKind::kFormat);
}
