#include <gtest/gtest.h>

#include "infocir/error.hpp"
#include "infocir/provider.hpp"
#include "test_support.hpp"

using namespace infocir;
namespace ts = testing_support;

namespace {

StubCatalog catalog() {
  StubCatalog c;
  c.grid = {4, 4};
  c.images["fox"] = {{"red", "fox", "snow"}, {{0, 0}, {1, 1}, {3, 3}}};
  c.images["owl"] = {{"owl"}, {{2, 2}}};
  return c;
}

}  // namespace

TEST(StubProvider, TokenVectorMatchesRecipe) {
  const StubProvider stub({}, 32, 9);
  for (const std::string t : {"a", "dog", "Boston", ""}) {
    const auto got = stub.token_vector(t);
    const auto want = ts::ref_token(t, 32, 9);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i]) << t << " " << i;
  }
}

TEST(StubProvider, TextIsLowercasedTokenSum) {
  const StubProvider stub;
  EXPECT_EQ(stub.embed_text("Red  FOX"), ts::ref_text("red fox", 128));
  EXPECT_EQ(stub.embed_text("red fox"), stub.embed_text("RED\tfox "));
}

TEST(StubProvider, SeedChangesVectors) {
  EXPECT_NE(StubProvider({}, 16, 0).embed_text("dog"), StubProvider({}, 16, 1).embed_text("dog"));
}

TEST(StubProvider, ImageIsConceptSum) {
  const StubProvider stub(catalog(), 64);
  EXPECT_EQ(stub.embed_image("fox"), ts::ref_concepts({"red", "fox", "snow"}, 64));
}

TEST(StubProvider, MaskDropsConceptsInOccludedCells) {
  const StubProvider stub(catalog(), 64);
  EXPECT_EQ(stub.embed_image_masked("fox", {{4, 4}, {{1, 1}}}), ts::ref_concepts({"red", "snow"}, 64));
  // A coarser 2x2 mask cell (0, 0) covers catalog cells (0..1, 0..1).
  EXPECT_EQ(stub.embed_image_masked("fox", {{2, 2}, {{0, 0}}}), ts::ref_concepts({"snow"}, 64));
  EXPECT_EQ(stub.embed_image_masked("fox", {{4, 4}, {{2, 0}}}), stub.embed_image("fox"));
}

TEST(StubProvider, AllOccludedIsAnError) {
  const StubProvider stub(catalog(), 64);
  EXPECT_THROW(stub.embed_image_masked("owl", {{4, 4}, {{2, 2}}}), Error);
}

TEST(StubProvider, MaskValidation) {
  const StubProvider stub(catalog(), 64);
  EXPECT_THROW(stub.embed_image_masked("fox", {{4, 4}, {{4, 0}}}), Error);
  EXPECT_THROW(stub.embed_image_masked("fox", {{4, 4}, {{1, 1}, {1, 1}}}), Error);
}

TEST(StubProvider, ComposeMatchesRecipe) {
  const StubProvider stub(catalog(), 64);
  const auto base = ts::ref_concepts({"red", "fox", "snow"}, 64);
  EXPECT_EQ(stub.compose(Reference::image("fox"), "at night"), ts::ref_compose(base, "at night", 64));
  EXPECT_EQ(stub.compose(Reference::image("fox"), "  "), base);
  EXPECT_EQ(stub.compose(Reference::vector(base), ""), base);
}

TEST(StubProvider, ComposeRejectsBadReferences) {
  const StubProvider stub(catalog(), 64);
  try {
    stub.compose(Reference::image("nope"), "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
  }
  EXPECT_THROW(stub.compose(Reference::vector(Vector(3, 1.0f)), "x"), Error);
  EXPECT_THROW(stub.compose(Reference::vector(Vector(64, 0.0f)), "x"), Error);
}

TEST(StubProvider, OptionalCapabilitiesAbsent) {
  const StubProvider stub(catalog(), 64);
  const auto info = stub.info();
  EXPECT_EQ(info.dim, 64u);
  EXPECT_TRUE(info.has(kCapMaskEmbedding));
  EXPECT_FALSE(info.has(kCapTokenGradients));
  try {
    stub.token_gradients(Reference::image("fox"), "x", stub.embed_text("x"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("capability absent"), std::string::npos);
  }
}

TEST(StubProvider, CatalogSaveLoad) {
  ts::TempDir dir;
  const auto c = catalog();
  c.save(dir / "cat.json");
  const auto back = StubCatalog::load(dir / "cat.json");
  EXPECT_EQ(back.grid, c.grid);
  EXPECT_EQ(back.images.at("fox").concepts, c.images.at("fox").concepts);
  EXPECT_EQ(back.images.at("fox").cells, c.images.at("fox").cells);

  ts::write_text(dir / "bad.json", R"({"grid":[2,2],"images":{"x":{"concepts":["a"],"cells":[[5,0]]}}})");
  EXPECT_THROW(StubCatalog::load(dir / "bad.json"), Error);
}

TEST(StubProvider, RescaleCell) {
  EXPECT_EQ(rescale_cell({3, 5}, {7, 7}, {7, 7}), Cell(3, 5));
  EXPECT_EQ(rescale_cell({6, 6}, {7, 7}, {3, 3}), Cell(2, 2));
  EXPECT_EQ(rescale_cell({1, 0}, {2, 2}, {4, 4}), Cell(2, 0));
}
