#pragma once

// Synthetic corpora with known structure. Every generator is a pure
// function of its seed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "infocir/embedding_store.hpp"
#include "infocir/projection.hpp"
#include "infocir/provider.hpp"

namespace infocir {

/// N Gaussian-random unit rows with round-robin class labels.
EmbeddingCorpus random_corpus(std::size_t n, std::size_t dim, std::uint64_t seed, std::size_t n_classes = 4);

// --- Style-confounded clusters ------------------------------------------------

struct StyleCorpusSpec {
  std::size_t per_cell = 50;  // points per (class, style) pair
  std::size_t classes = 3;
  std::size_t styles = 4;
  std::size_t dim = 64;
  double class_variance = 1.0;
  double style_to_class = 3.0;   // style variance / class variance
  double noise_variance = 12.0;  // total isotropic noise variance
  double offset = 6.0;           // shared offset along one axis before normalization
  std::uint64_t seed = 7;
};

struct StyleCorpus {
  EmbeddingCorpus corpus;
  std::vector<std::string> styles;  // per row
  double class_variance = 0.0;      // measured on the generated class term
  double style_variance = 0.0;      // measured on the generated style term
};

StyleCorpus style_confounded_corpus(const StyleCorpusSpec& spec = {});

/// Pipeline settings used for the style-confounded corpus.
ProjectionConfig style_corpus_projection_config(std::uint64_t seed);

// --- Analytic Fisher generator -------------------------------------------------

struct FisherFixture {
  Matrix x;
  std::vector<std::string> labels;
  ColVector class_axis;  // planted discriminative direction (unit)
  ColVector style_axis;  // high-variance nuisance direction (unit)
};

/// Class signal along one random axis, label-independent style noise with 3x
/// the class variance along an orthogonal axis, small isotropic noise elsewhere.
FisherFixture fisher_fixture(std::size_t n, std::size_t dim, std::uint64_t seed);

// --- ICA mixtures ---------------------------------------------------------------

struct IcaFixture {
  Matrix sources;  // n x 2, unit-variance uniform
  Matrix mixing;   // 2 x 2
  Matrix mixed;    // n x 2, sources * mixing^T
};

IcaFixture ica_fixture(std::size_t n, std::uint64_t seed);

// --- Stub scenarios ---------------------------------------------------------------

/// Corpus + stub catalog + the query the scenario is built around. The corpus
/// vectors are stub embed_image outputs (stub seed kept in stub_seed).
struct StubScenario {
  EmbeddingCorpus corpus;
  StubCatalog catalog;
  std::uint64_t stub_seed = 0;
  std::string reference_id{};
  std::string baseline_modifier{};
  std::string variant_modifier{};  // the designated improving variant
  std::string ideal_id{};
  std::size_t k = 10;
  std::size_t expected_baseline_rank = 0;
  std::size_t expected_variant_rank = 0;
};

/// Reference ["green", "apple"], baseline "a red apple", variant "crimson
/// apple". Distractors are chosen by brute force from a concept-combination
/// pool so the ideal sits at rank 12 under the baseline and rank 2 under the
/// variant. k = 15 keeps the ideal inside the frozen top-k.
StubScenario apple_scenario(std::uint64_t seed);

/// Top-3 retrieval task: reference of a small black and white dog, baseline
/// "small black and white dog", target a cartoon Boston Terrier placed at
/// baseline rank 6 and at rank <= 3 under the class-injection template
/// "a cartoon Boston Terrier".
StubScenario terrier_scenario(std::uint64_t seed);

/// Writes corpus (manifest + embeddings), stub_catalog.json and scenario.json.
void write_scenario(const StubScenario& s, const std::filesystem::path& dir);
StubScenario read_scenario(const std::filesystem::path& dir);

/// Materializes all fixtures under out_dir: style/, apple/, terrier/, ica/.
void make_fixtures(const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace infocir
