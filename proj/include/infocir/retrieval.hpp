#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "infocir/embedding_store.hpp"
#include "infocir/provider.hpp"

namespace infocir {

struct ComposedQuery {
  Reference reference;
  std::string modifier;
  std::size_t k = 10;
};

struct RankedEntry {
  std::string image_id;
  double similarity = 0.0;
  std::size_t rank = 0;  // 1-based
  bool operator==(const RankedEntry&) const = default;
};

struct RankedList {
  std::vector<RankedEntry> entries;
  std::size_t size() const { return entries.size(); }
};

/// User-selected ideal images I*. Non-empty, ids unique and in the corpus.
struct IdealAnchorSet {
  std::vector<std::string> image_ids;

  /// Collapses duplicates (first occurrence wins) and validates against the
  /// corpus. Throws kInvalidArgument on an empty list, kNotFound on unknown ids.
  static IdealAnchorSet make(const EmbeddingCorpus& corpus, const std::vector<std::string>& ids);
};

/// Signed rank changes of the frozen baseline top-k under each prompt
/// variant. deltas[v][j] = rank_baseline(col j) - rank_variant(col j), so a
/// positive value means the image moved up.
struct RankDeltaMatrix {
  std::vector<std::string> baseline_top_k;
  std::vector<std::string> variants;
  std::vector<std::vector<long>> deltas;
  std::vector<std::map<std::string, std::size_t>> ideal_ranks;  // full-corpus ranks per variant
  std::map<std::string, std::size_t> baseline_ideal_ranks;
};

/// Exact full-scan cosine retrieval. Ties are broken by ascending image id.
class RetrievalEngine {
 public:
  /// Throws kInvalidArgument when the provider's dim differs from the corpus.
  RetrievalEngine(const EmbeddingCorpus& corpus, const Provider& provider, std::size_t max_in_flight = 8);

  Vector compose(const ComposedQuery& query) const;

  RankedList rank_all(const ComposedQuery& query) const;
  RankedList top_k(const ComposedQuery& query) const;
  std::size_t rank_of(const ComposedQuery& query, const std::string& target) const;

  RankDeltaMatrix rank_delta(const ComposedQuery& baseline, const std::vector<std::string>& variants,
                             const IdealAnchorSet& ideals) const;

  /// Ranks every corpus row against an already-composed query vector.
  RankedList rank_vector(std::span<const float> query) const;

  const EmbeddingCorpus& corpus() const { return corpus_; }
  const Provider& provider() const { return provider_; }

 private:
  void check_k(std::size_t k) const;

  const EmbeddingCorpus& corpus_;
  const Provider& provider_;
  std::size_t max_in_flight_;
};

/// Ranking of all rows of `corpus` for `query`: returns row indices in rank
/// order. Exposed for callers that need ranks without ids.
std::vector<std::size_t> rank_order(const EmbeddingCorpus& corpus, std::span<const float> query,
                                    std::vector<double>* similarities = nullptr);

}  // namespace infocir
