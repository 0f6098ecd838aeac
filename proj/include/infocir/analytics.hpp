#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "infocir/embedding_store.hpp"
#include "infocir/retrieval.hpp"

namespace infocir {

struct ClassHistogram {
  std::vector<std::pair<std::string, std::size_t>> bins;  // count desc, then label asc
};

struct WordCloudWeights {
  std::vector<std::pair<std::string, double>> terms;  // weight desc, then term asc
};

inline constexpr std::size_t kWordCloudMaxTerms = 30;

ClassHistogram class_histogram(const RankedList& results, const EmbeddingCorpus& corpus);

/// Term weights over captions and class labels of the results: lowercase,
/// split on whitespace and punctuation, drop stopwords and tokens shorter
/// than three characters, weight = count / max count.
WordCloudWeights word_cloud(const RankedList& results, const EmbeddingCorpus& corpus);

std::vector<std::string> cloud_tokens(std::string_view text);
bool is_stopword(std::string_view word);

}  // namespace infocir
