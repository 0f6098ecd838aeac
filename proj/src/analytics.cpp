#include "infocir/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "infocir/error.hpp"
#include "infocir/stopwords.hpp"

namespace infocir {

bool is_stopword(std::string_view word) {
  return std::find(std::begin(kStopwords), std::end(kStopwords), word) != std::end(kStopwords);
}

std::vector<std::string> cloud_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 3 && !is_stopword(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

ClassHistogram class_histogram(const RankedList& results, const EmbeddingCorpus& corpus) {
  if (results.entries.empty()) fail(ErrorKind::kInvalidArgument, "empty results");
  std::map<std::string, std::size_t> counts;
  for (const auto& e : results.entries) ++counts[corpus.record(e.image_id).class_label];
  ClassHistogram h;
  h.bins.assign(counts.begin(), counts.end());
  std::stable_sort(h.bins.begin(), h.bins.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return h;
}

WordCloudWeights word_cloud(const RankedList& results, const EmbeddingCorpus& corpus) {
  if (results.entries.empty()) fail(ErrorKind::kInvalidArgument, "empty results");
  std::map<std::string, std::size_t> counts;
  for (const auto& e : results.entries) {
    const auto& r = corpus.record(e.image_id);
    for (auto& t : cloud_tokens(r.caption)) ++counts[t];
    for (auto& t : cloud_tokens(r.class_label)) ++counts[t];
  }
  WordCloudWeights w;
  if (counts.empty()) return w;
  std::size_t max_count = 0;
  for (const auto& [_, c] : counts) max_count = std::max(max_count, c);
  for (const auto& [t, c] : counts) w.terms.emplace_back(t, double(c) / double(max_count));
  std::stable_sort(w.terms.begin(), w.terms.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (w.terms.size() > kWordCloudMaxTerms) w.terms.resize(kWordCloudMaxTerms);
  return w;
}

}  // namespace infocir
