#include "infocir/retrieval.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "infocir/error.hpp"
#include "infocir/parallel.hpp"

namespace infocir {

IdealAnchorSet IdealAnchorSet::make(const EmbeddingCorpus& corpus, const std::vector<std::string>& ids) {
  if (ids.empty()) fail(ErrorKind::kInvalidArgument, "ideal anchor set must not be empty");
  IdealAnchorSet out;
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    corpus.index_of(id);
    if (seen.insert(id).second) out.image_ids.push_back(id);
  }
  return out;
}

std::vector<std::size_t> rank_order(const EmbeddingCorpus& corpus, std::span<const float> query,
                                    std::vector<double>* similarities) {
  if (query.size() != corpus.dim()) fail(ErrorKind::kInvalidArgument, "dimension mismatch");
  const std::size_t n = corpus.count();
  std::vector<double> sims(n);
  for (std::size_t i = 0; i < n; ++i) sims[i] = cosine(query, corpus.row(i));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& recs = corpus.records();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return recs[a].id < recs[b].id;
  });
  if (similarities) *similarities = std::move(sims);
  return order;
}

RetrievalEngine::RetrievalEngine(const EmbeddingCorpus& corpus, const Provider& provider,
                                 std::size_t max_in_flight)
    : corpus_(corpus), provider_(provider), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {
  const auto info = provider_.info();
  if (info.dim != corpus_.dim()) {
    fail(ErrorKind::kInvalidArgument, "dimension mismatch: provider dim " + std::to_string(info.dim) +
                                          ", corpus dim " + std::to_string(corpus_.dim()));
  }
}

void RetrievalEngine::check_k(std::size_t k) const {
  if (k < 1 || k > corpus_.count()) {
    fail(ErrorKind::kInvalidArgument, "k must be in [1, " + std::to_string(corpus_.count()) + "]");
  }
}

Vector RetrievalEngine::compose(const ComposedQuery& query) const {
  auto v = provider_.compose(query.reference, query.modifier);
  if (v.size() != corpus_.dim()) fail(ErrorKind::kProvider, "dimension mismatch in composed query");
  return v;
}

RankedList RetrievalEngine::rank_vector(std::span<const float> query) const {
  std::vector<double> sims;
  const auto order = rank_order(corpus_, query, &sims);
  RankedList out;
  out.entries.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.entries.push_back({corpus_.record(order[r]).id, sims[order[r]], r + 1});
  }
  return out;
}

RankedList RetrievalEngine::rank_all(const ComposedQuery& query) const {
  check_k(query.k);
  return rank_vector(compose(query));
}

RankedList RetrievalEngine::top_k(const ComposedQuery& query) const {
  auto all = rank_all(query);
  all.entries.resize(query.k);
  return all;
}

std::size_t RetrievalEngine::rank_of(const ComposedQuery& query, const std::string& target) const {
  const auto idx = corpus_.index_of(target);
  const auto order = rank_order(corpus_, compose(query));
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), idx) - order.begin()) + 1;
}

namespace {

// rank (1-based) per corpus row
std::vector<std::size_t> ranks_by_row(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> ranks(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r + 1;
  return ranks;
}

}  // namespace

RankDeltaMatrix RetrievalEngine::rank_delta(const ComposedQuery& baseline,
                                            const std::vector<std::string>& variants,
                                            const IdealAnchorSet& ideals) const {
  check_k(baseline.k);
  if (variants.empty()) fail(ErrorKind::kInvalidArgument, "no prompt variants to evaluate");
  std::vector<std::size_t> ideal_rows;
  for (const auto& id : ideals.image_ids) ideal_rows.push_back(corpus_.index_of(id));

  const auto base_order = rank_order(corpus_, compose(baseline));
  const auto base_ranks = ranks_by_row(base_order);

  // Any provider failure rethrows here, before anything is assembled.
  const auto variant_ranks = bounded_parallel_map(variants.size(), max_in_flight_, [&](std::size_t v) {
    ComposedQuery q{baseline.reference, variants[v], baseline.k};
    return ranks_by_row(rank_order(corpus_, compose(q)));
  });

  RankDeltaMatrix m;
  m.variants = variants;
  for (std::size_t j = 0; j < baseline.k; ++j) m.baseline_top_k.push_back(corpus_.record(base_order[j]).id);
  for (std::size_t i = 0; i < ideal_rows.size(); ++i) {
    m.baseline_ideal_ranks[ideals.image_ids[i]] = base_ranks[ideal_rows[i]];
  }
  for (const auto& ranks : variant_ranks) {
    std::vector<long> row;
    row.reserve(baseline.k);
    for (std::size_t j = 0; j < baseline.k; ++j) {
      const auto r = base_order[j];
      row.push_back(static_cast<long>(base_ranks[r]) - static_cast<long>(ranks[r]));
    }
    m.deltas.push_back(std::move(row));
    std::map<std::string, std::size_t> ir;
    for (std::size_t i = 0; i < ideal_rows.size(); ++i) ir[ideals.image_ids[i]] = ranks[ideal_rows[i]];
    m.ideal_ranks.push_back(std::move(ir));
  }
  return m;
}

}  // namespace infocir
