#include "infocir/attribution.hpp"

#include <algorithm>
#include <limits>

#include "infocir/error.hpp"
#include "infocir/parallel.hpp"
#include "infocir/text.hpp"

namespace infocir {

namespace {

bool is_all_occluded(const Error& e) {
  return std::string_view(e.what()).find("all concepts occluded") != std::string_view::npos;
}

std::vector<Cell> all_cells(GridShape grid) {
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) cells.emplace_back(r, c);
  return cells;
}

void check_grid(GridShape grid) {
  if (grid.rows == 0 || grid.cols == 0) fail(ErrorKind::kInvalidArgument, "saliency grid must be at least 1x1");
}

}  // namespace

Grid min_max_normalize(const Grid& raw) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& row : raw)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Grid out = raw;
  const double span = hi - lo;
  for (auto& row : out)
    for (double& v : row) v = span > 0.0 ? (v - lo) / span : 0.0;
  return out;
}

AttributionEngine::AttributionEngine(const EmbeddingCorpus& corpus, const Provider& provider,
                                     std::size_t max_in_flight)
    : corpus_(corpus), provider_(provider), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {}

bool AttributionEngine::use_gradient(AttributionMode mode, const char* capability) const {
  switch (mode) {
    case AttributionMode::kPerturbation: return false;
    case AttributionMode::kAuto: return provider_.info().has(capability);
    case AttributionMode::kGradient:
      if (!provider_.info().has(capability)) {
        fail(ErrorKind::kInvalidArgument, std::string("capability absent: ") + capability);
      }
      return true;
  }
  return false;
}

TokenAttribution AttributionEngine::token_attribution(const Reference& reference, const std::string& modifier,
                                                      const std::string& ideal_id, AttributionMode mode) const {
  const auto tokens = tokenize_words(modifier);
  if (tokens.empty()) fail(ErrorKind::kInvalidArgument, "empty modifier");
  const Vector ideal = corpus_.get_vector(ideal_id);

  TokenAttribution out;
  const Vector full = provider_.compose(reference, modifier);
  out.s_full = cosine(full, ideal);

  if (use_gradient(mode, kCapTokenGradients)) {
    auto g = provider_.token_gradients(reference, modifier, ideal);
    out.tokens = std::move(g.tokens);
    out.scores = std::move(g.scores);
    out.mode = "gradient";
    return out;
  }

  out.tokens = tokens;
  out.mode = "ablation";
  out.scores = bounded_parallel_map(tokens.size(), max_in_flight_, [&](std::size_t i) {
    std::vector<std::string> rest;
    for (std::size_t j = 0; j < tokens.size(); ++j)
      if (j != i) rest.push_back(tokens[j]);
    const Vector ablated = provider_.compose(reference, join_words(rest));
    return out.s_full - cosine(ablated, ideal);
  });
  return out;
}

double AttributionEngine::masked_similarity(const std::string& id, const OcclusionMask& mask,
                                            std::span<const float> query) const {
  try {
    return cosine(query, provider_.embed_image_masked(id, mask));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidArgument && is_all_occluded(e)) return 0.0;
    throw;
  }
}

SaliencyGrid AttributionEngine::saliency(const std::string& image_id, std::span<const float> query,
                                         GridShape grid, AttributionMode mode) const {
  check_grid(grid);
  if (query.size() != corpus_.dim()) fail(ErrorKind::kInvalidArgument, "dimension mismatch");
  SaliencyGrid out;
  out.grid = grid;
  out.target_id = image_id;

  if (use_gradient(mode, kCapGradientSaliency)) {
    out.mode = "gradient";
    out.raw_deltas = provider_.gradient_saliency(image_id, query, grid);
  } else {
    if (!provider_.info().has(kCapMaskEmbedding)) {
      fail(ErrorKind::kInvalidArgument, "provider supports neither mask_embedding nor gradient_saliency");
    }
    out.mode = "occlusion";
    const double base = cosine(query, provider_.embed_image(image_id));
    const auto cells = all_cells(grid);
    const auto deltas = bounded_parallel_map(cells.size(), max_in_flight_, [&](std::size_t i) {
      return base - masked_similarity(image_id, OcclusionMask{grid, {cells[i]}}, query);
    });
    out.raw_deltas.assign(grid.rows, std::vector<double>(grid.cols, 0.0));
    for (std::size_t i = 0; i < cells.size(); ++i) out.raw_deltas[cells[i].first][cells[i].second] = deltas[i];
  }
  out.normalized = min_max_normalize(out.raw_deltas);
  return out;
}

SaliencyGrid AttributionEngine::reference_saliency(const std::string& reference_id, const std::string& modifier,
                                                   std::span<const float> target, GridShape grid,
                                                   AttributionMode mode) const {
  check_grid(grid);
  if (target.size() != corpus_.dim()) fail(ErrorKind::kInvalidArgument, "dimension mismatch");
  SaliencyGrid out;
  out.grid = grid;
  out.target_id = reference_id;

  if (use_gradient(mode, kCapGradientSaliency)) {
    out.mode = "gradient";
    out.raw_deltas = provider_.gradient_saliency(reference_id, target, grid);
  } else {
    if (!provider_.info().has(kCapMaskEmbedding)) {
      fail(ErrorKind::kInvalidArgument, "provider supports neither mask_embedding nor gradient_saliency");
    }
    out.mode = "occlusion";
    const double base = cosine(provider_.compose(Reference::image(reference_id), modifier), target);
    const auto cells = all_cells(grid);
    const auto deltas = bounded_parallel_map(cells.size(), max_in_flight_, [&](std::size_t i) {
      Vector masked;
      try {
        masked = provider_.embed_image_masked(reference_id, OcclusionMask{grid, {cells[i]}});
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::kInvalidArgument && is_all_occluded(e)) return base;
        throw;
      }
      return base - cosine(provider_.compose(Reference::vector(std::move(masked)), modifier), target);
    });
    out.raw_deltas.assign(grid.rows, std::vector<double>(grid.cols, 0.0));
    for (std::size_t i = 0; i < cells.size(); ++i) out.raw_deltas[cells[i].first][cells[i].second] = deltas[i];
  }
  out.normalized = min_max_normalize(out.raw_deltas);
  return out;
}

PairExplanation AttributionEngine::explain_pair(const Reference& reference, const std::string& modifier,
                                                const std::string& ideal_id, GridShape grid,
                                                AttributionMode mode) const {
  PairExplanation out;
  out.tokens = token_attribution(reference, modifier, ideal_id, mode);
  out.s_full = out.tokens.s_full;
  const Vector query = provider_.compose(reference, modifier);
  const Vector ideal = corpus_.get_vector(ideal_id);
  out.ideal = saliency(ideal_id, query, grid, mode);
  if (reference.is_image()) out.reference = reference_saliency(reference.image_ref(), modifier, ideal, grid, mode);
  return out;
}

}  // namespace infocir
