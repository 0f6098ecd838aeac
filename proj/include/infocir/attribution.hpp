#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infocir/embedding_store.hpp"
#include "infocir/provider.hpp"

namespace infocir {

enum class AttributionMode {
  kAuto,        // provider gradients when advertised, perturbation otherwise
  kPerturbation,
  kGradient,
};

struct TokenAttribution {
  std::vector<std::string> tokens;
  std::vector<double> scores;  // signed; aligned with tokens
  std::string mode;            // "ablation" | "gradient"
  double s_full = 0.0;
};

struct SaliencyGrid {
  GridShape grid;
  Grid raw_deltas;
  Grid normalized;  // min-max over the grid; all zeros when constant
  std::string target_id;
  std::string mode;  // "occlusion" | "gradient"
};

struct PairExplanation {
  double s_full = 0.0;
  TokenAttribution tokens;
  std::optional<SaliencyGrid> reference;  // absent for raw-vector references
  SaliencyGrid ideal;
};

/// Min-max normalization to [0, 1]; a constant grid maps to all zeros.
Grid min_max_normalize(const Grid& raw);

/// Explains s = sim(compose(reference, modifier), f_i(ideal)) by leave-one-out
/// token ablation and single-cell occlusion, or by provider gradients.
///
/// A masked image whose every concept is occluded has no embedding; its
/// masked similarity is scored as 0 for that cell.
class AttributionEngine {
 public:
  AttributionEngine(const EmbeddingCorpus& corpus, const Provider& provider, std::size_t max_in_flight = 8);

  TokenAttribution token_attribution(const Reference& reference, const std::string& modifier,
                                     const std::string& ideal_id,
                                     AttributionMode mode = AttributionMode::kAuto) const;

  /// raw[r][c] = sim(query, embed_image(id)) - sim(query, embed_image_masked(id, {(r, c)})).
  SaliencyGrid saliency(const std::string& image_id, std::span<const float> query, GridShape grid,
                        AttributionMode mode = AttributionMode::kAuto) const;

  /// Occludes cells of the reference image inside the composition:
  /// raw[r][c] = s - sim(compose(masked reference, modifier), target).
  SaliencyGrid reference_saliency(const std::string& reference_id, const std::string& modifier,
                                  std::span<const float> target, GridShape grid,
                                  AttributionMode mode = AttributionMode::kAuto) const;

  PairExplanation explain_pair(const Reference& reference, const std::string& modifier,
                               const std::string& ideal_id, GridShape grid = {},
                               AttributionMode mode = AttributionMode::kAuto) const;

 private:
  bool use_gradient(AttributionMode mode, const char* capability) const;
  double masked_similarity(const std::string& id, const OcclusionMask& mask, std::span<const float> query) const;

  const EmbeddingCorpus& corpus_;
  const Provider& provider_;
  std::size_t max_in_flight_;
};

}  // namespace infocir
