#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "infocir/embedding_store.hpp"
#include "infocir/retrieval.hpp"

namespace infocir {

/// Chat-completions endpoint settings. An empty url means offline (fallback)
/// mode.
struct LlmConfig {
  std::string url;  // full endpoint, e.g. https://host/v1/chat/completions
  std::string model;
  std::string api_key;
  double temperature = 0.7;
  int timeout_seconds = 30;

  bool configured() const { return !url.empty(); }

  /// Reads INFOCIR_LLM_URL, INFOCIR_LLM_MODEL and INFOCIR_LLM_KEY.
  static LlmConfig from_env();
};

class LlmClient {
 public:
  explicit LlmClient(LlmConfig config);

  /// Sends one chat request and returns the assistant message content, or
  /// nullopt on transport failure, non-200 status or an unexpected body.
  std::optional<std::string> complete(const std::string& system_prompt, const std::string& user_prompt) const;

  const LlmConfig& config() const { return config_; }

 private:
  LlmConfig config_;
};

/// Parses an LLM reply as a JSON array of strings. Tolerates surrounding
/// prose or code fences as long as one well-formed array is present.
std::optional<std::vector<std::string>> parse_variant_array(const std::string& content);

struct VariantProposal {
  std::string text;
  std::string source;  // "llm" | "fallback" | "manual"
  bool operator==(const VariantProposal&) const = default;
};

struct EnhancementRequest {
  std::string session_id;
  std::size_t n_variants = 5;
  IdealAnchorSet ideals;
  ComposedQuery baseline;
  std::vector<std::string> manual_variants;  // evaluated alongside generated ones
};

struct PromptVariant {
  std::string text;
  std::string source;
  std::map<std::string, std::size_t> ideal_ranks;
  std::size_t best_ideal_rank = 0;
  double mean_ideal_rank = 0.0;
  long positive_delta_sum = 0;
  std::size_t deltas_row = 0;  // row index into the returned RankDeltaMatrix
};

struct EnhanceResult {
  std::vector<PromptVariant> variants;
  RankDeltaMatrix matrix;
};

std::string build_system_prompt(std::size_t n);
std::string build_user_prompt(const EnhancementRequest& request, const EmbeddingCorpus& corpus);

/// Template table instantiated from ideal-image metadata:
///   "a photo of {class}", "a {style} {class}", "{baseline} {class}",
///   "{class} in {style} style"
/// Templates needing a style are skipped for ideals without one.
std::vector<VariantProposal> fallback_variants(const EnhancementRequest& request, const EmbeddingCorpus& corpus);

/// At most n_variants unique strings distinct from the baseline modifier.
/// Uses the LLM when one is given and configured; any failure or malformed
/// reply falls back to the template table.
std::vector<VariantProposal> generate_variants(const EnhancementRequest& request, const EmbeddingCorpus& corpus,
                                               const LlmClient* llm);

/// Total order used to rank variants: best ideal rank, then mean ideal rank
/// (both ascending), then the sum of positive deltas over the baseline top-k
/// (descending), then the text.
bool variant_before(const PromptVariant& a, const PromptVariant& b);

/// Re-ranks the corpus for every proposal and returns the variants in
/// variant_before order with matrix rows aligned to that order.
EnhanceResult evaluate_variants(const RetrievalEngine& engine, const ComposedQuery& baseline,
                                const IdealAnchorSet& ideals, const std::vector<VariantProposal>& proposals);

/// generate_variants (plus manual variants) followed by evaluate_variants.
EnhanceResult enhance(const RetrievalEngine& engine, const EnhancementRequest& request, const LlmClient* llm);

/// Case- and whitespace-insensitive duplicate filter; drops the baseline itself.
std::vector<VariantProposal> dedupe_variants(const std::vector<VariantProposal>& proposals,
                                             const std::string& baseline_modifier);

}  // namespace infocir
