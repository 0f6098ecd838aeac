#pragma once

// nlohmann::json conversions for the domain types exchanged over HTTP, in
// session events and in CLI output.

#include "infocir/analytics.hpp"
#include "infocir/attribution.hpp"
#include "infocir/projection.hpp"
#include "infocir/prompt_enhancer.hpp"
#include "infocir/provider.hpp"
#include "infocir/retrieval.hpp"
#include "json.hpp"

namespace infocir {

using nlohmann::json;

void to_json(json& j, const RankedEntry& v);
void to_json(json& j, const RankedList& v);
void to_json(json& j, const RankDeltaMatrix& v);
void to_json(json& j, const PromptVariant& v);
void to_json(json& j, const EnhanceResult& v);
void to_json(json& j, const VariantProposal& v);
void from_json(const json& j, VariantProposal& v);
void to_json(json& j, const ClassHistogram& v);
void to_json(json& j, const WordCloudWeights& v);
void to_json(json& j, const TokenAttribution& v);
void to_json(json& j, const SaliencyGrid& v);
void to_json(json& j, const PairExplanation& v);
void to_json(json& j, const GridShape& v);
void to_json(json& j, const Point2D& v);
void to_json(json& j, const ProviderInfo& v);
void to_json(json& j, const QualityMetrics& v);

/// {"id": "..."} for image references, {"vector": [...]} for raw embeddings.
json reference_to_json(const Reference& ref);
/// Accepts a bare string, {"id"}, {"uri"} or {"vector"}. Throws kInvalidArgument.
Reference reference_from_json(const json& j);

json query_to_json(const ComposedQuery& q);
ComposedQuery query_from_json(const json& j);

/// Optional "grid": [rows, cols] or {"rows", "cols"}; default 7x7.
GridShape grid_from_json(const json& j);

/// Points as [{"id", "x", "y"}] with the class label of each corpus id.
json projection_to_json(const Projection2D& p, const EmbeddingCorpus* corpus);

}  // namespace infocir
