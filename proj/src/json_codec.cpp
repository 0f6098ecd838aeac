#include "infocir/json_codec.hpp"

#include "infocir/error.hpp"

namespace infocir {

namespace {

json vector_json(std::span<const float> v) {
  json arr = json::array();
  for (float x : v) arr.push_back(double(x));
  return arr;
}

Vector vector_from(const json& j) {
  if (!j.is_array() || j.empty()) fail(ErrorKind::kInvalidArgument, "reference vector must be a non-empty number array");
  Vector v;
  for (const auto& x : j) {
    if (!x.is_number()) fail(ErrorKind::kInvalidArgument, "reference vector must be a non-empty number array");
    v.push_back(static_cast<float>(x.get<double>()));
  }
  return v;
}

}  // namespace

void to_json(json& j, const RankedEntry& v) {
  j = {{"id", v.image_id}, {"similarity", v.similarity}, {"rank", v.rank}};
}

void to_json(json& j, const RankedList& v) { j = v.entries; }

void to_json(json& j, const RankDeltaMatrix& v) {
  j = {{"columns", v.baseline_top_k},
       {"rows", v.variants},
       {"deltas", v.deltas},
       {"ideal_ranks", v.ideal_ranks},
       {"baseline_ideal_ranks", v.baseline_ideal_ranks}};
}

void to_json(json& j, const PromptVariant& v) {
  j = {{"text", v.text},
       {"source", v.source},
       {"ideal_ranks", v.ideal_ranks},
       {"best_ideal_rank", v.best_ideal_rank},
       {"mean_ideal_rank", v.mean_ideal_rank},
       {"positive_delta_sum", v.positive_delta_sum},
       {"deltas_row", v.deltas_row}};
}

void to_json(json& j, const EnhanceResult& v) { j = {{"variants", v.variants}, {"matrix", v.matrix}}; }

void to_json(json& j, const VariantProposal& v) { j = {{"text", v.text}, {"source", v.source}}; }

void from_json(const json& j, VariantProposal& v) {
  v.text = j.at("text").get<std::string>();
  v.source = j.at("source").get<std::string>();
}

void to_json(json& j, const ClassHistogram& v) {
  j = json::array();
  for (const auto& [label, count] : v.bins) j.push_back({{"class", label}, {"count", count}});
}

void to_json(json& j, const WordCloudWeights& v) {
  j = json::array();
  for (const auto& [term, w] : v.terms) j.push_back({{"term", term}, {"weight", w}});
}

void to_json(json& j, const TokenAttribution& v) {
  j = {{"tokens", v.tokens}, {"scores", v.scores}, {"mode", v.mode}, {"s_full", v.s_full}};
}

void to_json(json& j, const GridShape& v) { j = {v.rows, v.cols}; }

void to_json(json& j, const SaliencyGrid& v) {
  j = {{"grid", v.grid}, {"raw", v.raw_deltas}, {"normalized", v.normalized}, {"target_id", v.target_id},
       {"mode", v.mode}};
}

void to_json(json& j, const PairExplanation& v) {
  j = {{"s_full", v.s_full}, {"tokens", v.tokens}, {"ideal_saliency", v.ideal}};
  j["reference_saliency"] = v.reference ? json(*v.reference) : json(nullptr);
}

void to_json(json& j, const Point2D& v) { j = {{"x", v.x}, {"y", v.y}}; }

void to_json(json& j, const ProviderInfo& v) {
  j = {{"name", v.name}, {"dim", v.dim}, {"capabilities", v.capabilities}};
}

void to_json(json& j, const QualityMetrics& v) {
  j = {{"knn_purity", v.knn_purity}, {"trustworthiness", v.trustworthiness}};
}

json reference_to_json(const Reference& ref) {
  if (ref.is_image()) return {{"id", ref.image_ref()}};
  return {{"vector", vector_json(ref.raw_vector())}};
}

Reference reference_from_json(const json& j) {
  if (j.is_string()) return Reference::image(j.get<std::string>());
  if (!j.is_object()) fail(ErrorKind::kInvalidArgument, "reference must be a string or an object");
  for (const char* key : {"id", "uri", "ref"}) {
    if (j.contains(key)) {
      if (!j.at(key).is_string()) fail(ErrorKind::kInvalidArgument, std::string("reference ") + key + " must be a string");
      return Reference::image(j.at(key).get<std::string>());
    }
  }
  if (j.contains("vector")) return Reference::vector(vector_from(j.at("vector")));
  fail(ErrorKind::kInvalidArgument, "reference needs \"id\", \"uri\" or \"vector\"");
}

json query_to_json(const ComposedQuery& q) {
  return {{"reference", reference_to_json(q.reference)}, {"modifier", q.modifier}, {"k", q.k}};
}

ComposedQuery query_from_json(const json& j) {
  if (!j.contains("reference")) fail(ErrorKind::kInvalidArgument, "missing \"reference\"");
  ComposedQuery q;
  q.reference = reference_from_json(j.at("reference"));
  if (j.contains("modifier")) {
    if (!j.at("modifier").is_string()) fail(ErrorKind::kInvalidArgument, "modifier must be a string");
    q.modifier = j.at("modifier").get<std::string>();
  }
  if (j.contains("k")) {
    const auto& k = j.at("k");
    if (!k.is_number_integer() || k.get<long long>() <= 0) fail(ErrorKind::kInvalidArgument, "k must be a positive integer");
    q.k = k.get<std::size_t>();
  }
  return q;
}

GridShape grid_from_json(const json& j) {
  if (j.is_null()) return {};
  std::size_t rows = 0, cols = 0;
  try {
    if (j.is_array() && j.size() == 2) {
      rows = j.at(0).get<std::size_t>();
      cols = j.at(1).get<std::size_t>();
    } else if (j.is_object()) {
      rows = j.at("rows").get<std::size_t>();
      cols = j.at("cols").get<std::size_t>();
    } else {
      fail(ErrorKind::kInvalidArgument, "grid must be [rows, cols]");
    }
  } catch (const json::exception&) {
    fail(ErrorKind::kInvalidArgument, "grid must be [rows, cols]");
  }
  if (rows == 0 || cols == 0) fail(ErrorKind::kInvalidArgument, "grid dimensions must be positive");
  return {rows, cols};
}

json projection_to_json(const Projection2D& p, const EmbeddingCorpus* corpus) {
  json points = json::array();
  for (const auto& [id, pt] : p.points) {
    json e = {{"id", id}, {"x", pt.x}, {"y", pt.y}};
    std::optional<std::size_t> idx = corpus ? corpus->find(id) : std::nullopt;
    e["class"] = idx ? json(corpus->record(*idx).class_label) : json(nullptr);
    points.push_back(std::move(e));
  }
  return points;
}

}  // namespace infocir
