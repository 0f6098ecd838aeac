#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "infocir/analytics.hpp"
#include "infocir/attribution.hpp"
#include "infocir/embedding_store.hpp"
#include "infocir/projection.hpp"
#include "infocir/prompt_enhancer.hpp"
#include "infocir/provider.hpp"
#include "infocir/retrieval.hpp"
#include "infocir/session_store.hpp"
#include "json.hpp"

namespace infocir {

struct WorkbenchOptions {
  std::filesystem::path data_dir = "infocir-data";
  std::size_t max_in_flight = 8;
  LlmConfig llm;
};

/// Corpus and projection model are replaced together, never mutated.
struct Snapshot {
  std::shared_ptr<const EmbeddingCorpus> corpus;
  std::shared_ptr<const ProjectionModel> model;  // null until fitted
  std::uint64_t generation = 0;
};

struct QueryResponse {
  std::string session_id;
  ComposedQuery query;
  RankedList ranked;        // top-k
  Projection2D projection;  // top-k points followed by "query"
  ClassHistogram histogram;
  WordCloudWeights word_cloud;
};

struct FitStatus {
  std::string state = "idle";  // idle | running | done | failed
  std::string error;
  std::optional<QualityMetrics> quality;
  std::uint64_t generation = 0;
};

struct ReplayCheck {
  std::uint64_t seq = 0;
  bool matches = false;
  std::string recorded;
  std::string recomputed;
};

inline constexpr const char* kQueryPointId = "query";

/// Session-aware facade over the engine modules. Every mutating call appends
/// exactly one event to its session after the work succeeded; read calls
/// append nothing. Session state (baseline query, ideals) is folded from the
/// session's event log.
class Workbench {
 public:
  Workbench(std::shared_ptr<const EmbeddingCorpus> corpus, std::shared_ptr<const Provider> provider,
            std::shared_ptr<const ProjectionModel> model, WorkbenchOptions options);
  ~Workbench();

  Workbench(const Workbench&) = delete;
  Workbench& operator=(const Workbench&) = delete;

  /// A missing session id starts a new session.
  QueryResponse query(const ComposedQuery& q, std::optional<std::string> session_id = std::nullopt);
  IdealAnchorSet select_ideals(const std::string& session_id, const std::vector<std::string>& ids);
  EnhanceResult enhance(const std::string& session_id, std::size_t n_variants = 5,
                        const std::vector<std::string>& manual_variants = {});
  /// Explains the session's reference composed with variant_text (the
  /// baseline modifier when absent) against ideal_id.
  PairExplanation attribution(const std::string& session_id, const std::optional<std::string>& variant_text,
                              const std::string& ideal_id, GridShape grid = {});

  /// scope "corpus" (all rows) or "topk" (last query of the session plus the query point).
  Projection2D projection(const std::string& scope, const std::optional<std::string>& session_id) const;

  Session session(const std::string& session_id) const;
  /// Recomputes every variants_evaluated event from its payload and compares
  /// the serialized result byte for byte.
  std::vector<ReplayCheck> replay(const std::string& session_id) const;

  /// Fits a projection of the current corpus on a background thread; the
  /// model is installed when the fit finishes unless the corpus changed in
  /// the meantime. Returns false when a fit is already running.
  bool start_fit(const ProjectionConfig& config);
  FitStatus fit_status() const;
  void wait_for_fit();

  /// Atomically replaces corpus and model (re-ingest).
  void swap_snapshot(std::shared_ptr<const EmbeddingCorpus> corpus, std::shared_ptr<const ProjectionModel> model);
  Snapshot snapshot() const;

  const Provider& provider() const { return *provider_; }
  SessionStore& store() { return store_; }

 private:
  std::shared_ptr<const ProjectionModel> require_model(const Snapshot& s) const;

  std::shared_ptr<const Provider> provider_;
  WorkbenchOptions options_;
  SessionStore store_;
  LlmClient llm_;

  mutable std::mutex snap_mu_;
  Snapshot snap_;

  mutable std::mutex fit_mu_;
  FitStatus fit_status_;
  std::thread fit_thread_;
};

nlohmann::json to_json(const QueryResponse& r, const EmbeddingCorpus& corpus);

}  // namespace infocir
