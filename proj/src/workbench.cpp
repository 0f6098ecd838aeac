#include "infocir/workbench.hpp"

#include "infocir/error.hpp"
#include "infocir/json_codec.hpp"

namespace infocir {

namespace {

struct SessionState {
  std::optional<ComposedQuery> baseline;
  std::vector<std::string> baseline_top_k;
  std::vector<std::string> ideals;
};

SessionState fold(const Session& s) {
  SessionState st;
  if (const auto* e = s.last(kEventQueryIssued)) {
    st.baseline = query_from_json(e->payload.at("query"));
    st.baseline_top_k = e->payload.at("top_k").get<std::vector<std::string>>();
  }
  if (const auto* e = s.last(kEventIdealsSelected)) st.ideals = e->payload.at("ideals").get<std::vector<std::string>>();
  return st;
}

void require_session_id(const std::string& id) {
  if (!valid_session_id(id)) fail(ErrorKind::kInvalidArgument, "invalid session id: \"" + id + "\"");
}

}  // namespace

Workbench::Workbench(std::shared_ptr<const EmbeddingCorpus> corpus, std::shared_ptr<const Provider> provider,
                     std::shared_ptr<const ProjectionModel> model, WorkbenchOptions options)
    : provider_(std::move(provider)),
      options_(std::move(options)),
      store_(options_.data_dir),
      llm_(options_.llm) {
  if (!corpus || !provider_) fail(ErrorKind::kInvalidArgument, "workbench needs a corpus and a provider");
  RetrievalEngine check(*corpus, *provider_);  // dimension check
  snap_ = {std::move(corpus), std::move(model), 1};
  if (snap_.model) fit_status_ = {"done", "", std::nullopt, snap_.generation};
}

Workbench::~Workbench() {
  if (fit_thread_.joinable()) fit_thread_.join();
}

Snapshot Workbench::snapshot() const {
  std::lock_guard lock(snap_mu_);
  return snap_;
}

void Workbench::swap_snapshot(std::shared_ptr<const EmbeddingCorpus> corpus,
                              std::shared_ptr<const ProjectionModel> model) {
  if (!corpus) fail(ErrorKind::kInvalidArgument, "null corpus");
  RetrievalEngine check(*corpus, *provider_);
  std::lock_guard lock(snap_mu_);
  snap_ = {std::move(corpus), std::move(model), snap_.generation + 1};
}

std::shared_ptr<const ProjectionModel> Workbench::require_model(const Snapshot& s) const {
  if (!s.model) fail(ErrorKind::kConflict, "projection model not fitted");
  return s.model;
}

QueryResponse Workbench::query(const ComposedQuery& q, std::optional<std::string> session_id) {
  const Snapshot snap = snapshot();
  const std::string sid = session_id ? *session_id : new_session_id();
  require_session_id(sid);
  if (q.k < 1 || q.k > snap.corpus->count()) {
    fail(ErrorKind::kInvalidArgument, "k must be in [1, " + std::to_string(snap.corpus->count()) + "]");
  }
  const auto model = require_model(snap);
  auto lock_ptr = store_.session_mutex(sid);
  std::lock_guard lock(*lock_ptr);

  RetrievalEngine engine(*snap.corpus, *provider_, options_.max_in_flight);
  const Vector qv = engine.compose(q);
  QueryResponse r;
  r.session_id = sid;
  r.query = q;
  r.ranked = engine.rank_vector(qv);
  r.ranked.entries.resize(q.k);

  std::vector<std::string> ids;
  for (const auto& e : r.ranked.entries) ids.push_back(e.image_id);
  r.projection = model->project_corpus(ids);
  r.projection.points.emplace_back(kQueryPointId, model->transform(qv));
  r.histogram = class_histogram(r.ranked, *snap.corpus);
  r.word_cloud = word_cloud(r.ranked, *snap.corpus);

  store_.append(sid, kEventQueryIssued, {{"query", query_to_json(q)}, {"top_k", ids}});
  return r;
}

IdealAnchorSet Workbench::select_ideals(const std::string& session_id, const std::vector<std::string>& ids) {
  require_session_id(session_id);
  const Snapshot snap = snapshot();
  auto lock_ptr = store_.session_mutex(session_id);
  std::lock_guard lock(*lock_ptr);
  auto anchors = IdealAnchorSet::make(*snap.corpus, ids);
  store_.append(session_id, kEventIdealsSelected, {{"ideals", anchors.image_ids}});
  return anchors;
}

EnhanceResult Workbench::enhance(const std::string& session_id, std::size_t n_variants,
                                 const std::vector<std::string>& manual_variants) {
  require_session_id(session_id);
  const Snapshot snap = snapshot();
  auto lock_ptr = store_.session_mutex(session_id);
  std::lock_guard lock(*lock_ptr);

  const SessionState st = store_.exists(session_id) ? fold(store_.load(session_id)) : SessionState{};
  if (st.ideals.empty()) fail(ErrorKind::kConflict, "no ideal anchors: select ideals first");
  if (!st.baseline) fail(ErrorKind::kConflict, "no baseline query: issue a query first");

  EnhancementRequest req;
  req.session_id = session_id;
  req.n_variants = n_variants;
  req.ideals = IdealAnchorSet::make(*snap.corpus, st.ideals);
  req.baseline = *st.baseline;
  req.manual_variants = manual_variants;

  RetrievalEngine engine(*snap.corpus, *provider_, options_.max_in_flight);
  std::vector<VariantProposal> proposals;
  for (const auto& m : manual_variants) proposals.push_back({m, "manual"});
  for (auto& p : generate_variants(req, *snap.corpus, &llm_)) proposals.push_back(std::move(p));
  proposals = dedupe_variants(proposals, req.baseline.modifier);

  EnhanceResult result = evaluate_variants(engine, req.baseline, req.ideals, proposals);
  store_.append(session_id, kEventVariantsEvaluated,
                {{"baseline", query_to_json(req.baseline)},
                 {"ideals", req.ideals.image_ids},
                 {"n_variants", n_variants},
                 {"proposals", proposals},
                 {"result", result}});
  return result;
}

PairExplanation Workbench::attribution(const std::string& session_id, const std::optional<std::string>& variant_text,
                                       const std::string& ideal_id, GridShape grid) {
  require_session_id(session_id);
  const Snapshot snap = snapshot();
  snap.corpus->index_of(ideal_id);
  auto lock_ptr = store_.session_mutex(session_id);
  std::lock_guard lock(*lock_ptr);

  const SessionState st = store_.exists(session_id) ? fold(store_.load(session_id)) : SessionState{};
  if (!st.baseline) fail(ErrorKind::kConflict, "no baseline query: issue a query first");
  const std::string modifier = variant_text.value_or(st.baseline->modifier);

  AttributionEngine engine(*snap.corpus, *provider_, options_.max_in_flight);
  PairExplanation ex = engine.explain_pair(st.baseline->reference, modifier, ideal_id, grid);
  store_.append(session_id, kEventAttributionRequested,
                {{"reference", reference_to_json(st.baseline->reference)},
                 {"variant_text", modifier},
                 {"ideal_id", ideal_id},
                 {"grid", grid},
                 {"s_full", ex.s_full},
                 {"token_scores", ex.tokens.scores}});
  return ex;
}

Projection2D Workbench::projection(const std::string& scope, const std::optional<std::string>& session_id) const {
  const Snapshot snap = snapshot();
  if (scope == "corpus") return require_model(snap)->project_corpus();
  if (scope != "topk") fail(ErrorKind::kInvalidArgument, "scope must be \"corpus\" or \"topk\"");
  if (!session_id) fail(ErrorKind::kInvalidArgument, "scope=topk needs a session_id");
  require_session_id(*session_id);
  const auto model = require_model(snap);
  const SessionState st = fold(store_.load(*session_id));
  if (!st.baseline) fail(ErrorKind::kConflict, "no baseline query: issue a query first");
  Projection2D p = model->project_corpus(st.baseline_top_k);
  RetrievalEngine engine(*snap.corpus, *provider_, options_.max_in_flight);
  p.points.emplace_back(kQueryPointId, model->transform(engine.compose(*st.baseline)));
  return p;
}

Session Workbench::session(const std::string& session_id) const {
  require_session_id(session_id);
  return store_.load(session_id);
}

std::vector<ReplayCheck> Workbench::replay(const std::string& session_id) const {
  const Session s = session(session_id);
  const Snapshot snap = snapshot();
  RetrievalEngine engine(*snap.corpus, *provider_, options_.max_in_flight);
  std::vector<ReplayCheck> out;
  for (const auto& e : s.events) {
    if (e.type != kEventVariantsEvaluated) continue;
    ReplayCheck c;
    c.seq = e.seq;
    c.recorded = e.payload.at("result").dump();
    const auto baseline = query_from_json(e.payload.at("baseline"));
    const auto ideals = IdealAnchorSet::make(*snap.corpus, e.payload.at("ideals").get<std::vector<std::string>>());
    const auto proposals = e.payload.at("proposals").get<std::vector<VariantProposal>>();
    c.recomputed = json(evaluate_variants(engine, baseline, ideals, proposals)).dump();
    c.matches = c.recorded == c.recomputed;
    out.push_back(std::move(c));
  }
  return out;
}

bool Workbench::start_fit(const ProjectionConfig& config) {
  config.validate();
  std::lock_guard lock(fit_mu_);
  if (fit_status_.state == "running") return false;
  if (fit_thread_.joinable()) fit_thread_.join();
  const Snapshot snap = snapshot();
  fit_status_ = {"running", "", std::nullopt, snap.generation};
  fit_thread_ = std::thread([this, snap, config] {
    FitStatus done{"done", "", std::nullopt, snap.generation};
    try {
      auto model = std::make_shared<const ProjectionModel>(fit_projection(*snap.corpus, config));
      done.quality = quality_metrics(*model, *snap.corpus);
      std::lock_guard slock(snap_mu_);
      if (snap_.corpus == snap.corpus) {
        snap_.model = std::move(model);
      } else {
        done = {"failed", "corpus replaced during fit", std::nullopt, snap.generation};
      }
    } catch (const std::exception& e) {
      done = {"failed", e.what(), std::nullopt, snap.generation};
    }
    std::lock_guard flock(fit_mu_);
    fit_status_ = std::move(done);
  });
  return true;
}

FitStatus Workbench::fit_status() const {
  std::lock_guard lock(fit_mu_);
  return fit_status_;
}

void Workbench::wait_for_fit() {
  std::thread t;
  {
    std::lock_guard lock(fit_mu_);
    t = std::move(fit_thread_);
  }
  if (t.joinable()) t.join();
}

nlohmann::json to_json(const QueryResponse& r, const EmbeddingCorpus& corpus) {
  return {{"session_id", r.session_id},
          {"ranked", r.ranked},
          {"projection", projection_to_json(r.projection, &corpus)},
          {"histogram", r.histogram},
          {"word_cloud", r.word_cloud}};
}

}  // namespace infocir
