#include "infocir/acceptance.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "acceptance_oracles.hpp"
#include "infocir/attribution.hpp"
#include "infocir/error.hpp"
#include "infocir/fixtures.hpp"
#include "infocir/json_codec.hpp"
#include "infocir/prompt_enhancer.hpp"
#include "infocir/retrieval.hpp"
#include "infocir/text.hpp"

namespace infocir {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Ctx {
  std::uint64_t seed;
  std::function<FisherAnalysis(const Matrix&, const std::vector<std::string>&)> fisher;
  fs::path dir;
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<float> unit_random(SplitMix64& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return normalized_f32(std::span<const double>(v));
}

std::string random_phrase(SplitMix64& rng) {
  static const char* kWords[] = {"red", "dog", "in", "snow", "a", "painting", "of", "bright", "city", "night"};
  const std::size_t n = rng.below(4);
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(kWords[rng.below(std::size(kWords))]);
  return join_words(w);
}

// --- criteria ---------------------------------------------------------------

CriterionResult retrieval_exactness(const Ctx& ctx) {
  const StubProvider stub({}, 128, 0);
  std::size_t matching = 0;
  bool fast = true;
  for (std::size_t c = 0; c < 50; ++c) {
    const auto corpus = random_corpus(200, 128, ctx.seed * 1000 + c);
    SplitMix64 rng(ctx.seed * 7919 + c);
    const auto base = unit_random(rng, 128);
    const std::string modifier = random_phrase(rng);
    RetrievalEngine engine(corpus, stub, 1);

    const auto t0 = Clock::now();
    const auto ranked = engine.rank_all({Reference::vector(base), modifier, 10});
    fast = fast && seconds_since(t0) < 1.0;

    std::vector<std::vector<float>> rows;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < corpus.count(); ++i) {
      rows.emplace_back(corpus.row(i).begin(), corpus.row(i).end());
      ids.push_back(corpus.record(i).id);
    }
    const auto expected = oracle::ranking(rows, ids, oracle::compose(base, modifier, 128, 0));
    std::vector<std::string> got;
    for (const auto& e : ranked.entries) got.push_back(e.image_id);
    if (got == expected) ++matching;
  }
  return {"retrieval_exactness", matching == 50 && fast, {{"corpora", 50}, {"matching", matching}}};
}

CriterionResult rank_delta_identity(const Ctx& ctx) {
  const StubProvider stub({}, 128, 0);
  const auto corpus = random_corpus(200, 128, ctx.seed * 31 + 5);
  RetrievalEngine engine(corpus, stub, 4);
  SplitMix64 rng(ctx.seed * 131 + 9);
  std::size_t zero_rows = 0, full_sets = 0, checked = 0;
  const std::size_t queries = 20;
  for (std::size_t q = 0; q < queries; ++q) {
    ComposedQuery base{Reference::vector(unit_random(rng, 128)), random_phrase(rng), 10};
    std::vector<std::string> variants = {base.modifier, "bright city", "snow painting at night"};
    const auto ideals = IdealAnchorSet::make(
        corpus, {corpus.record(rng.below(corpus.count())).id, corpus.record(rng.below(corpus.count())).id});
    const auto m = engine.rank_delta(base, variants, ideals);
    if (std::all_of(m.deltas[0].begin(), m.deltas[0].end(), [](long d) { return d == 0; })) ++zero_rows;
    for (const auto& v : variants) {
      const auto ranked = engine.rank_all({base.reference, v, base.k});
      std::vector<std::size_t> ranks;
      std::set<std::string> ids;
      for (const auto& e : ranked.entries) {
        ranks.push_back(e.rank);
        ids.insert(e.image_id);
      }
      std::sort(ranks.begin(), ranks.end());
      std::vector<std::size_t> expected(corpus.count());
      std::iota(expected.begin(), expected.end(), 1);
      if (ranks == expected && ids.size() == corpus.count()) ++full_sets;
      ++checked;
    }
  }
  return {"rank_delta_identity",
          zero_rows == queries && full_sets == checked,
          {{"queries", queries}, {"zero_baseline_rows", zero_rows}, {"full_rank_sets", full_sets}, {"variants", checked}}};
}

CriterionResult scenario_fixture(const Ctx& ctx) {
  const fs::path dir = ctx.dir / "apple";
  write_scenario(apple_scenario(ctx.seed), dir);
  auto run = [&] {
    const auto s = read_scenario(dir);
    const StubProvider stub(s.catalog, s.corpus.dim(), s.stub_seed);
    RetrievalEngine engine(s.corpus, stub, 4);
    const ComposedQuery baseline{Reference::image(s.reference_id), s.baseline_modifier, s.k};
    const auto ideals = IdealAnchorSet::make(s.corpus, {s.ideal_id});
    const auto result = evaluate_variants(engine, baseline, ideals,
                                          {{s.variant_modifier, "manual"}, {"a green apple on a table", "manual"}});
    return std::make_pair(s, result);
  };
  const auto [s, first] = run();
  const auto second = run().second;

  const auto& cols = first.matrix.baseline_top_k;
  const auto col = std::find(cols.begin(), cols.end(), s.ideal_id);
  const long delta = col == cols.end() ? 0 : first.matrix.deltas.at(0).at(std::size_t(col - cols.begin()));
  const std::size_t base_rank = first.matrix.baseline_ideal_ranks.at(s.ideal_id);
  const auto& top = first.variants.at(0);
  const bool ok = base_rank == 12 && top.text == s.variant_modifier && top.best_ideal_rank == 2 && delta == 10 &&
                  json(first).dump() == json(second).dump();
  return {"scenario_rank_12_to_2",
          ok,
          {{"baseline_rank", base_rank},
           {"variant", top.text},
           {"variant_rank", top.best_ideal_rank},
           {"heatmap_delta", delta},
           {"k", s.k}}};
}

CriterionResult top3_task(const Ctx& ctx) {
  const fs::path dir = ctx.dir / "terrier";
  write_scenario(terrier_scenario(ctx.seed), dir);
  const auto s = read_scenario(dir);
  const StubProvider stub(s.catalog, s.corpus.dim(), s.stub_seed);
  RetrievalEngine engine(s.corpus, stub, 4);

  EnhancementRequest req;
  req.session_id = "acceptance";
  req.ideals = IdealAnchorSet::make(s.corpus, {s.ideal_id});
  req.baseline = {Reference::image(s.reference_id), s.baseline_modifier, s.k};
  const auto first = enhance(engine, req, nullptr);
  const auto second = enhance(engine, req, nullptr);

  const std::size_t base_rank = first.matrix.baseline_ideal_ranks.at(s.ideal_id);
  const std::string class_token = to_lower(s.corpus.record(s.ideal_id).class_label);
  std::optional<PromptVariant> hit;
  for (const auto& v : first.variants) {
    if (to_lower(v.text).find(class_token) != std::string::npos && v.best_ideal_rank <= 3) {
      hit = v;
      break;
    }
  }
  json variants = json::array();
  for (const auto& v : first.variants) variants.push_back({{"text", v.text}, {"ideal_rank", v.best_ideal_rank}});
  const bool ok = base_rank > 3 && base_rank <= s.k && hit.has_value() && json(first).dump() == json(second).dump();
  return {"top3_task",
          ok,
          {{"baseline_rank", base_rank},
           {"class_token", class_token},
           {"winning_variant", hit ? json(hit->text) : json(nullptr)},
           {"variants", variants}}};
}

CriterionResult pipeline_debiasing(const Ctx& ctx) {
  StyleCorpusSpec spec;
  spec.seed = ctx.seed;
  const auto sc = style_confounded_corpus(spec);
  const auto config = style_corpus_projection_config(ctx.seed);
  FitHooks hooks;
  hooks.fisher = ctx.fisher;

  const auto t0 = Clock::now();
  const auto model = fit_projection(sc.corpus, config, hooks);
  const auto labels = corpus_labels(sc.corpus);
  const double pipeline = knn_purity(model.layout, labels, 10);
  UmapOptions raw_opts;
  raw_opts.n_neighbors = config.umap_neighbors;
  raw_opts.min_dist = config.umap_min_dist;
  raw_opts.n_epochs = config.umap_epochs;
  raw_opts.negative_sample_rate = config.umap_negative_rate;
  raw_opts.seed = config.seed;
  const auto raw = umap_fit(corpus_matrix(sc.corpus), raw_opts);
  const double raw_purity = knn_purity(raw.layout, labels, 10);
  const bool fast = seconds_since(t0) < 60.0;

  return {"pipeline_debiasing",
          pipeline >= 0.85 && pipeline > raw_purity && fast,
          {{"points", sc.corpus.count()},
           {"style_to_class_variance", sc.style_variance / sc.class_variance},
           {"pipeline_purity", pipeline},
           {"raw_umap_purity", raw_purity}}};
}

CriterionResult fastica_recovery(const Ctx& ctx) {
  std::size_t passing = 0;
  json indices = json::array();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto f = ica_fixture(2000, ctx.seed * 100 + s);
    FastIcaOptions opts;
    opts.components = 2;
    opts.seed = ctx.seed * 100 + s;
    const auto ica = fast_ica(f.mixed, opts);
    const double a = oracle::amari(ica.unmixing * ica.whitening * f.mixing);
    indices.push_back(a);
    if (a < 0.15) ++passing;
  }
  return {"fastica_recovery", passing >= 9, {{"runs", 10}, {"passing", passing}, {"amari", indices}}};
}

CriterionResult pca_fisher(const Ctx& ctx) {
  const auto f = fisher_fixture(600, 16, ctx.seed);
  const auto fa = ctx.fisher ? ctx.fisher(f.x, f.labels) : fisher_scores(f.x, f.labels);
  Eigen::Index top = 0;
  fa.scores.maxCoeff(&top);
  const double align = std::abs(fa.components.row(top).dot(f.class_axis.transpose()) / fa.components.row(top).norm());

  const Matrix y = contrastive_debias(f.x, f.labels, 1.0);
  std::map<std::string, std::pair<ColVector, int>> sums;
  for (Eigen::Index i = 0; i < f.x.rows(); ++i) {
    auto& [sum, n] = sums.try_emplace(f.labels[std::size_t(i)], ColVector::Zero(f.x.cols()), 0).first->second;
    sum += f.x.row(i).transpose();
    ++n;
  }
  double min_cos = 1.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const auto& [sum, n] = sums.at(f.labels[std::size_t(i)]);
    const ColVector proto = sum / double(n);
    min_cos = std::min(min_cos, y.row(i).dot(proto.transpose()) / (y.row(i).norm() * proto.norm()));
  }
  return {"pca_fisher_correctness",
          align > 0.95 && min_cos > 1.0 - 1e-6,
          {{"top_component_alignment", align}, {"min_prototype_cosine", min_cos}}};
}

CriterionResult transform_stability(const Ctx& ctx) {
  StyleCorpusSpec spec;
  spec.per_cell = 20;
  spec.seed = ctx.seed + 17;
  const auto sc = style_confounded_corpus(spec);
  FitHooks hooks;
  hooks.fisher = ctx.fisher;
  const auto model = fit_projection(sc.corpus, style_corpus_projection_config(ctx.seed), hooks);

  std::size_t exact = 0;
  for (std::size_t i = 0; i < sc.corpus.count(); ++i) {
    const auto p = model.transform(sc.corpus.row(i));
    if (p.x == model.layout(Eigen::Index(i), 0) && p.y == model.layout(Eigen::Index(i), 1)) ++exact;
  }

  SplitMix64 rng(ctx.seed * 977 + 3);
  std::size_t violations = 0;
  const std::size_t probes = 1000;
  for (std::size_t k = 0; k < probes; ++k) {
    std::vector<double> v(sc.corpus.dim());
    if (k % 2 == 0) {
      for (auto& x : v) x = rng.normal();
    } else {
      const auto a = sc.corpus.row(rng.below(sc.corpus.count()));
      const auto b = sc.corpus.row(rng.below(sc.corpus.count()));
      const double t = rng.uniform();
      for (std::size_t d = 0; d < v.size(); ++d) v[d] = t * a[d] + (1 - t) * b[d] + 0.05 * rng.normal();
    }
    const auto q = normalized_f32(std::span<const double>(v));
    const auto r = model.transform_detail(q);
    std::vector<std::pair<double, double>> hull_pts;
    double scale = 0.0;
    for (auto n : r.neighbors) {
      hull_pts.emplace_back(model.layout(Eigen::Index(n), 0), model.layout(Eigen::Index(n), 1));
      scale = std::max({scale, std::abs(hull_pts.back().first), std::abs(hull_pts.back().second)});
    }
    if (!oracle::in_hull(hull_pts, {r.point.x, r.point.y}, 1e-9 * std::max(1.0, scale))) ++violations;
  }
  return {"transform_stability",
          exact == sc.corpus.count() && violations == 0,
          {{"rows", sc.corpus.count()}, {"exact_rows", exact}, {"probes", probes}, {"hull_violations", violations}}};
}

CriterionResult attribution_oracles(const Ctx& ctx) {
  const auto s = apple_scenario(ctx.seed);
  const StubProvider stub(s.catalog, s.corpus.dim(), s.stub_seed);
  AttributionEngine engine(s.corpus, stub, 4);
  const std::size_t dim = s.corpus.dim();

  const auto ref_vec = oracle::concepts_vector(s.catalog.images.at(s.reference_id).concepts, dim, s.stub_seed);
  double max_err = 0.0;
  std::size_t tokens_checked = 0;
  for (const std::string& modifier : {s.baseline_modifier, s.variant_modifier, std::string("a red apple on a wooden table")}) {
    for (const auto& [id, img] : s.catalog.images) {
      if (id == s.reference_id) continue;
      const auto ideal = oracle::concepts_vector(img.concepts, dim, s.stub_seed);
      const auto got = engine.token_attribution(Reference::image(s.reference_id), modifier, id,
                                                AttributionMode::kPerturbation);
      const auto words = tokenize_words(modifier);
      const double s_full = oracle::cosine(oracle::compose(ref_vec, modifier, dim, s.stub_seed), ideal);
      for (std::size_t i = 0; i < words.size(); ++i) {
        std::string rest;
        for (std::size_t j = 0; j < words.size(); ++j)
          if (j != i) rest += words[j] + " ";
        const double expected = s_full - oracle::cosine(oracle::compose(ref_vec, rest, dim, s.stub_seed), ideal);
        max_err = std::max(max_err, std::abs(expected - got.scores.at(i)));
        ++tokens_checked;
      }
    }
  }

  // Saliency: each image carries one planted concept matching the query.
  static const char* kVocab[] = {"sky", "tree", "road", "car", "house", "river", "cloud", "bench", "lamp", "fence"};
  SplitMix64 rng(ctx.seed * 4243 + 1);
  StubCatalog catalog;
  catalog.grid = {7, 7};
  std::vector<std::pair<std::string, Cell>> planted;
  std::vector<std::string> planted_words;
  for (std::size_t k = 0; k < 100; ++k) {
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < 7; ++c) cells.emplace_back(r, c);
    for (std::size_t i = cells.size(); i > 1; --i) std::swap(cells[i - 1], cells[rng.below(i)]);
    const std::string word = "planted" + std::to_string(k);
    StubImage img{{word}, {cells[0]}};
    std::set<std::string> used;
    for (std::size_t j = 1; j <= 3; ++j) {
      std::string c = kVocab[rng.below(std::size(kVocab))];
      while (!used.insert(c).second) c = kVocab[rng.below(std::size(kVocab))];
      img.concepts.push_back(c);
      img.cells.push_back(cells[j]);
    }
    const std::string id = "sal-" + std::to_string(k);
    catalog.images[id] = img;
    planted.emplace_back(id, cells[0]);
    planted_words.push_back(word);
  }
  const StubProvider sal_stub(catalog, dim, 0);
  std::vector<float> vectors;
  std::vector<ImageRecord> records;
  for (const auto& [id, _] : planted) {
    const auto v = sal_stub.embed_image(id);
    vectors.insert(vectors.end(), v.begin(), v.end());
    records.push_back({id, "", "planted", std::nullopt, ""});
  }
  const auto sal_corpus = EmbeddingCorpus::create(dim, std::move(vectors), std::move(records));
  AttributionEngine sal_engine(sal_corpus, sal_stub, 4);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < planted.size(); ++k) {
    const auto query = oracle::text_vector(planted_words[k], dim, 0);
    const auto g = sal_engine.saliency(planted[k].first, query, {7, 7}, AttributionMode::kPerturbation);
    Cell best{0, 0};
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < 7; ++c)
        if (g.normalized[r][c] > g.normalized[best.first][best.second]) best = {r, c};
    if (best == planted[k].second) ++hits;
  }
  return {"attribution_oracles",
          max_err <= 1e-6 && hits == planted.size(),
          {{"tokens_checked", tokens_checked},
           {"max_token_error_within_1e-6", max_err <= 1e-6},
           {"saliency_images", planted.size()},
           {"saliency_argmax_hits", hits}}};
}

CriterionResult format_round_trip(const Ctx& ctx) {
  SplitMix64 rng(ctx.seed * 65537 + 11);
  std::size_t exact = 0;
  bool golden = true;
  for (std::size_t c = 0; c < 20; ++c) {
    const std::size_t n = 1 + rng.below(60);
    const std::size_t d = 1 + rng.below(96);
    const auto corpus = random_corpus(n, d, ctx.seed * 2654435761ULL + c, 1 + rng.below(5));
    const fs::path a = ctx.dir / ("fmt-a-" + std::to_string(c));
    const fs::path b = ctx.dir / ("fmt-b-" + std::to_string(c));
    write_corpus(corpus, a);
    const auto back = ingest(a / kManifestName);
    write_corpus(back, b);
    const auto bytes_a = read_bytes(a / kEmbeddingsName);
    const bool same = bytes_a == read_bytes(b / kEmbeddingsName) &&
                      read_bytes(a / kManifestName) == read_bytes(b / kManifestName) &&
                      back.records() == corpus.records() &&
                      std::equal(back.data().begin(), back.data().end(), corpus.data().begin(), corpus.data().end(),
                                 [](float x, float y) { return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y); });
    if (same) ++exact;
    const std::vector<float> values(corpus.data().begin(), corpus.data().end());
    golden = golden && bytes_a == oracle::golden_embeddings(n, d, values);
  }
  return {"format_round_trip", exact == 20 && golden, {{"corpora", 20}, {"byte_exact", exact}, {"golden_layout", golden}}};
}

using Criterion = CriterionResult (*)(const Ctx&);

const std::vector<std::pair<const char*, Criterion>>& criteria() {
  static const std::vector<std::pair<const char*, Criterion>> list = {
      {"retrieval_exactness", retrieval_exactness},
      {"rank_delta_identity", rank_delta_identity},
      {"scenario_rank_12_to_2", scenario_fixture},
      {"top3_task", top3_task},
      {"pipeline_debiasing", pipeline_debiasing},
      {"fastica_recovery", fastica_recovery},
      {"pca_fisher_correctness", pca_fisher},
      {"transform_stability", transform_stability},
      {"attribution_oracles", attribution_oracles},
      {"format_round_trip", format_round_trip},
  };
  return list;
}

std::vector<CriterionResult> run_once(const Ctx& ctx) {
  std::vector<CriterionResult> out;
  for (const auto& [name, fn] : criteria()) {
    try {
      out.push_back(fn(ctx));
    } catch (const std::exception& e) {
      out.push_back({name, false, {{"error", e.what()}}});
    }
  }
  return out;
}

fs::path make_work_dir(const fs::path& requested) {
  static std::atomic<int> counter{0};
  fs::path dir = requested.empty() ? fs::temp_directory_path() / ("infocir-accept-" + std::to_string(::getpid()) + "-" +
                                                                   std::to_string(counter++))
                                   : requested;
  fs::create_directories(dir);
  return dir;
}

}  // namespace

bool AcceptanceReport::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const auto& c) { return c.passed; });
}

nlohmann::json AcceptanceReport::to_json() const {
  json list = json::array();
  for (const auto& c : criteria) list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"suite", "infocir-acceptance"}, {"seed", seed}, {"passed", passed()}, {"criteria", list}};
}

AcceptanceReport run_acceptance(const AcceptanceOptions& options) {
  const auto t0 = Clock::now();
  const fs::path root = make_work_dir(options.work_dir);
  AcceptanceReport report;
  report.seed = options.seed;

  const Ctx first{options.seed, options.fisher, root / "run1"};
  fs::create_directories(first.dir);
  report.criteria = run_once(first);

  if (options.check_determinism) {
    const Ctx second{options.seed, options.fisher, root / "run2"};
    fs::create_directories(second.dir);
    const auto again = run_once(second);
    json mismatches = json::array();
    for (std::size_t i = 0; i < again.size(); ++i) {
      const auto& a = report.criteria[i];
      const auto& b = again[i];
      if (a.passed != b.passed || a.detail.dump() != b.detail.dump()) mismatches.push_back(a.name);
    }
    const bool fast = seconds_since(t0) < 300.0;
    CriterionResult det{"determinism", mismatches.empty() && fast,
                        {{"criteria_compared", again.size()}, {"mismatches", mismatches}}};
    report.criteria.insert(report.criteria.begin() + 9, std::move(det));
  }
  if (options.work_dir.empty()) {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  return report;
}

FisherAnalysis perturbed_fisher(const Matrix& x, const std::vector<std::string>& labels) {
  FisherAnalysis fa = fisher_scores(x, labels);
  fa.scores = fa.variances;
  return fa;
}

}  // namespace infocir
