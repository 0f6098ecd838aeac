#include "infocir/fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "infocir/error.hpp"
#include "infocir/retrieval.hpp"
#include "json.hpp"

namespace infocir {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i, int width = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

Matrix random_orthonormal(std::size_t dim, SplitMix64& rng) {
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(dim, dim);
}

// Centers `centers` (rows) and scales them so that a balanced sample has the
// given total variance.
void center_and_scale(Matrix& centers, double variance) {
  centers.rowwise() -= centers.colwise().mean();
  const double mean_sq = centers.rowwise().squaredNorm().mean();
  centers *= std::sqrt(variance / mean_sq);
}

Vector to_unit_f32(const ColVector& x) {
  std::vector<double> acc(x.data(), x.data() + x.size());
  return normalized_f32(std::span<const double>(acc));
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

// --- brute-force distractor selection ------------------------------------

struct Candidate {
  std::vector<std::string> concepts;
  std::string class_label;
  double s_base = 0.0;
  double s_variant = 0.0;
};

struct ScenarioPlan {
  std::size_t above_both = 0;    // above the target under baseline and variant
  std::size_t above_base = 0;    // above under baseline only
  std::size_t fillers = 0;       // below under both
  double margin = 1e-3;
};

std::vector<Candidate> pick(const std::vector<Candidate>& pool, double base_t, double variant_t, const ScenarioPlan& plan) {
  std::vector<Candidate> both, base_only, below;
  for (const auto& c : pool) {
    const bool b_up = c.s_base > base_t + plan.margin;
    const bool b_down = c.s_base < base_t - plan.margin;
    const bool v_up = c.s_variant > variant_t + plan.margin;
    const bool v_down = c.s_variant < variant_t - plan.margin;
    if (b_up && v_up) both.push_back(c);
    else if (b_up && v_down) base_only.push_back(c);
    else if (b_down && v_down) below.push_back(c);
  }
  if (both.size() < plan.above_both || base_only.size() < plan.above_base || below.size() < plan.fillers) {
    fail(ErrorKind::kInternal, "scenario generator: concept pool too small for the requested ranks (" +
                                   std::to_string(both.size()) + " above both, " + std::to_string(base_only.size()) +
                                   " above baseline only, " + std::to_string(below.size()) + " below)");
  }
  std::vector<Candidate> out(both.begin(), both.begin() + plan.above_both);
  out.insert(out.end(), base_only.begin(), base_only.begin() + plan.above_base);
  out.insert(out.end(), below.begin(), below.begin() + plan.fillers);
  return out;
}

struct ScenarioWords {
  std::vector<std::string> objects;
  std::vector<std::string> attributes;
};

std::vector<Candidate> concept_pool(const ScenarioWords& words, const std::vector<std::string>& exclude) {
  std::vector<Candidate> pool;
  auto add = [&](std::vector<std::string> c, const std::string& obj) {
    auto sorted = c;
    auto ex = exclude;
    std::sort(sorted.begin(), sorted.end());
    std::sort(ex.begin(), ex.end());
    if (sorted == ex) return;
    pool.push_back({std::move(c), obj, 0.0, 0.0});
  };
  const auto& attrs = words.attributes;
  for (const auto& obj : words.objects) {
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      add({attrs[i], obj}, obj);
      for (std::size_t j = i + 1; j < attrs.size(); ++j) add({attrs[i], attrs[j], obj}, obj);
    }
  }
  return pool;
}

struct ScenarioSpec {
  std::string name;
  ScenarioWords words;
  std::vector<std::string> reference_concepts;
  std::vector<std::string> target_concepts;
  std::string target_class;
  std::optional<std::string> target_style;
  std::string baseline;
  std::string variant;
  std::size_t k;
  ScenarioPlan plan;
};

StubScenario build_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const GridShape grid{7, 7};
  std::vector<Cell> all_cells;
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t c = 0; c < grid.cols; ++c) all_cells.emplace_back(r, c);
  auto place = [&](const std::vector<std::string>& concepts) {
    auto cells = all_cells;
    shuffle(cells, rng);
    cells.resize(concepts.size());
    return StubImage{concepts, cells};
  };

  const std::uint64_t stub_seed = 0;
  const std::string reference_id = "ref-" + spec.name;
  StubCatalog catalog;
  catalog.grid = grid;
  catalog.images[reference_id] = place(spec.reference_concepts);

  StubProvider probe(catalog, kStubDefaultDim, stub_seed);
  const Vector q_base = probe.compose(Reference::image(reference_id), spec.baseline);
  const Vector q_variant = probe.compose(Reference::image(reference_id), spec.variant);
  auto embed_concepts = [&](const std::vector<std::string>& concepts) {
    StubCatalog tmp;
    tmp.grid = grid;
    tmp.images["x"] = place(concepts);
    return StubProvider(tmp, kStubDefaultDim, stub_seed).embed_image("x");
  };

  const Vector target_vec = embed_concepts(spec.target_concepts);
  const double base_t = cosine(q_base, target_vec);
  const double variant_t = cosine(q_variant, target_vec);

  auto pool = concept_pool(spec.words, spec.target_concepts);
  shuffle(pool, rng);
  for (auto& c : pool) {
    const auto v = embed_concepts(c.concepts);
    c.s_base = cosine(q_base, v);
    c.s_variant = cosine(q_variant, v);
  }
  auto chosen = pick(pool, base_t, variant_t, spec.plan);

  const std::size_t n = chosen.size() + 1;
  const std::size_t target_pos = rng.below(n);
  std::vector<ImageRecord> records;
  std::vector<float> vectors;
  std::size_t next = 0;
  std::string ideal_id;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = numbered((spec.name + "-").c_str(), i);
    ImageRecord rec;
    rec.id = id;
    rec.uri = "stub://" + id;
    std::vector<std::string> concepts;
    if (i == target_pos) {
      concepts = spec.target_concepts;
      rec.class_label = spec.target_class;
      rec.style_label = spec.target_style;
      ideal_id = id;
    } else {
      concepts = chosen[next].concepts;
      rec.class_label = chosen[next].class_label;
      ++next;
    }
    rec.caption = join(concepts);
    catalog.images[id] = place(concepts);
    records.push_back(std::move(rec));
  }
  StubProvider provider(catalog, kStubDefaultDim, stub_seed);
  for (const auto& r : records) {
    const auto v = provider.embed_image(r.id);
    vectors.insert(vectors.end(), v.begin(), v.end());
  }
  StubScenario s{.corpus = EmbeddingCorpus::create(kStubDefaultDim, std::move(vectors), std::move(records)),
                 .catalog = std::move(catalog),
                 .stub_seed = stub_seed,
                 .reference_id = reference_id,
                 .baseline_modifier = spec.baseline,
                 .variant_modifier = spec.variant,
                 .ideal_id = ideal_id,
                 .k = spec.k};

  RetrievalEngine engine(s.corpus, provider, 1);
  s.expected_baseline_rank = engine.rank_of({Reference::image(s.reference_id), spec.baseline, s.k}, s.ideal_id);
  s.expected_variant_rank = engine.rank_of({Reference::image(s.reference_id), spec.variant, s.k}, s.ideal_id);
  const std::size_t want_base = spec.plan.above_both + spec.plan.above_base + 1;
  const std::size_t want_variant = spec.plan.above_both + 1;
  if (s.expected_baseline_rank != want_base || s.expected_variant_rank != want_variant) {
    fail(ErrorKind::kInternal, "scenario generator: constructed ranks do not match the plan");
  }
  return s;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace

EmbeddingCorpus random_corpus(std::size_t n, std::size_t dim, std::uint64_t seed, std::size_t n_classes) {
  if (n == 0 || dim == 0 || n_classes == 0) fail(ErrorKind::kInvalidArgument, "random corpus needs n, dim, classes > 0");
  SplitMix64 rng(seed);
  std::vector<float> vectors;
  vectors.reserve(n * dim);
  std::vector<ImageRecord> records;
  std::vector<double> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    Vector v;
    while (v.empty()) {
      for (auto& x : row) x = rng.normal();
      v = normalized_f32(std::span<const double>(row));
    }
    vectors.insert(vectors.end(), v.begin(), v.end());
    const std::string id = numbered("img-", i, 5);
    records.push_back({id, "synthetic://" + id, numbered("class-", i % n_classes, 2), std::nullopt,
                       "synthetic image " + std::to_string(i)});
  }
  return EmbeddingCorpus::create(dim, std::move(vectors), std::move(records));
}

StyleCorpus style_confounded_corpus(const StyleCorpusSpec& spec) {
  static const char* kClassNames[] = {"cat", "dog", "bird", "horse", "fish", "deer"};
  static const char* kStyleNames[] = {"sketch", "oil painting", "cartoon", "photograph", "watercolor", "mosaic"};
  if (spec.classes < 2 || spec.classes > 6 || spec.styles < 1 || spec.styles > 6) {
    fail(ErrorKind::kInvalidArgument, "style corpus supports 2-6 classes and 1-6 styles");
  }
  if (spec.dim < spec.classes + spec.styles + 1) fail(ErrorKind::kInvalidArgument, "style corpus dim too small");

  SplitMix64 rng(spec.seed);
  const Matrix basis = random_orthonormal(spec.dim, rng);
  Matrix class_centers(spec.classes, spec.dim), style_centers(spec.styles, spec.dim);
  // Regular simplices: one basis axis per class and per style before centering.
  for (std::size_t c = 0; c < spec.classes; ++c) class_centers.row(c) = basis.col(c).transpose();
  for (std::size_t s = 0; s < spec.styles; ++s) style_centers.row(s) = basis.col(spec.classes + s).transpose();
  center_and_scale(class_centers, spec.class_variance);
  center_and_scale(style_centers, spec.class_variance * spec.style_to_class);
  const ColVector offset = spec.offset * basis.col(spec.dim - 1);
  const double noise_sd = std::sqrt(spec.noise_variance / double(spec.dim));

  std::vector<std::string> styles;
  std::vector<float> vectors;
  std::vector<ImageRecord> records;
  std::size_t n = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t s = 0; s < spec.styles; ++s) {
      for (std::size_t i = 0; i < spec.per_cell; ++i) {
        ColVector x = offset + class_centers.row(c).transpose() + style_centers.row(s).transpose();
        for (Eigen::Index d = 0; d < x.size(); ++d) x(d) += noise_sd * rng.normal();
        const auto v = to_unit_f32(x);
        vectors.insert(vectors.end(), v.begin(), v.end());
        const std::string id = numbered("sty-", n++, 4);
        records.push_back({id, "synthetic://" + id, kClassNames[c], std::string(kStyleNames[s]),
                           std::string("a ") + kStyleNames[s] + " of a " + kClassNames[c]});
        styles.push_back(kStyleNames[s]);
      }
    }
  }
  return StyleCorpus{EmbeddingCorpus::create(spec.dim, std::move(vectors), std::move(records)), std::move(styles),
                     class_centers.rowwise().squaredNorm().mean(), style_centers.rowwise().squaredNorm().mean()};
}

ProjectionConfig style_corpus_projection_config(std::uint64_t seed) {
  ProjectionConfig c;
  c.pca_keep = 8;
  c.seed = seed;
  return c;
}

FisherFixture fisher_fixture(std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (dim < 2 || n < 6) fail(ErrorKind::kInvalidArgument, "fisher fixture needs dim >= 2 and n >= 6");
  SplitMix64 rng(seed);
  const Matrix basis = random_orthonormal(dim, rng);
  FisherFixture f;
  f.class_axis = basis.col(0);
  f.style_axis = basis.col(1);
  f.x.resize(n, dim);
  const double class_offset[] = {-std::sqrt(1.5), 0.0, std::sqrt(1.5)};  // variance 1
  const char* names[] = {"a", "b", "c"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 3;
    ColVector x = (class_offset[c] + 0.3 * rng.normal()) * f.class_axis;
    x += std::sqrt(3.0) * rng.normal() * f.style_axis;
    for (std::size_t j = 2; j < dim; ++j) x += 0.1 * rng.normal() * basis.col(j);
    f.x.row(i) = x.transpose();
    f.labels.push_back(names[c]);
  }
  return f;
}

IcaFixture ica_fixture(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  IcaFixture f;
  f.sources.resize(n, 2);
  for (Eigen::Index i = 0; i < f.sources.rows(); ++i)
    for (Eigen::Index j = 0; j < 2; ++j) f.sources(i, j) = std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
  f.mixing.resize(2, 2);
  do {
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) f.mixing(i, j) = rng.normal();
  } while (std::abs(f.mixing.determinant()) < 0.3);
  f.mixed = f.sources * f.mixing.transpose();
  return f;
}

StubScenario apple_scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.name = "apple";
  spec.words = {{"apple", "pear", "cherry", "plum", "tomato", "leaf"},
                {"red", "green", "crimson", "yellow", "ripe", "sliced", "fresh", "wooden", "basket", "table", "bowl"}};
  spec.reference_concepts = {"green", "apple"};
  spec.target_concepts = {"crimson", "apple", "table"};
  spec.target_class = "apple";
  spec.baseline = "a red apple";
  spec.variant = "crimson apple";
  spec.k = 15;
  spec.plan = {1, 10, 48, 1e-3};
  return build_scenario(spec, seed);
}

StubScenario terrier_scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.name = "dog";
  spec.words = {{"dog", "terrier", "poodle", "puppy", "cat", "beagle"},
                {"small", "black", "white", "brown", "fluffy", "spotted", "park", "grass", "cartoon", "sofa", "ball"}};
  spec.reference_concepts = {"small", "black", "white", "dog"};
  spec.target_concepts = {"boston", "terrier", "cartoon", "small"};
  spec.target_class = "Boston Terrier";
  spec.target_style = "cartoon";
  spec.baseline = "small black and white dog";
  spec.variant = "a cartoon Boston Terrier";
  spec.k = 10;
  spec.plan = {0, 5, 45, 1e-3};
  return build_scenario(spec, seed);
}

void write_scenario(const StubScenario& s, const fs::path& dir) {
  write_corpus(s.corpus, dir);
  s.catalog.save(dir / kStubCatalogName);
  json meta = {{"reference_id", s.reference_id},
               {"baseline_modifier", s.baseline_modifier},
               {"variant_modifier", s.variant_modifier},
               {"ideal_id", s.ideal_id},
               {"k", s.k},
               {"stub_seed", s.stub_seed},
               {"stub_dim", s.corpus.dim()},
               {"expected_baseline_rank", s.expected_baseline_rank},
               {"expected_variant_rank", s.expected_variant_rank}};
  write_text(dir / "scenario.json", meta.dump(2) + "\n");
}

StubScenario read_scenario(const fs::path& dir) {
  std::ifstream in(dir / "scenario.json");
  if (!in) fail(ErrorKind::kNotFound, "missing " + (dir / "scenario.json").string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("scenario.json: ") + e.what());
  }
  StubScenario s{.corpus = ingest_dir_or_manifest(dir), .catalog = StubCatalog::load(dir / kStubCatalogName)};
  s.reference_id = meta.at("reference_id").get<std::string>();
  s.baseline_modifier = meta.at("baseline_modifier").get<std::string>();
  s.variant_modifier = meta.at("variant_modifier").get<std::string>();
  s.ideal_id = meta.at("ideal_id").get<std::string>();
  s.k = meta.at("k").get<std::size_t>();
  s.stub_seed = meta.at("stub_seed").get<std::uint64_t>();
  s.expected_baseline_rank = meta.at("expected_baseline_rank").get<std::size_t>();
  s.expected_variant_rank = meta.at("expected_variant_rank").get<std::size_t>();
  return s;
}

void make_fixtures(const fs::path& out_dir, std::uint64_t seed) {
  StyleCorpusSpec style_spec;
  style_spec.seed = seed;
  const auto style = style_confounded_corpus(style_spec);
  write_corpus(style.corpus, out_dir / "style");
  write_text(out_dir / "style" / "fixture.json",
             json{{"seed", seed},
                  {"class_variance", style.class_variance},
                  {"style_variance", style.style_variance}}
                     .dump(2) + "\n");

  write_scenario(apple_scenario(seed), out_dir / "apple");
  write_scenario(terrier_scenario(seed), out_dir / "terrier");

  const auto ica = ica_fixture(2000, seed);
  fs::create_directories(out_dir / "ica");
  write_text(out_dir / "ica" / "mixtures.json",
             json{{"seed", seed}, {"mixing", matrix_json(ica.mixing)}, {"sources", matrix_json(ica.sources)},
                  {"mixed", matrix_json(ica.mixed)}}
                     .dump() + "\n");
}

}  // namespace infocir
