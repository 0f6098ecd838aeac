#include "infocir/projection.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_map>

#include "infocir/error.hpp"
#include "json.hpp"

namespace infocir {

using nlohmann::json;

namespace {

constexpr double kTransformEpsilon = 1e-8;

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::kInvalidArgument, "invalid projection config: " + message);
}

}  // namespace

void ProjectionConfig::validate() const {
  require(pca_keep > 0, "pca_keep must be positive");
  require(contrastive_lambda >= 0.0 && contrastive_lambda <= 1.0, "contrastive_lambda must be in [0, 1]");
  require(ica_components <= pca_keep, "ica_components must not exceed pca_keep");
  require(ica_max_iter > 0, "ica_max_iter must be positive");
  require(ica_tol > 0.0, "ica_tol must be positive");
  require(umap_neighbors >= 2, "umap_neighbors must be >= 2");
  require(umap_min_dist > 0.0, "umap_min_dist must be positive");
  require(umap_epochs > 0, "umap_epochs must be positive");
  require(umap_negative_rate > 0, "umap_negative_rate must be positive");
}

Matrix corpus_matrix(const EmbeddingCorpus& corpus) {
  Matrix x(static_cast<Eigen::Index>(corpus.count()), static_cast<Eigen::Index>(corpus.dim()));
  for (std::size_t i = 0; i < corpus.count(); ++i) {
    const auto row = corpus.row(i);
    for (std::size_t j = 0; j < corpus.dim(); ++j) x(Eigen::Index(i), Eigen::Index(j)) = row[j];
  }
  return x;
}

std::vector<std::string> corpus_labels(const EmbeddingCorpus& corpus) {
  std::vector<std::string> labels;
  labels.reserve(corpus.count());
  for (const auto& r : corpus.records()) labels.push_back(r.class_label);
  return labels;
}

ProjectionModel fit_projection(const EmbeddingCorpus& corpus, const ProjectionConfig& config,
                               const FitHooks& hooks) {
  config.validate();
  auto stage = [&](std::string_view name) {
    if (hooks.on_stage) hooks.on_stage(name);
  };

  ProjectionModel model;
  model.config = config;
  model.labels = corpus_labels(corpus);
  for (const auto& r : corpus.records()) model.ids.push_back(r.id);
  const Matrix x = corpus_matrix(corpus);

  // (A) keep the top-m principal components by Fisher score.
  stage("style_debias");
  const FisherAnalysis fisher = hooks.fisher ? hooks.fisher(x, model.labels) : fisher_scores(x, model.labels);
  const auto available = static_cast<std::size_t>(fisher.components.rows());
  const std::size_t m = std::min(config.pca_keep, available);
  model.config.pca_keep = m;
  if (model.config.ica_components == 0 || model.config.ica_components > m) model.config.ica_components = m;

  std::vector<Eigen::Index> order(available);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return fisher.scores(a) > fisher.scores(b); });
  model.pca_mean = fisher.mean;
  model.pca_components.resize(static_cast<Eigen::Index>(m), x.cols());
  model.component_scores.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    model.pca_components.row(Eigen::Index(j)) = fisher.components.row(order[j]);
    model.component_scores(Eigen::Index(j)) = fisher.scores(order[j]);
  }
  const Matrix stage_a = (x.rowwise() - model.pca_mean.transpose()) * model.pca_components.transpose();

  // (B) pull labeled points toward their class prototypes.
  stage("contrastive_debias");
  const Matrix stage_b = contrastive_debias(stage_a, model.labels, config.contrastive_lambda, &model.prototypes);

  // (C) FastICA.
  stage("ica");
  model.ica = fast_ica(stage_b, {model.config.ica_components, config.ica_max_iter, config.ica_tol, config.seed});
  model.umap_train_inputs = model.ica.apply(stage_b);

  model.lookup_inputs.resize(x.rows(), model.umap_train_inputs.cols());
  for (std::size_t i = 0; i < corpus.count(); ++i) {
    model.lookup_inputs.row(Eigen::Index(i)) = model.pipeline_coordinates(corpus.row(i)).transpose();
  }

  stage("umap");
  const UmapResult umap = umap_fit(model.umap_train_inputs,
                                   {config.umap_neighbors, config.umap_min_dist, 1.0, config.umap_epochs,
                                    config.umap_negative_rate, config.seed});
  model.layout = umap.layout;
  model.umap_a = umap.a;
  model.umap_b = umap.b;
  if (!model.layout.allFinite()) fail(ErrorKind::kInternal, "UMAP produced non-finite coordinates");
  return model;
}

ColVector ProjectionModel::pipeline_coordinates(std::span<const float> vector) const {
  if (vector.size() != dim()) fail(ErrorKind::kInvalidArgument, "dimension mismatch");
  ColVector v(static_cast<Eigen::Index>(vector.size()));
  for (std::size_t i = 0; i < vector.size(); ++i) v(Eigen::Index(i)) = vector[i];
  const ColVector a = pca_components * (v - pca_mean);
  return ica.apply(a);
}

TransformResult ProjectionModel::transform_detail(std::span<const float> vector) const {
  const ColVector p = pipeline_coordinates(vector);
  const auto n = static_cast<std::size_t>(lookup_inputs.rows());
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = (lookup_inputs.row(Eigen::Index(i)).transpose() - p).norm();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(config.umap_neighbors, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });

  TransformResult out;
  if (dist[order[0]] == 0.0) {
    out.neighbors = {order[0]};
    out.weights = {1.0};
    out.point = {layout(Eigen::Index(order[0]), 0), layout(Eigen::Index(order[0]), 1)};
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.neighbors.push_back(order[i]);
    out.weights.push_back(1.0 / (dist[order[i]] + kTransformEpsilon));
    total += out.weights.back();
  }
  for (std::size_t i = 0; i < k; ++i) {
    out.weights[i] /= total;
    out.point.x += out.weights[i] * layout(Eigen::Index(out.neighbors[i]), 0);
    out.point.y += out.weights[i] * layout(Eigen::Index(out.neighbors[i]), 1);
  }
  return out;
}

Projection2D ProjectionModel::project_corpus(const std::optional<std::vector<std::string>>& subset) const {
  Projection2D out;
  if (!subset) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out.points.emplace_back(ids[i], Point2D{layout(Eigen::Index(i), 0), layout(Eigen::Index(i), 1)});
    }
    return out;
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  for (const auto& id : *subset) {
    auto it = index.find(id);
    if (it == index.end()) fail(ErrorKind::kNotFound, "unknown image id " + id + ": use transform for out-of-sample points");
    out.points.emplace_back(id, Point2D{layout(Eigen::Index(it->second), 0), layout(Eigen::Index(it->second), 1)});
  }
  return out;
}

// --- quality ------------------------------------------------------------------

namespace {

std::vector<std::size_t> neighbors_of(const Matrix& pts, std::size_t i, std::size_t k) {
  const auto n = static_cast<std::size_t>(pts.rows());
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = (pts.row(Eigen::Index(j)) - pts.row(Eigen::Index(i))).squaredNorm();
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) order.push_back(j);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] != d[b] ? d[a] < d[b] : a < b; });
  order.resize(k);
  return order;
}

}  // namespace

double knn_purity(const Matrix& points, const std::vector<std::string>& labels, std::size_t k) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = neighbors_of(points, i, k);
    std::size_t same = 0;
    for (auto j : nb) same += labels[j] == labels[i];
    total += double(same) / double(nb.size());
  }
  return total / double(n);
}

double trustworthiness(const Matrix& high, const Matrix& low, std::size_t k) {
  const auto n = static_cast<std::size_t>(high.rows());
  if (n < 3 || 2 * n < 3 * k + 2) fail(ErrorKind::kInvalidArgument, "too few points for trustworthiness");
  double penalty = 0.0;
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto full = neighbors_of(high, i, n - 1);
    for (std::size_t r = 0; r < full.size(); ++r) rank[full[r]] = r + 1;
    const auto low_nb = neighbors_of(low, i, k);
    for (auto j : low_nb) {
      if (rank[j] > k) penalty += double(rank[j] - k);
    }
  }
  const double nn = double(n), kk = double(k);
  return 1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * penalty;
}

QualityMetrics quality_metrics(const ProjectionModel& model, const EmbeddingCorpus& corpus) {
  if (corpus.count() != model.ids.size()) fail(ErrorKind::kInvalidArgument, "corpus does not match model");
  QualityMetrics q;
  q.knn_purity = knn_purity(model.layout, corpus_labels(corpus), 10);
  q.trustworthiness = trustworthiness(model.umap_train_inputs, model.layout, 15);
  return q;
}

// --- serialization ------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_matrix(std::vector<std::uint8_t>& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }

  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::bit_cast<double>(u64());
    return m;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::kFormat, "projection model file truncated");
  }
  std::uint64_t take(int n) {
    need(std::size_t(n));
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | bytes_[pos_ + std::size_t(i)];
    pos_ += std::size_t(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

json config_json(const ProjectionConfig& c) {
  return {{"pca_keep", c.pca_keep},
          {"contrastive_lambda", c.contrastive_lambda},
          {"ica_components", c.ica_components},
          {"ica_max_iter", c.ica_max_iter},
          {"ica_tol", c.ica_tol},
          {"umap_neighbors", c.umap_neighbors},
          {"umap_min_dist", c.umap_min_dist},
          {"umap_epochs", c.umap_epochs},
          {"umap_negative_rate", c.umap_negative_rate},
          {"seed", c.seed}};
}

ProjectionConfig config_from(const json& j) {
  ProjectionConfig c;
  c.pca_keep = j.at("pca_keep").get<std::size_t>();
  c.contrastive_lambda = j.at("contrastive_lambda").get<double>();
  c.ica_components = j.at("ica_components").get<std::size_t>();
  c.ica_max_iter = j.at("ica_max_iter").get<int>();
  c.ica_tol = j.at("ica_tol").get<double>();
  c.umap_neighbors = j.at("umap_neighbors").get<std::size_t>();
  c.umap_min_dist = j.at("umap_min_dist").get<double>();
  c.umap_epochs = j.at("umap_epochs").get<int>();
  c.umap_negative_rate = j.at("umap_negative_rate").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

// Layout: "CIRP", u32 version, u64 header length, JSON header (config, ids,
// labels, shapes, scalars), then f64 LE arrays in header order.
std::vector<std::uint8_t> ProjectionModel::encode() const {
  json protos = json::array();
  for (const auto& [label, _] : prototypes) protos.push_back(label);
  json header = {{"config", config_json(config)},
                 {"ids", ids},
                 {"labels", labels},
                 {"dim", pca_mean.size()},
                 {"m", pca_components.rows()},
                 {"prototype_labels", protos},
                 {"ica_rank", ica.whitening.rows()},
                 {"ica_components", ica.unmixing.rows()},
                 {"ica_converged", ica.converged},
                 {"ica_iterations", ica.iterations},
                 {"umap_a", umap_a},
                 {"umap_b", umap_b}};
  const std::string h = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kModelMagic), std::end(kModelMagic));
  put_u32(out, kModelVersion);
  put_u64(out, h.size());
  out.insert(out.end(), h.begin(), h.end());
  put_matrix(out, pca_mean.transpose());
  put_matrix(out, pca_components);
  put_matrix(out, component_scores.transpose());
  for (const auto& [_, p] : prototypes) put_matrix(out, p.transpose());
  put_matrix(out, ica.mean.transpose());
  put_matrix(out, ica.whitening);
  put_matrix(out, ica.unmixing);
  put_matrix(out, umap_train_inputs);
  put_matrix(out, lookup_inputs);
  put_matrix(out, layout);
  return out;
}

ProjectionModel ProjectionModel::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "bad magic: not a projection model file");
  }
  Reader rd(bytes.subspan(4));
  if (rd.u32() != kModelVersion) fail(ErrorKind::kFormat, "projection model version mismatch");
  ProjectionModel m;
  json h;
  try {
    h = json::parse(rd.string(rd.u64()));
    m.config = config_from(h.at("config"));
    m.ids = h.at("ids").get<std::vector<std::string>>();
    m.labels = h.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed projection model header: ") + e.what());
  }
  const auto n = static_cast<Eigen::Index>(m.ids.size());
  const auto d = h.at("dim").get<Eigen::Index>();
  const auto mm = h.at("m").get<Eigen::Index>();
  const auto r = h.at("ica_rank").get<Eigen::Index>();
  const auto c = h.at("ica_components").get<Eigen::Index>();
  m.pca_mean = rd.matrix(1, d).transpose();
  m.pca_components = rd.matrix(mm, d);
  m.component_scores = rd.matrix(1, mm).transpose();
  for (const auto& label : h.at("prototype_labels")) m.prototypes[label.get<std::string>()] = rd.matrix(1, mm).transpose();
  m.ica.mean = rd.matrix(1, mm).transpose();
  m.ica.whitening = rd.matrix(r, mm);
  m.ica.unmixing = rd.matrix(c, r);
  m.ica.converged = h.at("ica_converged").get<bool>();
  m.ica.iterations = h.at("ica_iterations").get<int>();
  m.umap_train_inputs = rd.matrix(n, c);
  m.lookup_inputs = rd.matrix(n, c);
  m.layout = rd.matrix(n, 2);
  m.umap_a = h.at("umap_a").get<double>();
  m.umap_b = h.at("umap_b").get<double>();
  if (!rd.done()) fail(ErrorKind::kFormat, "trailing bytes in projection model file");
  return m;
}

void ProjectionModel::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

ProjectionModel ProjectionModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open projection model " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode(bytes);
}

}  // namespace infocir
