#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infocir/embedding_store.hpp"

namespace infocir {

using Matrix = Eigen::MatrixXd;  // samples are rows
using ColVector = Eigen::VectorXd;

// --- Stage A: PCA with per-component Fisher scores -------------------------

struct FisherAnalysis {
  ColVector mean;        // D
  Matrix components;     // r x D, orthonormal rows, descending variance
  ColVector variances;   // r
  ColVector scores;      // r, between-class / within-class variance
  std::vector<std::string> warnings;
};

/// PCA of `x` followed by a Fisher score per principal component. Requires
/// at least two distinct labels. Classes with a single sample are left out of
/// the within-class term (a warning is recorded).
FisherAnalysis fisher_scores(const Matrix& x, const std::vector<std::string>& labels);

/// Between/within variance ratio of the scalar projections `p`.
double fisher_ratio(std::span<const double> p, const std::vector<std::string>& labels,
                    std::vector<std::string>* warnings = nullptr);

// --- Stage B: contrastive debiasing -----------------------------------------

/// Moves each row toward its class prototype: (1 - lambda) * y + lambda * p,
/// then rescales the result to the row's original norm. lambda = 0 returns
/// the input untouched.
Matrix contrastive_debias(const Matrix& y, const std::vector<std::string>& labels, double lambda,
                          std::map<std::string, ColVector>* prototypes = nullptr);

// --- Stage C: FastICA ---------------------------------------------------------

struct FastIcaOptions {
  std::size_t components = 0;  // 0 = all whitened dimensions
  int max_iter = 200;
  double tol = 1e-4;
  std::uint64_t seed = 0;
};

struct FastIcaResult {
  ColVector mean;     // m
  Matrix whitening;   // r x m, r = numerical rank of the covariance
  Matrix unmixing;    // c x r, orthonormal rows
  bool converged = false;
  int iterations = 0;

  Matrix apply(const Matrix& x) const;  // N x m -> N x c
  ColVector apply(const ColVector& x) const;
};

/// Symmetric-decorrelation FastICA with g = tanh.
FastIcaResult fast_ica(const Matrix& x, const FastIcaOptions& options);

/// Amari index of a square gain matrix (0 = perfect signed permutation).
double amari_index(const Matrix& p);

// --- UMAP ---------------------------------------------------------------------

struct UmapOptions {
  std::size_t n_neighbors = 15;
  double min_dist = 0.1;
  double spread = 1.0;
  int n_epochs = 200;
  int negative_sample_rate = 5;
  std::uint64_t seed = 0;
};

struct UmapResult {
  Matrix layout;  // N x 2
  double a = 0.0;
  double b = 0.0;
};

/// Fits a and b of the low-dimensional kernel 1 / (1 + a d^(2b)).
std::pair<double, double> fit_umap_ab(double min_dist, double spread);

/// Exact Euclidean k-NN fuzzy graph + seeded SGD layout. Single-threaded so
/// the output is byte-stable for a given seed.
UmapResult umap_fit(const Matrix& x, const UmapOptions& options);

// --- Full pipeline ------------------------------------------------------------

struct ProjectionConfig {
  std::size_t pca_keep = 64;
  double contrastive_lambda = 0.35;
  std::size_t ica_components = 0;  // 0 = same as the effective pca_keep
  int ica_max_iter = 200;
  double ica_tol = 1e-4;
  std::size_t umap_neighbors = 15;
  double umap_min_dist = 0.1;
  int umap_epochs = 200;
  int umap_negative_rate = 5;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Point2D {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2D&) const = default;
};

struct Projection2D {
  std::vector<std::pair<std::string, Point2D>> points;  // request order
};

struct TransformResult {
  Point2D point;
  std::vector<std::size_t> neighbors;  // training rows used
  std::vector<double> weights;         // normalized, aligned with neighbors
};

struct ProjectionModel {
  ProjectionConfig config;
  std::vector<std::string> ids;
  std::vector<std::string> labels;

  ColVector pca_mean;
  Matrix pca_components;  // m x D, ordered by Fisher score
  ColVector component_scores;
  std::map<std::string, ColVector> prototypes;

  FastIcaResult ica;

  Matrix umap_train_inputs;  // N x c, stages A -> B -> C
  Matrix lookup_inputs;      // N x c, stages A -> C (the out-of-sample path)
  Matrix layout;             // N x 2
  double umap_a = 0.0;
  double umap_b = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(pca_mean.size()); }

  /// Stage A then stage C for an unlabeled vector.
  ColVector pipeline_coordinates(std::span<const float> vector) const;

  TransformResult transform_detail(std::span<const float> vector) const;
  Point2D transform(std::span<const float> vector) const { return transform_detail(vector).point; }

  /// Fitted layout coordinates. Unknown ids throw kNotFound.
  Projection2D project_corpus(const std::optional<std::vector<std::string>>& ids = std::nullopt) const;

  std::vector<std::uint8_t> encode() const;
  static ProjectionModel decode(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static ProjectionModel load(const std::filesystem::path& path);
};

inline constexpr char kModelMagic[4] = {'C', 'I', 'R', 'P'};
inline constexpr std::uint32_t kModelVersion = 1;

struct FitHooks {
  // Called with "style_debias", "contrastive_debias", "ica", "umap" as each stage starts.
  std::function<void(std::string_view)> on_stage;
  // Replaces the Fisher scoring routine (instrumentation and mutation tests).
  std::function<FisherAnalysis(const Matrix&, const std::vector<std::string>&)> fisher;
};

ProjectionModel fit_projection(const EmbeddingCorpus& corpus, const ProjectionConfig& config,
                               const FitHooks& hooks = {});

struct QualityMetrics {
  double knn_purity = 0.0;       // k = 10 in the 2-D layout
  double trustworthiness = 0.0;  // k = 15, pipeline space vs layout
};

QualityMetrics quality_metrics(const ProjectionModel& model, const EmbeddingCorpus& corpus);

double knn_purity(const Matrix& points, const std::vector<std::string>& labels, std::size_t k);
double trustworthiness(const Matrix& high, const Matrix& low, std::size_t k);

Matrix corpus_matrix(const EmbeddingCorpus& corpus);
std::vector<std::string> corpus_labels(const EmbeddingCorpus& corpus);

}  // namespace infocir
