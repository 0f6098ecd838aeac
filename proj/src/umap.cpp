#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "infocir/error.hpp"
#include "infocir/projection.hpp"
#include "infocir/vecmath.hpp"

namespace infocir {

namespace {

constexpr double kSmoothKTolerance = 1e-5;
constexpr double kMinKDistScale = 1e-3;
constexpr int kBinarySearchSteps = 64;
constexpr double kGradClip = 4.0;

struct Knn {
  std::vector<std::vector<std::size_t>> indices;  // per row, self first
  std::vector<std::vector<double>> distances;
};

Knn exact_knn(const Matrix& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  Knn out;
  out.indices.resize(n);
  out.distances.resize(n);
  const ColVector sq = x.rowwise().squaredNorm();
  const Matrix gram = x * x.transpose();
  std::vector<std::size_t> order(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      dist[j] = i == j ? 0.0 : std::sqrt(std::max(0.0, sq(ii) + sq(jj) - 2.0 * gram(ii, jj)));
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (a == i) return b != i;  // self first
                        if (b == i) return false;
                        return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
                      });
    out.indices[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto j : out.indices[i]) out.distances[i].push_back(dist[j]);
  }
  return out;
}

// Per-point rho (distance to nearest neighbor) and sigma such that the
// membership strengths sum to log2(k).
void smooth_knn_dist(const Knn& knn, std::size_t k, std::vector<double>& sigmas, std::vector<double>& rhos) {
  const std::size_t n = knn.indices.size();
  const double target = std::log2(double(k));
  sigmas.assign(n, 0.0);
  rhos.assign(n, 0.0);
  double mean_all = 0.0;
  for (const auto& d : knn.distances) mean_all += std::accumulate(d.begin(), d.end(), 0.0);
  mean_all /= double(n * k);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = knn.distances[i];
    for (double v : d) {
      if (v > 0.0) {
        rhos[i] = v;
        break;
      }
    }
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int step = 0; step < kBinarySearchSteps; ++step) {
      double psum = 0.0;
      for (std::size_t j = 1; j < d.size(); ++j) {
        const double delta = d[j] - rhos[i];
        psum += delta > 0.0 ? std::exp(-delta / mid) : 1.0;
      }
      if (std::abs(psum - target) < kSmoothKTolerance) break;
      if (psum > target) {
        hi = mid;
        mid = (lo + hi) / 2.0;
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
      }
    }
    const double mean_i = std::accumulate(d.begin(), d.end(), 0.0) / double(d.size());
    sigmas[i] = rhos[i] > 0.0 ? std::max(mid, kMinKDistScale * mean_i) : std::max(mid, kMinKDistScale * mean_all);
  }
}

struct Edge {
  std::size_t head;
  std::size_t tail;
  double weight;
};

// Fuzzy union of the directed membership graph: w = a + b - a * b.
std::vector<Edge> fuzzy_graph(const Knn& knn, const std::vector<double>& sigmas, const std::vector<double>& rhos) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> directed;
  for (std::size_t i = 0; i < knn.indices.size(); ++i) {
    for (std::size_t j = 0; j < knn.indices[i].size(); ++j) {
      const auto t = knn.indices[i][j];
      if (t == i) continue;
      const double delta = knn.distances[i][j] - rhos[i];
      const double w = (delta <= 0.0 || sigmas[i] == 0.0) ? 1.0 : std::exp(-delta / sigmas[i]);
      directed.emplace_back(i, t, w);
    }
  }
  std::vector<std::tuple<std::size_t, std::size_t, double, double>> both;
  both.reserve(directed.size() * 2);
  for (const auto& [i, j, w] : directed) {
    both.emplace_back(i, j, w, 0.0);
    both.emplace_back(j, i, 0.0, w);
  }
  std::sort(both.begin(), both.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::vector<Edge> edges;
  for (std::size_t s = 0; s < both.size();) {
    const auto i = std::get<0>(both[s]);
    const auto j = std::get<1>(both[s]);
    double fwd = 0.0, rev = 0.0;
    while (s < both.size() && std::get<0>(both[s]) == i && std::get<1>(both[s]) == j) {
      fwd = std::max(fwd, std::get<2>(both[s]));
      rev = std::max(rev, std::get<3>(both[s]));
      ++s;
    }
    const double w = fwd + rev - fwd * rev;
    if (w > 0.0) edges.push_back({i, j, w});
  }
  return edges;
}

Matrix initial_layout(const Matrix& x, SplitMix64& rng) {
  const auto n = x.rows();
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Matrix layout(n, 2);
  if (x.cols() >= 2) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig((centered.transpose() * centered) / double(n));
    const auto d = x.cols();
    for (int c = 0; c < 2; ++c) {
      ColVector v = eig.eigenvectors().col(d - 1 - c);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      layout.col(c) = centered * v;
    }
  } else {
    layout.col(0) = centered.col(0);
    layout.col(1).setZero();
  }
  const double extent = layout.cwiseAbs().maxCoeff();
  if (extent > 0.0) layout *= 10.0 / extent;
  for (Eigen::Index i = 0; i < n; ++i) {
    layout(i, 0) += 1e-4 * rng.normal();
    layout(i, 1) += 1e-4 * rng.normal();
  }
  return layout;
}

double clip(double v) { return std::clamp(v, -kGradClip, kGradClip); }

}  // namespace

std::pair<double, double> fit_umap_ab(double min_dist, double spread) {
  constexpr int kSamples = 300;
  std::vector<double> xs(kSamples), ys(kSamples);
  for (int i = 0; i < kSamples; ++i) {
    xs[i] = 3.0 * spread * double(i) / double(kSamples - 1);
    ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }
  auto residuals = [&](double a, double b, double* sse, Eigen::Matrix2d* jtj, Eigen::Vector2d* jtr) {
    double s = 0.0;
    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int i = 0; i < kSamples; ++i) {
      const double x = xs[i];
      const double p = x > 0.0 ? std::pow(x, 2.0 * b) : 0.0;
      const double denom = 1.0 + a * p;
      const double r = 1.0 / denom - ys[i];
      s += r * r;
      if (jtj) {
        const double da = -p / (denom * denom);
        const double db = x > 0.0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0;
        const Eigen::Vector2d jrow(da, db);
        h += jrow * jrow.transpose();
        g += jrow * r;
      }
    }
    *sse = s;
    if (jtj) *jtj = h;
    if (jtr) *jtr = g;
  };

  // Levenberg-Marquardt from (1, 1).
  double a = 1.0, b = 1.0, mu = 1e-3, sse = 0.0;
  residuals(a, b, &sse, nullptr, nullptr);
  for (int it = 0; it < 500; ++it) {
    Eigen::Matrix2d h;
    Eigen::Vector2d g;
    double cur = 0.0;
    residuals(a, b, &cur, &h, &g);
    Eigen::Matrix2d damped = h;
    damped(0, 0) += mu * std::max(h(0, 0), 1e-12);
    damped(1, 1) += mu * std::max(h(1, 1), 1e-12);
    const Eigen::Vector2d step = damped.ldlt().solve(-g);
    const double na = a + step(0), nb = b + step(1);
    double trial = std::numeric_limits<double>::infinity();
    if (na > 0.0 && nb > 0.0) residuals(na, nb, &trial, nullptr, nullptr);
    if (trial < cur) {
      a = na;
      b = nb;
      mu = std::max(mu / 10.0, 1e-12);
      if (cur - trial < 1e-15 * std::max(1.0, cur)) break;
    } else {
      mu *= 10.0;
      if (mu > 1e12) break;
    }
  }
  return {a, b};
}

UmapResult umap_fit(const Matrix& x, const UmapOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 3) fail(ErrorKind::kInvalidArgument, "UMAP needs at least three points");
  if (options.n_neighbors < 2) fail(ErrorKind::kInvalidArgument, "umap_neighbors must be >= 2");
  if (options.n_epochs <= 0) fail(ErrorKind::kInvalidArgument, "umap_epochs must be positive");
  const std::size_t k = std::min(options.n_neighbors, n);

  SplitMix64 rng(options.seed ^ 0x756d6170ULL);
  const Knn knn = exact_knn(x, k);
  std::vector<double> sigmas, rhos;
  smooth_knn_dist(knn, k, sigmas, rhos);
  std::vector<Edge> edges = fuzzy_graph(knn, sigmas, rhos);

  UmapResult out;
  std::tie(out.a, out.b) = fit_umap_ab(options.min_dist, options.spread);
  const double a = out.a, b = out.b;

  const double n_epochs = double(options.n_epochs);
  double max_w = 0.0;
  for (const auto& e : edges) max_w = std::max(max_w, e.weight);
  std::erase_if(edges, [&](const Edge& e) { return e.weight < max_w / n_epochs; });

  const std::size_t ne = edges.size();
  std::vector<double> epochs_per_sample(ne), next_sample(ne), epochs_per_neg(ne), next_neg(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const double samples = n_epochs * edges[e].weight / max_w;
    epochs_per_sample[e] = n_epochs / samples;
    next_sample[e] = epochs_per_sample[e];
    epochs_per_neg[e] = epochs_per_sample[e] / double(options.negative_sample_rate);
    next_neg[e] = epochs_per_neg[e];
  }

  Matrix emb = initial_layout(x, rng);
  for (int epoch = 0; epoch < options.n_epochs; ++epoch) {
    const double alpha = 1.0 - double(epoch) / n_epochs;
    for (std::size_t e = 0; e < ne; ++e) {
      if (next_sample[e] > double(epoch)) continue;
      const auto j = static_cast<Eigen::Index>(edges[e].head);
      const auto t = static_cast<Eigen::Index>(edges[e].tail);
      double dx = emb(j, 0) - emb(t, 0);
      double dy = emb(j, 1) - emb(t, 1);
      double dist_sq = dx * dx + dy * dy;
      if (dist_sq > 0.0) {
        const double coeff = -2.0 * a * b * std::pow(dist_sq, b - 1.0) / (a * std::pow(dist_sq, b) + 1.0);
        const double gx = clip(coeff * dx), gy = clip(coeff * dy);
        emb(j, 0) += gx * alpha;
        emb(j, 1) += gy * alpha;
        emb(t, 0) -= gx * alpha;
        emb(t, 1) -= gy * alpha;
      }
      next_sample[e] += epochs_per_sample[e];

      const int n_neg = static_cast<int>((double(epoch) - next_neg[e]) / epochs_per_neg[e]);
      for (int s = 0; s < n_neg; ++s) {
        const auto o = static_cast<Eigen::Index>(rng.below(n));
        if (o == j) continue;
        dx = emb(j, 0) - emb(o, 0);
        dy = emb(j, 1) - emb(o, 1);
        dist_sq = dx * dx + dy * dy;
        double gx = kGradClip, gy = kGradClip;
        if (dist_sq > 0.0) {
          const double coeff = 2.0 * b / ((0.001 + dist_sq) * (a * std::pow(dist_sq, b) + 1.0));
          gx = clip(coeff * dx);
          gy = clip(coeff * dy);
        }
        emb(j, 0) += gx * alpha;
        emb(j, 1) += gy * alpha;
      }
      next_neg[e] += double(std::max(n_neg, 0)) * epochs_per_neg[e];
    }
  }
  out.layout = std::move(emb);
  return out;
}

}  // namespace infocir
