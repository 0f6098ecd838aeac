#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>

#include "infocir/error.hpp"
#include "infocir/projection.hpp"

namespace infocir {

namespace {

constexpr double kWithinFloor = 1e-12;
constexpr double kRankTolerance = 1e-12;

}  // namespace

double fisher_ratio(std::span<const double> p, const std::vector<std::string>& labels,
                    std::vector<std::string>* warnings) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> classes;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& a = classes[labels[i]];
    a.sum += p[i];
    ++a.n;
    total += p[i];
  }
  if (classes.size() < 2) fail(ErrorKind::kInvalidArgument, "degenerate labels: no between-class variance");
  const double grand = total / double(p.size());

  double between = 0.0;
  for (const auto& [label, a] : classes) {
    const double m = a.sum / double(a.n);
    between += double(a.n) * (m - grand) * (m - grand);
  }
  between /= double(p.size());

  double within = 0.0;
  std::size_t within_n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = classes[labels[i]];
    if (a.n < 2) continue;
    const double d = p[i] - a.sum / double(a.n);
    within += d * d;
    ++within_n;
  }
  if (within_n == 0) fail(ErrorKind::kInvalidArgument, "degenerate labels: every class has a single sample");
  if (warnings) {
    for (const auto& [label, a] : classes) {
      if (a.n < 2) warnings->push_back("class '" + label + "' has one sample; excluded from within-class variance");
    }
  }
  within = std::max(within / double(within_n), kWithinFloor);
  return between / within;
}

FisherAnalysis fisher_scores(const Matrix& x, const std::vector<std::string>& labels) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (static_cast<std::size_t>(n) != labels.size()) fail(ErrorKind::kInvalidArgument, "labels do not match rows");
  if (n < 2) fail(ErrorKind::kInvalidArgument, "need at least two samples");

  FisherAnalysis out;
  out.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - out.mean.transpose();
  const Matrix cov = (centered.transpose() * centered) / double(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) fail(ErrorKind::kInternal, "PCA eigendecomposition failed");

  const ColVector& values = eig.eigenvalues();  // ascending
  const double top = std::max(values(d - 1), 0.0);
  const auto max_rank = std::min<Eigen::Index>(d, n - 1);
  Eigen::Index r = 0;
  while (r < max_rank && values(d - 1 - r) > kRankTolerance * std::max(top, 1e-300)) ++r;
  if (r == 0) fail(ErrorKind::kInvalidArgument, "data has no variance");

  out.components.resize(r, d);
  out.variances.resize(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    ColVector v = eig.eigenvectors().col(d - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;  // deterministic sign
    out.components.row(j) = v.transpose();
    out.variances(j) = values(d - 1 - j);
  }

  out.scores.resize(r);
  const Matrix proj = centered * out.components.transpose();  // n x r
  std::vector<double> p(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = proj(i, j);
    out.scores(j) = fisher_ratio(p, labels, j == 0 ? &out.warnings : nullptr);
  }
  return out;
}

Matrix contrastive_debias(const Matrix& y, const std::vector<std::string>& labels, double lambda,
                          std::map<std::string, ColVector>* prototypes) {
  if (lambda < 0.0 || lambda > 1.0) fail(ErrorKind::kInvalidArgument, "contrastive_lambda must be in [0, 1]");
  std::map<std::string, ColVector> protos;
  std::map<std::string, std::size_t> counts;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const auto& l = labels[static_cast<std::size_t>(i)];
    auto [it, inserted] = protos.try_emplace(l, ColVector::Zero(y.cols()));
    it->second += y.row(i).transpose();
    ++counts[l];
  }
  for (auto& [l, p] : protos) p /= double(counts[l]);
  if (prototypes) *prototypes = protos;
  if (lambda == 0.0) return y;

  Matrix out(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const ColVector row = y.row(i).transpose();
    const ColVector& p = protos.at(labels[static_cast<std::size_t>(i)]);
    ColVector moved = (1.0 - lambda) * row + lambda * p;
    const double target = row.norm();
    const double current = moved.norm();
    if (current > 0.0) moved *= target / current;
    out.row(i) = moved.transpose();
  }
  return out;
}

}  // namespace infocir
