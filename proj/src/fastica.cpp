#include <Eigen/Eigenvalues>
#include <cmath>

#include "infocir/error.hpp"
#include "infocir/projection.hpp"
#include "infocir/vecmath.hpp"

namespace infocir {

namespace {

constexpr double kWhiteningRankTolerance = 1e-10;

// (W W^T)^{-1/2} W
Matrix symmetric_decorrelation(const Matrix& w) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w * w.transpose());
  const ColVector inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

}  // namespace

Matrix FastIcaResult::apply(const Matrix& x) const {
  const Matrix centered = x.rowwise() - mean.transpose();
  return centered * whitening.transpose() * unmixing.transpose();
}

ColVector FastIcaResult::apply(const ColVector& x) const { return unmixing * (whitening * (x - mean)); }

FastIcaResult fast_ica(const Matrix& x, const FastIcaOptions& options) {
  const auto n = x.rows();
  const auto m = x.cols();
  if (n < 2 || m < 1) fail(ErrorKind::kInvalidArgument, "FastICA needs at least two samples");

  FastIcaResult out;
  out.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - out.mean.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig((centered.transpose() * centered) / double(n));
  if (eig.info() != Eigen::Success) fail(ErrorKind::kInternal, "whitening eigendecomposition failed");
  const ColVector& values = eig.eigenvalues();  // ascending
  const double top = values(m - 1);
  if (!(top > 0.0)) fail(ErrorKind::kInvalidArgument, "FastICA input has no variance");
  Eigen::Index r = 0;
  while (r < m && values(m - 1 - r) > kWhiteningRankTolerance * top) ++r;

  out.whitening.resize(r, m);
  for (Eigen::Index j = 0; j < r; ++j) {
    ColVector v = eig.eigenvectors().col(m - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.whitening.row(j) = v.transpose() / std::sqrt(values(m - 1 - j));
  }
  const Matrix z = centered * out.whitening.transpose();  // n x r

  const Eigen::Index c =
      options.components == 0 ? r : std::min<Eigen::Index>(r, static_cast<Eigen::Index>(options.components));
  SplitMix64 rng(options.seed);
  Matrix w(c, r);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < r; ++j) w(i, j) = rng.normal();
  w = symmetric_decorrelation(w);

  for (int it = 1; it <= options.max_iter; ++it) {
    const Matrix wx = z * w.transpose();  // n x c
    const Matrix g = wx.array().tanh().matrix();
    const ColVector g_prime_mean = (1.0 - g.array().square()).matrix().colwise().mean().transpose();
    Matrix next = (g.transpose() * z) / double(n) - g_prime_mean.asDiagonal() * w;
    next = symmetric_decorrelation(next);
    const double lim = ((next * w.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
    w = next;
    out.iterations = it;
    if (lim < options.tol) {
      out.converged = true;
      break;
    }
  }
  out.unmixing = w;
  return out;
}

double amari_index(const Matrix& p) {
  const auto n = p.rows();
  if (n != p.cols() || n < 2) fail(ErrorKind::kInvalidArgument, "amari_index needs a square matrix, n >= 2");
  const Matrix a = p.cwiseAbs();
  double rows = 0.0, cols = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) rows += a.row(i).sum() / a.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < n; ++j) cols += a.col(j).sum() / a.col(j).maxCoeff() - 1.0;
  return (rows + cols) / (2.0 * double(n) * double(n - 1));
}

}  // namespace infocir
