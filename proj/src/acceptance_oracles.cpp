#include "acceptance_oracles.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <sstream>

namespace infocir::oracle {

namespace {

std::uint64_t mix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<float> unit_f32(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(w);
  }
  return out;
}

double cross(std::pair<double, double> o, std::pair<double, double> a, std::pair<double, double> b) {
  return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::vector<double> token_vector(const std::string& token, std::size_t dim, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char b : token) h = (h ^ b) * 0x100000001b3ULL;
  std::vector<double> v(dim);
  for (auto& x : v) {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += double(mix(h) >> 11) * 0x1.0p-53;
    x = s - 2.0;
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  for (auto& x : v) x /= n;
  return v;
}

std::vector<float> concepts_vector(const std::vector<std::string>& concepts, std::size_t dim, std::uint64_t seed) {
  std::vector<double> acc(dim, 0.0);
  for (const auto& c : concepts) {
    const auto t = token_vector(c, dim, seed);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += t[i];
  }
  return unit_f32(acc);
}

std::vector<float> text_vector(const std::string& text, std::size_t dim, std::uint64_t seed) {
  return concepts_vector(words(text), dim, seed);
}

std::vector<float> compose(const std::vector<float>& base, const std::string& modifier, std::size_t dim,
                           std::uint64_t seed) {
  if (words(modifier).empty()) return base;
  const auto t = text_vector(modifier, dim, seed);
  std::vector<double> acc(dim);
  for (std::size_t i = 0; i < dim; ++i) acc[i] = double(base[i]) + double(t[i]);
  return unit_f32(acc);
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * double(b[i]);
    aa += double(a[i]) * double(a[i]);
    bb += double(b[i]) * double(b[i]);
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<std::string> ranking(const std::vector<std::vector<float>>& rows, const std::vector<std::string>& ids,
                                 const std::vector<float>& query) {
  std::vector<std::pair<double, std::string>> scored;
  for (std::size_t i = 0; i < rows.size(); ++i) scored.emplace_back(cosine(rows[i], query), ids[i]);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [_, id] : scored) out.push_back(id);
  return out;
}

double amari(const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd a = p.cwiseAbs();
  const double n = double(a.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += a.row(i).sum() / a.row(i).maxCoeff() - 1.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) total += a.col(j).sum() / a.col(j).maxCoeff() - 1.0;
  return total / (2.0 * n * (n - 1.0));
}

bool in_hull(const std::vector<std::pair<double, double>>& points, std::pair<double, double> p, double tol) {
  auto pts = points;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() == 1) return std::hypot(p.first - pts[0].first, p.second - pts[0].second) <= tol;

  // Andrew's monotone chain, counter-clockwise.
  std::vector<std::pair<double, double>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);

  if (hull.size() <= 2) {
    // Degenerate hull: distance to the segment.
    const auto a = hull.front(), b = hull.back();
    const double dx = b.first - a.first, dy = b.second - a.second;
    const double len2 = dx * dx + dy * dy;
    const double t = len2 == 0.0 ? 0.0 : std::clamp(((p.first - a.first) * dx + (p.second - a.second) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.first - (a.first + t * dx), p.second - (a.second + t * dy)) <= tol;
  }
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto a = hull[i], b = hull[(i + 1) % hull.size()];
    const double edge = std::hypot(b.first - a.first, b.second - a.second);
    if (cross(a, b, p) < -tol * edge) return false;
  }
  return true;
}

std::vector<std::uint8_t> golden_embeddings(std::uint64_t n, std::uint64_t d, const std::vector<float>& values) {
  std::vector<std::uint8_t> out = {'C', 'I', 'R', 'E'};
  put_le(out, 1, 4);
  put_le(out, n, 8);
  put_le(out, d, 8);
  for (float v : values) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

}  // namespace infocir::oracle
