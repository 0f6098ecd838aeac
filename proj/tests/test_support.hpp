#pragma once

// Shared helpers for the unit tests: scratch directories and reference
// computations written without touching the engine code.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace testing_support {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("infocir-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

// --- stub provider recipe ----------------------------------------------------

inline std::uint64_t splitmix(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<double> ref_token(const std::string& token, std::size_t dim, std::uint64_t seed) {
  std::uint64_t s = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : token) {
    s ^= c;
    s *= 0x100000001b3ULL;
  }
  std::vector<double> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += double(splitmix(s) >> 11) * 0x1.0p-53;
    x = sum - 2.0;
    sq += x * x;
  }
  for (auto& x : v) x /= std::sqrt(sq);
  return v;
}

inline std::vector<std::string> ref_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    out.push_back(w);
  }
  return out;
}

inline std::vector<float> ref_normalize(const std::vector<double>& acc) {
  double sq = 0.0;
  for (double x : acc) sq += x * x;
  std::vector<float> out;
  for (double x : acc) out.push_back(float(x / std::sqrt(sq)));
  return out;
}

inline std::vector<float> ref_concepts(const std::vector<std::string>& concepts, std::size_t dim,
                                       std::uint64_t seed = 0) {
  std::vector<double> acc(dim, 0.0);
  for (const auto& c : concepts) {
    const auto t = ref_token(c, dim, seed);
    for (std::size_t i = 0; i < dim; ++i) acc[i] += t[i];
  }
  return ref_normalize(acc);
}

inline std::vector<float> ref_text(const std::string& text, std::size_t dim, std::uint64_t seed = 0) {
  return ref_concepts(ref_words(text), dim, seed);
}

inline std::vector<float> ref_compose(const std::vector<float>& base, const std::string& modifier,
                                      std::size_t dim, std::uint64_t seed = 0) {
  if (ref_words(modifier).empty()) return base;
  const auto t = ref_text(modifier, dim, seed);
  std::vector<double> acc(dim);
  for (std::size_t i = 0; i < dim; ++i) acc[i] = double(base[i]) + double(t[i]);
  return ref_normalize(acc);
}

inline double ref_cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

/// Brute-force ranking: descending cosine, ties by ascending id.
inline std::vector<std::string> ref_ranking(const std::vector<std::vector<float>>& rows,
                                            const std::vector<std::string>& ids, const std::vector<float>& q) {
  std::vector<std::pair<double, std::string>> s;
  for (std::size_t i = 0; i < rows.size(); ++i) s.emplace_back(ref_cosine(rows[i], q), ids[i]);
  std::sort(s.begin(), s.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  std::vector<std::string> out;
  for (auto& p : s) out.push_back(p.second);
  return out;
}

inline std::size_t ref_rank(const std::vector<std::string>& order, const std::string& id) {
  return std::size_t(std::find(order.begin(), order.end(), id) - order.begin()) + 1;
}

}  // namespace testing_support
