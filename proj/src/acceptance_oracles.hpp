#pragma once

// Independent reference computations for the acceptance suite. Nothing here
// calls into the engine code paths being checked.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace infocir::oracle {

/// Stub token vector recomputed from the published hash recipe.
std::vector<double> token_vector(const std::string& token, std::size_t dim, std::uint64_t seed);

/// normalize(sum of token vectors) rounded to f32; words are split on spaces
/// and lowercased.
std::vector<float> text_vector(const std::string& text, std::size_t dim, std::uint64_t seed);
std::vector<float> concepts_vector(const std::vector<std::string>& concepts, std::size_t dim, std::uint64_t seed);

/// normalize(base + text_vector(modifier)); an empty modifier returns base.
std::vector<float> compose(const std::vector<float>& base, const std::string& modifier, std::size_t dim,
                           std::uint64_t seed);

double cosine(const std::vector<float>& a, const std::vector<float>& b);

/// Ids sorted by descending cosine, ties by ascending id.
std::vector<std::string> ranking(const std::vector<std::vector<float>>& rows, const std::vector<std::string>& ids,
                                 const std::vector<float>& query);

double amari(const Eigen::MatrixXd& p);

/// Point-in-convex-hull test in 2-D with an absolute tolerance.
bool in_hull(const std::vector<std::pair<double, double>>& points, std::pair<double, double> p, double tol);

/// Embedding file assembled byte by byte: "CIRE", u32 1, u64 n, u64 d, f32 LE values.
std::vector<std::uint8_t> golden_embeddings(std::uint64_t n, std::uint64_t d, const std::vector<float>& values);

}  // namespace infocir::oracle
