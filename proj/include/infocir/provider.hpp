#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "infocir/vecmath.hpp"

namespace infocir {

inline constexpr const char* kCapMaskEmbedding = "mask_embedding";
inline constexpr const char* kCapTokenGradients = "token_gradients";
inline constexpr const char* kCapGradientSaliency = "gradient_saliency";

struct ProviderInfo {
  std::string name;
  std::size_t dim = 0;
  std::set<std::string> capabilities;

  bool has(const std::string& cap) const { return capabilities.count(cap) != 0; }
  void validate() const;  // dim > 0, capabilities within the known set
  bool operator==(const ProviderInfo&) const = default;
};

struct GridShape {
  std::size_t rows = 7;
  std::size_t cols = 7;
  bool operator==(const GridShape&) const = default;
};

using Cell = std::pair<std::size_t, std::size_t>;  // (row, col)

struct OcclusionMask {
  GridShape grid;
  std::vector<Cell> occluded_cells;

  void validate() const;  // in bounds, no duplicates
};

/// A composition reference: an image ref (corpus id or uri, resolved by the
/// provider) or a raw embedding.
struct Reference {
  std::variant<std::string, Vector> value;

  static Reference image(std::string ref) { return {std::move(ref)}; }
  static Reference vector(Vector v) { return {std::move(v)}; }

  bool is_image() const { return std::holds_alternative<std::string>(value); }
  const std::string& image_ref() const { return std::get<std::string>(value); }
  const Vector& raw_vector() const { return std::get<Vector>(value); }
};

struct TokenGradients {
  std::vector<std::string> tokens;
  std::vector<double> scores;
};

using Grid = std::vector<std::vector<double>>;

/// The black box housing the image encoder, the composition function and the
/// pseudo-token path. Implementations must be safe for concurrent calls.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual ProviderInfo info() const = 0;
  virtual Vector embed_text(const std::string& text) const = 0;
  virtual Vector embed_image(const std::string& ref) const = 0;
  virtual Vector embed_image_masked(const std::string& ref, const OcclusionMask& mask) const = 0;
  virtual Vector compose(const Reference& reference, const std::string& modifier) const = 0;

  // Optional capabilities; the defaults throw.
  virtual TokenGradients token_gradients(const Reference& reference, const std::string& modifier,
                                         std::span<const float> target) const;
  virtual Grid gradient_saliency(const std::string& ref, std::span<const float> query,
                                 GridShape grid) const;
};

// ---------------------------------------------------------------------------
// Deterministic stub provider.
//
// Token hash h(token): start from s = 0xcbf29ce484222325 ^ seed, fold each
// byte b of the token as s = (s ^ b) * 0x100000001b3, then seed a splitmix64
// generator with s. Draw D values, each u1 + u2 + u3 + u4 - 2 with
// u = (next() >> 11) * 2^-53, and L2-normalize (double precision).
//
//   embed_text(T)       = normalize(sum of h(t) over lowercase whitespace tokens)
//   embed_image(id)     = normalize(sum of h(c) over the image's concepts)
//   embed_image_masked  = as embed_image, dropping concepts whose cell is occluded
//   compose(r, T)       = normalize(v_r + embed_text(T)); empty T gives v_r
//
// Sums are accumulated in double and rounded to f32 after normalization.
// ---------------------------------------------------------------------------

struct StubImage {
  std::vector<std::string> concepts;
  std::vector<Cell> cells;  // aligned 1:1 with concepts, on the catalog grid
};

struct StubCatalog {
  GridShape grid;
  std::map<std::string, StubImage> images;

  void validate() const;
  void save(const std::filesystem::path& path) const;
  static StubCatalog load(const std::filesystem::path& path);
};

inline constexpr const char* kStubCatalogName = "stub_catalog.json";
inline constexpr std::size_t kStubDefaultDim = 128;

class StubProvider : public Provider {
 public:
  explicit StubProvider(StubCatalog catalog = {}, std::size_t dim = kStubDefaultDim,
                        std::uint64_t seed = 0);

  ProviderInfo info() const override;
  Vector embed_text(const std::string& text) const override;
  Vector embed_image(const std::string& ref) const override;
  Vector embed_image_masked(const std::string& ref, const OcclusionMask& mask) const override;
  Vector compose(const Reference& reference, const std::string& modifier) const override;

  /// h(token) before rounding, unit norm.
  std::vector<double> token_vector(const std::string& token) const;

  const StubCatalog& catalog() const { return catalog_; }
  std::uint64_t seed() const { return seed_; }

 private:
  const StubImage& image(const std::string& ref) const;

  StubCatalog catalog_;
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Maps a cell on the `from` grid onto the `to` grid (floor scaling).
Cell rescale_cell(Cell cell, GridShape from, GridShape to);

}  // namespace infocir
