#include <algorithm>
#include <fstream>

#include "infocir/error.hpp"
#include "infocir/provider.hpp"
#include "infocir/text.hpp"
#include "json.hpp"

namespace infocir {

using nlohmann::json;

void ProviderInfo::validate() const {
  if (dim == 0) fail(ErrorKind::kProvider, "provider declared dim 0");
  for (const auto& cap : capabilities) {
    if (cap != kCapMaskEmbedding && cap != kCapTokenGradients && cap != kCapGradientSaliency) {
      fail(ErrorKind::kProvider, "provider declared unknown capability " + cap);
    }
  }
}

void OcclusionMask::validate() const {
  if (grid.rows == 0 || grid.cols == 0) fail(ErrorKind::kInvalidArgument, "invalid mask: empty grid");
  std::set<Cell> seen;
  for (const auto& cell : occluded_cells) {
    if (cell.first >= grid.rows || cell.second >= grid.cols) {
      fail(ErrorKind::kInvalidArgument, "invalid mask: cell out of bounds");
    }
    if (!seen.insert(cell).second) fail(ErrorKind::kInvalidArgument, "invalid mask: duplicate cell");
  }
}

TokenGradients Provider::token_gradients(const Reference&, const std::string&,
                                         std::span<const float>) const {
  fail(ErrorKind::kInvalidArgument, std::string("capability absent: ") + kCapTokenGradients);
}

Grid Provider::gradient_saliency(const std::string&, std::span<const float>, GridShape) const {
  fail(ErrorKind::kInvalidArgument, std::string("capability absent: ") + kCapGradientSaliency);
}

Cell rescale_cell(Cell cell, GridShape from, GridShape to) {
  return {cell.first * to.rows / from.rows, cell.second * to.cols / from.cols};
}

void StubCatalog::validate() const {
  if (grid.rows == 0 || grid.cols == 0) fail(ErrorKind::kFormat, "stub catalog: empty grid");
  for (const auto& [id, img] : images) {
    if (img.concepts.empty()) fail(ErrorKind::kFormat, "stub catalog: image " + id + " has no concepts");
    if (img.cells.size() != img.concepts.size()) {
      fail(ErrorKind::kFormat, "stub catalog: image " + id + " concepts and cells differ in length");
    }
    for (const auto& c : img.cells) {
      if (c.first >= grid.rows || c.second >= grid.cols) {
        fail(ErrorKind::kFormat, "stub catalog: image " + id + " cell out of grid");
      }
    }
  }
}

void StubCatalog::save(const std::filesystem::path& path) const {
  json images_json = json::object();
  for (const auto& [id, img] : images) {
    json cells = json::array();
    for (const auto& c : img.cells) cells.push_back({c.first, c.second});
    images_json[id] = {{"concepts", img.concepts}, {"cells", cells}};
  }
  json j = {{"grid", {grid.rows, grid.cols}}, {"images", images_json}};
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

StubCatalog StubCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open stub catalog " + path.string());
  StubCatalog cat;
  try {
    json j = json::parse(in);
    cat.grid = {j.at("grid").at(0).get<std::size_t>(), j.at("grid").at(1).get<std::size_t>()};
    for (const auto& [id, img] : j.at("images").items()) {
      StubImage s;
      s.concepts = img.at("concepts").get<std::vector<std::string>>();
      for (const auto& c : img.at("cells")) s.cells.emplace_back(c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>());
      cat.images.emplace(id, std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed stub catalog: ") + e.what());
  }
  cat.validate();
  return cat;
}

StubProvider::StubProvider(StubCatalog catalog, std::size_t dim, std::uint64_t seed)
    : catalog_(std::move(catalog)), dim_(dim), seed_(seed) {
  if (dim_ == 0) fail(ErrorKind::kInvalidArgument, "stub dim must be positive");
  catalog_.validate();
}

ProviderInfo StubProvider::info() const { return {"stub", dim_, {kCapMaskEmbedding}}; }

std::vector<double> StubProvider::token_vector(const std::string& token) const {
  std::uint64_t s = 0xcbf29ce484222325ULL ^ seed_;
  for (unsigned char b : token) {
    s ^= b;
    s *= 0x100000001b3ULL;
  }
  SplitMix64 rng(s);
  std::vector<double> v(dim_);
  for (auto& x : v) x = rng.uniform() + rng.uniform() + rng.uniform() + rng.uniform() - 2.0;
  const double n = l2_norm(std::span<const double>(v));
  for (auto& x : v) x /= n;
  return v;
}

Vector StubProvider::embed_text(const std::string& text) const {
  const auto tokens = tokenize_words(text);
  if (tokens.empty()) fail(ErrorKind::kInvalidArgument, "empty text");
  std::vector<double> acc(dim_, 0.0);
  for (const auto& t : tokens) {
    const auto h = token_vector(t);
    for (std::size_t i = 0; i < dim_; ++i) acc[i] += h[i];
  }
  auto out = normalized_f32(std::span<const double>(acc));
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "text embeds to the zero vector");
  return out;
}

const StubImage& StubProvider::image(const std::string& ref) const {
  auto it = catalog_.images.find(ref);
  if (it == catalog_.images.end()) fail(ErrorKind::kNotFound, "unknown image ref: " + ref);
  return it->second;
}

Vector StubProvider::embed_image(const std::string& ref) const {
  return embed_image_masked(ref, OcclusionMask{catalog_.grid, {}});
}

Vector StubProvider::embed_image_masked(const std::string& ref, const OcclusionMask& mask) const {
  mask.validate();
  const auto& img = image(ref);
  const std::set<Cell> occluded(mask.occluded_cells.begin(), mask.occluded_cells.end());
  std::vector<double> acc(dim_, 0.0);
  std::size_t kept = 0;
  for (std::size_t k = 0; k < img.concepts.size(); ++k) {
    if (occluded.count(rescale_cell(img.cells[k], catalog_.grid, mask.grid))) continue;
    const auto h = token_vector(img.concepts[k]);
    for (std::size_t i = 0; i < dim_; ++i) acc[i] += h[i];
    ++kept;
  }
  if (kept == 0) fail(ErrorKind::kInvalidArgument, "all concepts occluded");
  auto out = normalized_f32(std::span<const double>(acc));
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "all concepts occluded");
  return out;
}

Vector StubProvider::compose(const Reference& reference, const std::string& modifier) const {
  Vector base;
  if (reference.is_image()) {
    base = embed_image(reference.image_ref());
  } else {
    if (reference.raw_vector().size() != dim_) fail(ErrorKind::kInvalidArgument, "reference dimension mismatch");
    const auto& raw = reference.raw_vector();
    const double n = l2_norm(std::span<const float>(raw));
    if (n == 0.0) fail(ErrorKind::kInvalidArgument, "reference vector is zero");
    // Unit vectors pass through untouched so compose(v, "") == v bit-for-bit.
    base = std::abs(n - 1.0) <= 1e-6 ? raw : normalized_f32(std::span<const float>(raw));
  }
  if (tokenize_words(modifier).empty()) return base;
  const auto text = embed_text(modifier);
  std::vector<double> acc(dim_);
  for (std::size_t i = 0; i < dim_; ++i) acc[i] = double(base[i]) + double(text[i]);
  auto out = normalized_f32(std::span<const double>(acc));
  if (out.empty()) fail(ErrorKind::kInvalidArgument, "composition cancelled to the zero vector");
  return out;
}

}  // namespace infocir
