#include "infocir/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "infocir/error.hpp"
#include "json.hpp"

namespace infocir {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageRecord parse_record(const json& j, std::size_t i) {
  if (!j.is_object()) {
    fail(ErrorKind::kFormat, "malformed manifest: record " + std::to_string(i) + " is not an object");
  }
  auto str = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) {
        fail(ErrorKind::kFormat, std::string("malformed manifest: record ") + std::to_string(i) +
                                     " missing \"" + key + "\"");
      }
      return {};
    }
    if (!it->is_string()) {
      fail(ErrorKind::kFormat, std::string("malformed manifest: record ") + std::to_string(i) +
                                   " field \"" + key + "\" is not a string");
    }
    return it->get<std::string>();
  };
  ImageRecord r;
  r.id = str("id", true);
  r.uri = str("uri", false);
  r.class_label = str("class", true);
  if (auto it = j.find("style"); it != j.end() && !it->is_null()) r.style_label = str("style", false);
  r.caption = str("caption", false);
  return r;
}

}  // namespace

EmbeddingCorpus EmbeddingCorpus::create(std::size_t dim, std::vector<float> vectors,
                                        std::vector<ImageRecord> records) {
  if (dim == 0) fail(ErrorKind::kInvalidArgument, "dim must be positive");
  if (records.empty()) fail(ErrorKind::kInvalidArgument, "corpus must contain at least one record");
  if (vectors.size() != records.size() * dim) {
    fail(ErrorKind::kInvalidArgument, "vector payload does not match count x dim");
  }
  EmbeddingCorpus c;
  c.dim_ = dim;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.id.empty()) fail(ErrorKind::kInvalidArgument, "empty image id at row " + std::to_string(i));
    if (r.class_label.empty()) {
      fail(ErrorKind::kInvalidArgument, "empty class label for image " + r.id);
    }
    if (!c.index_.emplace(r.id, i).second) fail(ErrorKind::kInvalidArgument, "duplicate id " + r.id);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::span<float> row(vectors.data() + i * dim, dim);
    for (float x : row) {
      if (!std::isfinite(x)) fail(ErrorKind::kInvalidArgument, "non-finite value at row " + std::to_string(i));
    }
    const double n = l2_norm(std::span<const float>(row));
    if (n == 0.0) fail(ErrorKind::kInvalidArgument, "zero vector at row " + std::to_string(i));
    if (std::abs(n - 1.0) > kRenormalizeThreshold) {
      for (float& x : row) x = static_cast<float>(double(x) / n);
    }
  }
  c.vectors_ = std::move(vectors);
  c.records_ = std::move(records);
  return c;
}

std::optional<std::size_t> EmbeddingCorpus::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingCorpus::index_of(const std::string& id) const {
  auto i = find(id);
  if (!i) fail(ErrorKind::kNotFound, "unknown image id: " + id);
  return *i;
}

Vector EmbeddingCorpus::get_vector(const std::string& id) const {
  auto r = row(index_of(id));
  return Vector(r.begin(), r.end());
}

const ImageRecord& EmbeddingCorpus::record(const std::string& id) const {
  return records_[index_of(id)];
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingCorpus& corpus) {
  std::vector<std::uint8_t> out;
  out.reserve(kCorpusHeaderBytes + corpus.data().size() * 4);
  out.insert(out.end(), std::begin(kCorpusMagic), std::end(kCorpusMagic));
  put_u32(out, kCorpusVersion);
  put_u64(out, corpus.count());
  put_u64(out, corpus.dim());
  for (float x : corpus.data()) put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

EmbeddingCorpus ingest(const fs::path& manifest_path) {
  json manifest;
  {
    std::ifstream in(manifest_path);
    if (!in) fail(ErrorKind::kIo, "cannot open manifest " + manifest_path.string());
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, std::string("malformed manifest: ") + e.what());
    }
  }
  std::size_t dim = 0, count = 0;
  std::string emb_name;
  json records_json;
  try {
    if (manifest.at("version").get<int>() != 1) fail(ErrorKind::kFormat, "unsupported manifest version");
    dim = manifest.at("dim").get<std::size_t>();
    count = manifest.at("count").get<std::size_t>();
    emb_name = manifest.at("embeddings").get<std::string>();
    records_json = manifest.at("records");
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed manifest: ") + e.what());
  }
  if (!records_json.is_array()) fail(ErrorKind::kFormat, "malformed manifest: records is not an array");
  if (records_json.size() != count) {
    fail(ErrorKind::kFormat, "malformed manifest: count does not match number of records");
  }
  if (dim == 0 || count == 0) fail(ErrorKind::kFormat, "malformed manifest: dim and count must be positive");

  std::vector<ImageRecord> records;
  records.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < count; ++i) {
    records.push_back(parse_record(records_json[i], i));
    if (!seen.insert(records.back().id).second) {
      fail(ErrorKind::kFormat, "duplicate id " + records.back().id);
    }
  }

  const auto bytes = read_file(manifest_path.parent_path() / emb_name);
  if (bytes.size() < kCorpusHeaderBytes || std::memcmp(bytes.data(), kCorpusMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "bad magic: embedding file is not a CIRE file");
  }
  if (get_u32(bytes.data() + 4) != kCorpusVersion) fail(ErrorKind::kFormat, "embedding file version mismatch");
  const std::uint64_t n = get_u64(bytes.data() + 8);
  const std::uint64_t d = get_u64(bytes.data() + 16);
  if (n != count || d != dim) fail(ErrorKind::kFormat, "embedding header disagrees with manifest dim/count");
  if (bytes.size() != kCorpusHeaderBytes + 4 * n * d) fail(ErrorKind::kFormat, "payload length mismatch");

  std::vector<float> vectors(n * d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    vectors[i] = std::bit_cast<float>(get_u32(bytes.data() + kCorpusHeaderBytes + 4 * i));
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!std::isfinite(vectors[i])) fail(ErrorKind::kFormat, "non-finite value at row " + std::to_string(i / d));
  }
  for (std::size_t r = 0; r < n; ++r) {
    bool all_zero = true;
    for (std::size_t c = 0; c < d && all_zero; ++c) all_zero = vectors[r * d + c] == 0.0f;
    if (all_zero) fail(ErrorKind::kFormat, "zero vector at row " + std::to_string(r));
  }
  return EmbeddingCorpus::create(dim, std::move(vectors), std::move(records));
}

EmbeddingCorpus ingest_dir_or_manifest(const fs::path& path) {
  if (fs::is_directory(path)) return ingest(path / kManifestName);
  return ingest(path);
}

void write_corpus(const EmbeddingCorpus& corpus, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  json records = json::array();
  for (const auto& r : corpus.records()) {
    records.push_back({{"id", r.id},
                       {"uri", r.uri},
                       {"class", r.class_label},
                       {"style", r.style_label ? json(*r.style_label) : json(nullptr)},
                       {"caption", r.caption}});
  }
  json manifest = {{"version", 1},
                   {"dim", corpus.dim()},
                   {"count", corpus.count()},
                   {"embeddings", kEmbeddingsName},
                   {"records", records}};

  const auto payload = encode_embeddings(corpus);
  {
    std::ofstream out(dir / kEmbeddingsName, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) fail(ErrorKind::kIo, "failed writing " + (dir / kEmbeddingsName).string());
  }
  {
    std::ofstream out(dir / kManifestName, std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) fail(ErrorKind::kIo, "failed writing " + (dir / kManifestName).string());
  }
}

}  // namespace infocir
