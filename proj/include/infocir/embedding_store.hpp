#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "infocir/vecmath.hpp"

namespace infocir {

struct ImageRecord {
  std::string id;
  std::string uri;
  std::string class_label;
  std::optional<std::string> style_label;
  std::string caption;

  bool operator==(const ImageRecord&) const = default;
};

inline constexpr char kCorpusMagic[4] = {'C', 'I', 'R', 'E'};
inline constexpr std::uint32_t kCorpusVersion = 1;
inline constexpr std::size_t kCorpusHeaderBytes = 24;
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kEmbeddingsName = "embeddings.bin";

/// N x D unit-norm embedding matrix plus aligned per-image metadata.
/// Immutable once constructed.
class EmbeddingCorpus {
 public:
  /// Validates and builds a corpus. Rows whose L2 norm differs from 1 by more
  /// than kRenormalizeThreshold are re-normalized; rows already at unit norm
  /// are kept bit-for-bit.
  static EmbeddingCorpus create(std::size_t dim, std::vector<float> vectors,
                                std::vector<ImageRecord> records);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return records_.size(); }

  std::span<const float> row(std::size_t i) const {
    return {vectors_.data() + i * dim_, dim_};
  }
  std::span<const float> data() const { return vectors_; }
  const std::vector<ImageRecord>& records() const { return records_; }
  const ImageRecord& record(std::size_t i) const { return records_.at(i); }

  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;  // throws kNotFound
  Vector get_vector(const std::string& id) const;
  const ImageRecord& record(const std::string& id) const;

  static constexpr double kRenormalizeThreshold = 1e-6;

 private:
  EmbeddingCorpus() = default;

  std::size_t dim_ = 0;
  std::vector<float> vectors_;
  std::vector<ImageRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Loads a corpus from a manifest.json and the embedding file it references.
EmbeddingCorpus ingest(const std::filesystem::path& manifest_path);

/// Accepts either a manifest path or a directory containing manifest.json.
EmbeddingCorpus ingest_dir_or_manifest(const std::filesystem::path& path);

/// Writes manifest.json + embeddings.bin into dir (created if missing).
void write_corpus(const EmbeddingCorpus& corpus, const std::filesystem::path& dir);

/// Serializes the embedding payload (header + row-major f32 LE values).
std::vector<std::uint8_t> encode_embeddings(const EmbeddingCorpus& corpus);

}  // namespace infocir
