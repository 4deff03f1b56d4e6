#pragma once

// Sentence encoders, cosine similarity and the on-disk embedding cache.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace demoner {

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Standard cosine; 0 when either vector has zero norm.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);
double cosine(std::span<const float> u, std::span<const float> v);

class SemanticEncoder {
 public:
  virtual ~SemanticEncoder() = default;

  virtual std::size_t dim() const = 0;
  // Stable identifier; part of the cache key.
  virtual std::string id() const = 0;
  virtual EmbeddingVector encode(std::string_view text) const = 0;
  // Results are in input order.
  virtual std::vector<EmbeddingVector> encode_batch(
      const std::vector<std::string>& texts) const;
};

// Bag of character 3-5-grams (lowercased, with boundary markers) hashed
// into `dim` buckets and L2-normalized.
EmbeddingVector encode_hashed_ngram(std::string_view text, std::size_t dim);

class HashedNgramEncoder final : public SemanticEncoder {
 public:
  explicit HashedNgramEncoder(std::size_t dim = 256);

  std::size_t dim() const override { return dim_; }
  std::string id() const override;
  EmbeddingVector encode(std::string_view text) const override;

 private:
  std::size_t dim_;
};

struct RemoteEncoderOptions {
  std::string url;  // http://host:port/path
  std::size_t dim = 0;
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{30};
  std::size_t batch_size = 64;
};

// Client for an HTTP embedding service:
//   POST {"texts": [...]}  ->  {"vectors": [[...], ...]}
// Retries with exponential backoff; throws ProviderError when exhausted.
class RemoteEncoder final : public SemanticEncoder {
 public:
  explicit RemoteEncoder(RemoteEncoderOptions options);

  std::size_t dim() const override { return options_.dim; }
  std::string id() const override { return "remote:" + options_.url; }
  EmbeddingVector encode(std::string_view text) const override;
  std::vector<EmbeddingVector> encode_batch(
      const std::vector<std::string>& texts) const override;

 private:
  std::vector<EmbeddingVector> request(const std::vector<std::string>& texts) const;

  RemoteEncoderOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

using Digest = std::array<unsigned char, 32>;

Digest sha256(std::string_view data);
std::string to_hex(std::span<const unsigned char> bytes);

// Append-only embedding store. File layout: "DNEC1", then records of
// (32-byte digest, u32 dim LE, dim x f32 LE).
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path);

  static Digest key(std::string_view encoder_id, std::string_view text);

  std::optional<EmbeddingVector> get(const Digest& key) const;
  void put(const Digest& key, const EmbeddingVector& vec);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  struct DigestHash {
    std::size_t operator()(const Digest& d) const;
  };

  void load();

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Digest, EmbeddingVector, DigestHash> index_;
  std::ofstream out_;
};

// Encoder wrapper that consults a cache before the inner encoder. Reports
// the inner encoder's id, so cached and uncached runs are interchangeable.
class CachedEncoder final : public SemanticEncoder {
 public:
  CachedEncoder(std::shared_ptr<const SemanticEncoder> inner,
                std::shared_ptr<EmbeddingCache> cache);

  std::size_t dim() const override { return inner_->dim(); }
  std::string id() const override { return inner_->id(); }
  EmbeddingVector encode(std::string_view text) const override;
  std::vector<EmbeddingVector> encode_batch(
      const std::vector<std::string>& texts) const override;

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  std::shared_ptr<const SemanticEncoder> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

// In-process memo table in front of an encoder; not persisted.
class MemoEncoder final : public SemanticEncoder {
 public:
  explicit MemoEncoder(std::shared_ptr<const SemanticEncoder> inner)
      : inner_(std::move(inner)) {}

  std::size_t dim() const override { return inner_->dim(); }
  std::string id() const override { return inner_->id(); }
  EmbeddingVector encode(std::string_view text) const override;

 private:
  std::shared_ptr<const SemanticEncoder> inner_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, EmbeddingVector> memo_;
};

// S_se: cosine of the two encodings.
double semantic_similarity(const SemanticEncoder& encoder, std::string_view a,
                           std::string_view b);

}  // namespace demoner
