#include "demoner/encoding.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "demoner/error.hpp"
#include "demoner/rng.hpp"

namespace demoner {

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (float v : values) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw DataError("cosine: dimension mismatch " + std::to_string(u.size()) +
                    " vs " + std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine(std::span<const float>(u.values), std::span<const float>(v.values));
}

std::vector<EmbeddingVector> SemanticEncoder::encode_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(encode(t));
  return out;
}

EmbeddingVector encode_hashed_ngram(std::string_view text, std::size_t dim) {
  if (dim < 16) throw UsageError("hashed n-gram encoder needs dim >= 16");
  EmbeddingVector out{std::vector<float>(dim, 0.0f)};
  if (text.empty()) return out;

  std::string padded;
  padded.reserve(text.size() + 2);
  padded += '\x02';
  for (unsigned char c : text) {
    padded += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  }
  padded += '\x03';

  std::vector<double> counts(dim, 0.0);
  const std::string_view view(padded);
  for (std::size_t n = 3; n <= 5; ++n) {
    if (view.size() < n) break;
    for (std::size_t i = 0; i + n <= view.size(); ++i) {
      const auto h = fnv1a(view.substr(i, n), fnv1a(std::string(1, char('0' + n))));
      counts[h % dim] += 1.0;
    }
  }
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < dim; ++i) {
    out.values[i] = static_cast<float>(counts[i] / norm);
  }
  return out;
}

HashedNgramEncoder::HashedNgramEncoder(std::size_t dim) : dim_(dim) {
  if (dim < 16) throw UsageError("hashed n-gram encoder needs dim >= 16");
}

std::string HashedNgramEncoder::id() const {
  return "hashed-ngram-3-5:" + std::to_string(dim_);
}

EmbeddingVector HashedNgramEncoder::encode(std::string_view text) const {
  return encode_hashed_ngram(text, dim_);
}

// ---------------------------------------------------------------------------
// Remote provider

RemoteEncoder::RemoteEncoder(RemoteEncoderOptions options)
    : options_(std::move(options)) {
  if (options_.dim == 0) throw UsageError("remote encoder needs a positive dim");
  if (options_.attempts < 1) throw UsageError("remote encoder needs >= 1 attempt");
  const auto& url = options_.url;
  const auto scheme_end = url.find("://");
  // Plain http only; TLS is not compiled into the client.
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw UsageError("remote encoder url must look like http://host:port/path");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

EmbeddingVector RemoteEncoder::encode(std::string_view text) const {
  return request({std::string(text)}).front();
}

std::vector<EmbeddingVector> RemoteEncoder::encode_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  const std::size_t step = std::max<std::size_t>(options_.batch_size, 1);
  for (std::size_t i = 0; i < texts.size(); i += step) {
    const auto end = std::min(texts.size(), i + step);
    auto part = request({texts.begin() + i, texts.begin() + end});
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEncoder::request(
    const std::vector<std::string>& texts) const {
  const std::string body = nlohmann::json{{"texts", texts}}.dump();
  std::string last_error;
  auto backoff = options_.initial_backoff;
  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      const auto reply = nlohmann::json::parse(res->body);
      const auto& vectors = reply.at("vectors");
      if (vectors.size() != texts.size()) {
        throw ProviderError("provider returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");
      }
      std::vector<EmbeddingVector> out;
      out.reserve(texts.size());
      for (const auto& v : vectors) {
        EmbeddingVector e{v.get<std::vector<float>>()};
        if (e.dim() != options_.dim) {
          throw ProviderError("provider returned dim " + std::to_string(e.dim()) +
                              ", expected " + std::to_string(options_.dim));
        }
        if (!std::all_of(e.values.begin(), e.values.end(),
                         [](float x) { return std::isfinite(x); })) {
          throw ProviderError("provider returned a non-finite value");
        }
        out.push_back(std::move(e));
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      // Malformed payloads are not transient; do not retry.
      throw ProviderError(std::string("malformed provider response: ") + e.what());
    }
  }
  throw ProviderError("embedding provider " + options_.url + " unreachable after " +
                      std::to_string(options_.attempts) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Cache

Digest sha256(std::string_view data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error("SHA-256 failed");
  }
  return out;
}

std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out += kHex[b >> 4];
    out += kHex[b & 0xf];
  }
  return out;
}

namespace {

constexpr std::string_view kMagic = "DNEC1";

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

}  // namespace

std::size_t EmbeddingCache::DigestHash::operator()(const Digest& d) const {
  std::size_t h;
  std::memcpy(&h, d.data(), sizeof(h));
  return h;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  load();
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw DataError("cannot open embedding cache " + path_.string());
  if (std::filesystem::file_size(path_) == 0) {
    out_.write(kMagic.data(), kMagic.size());
    out_.flush();
  }
}

Digest EmbeddingCache::key(std::string_view encoder_id, std::string_view text) {
  std::string buf(encoder_id);
  buf += '\0';
  buf += text;
  return sha256(buf);
}

void EmbeddingCache::load() {
  if (!std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.empty()) return;
  if (data.size() < kMagic.size() || data.compare(0, kMagic.size(), kMagic) != 0) {
    throw DataError("embedding cache " + path_.string() + " has a bad magic header");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  std::size_t pos = kMagic.size();
  while (pos < data.size()) {
    if (data.size() - pos < 36) break;
    Digest d;
    std::memcpy(d.data(), bytes + pos, 32);
    const std::uint32_t dim = get_u32(bytes + pos + 32);
    const std::size_t need = 36 + std::size_t(dim) * 4;
    if (data.size() - pos < need) break;
    EmbeddingVector v{std::vector<float>(dim)};
    for (std::uint32_t i = 0; i < dim; ++i) {
      v.values[i] = std::bit_cast<float>(get_u32(bytes + pos + 36 + 4 * i));
    }
    index_.emplace(d, std::move(v));
    pos += need;
  }
  if (pos < data.size()) {
    // A torn final record from an interrupted write; drop it.
    in.close();
    std::filesystem::resize_file(path_, pos);
  }
}

std::optional<EmbeddingVector> EmbeddingCache::get(const Digest& key) const {
  std::shared_lock lock(mutex_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const Digest& key, const EmbeddingVector& vec) {
  std::unique_lock lock(mutex_);
  if (index_.count(key)) return;
  std::string rec(reinterpret_cast<const char*>(key.data()), key.size());
  put_u32(rec, static_cast<std::uint32_t>(vec.dim()));
  for (float f : vec.values) put_u32(rec, std::bit_cast<std::uint32_t>(f));
  out_.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  out_.flush();
  if (!out_) throw DataError("write to embedding cache " + path_.string() + " failed");
  index_.emplace(key, vec);
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

CachedEncoder::CachedEncoder(std::shared_ptr<const SemanticEncoder> inner,
                             std::shared_ptr<EmbeddingCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

EmbeddingVector CachedEncoder::encode(std::string_view text) const {
  const auto k = EmbeddingCache::key(inner_->id(), text);
  if (auto hit = cache_->get(k)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  auto v = inner_->encode(text);
  cache_->put(k, v);
  return v;
}

std::vector<EmbeddingVector> CachedEncoder::encode_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_->get(EmbeddingCache::key(inner_->id(), texts[i]))) {
      ++hits_;
      out[i] = std::move(*hit);
    } else {
      missing.push_back(texts[i]);
      slots.push_back(i);
    }
  }
  if (!missing.empty()) {
    misses_ += missing.size();
    auto fresh = inner_->encode_batch(missing);
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      cache_->put(EmbeddingCache::key(inner_->id(), missing[j]), fresh[j]);
      out[slots[j]] = std::move(fresh[j]);
    }
  }
  return out;
}

EmbeddingVector MemoEncoder::encode(std::string_view text) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = memo_.find(std::string(text)); it != memo_.end()) return it->second;
  }
  auto v = inner_->encode(text);
  std::unique_lock lock(mutex_);
  return memo_.emplace(std::string(text), std::move(v)).first->second;
}

double semantic_similarity(const SemanticEncoder& encoder, std::string_view a,
                           std::string_view b) {
  return cosine(encoder.encode(a), encoder.encode(b));
}

}  // namespace demoner
