#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace atc::experience {

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    // Unit-norm vector, deterministic per backend. Throws ConfigError on
    // empty text, BackendError on remote failure.
    virtual std::vector<float> embed(const std::string& text) const = 0;
};

// Offline deterministic embedder: lowercase word n-grams (1 to 3) are
// feature-hashed with FNV-1a 64 into `dimension` signed buckets, then the
// vector is L2-normalized. Similar texts share grams and land close in
// cosine space, which is all the retrieval tests need.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 3072, std::uint64_t seed = 0);

    std::string id() const override;
    std::size_t dimension() const override { return dimension_; }
    std::vector<float> embed(const std::string& text) const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

struct RemoteEmbedderConfig {
    std::string base_url;
    std::string path = "/v1/embeddings";
    std::string model;
    std::string api_key; // empty: fall back to api_key_env
    std::string api_key_env = "ATC_EMBEDDING_API_KEY";
    std::size_t dimension = 3072;
    double connect_timeout_s = 10.0;
    double read_timeout_s = 60.0;
    int attempts = 3;
};

// Embeddings-endpoint client. Retries transport failures with exponential
// backoff (injectable sleeper), then rethrows BackendError. A response whose
// vector length disagrees with the configured dimension is DimensionMismatch.
class RemoteEmbedder : public Embedder {
public:
    using SleepFn = std::function<void(double)>;

    explicit RemoteEmbedder(RemoteEmbedderConfig cfg, SleepFn sleep = {});

    std::string id() const override;
    std::size_t dimension() const override { return cfg_.dimension; }
    std::vector<float> embed(const std::string& text) const override;

private:
    RemoteEmbedderConfig cfg_;
    SleepFn sleep_;
    std::string id_;
};

} // namespace atc::experience
