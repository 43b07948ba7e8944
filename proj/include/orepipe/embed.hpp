#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace orepipe {

using EmbeddingVector = std::vector<double>;

// dot(u,v)/(|u||v|), clamped to [-1,1]. Throws on dimension mismatch or a
// zero vector (never returns NaN).
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Deterministic stand-in embedder: case-folded word unigrams and bigrams,
// feature-hashed with a signed hash into `dimension` buckets, L2-normalized.
// Pure function of (text, dimension).
EmbeddingVector hash_embed(const std::string& text, std::size_t dimension);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(
        const std::vector<std::string>& texts) const;
};

class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = 256);
    std::string name() const override;
    std::size_t dimension() const override { return dimension_; }
    EmbeddingVector embed(const std::string& text) const override;

private:
    std::size_t dimension_;
};

// Client for the embedding HTTP service: POST {"texts": [str]} ->
// {"dimension": int, "vectors": [[float]]}. Transport failures are retried
// with backoff; a dimension change mid-run is fatal.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string base_url, std::string model_id,
                   int max_retries = 3, int backoff_ms = 200);
    ~RemoteEmbedder() override;

    std::string name() const override;
    std::size_t dimension() const override;
    EmbeddingVector embed(const std::string& text) const override;
    std::vector<EmbeddingVector> embed_batch(
        const std::vector<std::string>& texts) const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SearchHit {
    int ref_index = -1;
    double score = 0.0;
};

// Exact-search index: linear scan over the stored vectors, ties broken by
// the smallest index. Immutable after build; concurrent queries are safe.
class VectorIndex {
public:
    VectorIndex() = default;
    explicit VectorIndex(const std::vector<EmbeddingVector>& vectors);

    std::size_t size() const { return norms_.size(); }
    std::size_t dimension() const { return dimension_; }
    bool empty() const { return norms_.empty(); }

    std::span<const double> vector(std::size_t i) const;

    SearchHit top1(std::span<const double> query) const;
    std::vector<SearchHit> topk(std::span<const double> query,
                                std::size_t k) const;

private:
    std::vector<double> data_;   // row-major
    std::vector<double> norms_;
    std::size_t dimension_ = 0;
};

inline VectorIndex build_index(const std::vector<EmbeddingVector>& vectors) {
    return VectorIndex(vectors);
}

}  // namespace orepipe
