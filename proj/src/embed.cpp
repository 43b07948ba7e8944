#include "orepipe/embed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "orepipe/glossary.hpp"

namespace orepipe {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw std::invalid_argument(
            "cosine_similarity: dimension mismatch (" +
            std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0)
        throw std::invalid_argument("cosine_similarity: zero vector");
    double sim = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(sim, -1.0, 1.0);
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace

EmbeddingVector hash_embed(const std::string& text, std::size_t dimension) {
    if (dimension < 8)
        throw std::invalid_argument("hash_embed: dimension must be >= 8");
    std::vector<std::string> tokens = word_tokens(text);
    if (tokens.empty())
        throw std::invalid_argument("hash_embed: empty text");

    EmbeddingVector vec(dimension, 0.0);
    auto add_feature = [&](const std::string& feature) {
        std::uint64_t h = fnv1a64(feature);
        std::size_t bucket = static_cast<std::size_t>(h >> 1) % dimension;
        double sign = (h & 1u) ? 1.0 : -1.0;
        vec[bucket] += sign;
    };
    for (const std::string& token : tokens) add_feature(token);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
        add_feature(tokens[i] + "|" + tokens[i + 1]);

    double norm = 0.0;
    for (double x : vec) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // All feature contributions cancelled; fall back to a deterministic
        // one-hot so the vector stays usable for cosine.
        vec[static_cast<std::size_t>(fnv1a64(tokens[0]) >> 1) % dimension] = 1.0;
        return vec;
    }
    for (double& x : vec) x /= norm;
    return vec;
}

std::vector<EmbeddingVector> Embedder::embed_batch(
    const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) out.push_back(embed(text));
    return out;
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ < 8)
        throw std::invalid_argument("HashEmbedder: dimension must be >= 8");
}

std::string HashEmbedder::name() const {
    return "hash-" + std::to_string(dimension_);
}

EmbeddingVector HashEmbedder::embed(const std::string& text) const {
    return hash_embed(text, dimension_);
}

struct RemoteEmbedder::Impl {
    std::string base_url;
    std::string model_id;
    int max_retries;
    int backoff_ms;
    mutable std::size_t dimension = 0;  // learned from the first response

    std::vector<EmbeddingVector> request(
        const std::vector<std::string>& texts) const {
        if (texts.empty())
            throw std::invalid_argument("remote_embed: empty batch");
        nlohmann::json body;
        body["texts"] = texts;
        body["model"] = model_id;

        std::string last_error;
        for (int attempt = 0; attempt <= max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(backoff_ms << (attempt - 1)));
            }
            httplib::Client client(base_url);
            client.set_read_timeout(30, 0);
            auto res = client.Post("/embed", body.dump(), "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            return parse_response(res->body, texts.size());
        }
        throw std::runtime_error("remote_embed: " + last_error + " after " +
                                 std::to_string(max_retries + 1) + " attempts");
    }

    std::vector<EmbeddingVector> parse_response(const std::string& body,
                                                std::size_t expected) const {
        nlohmann::json obj = nlohmann::json::parse(body);
        std::size_t dim = obj.at("dimension").get<std::size_t>();
        if (dimension == 0) {
            dimension = dim;
        } else if (dim != dimension) {
            throw std::runtime_error(
                "remote_embed: service dimension changed mid-run (" +
                std::to_string(dimension) + " -> " + std::to_string(dim) + ")");
        }
        const auto& rows = obj.at("vectors");
        if (rows.size() != expected)
            throw std::runtime_error(
                "remote_embed: expected " + std::to_string(expected) +
                " vectors, got " + std::to_string(rows.size()));
        std::vector<EmbeddingVector> out;
        out.reserve(rows.size());
        for (const auto& row : rows) {
            EmbeddingVector v = row.get<EmbeddingVector>();
            if (v.size() != dim)
                throw std::runtime_error("remote_embed: ragged vector in response");
            out.push_back(std::move(v));
        }
        return out;
    }
};

RemoteEmbedder::RemoteEmbedder(std::string base_url, std::string model_id,
                               int max_retries, int backoff_ms)
    : impl_(std::make_unique<Impl>()) {
    impl_->base_url = std::move(base_url);
    impl_->model_id = std::move(model_id);
    impl_->max_retries = max_retries;
    impl_->backoff_ms = backoff_ms;
}

RemoteEmbedder::~RemoteEmbedder() = default;

std::string RemoteEmbedder::name() const {
    return "remote:" + impl_->model_id;
}

std::size_t RemoteEmbedder::dimension() const {
    if (impl_->dimension == 0) {
        // Force one round trip to learn the service-declared dimension.
        impl_->request({"dimension probe"});
    }
    return impl_->dimension;
}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) const {
    return impl_->request({text}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
    return impl_->request(texts);
}

VectorIndex::VectorIndex(const std::vector<EmbeddingVector>& vectors) {
    if (vectors.empty())
        throw std::invalid_argument("VectorIndex: empty vector list");
    dimension_ = vectors.front().size();
    data_.reserve(vectors.size() * dimension_);
    norms_.reserve(vectors.size());
    for (const EmbeddingVector& v : vectors) {
        if (v.size() != dimension_)
            throw std::invalid_argument("VectorIndex: mixed dimensions");
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norms_.push_back(std::sqrt(norm));
        data_.insert(data_.end(), v.begin(), v.end());
    }
}

std::span<const double> VectorIndex::vector(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
}

SearchHit VectorIndex::top1(std::span<const double> query) const {
    if (empty()) throw std::runtime_error("top1: empty index");
    if (query.size() != dimension_)
        throw std::invalid_argument("top1: query dimension mismatch");

    double qnorm = 0.0;
    for (double x : query) qnorm += x * x;
    qnorm = std::sqrt(qnorm);
    if (qnorm == 0.0) throw std::invalid_argument("top1: zero query vector");

    SearchHit best;
    best.score = -2.0;
    for (std::size_t i = 0; i < norms_.size(); ++i) {
        if (norms_[i] == 0.0) continue;
        const double* row = data_.data() + i * dimension_;
        double dot = 0.0;
        for (std::size_t j = 0; j < dimension_; ++j) dot += row[j] * query[j];
        double score = std::clamp(dot / (norms_[i] * qnorm), -1.0, 1.0);
        if (score > best.score) {
            best.score = score;
            best.ref_index = static_cast<int>(i);
        }
    }
    if (best.ref_index < 0) throw std::runtime_error("top1: all vectors zero");
    return best;
}

std::vector<SearchHit> VectorIndex::topk(std::span<const double> query,
                                         std::size_t k) const {
    if (empty()) throw std::runtime_error("topk: empty index");
    std::vector<SearchHit> hits;
    hits.reserve(norms_.size());
    for (std::size_t i = 0; i < norms_.size(); ++i) {
        if (norms_[i] == 0.0) continue;
        hits.push_back({static_cast<int>(i),
                        cosine_similarity(vector(i), query)});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.ref_index < b.ref_index;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

}  // namespace orepipe
