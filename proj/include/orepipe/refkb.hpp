#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "orepipe/corpus.hpp"
#include "orepipe/embed.hpp"

namespace orepipe {

// Curated in-domain texts plus the index over their embeddings. Row i of the
// dataset corresponds to index id i.
struct ReferenceKB {
    Dataset rows;
    VectorIndex index;
};

ReferenceKB build_reference_kb(Dataset rows, const Embedder& embedder);

struct ClusterModel {
    int k = 0;
    std::vector<EmbeddingVector> centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
    // Inertia after each Lloyd iteration; non-increasing by construction.
    std::vector<double> inertia_history;
};

ClusterModel kmeans(const std::vector<EmbeddingVector>& vectors, int k,
                    std::uint64_t seed, int max_iters = 100);

// Helper for choosing k: (k, converged inertia) for each requested k.
std::vector<std::pair<int, double>> kmeans_elbow(
    const std::vector<EmbeddingVector>& vectors, const std::vector<int>& ks,
    std::uint64_t seed, int max_iters = 100);

struct PcaResult {
    std::vector<std::array<double, 2>> points;
    std::array<double, 2> explained_variance_ratio{0.0, 0.0};
};

PcaResult pca_project(const std::vector<EmbeddingVector>& vectors);

struct RemovedRow {
    int id = -1;
    int nearest_kept = -1;
    double similarity = 0.0;
};

struct DedupReport {
    std::vector<int> kept;
    std::vector<RemovedRow> removed;
    double reduction_percent = 0.0;
};

// Greedy first-wins pass in row order: row i is dropped iff its similarity to
// the nearest already-kept row is >= threshold.
DedupReport dedup_nn(const ReferenceKB& kb, double threshold);

nlohmann::json dedup_report_to_json(const DedupReport& report);

// Nearest-kept-neighbour similarity histogram over [lo, hi) in `bins` equal
// bins; supports the human threshold choice.
std::vector<std::pair<double, std::size_t>> nn_similarity_histogram(
    const ReferenceKB& kb, std::size_t bins = 20, double lo = 0.0,
    double hi = 1.0);

// Writes "x,y,cluster" CSV rows for the 2-D projection.
void cluster_viz_export(const ClusterModel& model,
                        const std::vector<std::array<double, 2>>& points,
                        const std::string& path);

}  // namespace orepipe
