#include "orepipe/refkb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace orepipe {

ReferenceKB build_reference_kb(Dataset rows, const Embedder& embedder) {
    if (rows.empty())
        throw std::invalid_argument("build_reference_kb: empty dataset");
    std::vector<EmbeddingVector> vectors;
    vectors.reserve(rows.size());
    for (const Document& doc : rows.documents)
        vectors.push_back(embedder.embed(doc.text));
    return ReferenceKB{std::move(rows), VectorIndex(vectors)};
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

// Uniform double in [0, 1) from raw mt19937_64 output, independent of any
// library distribution implementation.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<EmbeddingVector> kmeans_pp_init(
    const std::vector<EmbeddingVector>& vectors, int k, std::mt19937_64& rng) {
    std::size_t n = vectors.size();
    std::vector<EmbeddingVector> centroids;
    centroids.reserve(k);
    centroids.push_back(vectors[static_cast<std::size_t>(next_unit(rng) * n)]);

    std::vector<double> dist2(n);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const EmbeddingVector& centroid : centroids)
                best = std::min(best, squared_distance(vectors[i], centroid));
            dist2[i] = best;
            total += best;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            double r = next_unit(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = static_cast<std::size_t>(next_unit(rng) * n);
        }
        centroids.push_back(vectors[chosen]);
    }
    return centroids;
}

}  // namespace

ClusterModel kmeans(const std::vector<EmbeddingVector>& vectors, int k,
                    std::uint64_t seed, int max_iters) {
    std::size_t n = vectors.size();
    if (k <= 0) throw std::invalid_argument("kmeans: k must be positive");
    if (static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("kmeans: k exceeds number of points");
    if (max_iters < 1) throw std::invalid_argument("kmeans: max_iters < 1");

    std::size_t dim = vectors.front().size();
    std::mt19937_64 rng(seed);

    ClusterModel model;
    model.k = k;
    model.centroids = kmeans_pp_init(vectors, k, rng);
    model.assignments.assign(n, -1);

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = squared_distance(vectors[i], model.centroids[0]);
            for (int c = 1; c < k; ++c) {
                double d = squared_distance(vectors[i], model.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (model.assignments[i] != best) {
                model.assignments[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        model.inertia_history.push_back(inertia);
        model.inertia = inertia;
        if (!changed) break;

        std::vector<EmbeddingVector> sums(k, EmbeddingVector(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            int c = model.assignments[i];
            counts[c] += 1;
            for (std::size_t j = 0; j < dim; ++j) sums[c][j] += vectors[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t j = 0; j < dim; ++j)
                model.centroids[c][j] = sums[c][j] / counts[c];
        }
    }
    return model;
}

std::vector<std::pair<int, double>> kmeans_elbow(
    const std::vector<EmbeddingVector>& vectors, const std::vector<int>& ks,
    std::uint64_t seed, int max_iters) {
    std::vector<std::pair<int, double>> out;
    out.reserve(ks.size());
    for (int k : ks)
        out.emplace_back(k, kmeans(vectors, k, seed, max_iters).inertia);
    return out;
}

namespace {

// Cyclic Jacobi eigensolver for a symmetric matrix (row-major). Returns
// eigenvalues in `values` and eigenvectors as columns of `vecs`.
void jacobi_eigensolve(std::vector<double> a, std::size_t d,
                       std::vector<double>& values, std::vector<double>& vecs) {
    vecs.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) vecs[i * d + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                double apq = a[p * d + q];
                if (std::abs(apq) < 1e-300) continue;
                double app = a[p * d + p];
                double aqq = a[q * d + q];
                double theta = (aqq - app) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t i = 0; i < d; ++i) {
                    double aip = a[i * d + p];
                    double aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    double api = a[p * d + i];
                    double aqi = a[q * d + i];
                    a[p * d + i] = c * api - s * aqi;
                    a[q * d + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    double vip = vecs[i * d + p];
                    double viq = vecs[i * d + q];
                    vecs[i * d + p] = c * vip - s * viq;
                    vecs[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }
    values.resize(d);
    for (std::size_t i = 0; i < d; ++i) values[i] = a[i * d + i];
}

}  // namespace

PcaResult pca_project(const std::vector<EmbeddingVector>& vectors) {
    std::size_t n = vectors.size();
    if (n < 2) throw std::invalid_argument("pca_project: need at least 2 points");
    std::size_t d = vectors.front().size();
    for (const EmbeddingVector& v : vectors)
        if (v.size() != d)
            throw std::invalid_argument("pca_project: mixed dimensions");

    EmbeddingVector mean(d, 0.0);
    for (const EmbeddingVector& v : vectors)
        for (std::size_t j = 0; j < d; ++j) mean[j] += v[j];
    for (double& m : mean) m /= static_cast<double>(n);

    std::vector<double> cov(d * d, 0.0);
    for (const EmbeddingVector& v : vectors) {
        for (std::size_t i = 0; i < d; ++i) {
            double ci = v[i] - mean[i];
            for (std::size_t j = i; j < d; ++j)
                cov[i * d + j] += ci * (v[j] - mean[j]);
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i * d + j] /= static_cast<double>(n - 1);
            cov[j * d + i] = cov[i * d + j];
        }

    std::vector<double> values, vecs;
    jacobi_eigensolve(cov, d, values, vecs);

    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

    double total = 0.0;
    for (double v : values) total += std::max(v, 0.0);

    PcaResult result;
    std::vector<EmbeddingVector> axes;
    for (std::size_t comp = 0; comp < 2; ++comp) {
        EmbeddingVector axis(d, 0.0);
        double lambda = 0.0;
        if (comp < d) {
            std::size_t col = order[comp];
            lambda = std::max(values[col], 0.0);
            for (std::size_t i = 0; i < d; ++i) axis[i] = vecs[i * d + col];
            // Sign convention: largest-magnitude component positive.
            std::size_t arg = 0;
            for (std::size_t i = 1; i < d; ++i)
                if (std::abs(axis[i]) > std::abs(axis[arg])) arg = i;
            if (axis[arg] < 0.0)
                for (double& x : axis) x = -x;
        }
        axes.push_back(std::move(axis));
        result.explained_variance_ratio[comp] = total > 0.0 ? lambda / total : 0.0;
    }

    result.points.reserve(n);
    for (const EmbeddingVector& v : vectors) {
        std::array<double, 2> p{0.0, 0.0};
        for (std::size_t comp = 0; comp < 2; ++comp)
            for (std::size_t j = 0; j < d; ++j)
                p[comp] += (v[j] - mean[j]) * axes[comp][j];
        result.points.push_back(p);
    }
    return result;
}

DedupReport dedup_nn(const ReferenceKB& kb, double threshold) {
    if (threshold <= 0.0 || threshold > 1.0)
        throw std::invalid_argument("dedup_nn: threshold must be in (0, 1]");
    std::size_t n = kb.index.size();
    if (n == 0) throw std::invalid_argument("dedup_nn: empty reference KB");

    DedupReport report;
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> vi = kb.index.vector(i);
        int nearest = -1;
        double best = -2.0;
        for (int kept_id : report.kept) {
            double sim = cosine_similarity(vi, kb.index.vector(kept_id));
            if (sim > best) {
                best = sim;
                nearest = kept_id;
            }
        }
        if (nearest >= 0 && best >= threshold) {
            report.removed.push_back({static_cast<int>(i), nearest, best});
        } else {
            report.kept.push_back(static_cast<int>(i));
        }
    }
    report.reduction_percent =
        100.0 * static_cast<double>(report.removed.size()) / static_cast<double>(n);
    return report;
}

nlohmann::json dedup_report_to_json(const DedupReport& report) {
    nlohmann::json obj;
    obj["kept"] = report.kept;
    obj["removed"] = nlohmann::json::array();
    for (const RemovedRow& row : report.removed) {
        obj["removed"].push_back(
            {{"id", row.id}, {"nearest", row.nearest_kept}, {"sim", row.similarity}});
    }
    obj["reduction_percent"] = report.reduction_percent;
    return obj;
}

std::vector<std::pair<double, std::size_t>> nn_similarity_histogram(
    const ReferenceKB& kb, std::size_t bins, double lo, double hi) {
    if (bins == 0 || hi <= lo)
        throw std::invalid_argument("nn_similarity_histogram: bad bin spec");
    std::size_t n = kb.index.size();
    std::vector<std::pair<double, std::size_t>> hist(bins);
    double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b)
        hist[b] = {lo + width * static_cast<double>(b), 0};
    if (n < 2) return hist;

    for (std::size_t i = 0; i < n; ++i) {
        double best = -2.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            best = std::max(best,
                            cosine_similarity(kb.index.vector(i), kb.index.vector(j)));
        }
        double clamped = std::clamp(best, lo, std::nextafter(hi, lo));
        auto b = static_cast<std::size_t>((clamped - lo) / width);
        if (b >= bins) b = bins - 1;
        hist[b].second += 1;
    }
    return hist;
}

void cluster_viz_export(const ClusterModel& model,
                        const std::vector<std::array<double, 2>>& points,
                        const std::string& path) {
    if (model.assignments.empty())
        throw std::invalid_argument("cluster_viz_export: empty model");
    if (points.size() != model.assignments.size())
        throw std::invalid_argument(
            "cluster_viz_export: point/assignment count mismatch");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "x,y,cluster\n";
    char buf[80];
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", points[i][0],
                      points[i][1], model.assignments[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failure on " + path);
}

}  // namespace orepipe
