#include <doctest.h>

#include <cmath>
#include <random>

#include "orepipe/refkb.hpp"
#include "test_util.hpp"

using namespace orepipe;
using testutil::TempDir;

namespace {

std::vector<EmbeddingVector> random_vectors(std::mt19937_64& rng, std::size_t n,
                                            std::size_t d) {
    std::vector<EmbeddingVector> vs(n, EmbeddingVector(d));
    for (auto& v : vs)
        for (double& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    return vs;
}

ReferenceKB kb_from_vectors(const std::vector<EmbeddingVector>& vs) {
    ReferenceKB kb;
    for (std::size_t i = 0; i < vs.size(); ++i)
        kb.rows.documents.push_back(
            {std::to_string(i), "row " + std::to_string(i), "s", "c", {}});
    kb.index = VectorIndex(vs);
    return kb;
}

}  // namespace

TEST_CASE("kmeans: k=1 centroid is the coordinate-wise mean") {
    std::mt19937_64 rng(1);
    auto vs = random_vectors(rng, 50, 8);
    ClusterModel model = kmeans(vs, 1, 0);

    EmbeddingVector mean(8, 0.0);
    for (const auto& v : vs)
        for (int j = 0; j < 8; ++j) mean[j] += v[j] / 50.0;
    for (int j = 0; j < 8; ++j)
        CHECK(model.centroids[0][j] == doctest::Approx(mean[j]).epsilon(1e-9));

    double inertia = 0.0;
    for (const auto& v : vs)
        for (int j = 0; j < 8; ++j)
            inertia += (v[j] - mean[j]) * (v[j] - mean[j]);
    CHECK(model.inertia == doctest::Approx(inertia).epsilon(1e-9));
}

TEST_CASE("kmeans: two well-separated blobs recovered with 100% purity") {
    std::mt19937_64 rng(2);
    std::vector<EmbeddingVector> vs;
    std::vector<int> truth;
    for (int i = 0; i < 40; ++i) {
        EmbeddingVector v(4);
        int blob = i % 2;
        for (double& x : v)
            x = (blob ? 100.0 : -100.0) +
                static_cast<double>(rng() >> 11) * 0x1.0p-53;
        vs.push_back(v);
        truth.push_back(blob);
    }
    ClusterModel model = kmeans(vs, 2, 17);
    // Purity: every point shares its cluster with exactly its blob.
    int a = model.assignments[0];
    for (int i = 0; i < 40; ++i)
        CHECK((model.assignments[i] == a) == (truth[i] == truth[0]));
}

TEST_CASE("kmeans: k=n gives zero inertia") {
    std::mt19937_64 rng(3);
    auto vs = random_vectors(rng, 10, 4);
    ClusterModel model = kmeans(vs, 10, 5);
    CHECK(model.inertia == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kmeans: parameter validation") {
    std::mt19937_64 rng(4);
    auto vs = random_vectors(rng, 5, 4);
    CHECK_THROWS_AS(kmeans(vs, 6, 0), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(vs, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(vs, 2, 0, 0), std::invalid_argument);
}

TEST_CASE("kmeans: inertia non-increasing, deterministic per seed") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto vs = random_vectors(rng, 60, 6);
        ClusterModel model = kmeans(vs, 4, trial);
        for (std::size_t i = 1; i < model.inertia_history.size(); ++i)
            CHECK(model.inertia_history[i] <= model.inertia_history[i - 1] + 1e-9);
        ClusterModel again = kmeans(vs, 4, trial);
        CHECK(model.assignments == again.assignments);
    }
}

TEST_CASE("pca_project: rank-1 data explains everything on axis 1") {
    std::mt19937_64 rng(7);
    EmbeddingVector direction(50);
    for (double& x : direction) x = static_cast<double>(rng() % 100) / 50.0 - 1.0;
    std::vector<EmbeddingVector> vs;
    for (int i = 0; i < 30; ++i) {
        EmbeddingVector v(50);
        double t = static_cast<double>(i) - 15.0;
        for (int j = 0; j < 50; ++j) v[j] = t * direction[j];
        vs.push_back(v);
    }
    PcaResult r = pca_project(vs);
    CHECK(r.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.explained_variance_ratio[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("pca_project: rank-2 data in 50-D preserves pairwise distances") {
    std::mt19937_64 rng(8);
    // Random planar points, embedded by a rigid rotation into 50-D.
    EmbeddingVector e1(50), e2(50);
    for (double& x : e1) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    double n1 = 0.0;
    for (double x : e1) n1 += x * x;
    for (double& x : e1) x /= std::sqrt(n1);
    // Gram-Schmidt for the second axis.
    for (double& x : e2) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    double proj = 0.0;
    for (int j = 0; j < 50; ++j) proj += e2[j] * e1[j];
    double n2 = 0.0;
    for (int j = 0; j < 50; ++j) {
        e2[j] -= proj * e1[j];
        n2 += e2[j] * e2[j];
    }
    for (double& x : e2) x /= std::sqrt(n2);

    std::vector<std::array<double, 2>> planar;
    std::vector<EmbeddingVector> vs;
    for (int i = 0; i < 40; ++i) {
        double a = static_cast<double>(rng() % 1000) / 100.0;
        double b = static_cast<double>(rng() % 1000) / 100.0;
        planar.push_back({a, b});
        EmbeddingVector v(50);
        for (int j = 0; j < 50; ++j) v[j] = a * e1[j] + b * e2[j];
        vs.push_back(v);
    }
    PcaResult r = pca_project(vs);
    for (int i = 0; i < 40; ++i) {
        for (int j = i + 1; j < 40; ++j) {
            double orig = std::hypot(planar[i][0] - planar[j][0],
                                     planar[i][1] - planar[j][1]);
            double proj_d = std::hypot(r.points[i][0] - r.points[j][0],
                                       r.points[i][1] - r.points[j][1]);
            CHECK(proj_d == doctest::Approx(orig).epsilon(1e-6));
        }
    }
}

namespace {

// Independent top-eigenvalue oracle: power iteration with deflation on a
// covariance matrix assembled in the test.
std::pair<double, double> power_iteration_top2(
    const std::vector<EmbeddingVector>& vs) {
    std::size_t n = vs.size(), d = vs.front().size();
    EmbeddingVector mean(d, 0.0);
    for (const auto& v : vs)
        for (std::size_t j = 0; j < d; ++j) mean[j] += v[j] / static_cast<double>(n);
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& v : vs)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) /
                             static_cast<double>(n - 1);

    auto top_eigen = [&](const std::vector<std::vector<double>>& m) {
        std::vector<double> x(d, 1.0);
        double lambda = 0.0;
        for (int iter = 0; iter < 5000; ++iter) {
            std::vector<double> y(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) y[i] += m[i][j] * x[j];
            double norm = 0.0;
            for (double v : y) norm += v * v;
            norm = std::sqrt(norm);
            for (std::size_t i = 0; i < d; ++i) y[i] /= norm;
            lambda = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) lambda += y[i] * m[i][j] * y[j];
            x = y;
        }
        return std::make_pair(lambda, x);
    };
    auto [l1, v1] = top_eigen(cov);
    auto deflated = cov;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) deflated[i][j] -= l1 * v1[i] * v1[j];
    auto [l2, v2] = top_eigen(deflated);
    return {l1, l2};
}

}  // namespace

TEST_CASE("pca_project: ratios match an independent eigensolve") {
    std::mt19937_64 rng(9);
    auto vs = random_vectors(rng, 100, 16);
    auto [l1, l2] = power_iteration_top2(vs);

    // Total variance from the trace.
    EmbeddingVector mean(16, 0.0);
    for (const auto& v : vs)
        for (int j = 0; j < 16; ++j) mean[j] += v[j] / 100.0;
    double trace = 0.0;
    for (const auto& v : vs)
        for (int j = 0; j < 16; ++j)
            trace += (v[j] - mean[j]) * (v[j] - mean[j]) / 99.0;

    PcaResult r = pca_project(vs);
    CHECK(r.explained_variance_ratio[0] == doctest::Approx(l1 / trace).epsilon(1e-6));
    CHECK(r.explained_variance_ratio[1] == doctest::Approx(l2 / trace).epsilon(1e-6));
    CHECK(r.explained_variance_ratio[0] >= r.explained_variance_ratio[1]);
    CHECK_THROWS_AS(pca_project({vs[0]}), std::invalid_argument);
}

TEST_CASE("dedup_nn: fully-duplicated set halves at threshold 0.999") {
    std::mt19937_64 rng(10);
    auto base = random_vectors(rng, 20, 8);
    std::vector<EmbeddingVector> doubled;
    for (const auto& v : base) {
        doubled.push_back(v);
        doubled.push_back(v);
    }
    DedupReport r = dedup_nn(kb_from_vectors(doubled), 0.999);
    CHECK(r.reduction_percent == 50.0);
    CHECK(r.kept.size() == 20);
}

TEST_CASE("dedup_nn: orthogonal points keep everything") {
    std::vector<EmbeddingVector> vs;
    for (int i = 0; i < 8; ++i) {
        EmbeddingVector v(8, 0.0);
        v[i] = 1.0;
        vs.push_back(v);
    }
    DedupReport r = dedup_nn(kb_from_vectors(vs), 0.9);
    CHECK(r.reduction_percent == 0.0);
    CHECK(r.removed.empty());
}

TEST_CASE("dedup_nn: planted 2/3 near-copies removed (echoes ~66.6%)") {
    std::mt19937_64 rng(11);
    auto originals = random_vectors(rng, 30, 16);
    std::vector<EmbeddingVector> vs = originals;
    for (int copy = 0; copy < 2; ++copy) {
        for (const auto& v : originals) {
            EmbeddingVector near = v;
            for (double& x : near) x *= 1.0 + 1e-9;  // same direction
            vs.push_back(near);
        }
    }
    ReferenceKB kb = kb_from_vectors(vs);
    DedupReport r = dedup_nn(kb, 0.999);
    CHECK(r.reduction_percent == doctest::Approx(66.6666).epsilon(1e-3));

    // Verify against an independent pairwise scan: every removed row really
    // has a kept neighbour at or above the threshold.
    for (const RemovedRow& removed : r.removed) {
        double best = -2.0;
        for (int kept : r.kept)
            best = std::max(best, cosine_similarity(kb.index.vector(removed.id),
                                                    kb.index.vector(kept)));
        CHECK(best >= 0.999);
    }
}

TEST_CASE("dedup_nn: idempotent on the kept set") {
    std::mt19937_64 rng(12);
    auto vs = random_vectors(rng, 40, 8);
    // Make some rows near-duplicates.
    for (int i = 0; i < 10; ++i) vs[30 + i] = vs[i];
    ReferenceKB kb = kb_from_vectors(vs);
    DedupReport first = dedup_nn(kb, 0.999);

    std::vector<EmbeddingVector> kept_vectors;
    for (int id : first.kept) {
        auto row = kb.index.vector(id);
        kept_vectors.emplace_back(row.begin(), row.end());
    }
    DedupReport second = dedup_nn(kb_from_vectors(kept_vectors), 0.999);
    CHECK(second.removed.empty());
}

TEST_CASE("dedup_nn: threshold validation") {
    std::mt19937_64 rng(13);
    ReferenceKB kb = kb_from_vectors(random_vectors(rng, 3, 8));
    CHECK_THROWS_AS(dedup_nn(kb, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dedup_nn(kb, 1.0001), std::invalid_argument);
}

TEST_CASE("cluster_viz_export: CSV round-trips assignments") {
    TempDir dir;
    ClusterModel model;
    model.k = 2;
    model.assignments = {0, 1, 0};
    std::vector<std::array<double, 2>> points{{0.5, -1.25}, {2, 3}, {-4, 0.125}};
    cluster_viz_export(model, points, dir.file("viz.csv"));

    std::ifstream in(dir.file("viz.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,cluster");
    std::vector<int> clusters;
    std::string line;
    while (std::getline(in, line)) {
        std::size_t last = line.find_last_of(',');
        clusters.push_back(std::stoi(line.substr(last + 1)));
        double x = std::stod(line);
        double y = std::stod(line.substr(line.find(',') + 1));
        CHECK(x == points[clusters.size() - 1][0]);
        CHECK(y == points[clusters.size() - 1][1]);
    }
    CHECK(clusters == std::vector<int>{0, 1, 0});
}

TEST_CASE("cluster_viz_export: empty model and size mismatch are errors") {
    TempDir dir;
    ClusterModel model;
    CHECK_THROWS_AS(cluster_viz_export(model, {}, dir.file("x.csv")),
                    std::invalid_argument);
    model.assignments = {0};
    CHECK_THROWS_AS(cluster_viz_export(model, {}, dir.file("x.csv")),
                    std::invalid_argument);
}

TEST_CASE("nn_similarity_histogram: duplicates land in the top bin") {
    std::vector<EmbeddingVector> vs{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
    auto hist = nn_similarity_histogram(kb_from_vectors(vs), 10, 0.0, 1.0);
    std::size_t total = 0;
    for (const auto& [lo, count] : hist) total += count;
    CHECK(total == 4);
    CHECK(hist.back().second == 4);  // every row has an exact duplicate
}
