#include "orepipe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <string_view>
#include <thread>

namespace orepipe {

namespace {

class StageTimer {
public:
    explicit StageTimer(PipelineSummary& summary, std::string stage)
        : summary_(summary),
          stage_(std::move(stage)),
          start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        auto elapsed = std::chrono::steady_clock::now() - start_;
        summary_.stage_seconds[stage_] =
            std::chrono::duration<double>(elapsed).count();
    }

private:
    PipelineSummary& summary_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config) {
    if (config.embedder_kind == "hash")
        return std::make_unique<HashEmbedder>(config.hash_dimension);
    if (config.embedder_kind == "remote") {
        if (config.remote_endpoint.empty())
            throw std::invalid_argument("remote embedder needs an endpoint");
        return std::make_unique<RemoteEmbedder>(config.remote_endpoint,
                                                config.remote_model);
    }
    throw std::invalid_argument("unknown embedder kind: " + config.embedder_kind);
}

std::vector<ScoredDocument> run_similarity_stage(
    const Dataset& dataset, const ReferenceKB& kb, const Embedder& embedder,
    std::size_t batch_size, int jobs, std::size_t embed_char_budget,
    std::size_t start_row, const ScoredBatchCallback& on_batch,
    std::size_t* truncated) {
    if (kb.index.empty())
        throw std::invalid_argument("run_similarity_stage: empty reference KB");
    if (batch_size == 0) batch_size = 1;
    if (jobs < 1) jobs = 1;

    const auto& docs = dataset.documents;
    std::vector<ScoredDocument> scored;
    scored.reserve(docs.size() > start_row ? docs.size() - start_row : 0);
    std::size_t truncated_count = 0;

    for (std::size_t begin = start_row; begin < docs.size(); begin += batch_size) {
        std::size_t end = std::min(begin + batch_size, docs.size());
        std::vector<ScoredDocument> batch(end - begin);
        std::atomic<std::size_t> batch_truncated{0};
        std::atomic<bool> failed{false};
        std::string failure;
        std::mutex failure_mutex;

        auto worker = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi && !failed.load(); ++i) {
                const Document& doc = docs[begin + i];
                try {
                    std::string_view text = doc.text;
                    if (text.size() > embed_char_budget) {
                        text = text.substr(0, embed_char_budget);
                        batch_truncated.fetch_add(1);
                    }
                    EmbeddingVector v = embedder.embed(std::string(text));
                    SearchHit hit = kb.index.top1(v);
                    batch[i] = {doc, hit.score, hit.ref_index};
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    failure = e.what();
                    failed.store(true);
                }
            }
        };

        std::size_t n = batch.size();
        std::size_t workers = std::min<std::size_t>(jobs, n);
        if (workers <= 1) {
            worker(0, n);
        } else {
            std::vector<std::thread> threads;
            std::size_t chunk = (n + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                std::size_t lo = w * chunk;
                std::size_t hi = std::min(lo + chunk, n);
                if (lo < hi) threads.emplace_back(worker, lo, hi);
            }
            for (std::thread& t : threads) t.join();
        }

        if (failed.load()) {
            throw PipelineError("similarity", start_row + scored.size(), failure);
        }
        truncated_count += batch_truncated.load();
        scored.insert(scored.end(), std::make_move_iterator(batch.begin()),
                      std::make_move_iterator(batch.end()));
        if (on_batch) {
            std::vector<ScoredDocument> completed_batch(
                scored.end() - static_cast<std::ptrdiff_t>(n), scored.end());
            on_batch(completed_batch, start_row + scored.size());
        }
    }
    if (truncated) *truncated += truncated_count;
    return scored;
}

Dataset apply_cutoff(const std::vector<ScoredDocument>& scored, double cutoff) {
    if (cutoff <= 0.0 || cutoff >= 1.0)
        throw std::invalid_argument("apply_cutoff: cutoff must be in (0, 1)");
    Dataset out;
    for (const ScoredDocument& s : scored)
        if (s.max_similarity >= cutoff) out.documents.push_back(s.document);
    return out;
}

std::vector<ScoredDocument> apply_cutoff_scored(
    const std::vector<ScoredDocument>& scored, double cutoff) {
    if (cutoff <= 0.0 || cutoff >= 1.0)
        throw std::invalid_argument("apply_cutoff: cutoff must be in (0, 1)");
    std::vector<ScoredDocument> out;
    for (const ScoredDocument& s : scored)
        if (s.max_similarity >= cutoff) out.push_back(s);
    return out;
}

std::map<std::size_t, std::vector<ScoredDocument>> score_band_sample(
    const std::vector<ScoredDocument>& scored,
    const std::vector<double>& band_edges, std::size_t per_band,
    std::uint64_t seed) {
    if (band_edges.size() < 2)
        throw std::invalid_argument("score_band_sample: need >= 2 band edges");
    for (std::size_t i = 1; i < band_edges.size(); ++i)
        if (band_edges[i] <= band_edges[i - 1])
            throw std::invalid_argument(
                "score_band_sample: band edges must be strictly increasing");

    std::size_t bands = band_edges.size() - 1;
    std::vector<std::vector<std::size_t>> members(bands);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        double s = scored[i].max_similarity;
        for (std::size_t b = 0; b < bands; ++b) {
            if (s >= band_edges[b] && s < band_edges[b + 1]) {
                members[b].push_back(i);
                break;
            }
        }
    }

    std::map<std::size_t, std::vector<ScoredDocument>> out;
    for (std::size_t b = 0; b < bands; ++b) {
        std::mt19937_64 rng(seed + b);
        std::vector<std::size_t>& idx = members[b];
        std::shuffle(idx.begin(), idx.end(), rng);
        if (idx.size() > per_band) idx.resize(per_band);
        std::sort(idx.begin(), idx.end());
        std::vector<ScoredDocument> sample;
        sample.reserve(idx.size());
        for (std::size_t i : idx) sample.push_back(scored[i]);
        out[b] = std::move(sample);
    }
    return out;
}

nlohmann::json scored_to_json(const ScoredDocument& doc) {
    nlohmann::json obj = document_to_json(doc.document);
    obj["max_similarity"] = doc.max_similarity;
    obj["ref_index"] = doc.ref_index;
    return obj;
}

ScoredDocument scored_from_json(const nlohmann::json& obj,
                                std::size_t line_number) {
    nlohmann::json copy = obj;
    ScoredDocument s;
    s.max_similarity = copy.at("max_similarity").get<double>();
    s.ref_index = copy.at("ref_index").get<int>();
    copy.erase("max_similarity");
    copy.erase("ref_index");
    s.document = document_from_json(copy, line_number);
    return s;
}

void write_scored_jsonl(const std::vector<ScoredDocument>& scored,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const ScoredDocument& s : scored) out << scored_to_json(s).dump() << '\n';
    if (!out) throw std::runtime_error("write failure on " + path);
}

std::vector<ScoredDocument> read_scored_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for reading");
    std::vector<ScoredDocument> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        out.push_back(scored_from_json(nlohmann::json::parse(line), line_number));
    }
    return out;
}

nlohmann::json summary_to_json(const PipelineSummary& summary) {
    nlohmann::json obj;
    obj["input_rows"] = summary.input_rows;
    obj["after_keywords"] = summary.after_keywords;
    obj["after_cutoff"] = summary.after_cutoff;
    obj["truncated_docs"] = summary.truncated_docs;
    obj["stage_seconds"] = summary.stage_seconds;
    auto pct = [](std::size_t kept, std::size_t total) {
        return total == 0 ? 0.0
                          : 100.0 * static_cast<double>(total - kept) /
                                static_cast<double>(total);
    };
    obj["attrition_percent"] = {
        {"keyword_stage", pct(summary.after_keywords, summary.input_rows)},
        {"cutoff_stage", pct(summary.after_cutoff, summary.after_keywords)}};
    return obj;
}

PipelineSummary run_pipeline(const PipelineConfig& config,
                             const std::string& input_path,
                             const std::string& output_path) {
    PipelineSummary summary;

    Dataset input;
    Dataset filtered;
    {
        StageTimer timer(summary, "keyword_stage");
        input = read_jsonl(input_path);
        summary.input_rows = input.size();
        Glossary glossary = load_glossary(config.glossary_path);
        filtered = filter_by_keywords(input, glossary, config.batch_size);
        summary.after_keywords = filtered.size();
    }

    std::unique_ptr<Embedder> embedder = make_embedder(config);

    std::vector<ScoredDocument> scored;
    const std::string checkpoint_path = output_path + ".ckpt";
    const std::string partial_path = output_path + ".partial";
    {
        StageTimer timer(summary, "similarity_stage");
        ReferenceKB kb =
            build_reference_kb(read_jsonl(config.refkb_path), *embedder);

        // Resume from a checkpoint left by an aborted run over the same input.
        std::size_t start_row = 0;
        if (std::filesystem::exists(checkpoint_path) &&
            std::filesystem::exists(partial_path)) {
            std::ifstream ck(checkpoint_path);
            nlohmann::json meta = nlohmann::json::parse(ck);
            if (meta.value("after_keywords", std::size_t{0}) == filtered.size()) {
                std::vector<ScoredDocument> partial =
                    read_scored_jsonl(partial_path);
                std::size_t completed =
                    std::min(meta.value("completed", std::size_t{0}),
                             partial.size());
                partial.resize(completed);
                scored = std::move(partial);
                start_row = completed;
            }
        }

        std::ofstream partial_out(partial_path, std::ios::binary |
                                                    (start_row > 0
                                                         ? std::ios::app
                                                         : std::ios::trunc));
        auto on_batch = [&](const std::vector<ScoredDocument>& batch,
                            std::size_t rows_completed) {
            for (const ScoredDocument& s : batch)
                partial_out << scored_to_json(s).dump() << '\n';
            partial_out.flush();
            nlohmann::json meta;
            meta["completed"] = rows_completed;
            meta["after_keywords"] = filtered.size();
            std::ofstream ck(checkpoint_path, std::ios::trunc);
            ck << meta.dump() << '\n';
        };

        std::size_t chunk =
            std::min(std::max<std::size_t>(config.checkpoint_every, 1),
                     config.batch_size);
        std::vector<ScoredDocument> fresh = run_similarity_stage(
            filtered, kb, *embedder, chunk, config.jobs,
            config.embed_char_budget, start_row, on_batch,
            &summary.truncated_docs);
        scored.insert(scored.end(), std::make_move_iterator(fresh.begin()),
                      std::make_move_iterator(fresh.end()));
    }
    std::filesystem::remove(checkpoint_path);
    std::filesystem::remove(partial_path);

    {
        StageTimer timer(summary, "cutoff_stage");
        std::vector<ScoredDocument> kept =
            apply_cutoff_scored(scored, config.cutoff);
        summary.after_cutoff = kept.size();
        write_scored_jsonl(kept, output_path);
    }

    std::ofstream summary_out(output_path + ".summary.json", std::ios::trunc);
    if (!summary_out)
        throw std::runtime_error("cannot write pipeline summary for " +
                                 output_path);
    summary_out << summary_to_json(summary).dump(2) << '\n';
    return summary;
}

}  // namespace orepipe
