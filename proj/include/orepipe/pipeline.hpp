#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "orepipe/corpus.hpp"
#include "orepipe/embed.hpp"
#include "orepipe/glossary.hpp"
#include "orepipe/refkb.hpp"

namespace orepipe {

// Document plus the two columns added by the similarity stage: the cosine
// similarity to its nearest reference-KB row and that row's index.
struct ScoredDocument {
    Document document;
    double max_similarity = 0.0;
    int ref_index = -1;
};

struct PipelineConfig {
    std::string glossary_path;
    std::string refkb_path;
    std::string embedder_kind = "hash";  // "hash" or "remote"
    std::size_t hash_dimension = 256;
    std::string remote_endpoint;
    std::string remote_model = "multi-qa-mpnet-base-dot-v1";
    double cutoff = 0.65;
    std::size_t batch_size = 1'000'000;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::size_t checkpoint_every = 10'000;
    // Long documents are truncated to this many characters before embedding;
    // the summary reports how many were cut.
    std::size_t embed_char_budget = 8192;
};

struct PipelineSummary {
    std::size_t input_rows = 0;
    std::size_t after_keywords = 0;
    std::size_t after_cutoff = 0;
    std::size_t truncated_docs = 0;
    std::map<std::string, double> stage_seconds;
};

// Thrown when a stage aborts; carries how many rows completed so a rerun can
// resume from the checkpoint file.
class PipelineError : public std::runtime_error {
public:
    PipelineError(const std::string& stage, std::size_t completed_rows,
                  const std::string& what)
        : std::runtime_error("stage " + stage + " aborted after " +
                             std::to_string(completed_rows) + " rows: " + what),
          stage_(stage),
          completed_rows_(completed_rows) {}

    const std::string& stage() const { return stage_; }
    std::size_t completed_rows() const { return completed_rows_; }

private:
    std::string stage_;
    std::size_t completed_rows_;
};

using ScoredBatchCallback =
    std::function<void(const std::vector<ScoredDocument>& batch,
                       std::size_t rows_completed)>;

// Scores every document against the reference KB. Order-preserving; output
// is invariant to batch_size and jobs. `start_row` skips already-scored rows
// when resuming. `truncated` (optional) accumulates the truncation count.
std::vector<ScoredDocument> run_similarity_stage(
    const Dataset& dataset, const ReferenceKB& kb, const Embedder& embedder,
    std::size_t batch_size = 1'000'000, int jobs = 1,
    std::size_t embed_char_budget = 8192, std::size_t start_row = 0,
    const ScoredBatchCallback& on_batch = nullptr,
    std::size_t* truncated = nullptr);

Dataset apply_cutoff(const std::vector<ScoredDocument>& scored, double cutoff);
std::vector<ScoredDocument> apply_cutoff_scored(
    const std::vector<ScoredDocument>& scored, double cutoff);

// Up to per_band seeded uniform samples from each half-open band
// [edges[i], edges[i+1]). Keyed by band index.
std::map<std::size_t, std::vector<ScoredDocument>> score_band_sample(
    const std::vector<ScoredDocument>& scored,
    const std::vector<double>& band_edges, std::size_t per_band,
    std::uint64_t seed);

PipelineSummary run_pipeline(const PipelineConfig& config,
                             const std::string& input_path,
                             const std::string& output_path);

nlohmann::json scored_to_json(const ScoredDocument& doc);
ScoredDocument scored_from_json(const nlohmann::json& obj,
                                std::size_t line_number);
void write_scored_jsonl(const std::vector<ScoredDocument>& scored,
                        const std::string& path);
std::vector<ScoredDocument> read_scored_jsonl(const std::string& path);

nlohmann::json summary_to_json(const PipelineSummary& summary);

// Builds the embedder named by the config ("hash" or "remote").
std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config);

}  // namespace orepipe
