#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "orepipe/corpus.hpp"

namespace orepipe {

struct QAPair {
    std::string question;
    std::string answer;
    std::string source_id;

    bool operator==(const QAPair&) const = default;
};

// Prompt with exactly one {domain_instruction}, {document_text} and
// {format_instruction} placeholder each; validated at load time.
class PromptTemplate {
public:
    static PromptTemplate load(const std::string& template_text);
    static PromptTemplate load_file(const std::string& path);

    // Non-canonical default; the original prompt was never disclosed.
    static PromptTemplate default_template();

    std::string render(const Document& doc, const std::string& domain_instruction,
                       const std::string& format_instruction,
                       std::size_t char_budget = 8192,
                       bool* truncated = nullptr) const;

    const std::string& text() const { return text_; }

private:
    explicit PromptTemplate(std::string text) : text_(std::move(text)) {}
    std::string text_;
};

// prompt -> completion text. HTTP implementation posts
// {"prompt", "max_tokens", "temperature"} and reads {"text"}.
using ChatClient =
    std::function<std::string(const std::string& prompt, int max_tokens,
                              double temperature)>;

ChatClient http_chat_client(const std::string& base_url, int max_retries = 3,
                            int backoff_ms = 200);

// Replay fixture: canned responses keyed by a hash of the request. The
// fixture file is a JSON object {request_key: response_text}.
std::string chat_request_key(const std::string& prompt, int max_tokens,
                             double temperature);
ChatClient replay_chat_client(const std::string& fixture_path);

// Accepts JSON-lines objects {"question","answer"} or "Q: ... / A: ..."
// blocks; surrounding prose is ignored. Empty result means parse failure.
std::vector<std::pair<std::string, std::string>> parse_qa_response(
    const std::string& text);

// Instruction strings used by generate_qa; exposed so replay fixtures can be
// built against the exact request text.
std::string default_domain_instruction(int per_doc);
std::string default_format_instruction();
std::string strict_format_instruction();

struct GenerationReport {
    std::size_t requests = 0;
    std::size_t retries = 0;
    std::size_t parse_failures = 0;
    std::vector<std::string> skipped_doc_ids;
};

std::vector<QAPair> generate_qa(const ChatClient& client, const Dataset& docs,
                                const PromptTemplate& prompt_template,
                                int per_doc, std::uint64_t seed,
                                GenerationReport* report = nullptr);

// Group-wise split: pairs sharing a source_id never straddle the split.
std::pair<std::vector<QAPair>, std::vector<QAPair>> split_train_eval(
    const std::vector<QAPair>& pairs, double eval_fraction, std::uint64_t seed);

Dataset ablation_subset(const Dataset& dataset, const std::string& category,
                        std::size_t n, std::uint64_t seed);

struct TrainingConfig {
    int lora_rank = 128;
    int lora_alpha = 16;
    double lora_dropout = 0.01;
    double learning_rate = 1e-4;
    int batch_size = 16;
    double weight_decay = 0.01;
    int warmup_steps = 5;
    int gradient_accumulation_steps = 4;
    std::string base_model = "mistral-7b-instruct-v0.2";
    int epochs = 2;

    bool operator==(const TrainingConfig&) const = default;
};

struct RunGrid {
    std::vector<double> learning_rates;
    std::vector<int> epochs;
    std::map<std::pair<double, int>, double> scores;  // percent
};

// One run spec JSON per grid cell, written as {"runs": [...]}.
void emit_training_config(const TrainingConfig& config, const RunGrid& grid,
                          const std::string& path);
std::vector<TrainingConfig> parse_training_configs(const std::string& path);

void write_qa_jsonl(const std::vector<QAPair>& pairs, const std::string& path);
std::vector<QAPair> read_qa_jsonl(const std::string& path);

}  // namespace orepipe
