#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace orepipe {

// One text row. `extra` holds any JSON keys beyond the four named fields so
// round-tripping a file preserves them.
struct Document {
    std::string id;
    std::string text;
    std::string source = "unknown";
    std::string category = "unknown";
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const Document& other) const;
};

struct Dataset {
    std::vector<Document> documents;
    std::string provenance;

    std::size_t size() const { return documents.size(); }
    bool empty() const { return documents.empty(); }
};

struct CompositionReport {
    std::map<std::string, std::size_t> rows_per_category;
    std::map<std::string, std::uint64_t> tokens_per_category;
    std::size_t total_rows = 0;
    std::uint64_t total_tokens = 0;
};

// Pluggable per-document token counter. The default counts maximal
// non-whitespace runs; a model tokenizer can be wired in instead.
using TokenCounter = std::function<std::uint64_t(const std::string&)>;

std::uint64_t whitespace_token_count(const std::string& text);

Dataset read_jsonl(const std::string& path);
void write_jsonl(const Dataset& dataset, const std::string& path);

std::uint64_t token_count(const Dataset& dataset,
                          const TokenCounter& counter = whitespace_token_count);

CompositionReport composition_report(
    const Dataset& dataset,
    const TokenCounter& counter = whitespace_token_count);

nlohmann::json composition_report_to_json(const CompositionReport& report);

nlohmann::json document_to_json(const Document& doc);
Document document_from_json(const nlohmann::json& obj, std::size_t line_number);

}  // namespace orepipe
