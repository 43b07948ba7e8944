#include "orepipe/corpus.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace orepipe {

bool Document::operator==(const Document& other) const {
    // A null `extra` and an empty object both mean "no extra keys".
    auto norm = [](const nlohmann::json& j) {
        return j.is_null() ? nlohmann::json::object() : j;
    };
    return id == other.id && text == other.text && source == other.source &&
           category == other.category && norm(extra) == norm(other.extra);
}

std::uint64_t whitespace_token_count(const std::string& text) {
    std::uint64_t count = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

namespace {

bool all_whitespace(const std::string& s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

}  // namespace

Document document_from_json(const nlohmann::json& obj, std::size_t line_number) {
    if (!obj.is_object()) {
        throw std::runtime_error("line " + std::to_string(line_number) +
                                 ": expected a JSON object");
    }
    if (!obj.contains("text") || !obj.at("text").is_string()) {
        throw std::runtime_error("line " + std::to_string(line_number) +
                                 ": missing string field \"text\"");
    }
    Document doc;
    doc.text = obj.at("text").get<std::string>();
    if (all_whitespace(doc.text)) {
        throw std::runtime_error("line " + std::to_string(line_number) +
                                 ": document text is empty");
    }
    doc.id = obj.contains("id") && obj.at("id").is_string()
                 ? obj.at("id").get<std::string>()
                 : std::to_string(line_number);
    if (obj.contains("source") && obj.at("source").is_string())
        doc.source = obj.at("source").get<std::string>();
    if (obj.contains("category") && obj.at("category").is_string())
        doc.category = obj.at("category").get<std::string>();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        if (key != "id" && key != "text" && key != "source" && key != "category")
            doc.extra[key] = it.value();
    }
    return doc;
}

nlohmann::json document_to_json(const Document& doc) {
    nlohmann::json obj;
    obj["id"] = doc.id;
    obj["text"] = doc.text;
    obj["source"] = doc.source;
    obj["category"] = doc.category;
    for (auto it = doc.extra.begin(); it != doc.extra.end(); ++it)
        obj[it.key()] = it.value();
    return obj;
}

Dataset read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for reading");

    Dataset dataset;
    dataset.provenance = path;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || all_whitespace(line)) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("malformed JSON on line " +
                                     std::to_string(line_number) + " of " + path +
                                     ": " + e.what());
        }
        Document doc = document_from_json(obj, line_number);
        if (!seen_ids.insert(doc.id).second) {
            throw std::runtime_error("duplicate document id \"" + doc.id +
                                     "\" on line " + std::to_string(line_number) +
                                     " of " + path);
        }
        dataset.documents.push_back(std::move(doc));
    }
    return dataset;
}

void write_jsonl(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const Document& doc : dataset.documents) {
        out << document_to_json(doc).dump() << '\n';
        if (!out) throw std::runtime_error("write failure on " + path);
    }
}

std::uint64_t token_count(const Dataset& dataset, const TokenCounter& counter) {
    std::uint64_t total = 0;
    for (const Document& doc : dataset.documents) total += counter(doc.text);
    return total;
}

CompositionReport composition_report(const Dataset& dataset,
                                     const TokenCounter& counter) {
    CompositionReport report;
    for (const Document& doc : dataset.documents) {
        std::uint64_t tokens = counter(doc.text);
        report.rows_per_category[doc.category] += 1;
        report.tokens_per_category[doc.category] += tokens;
        report.total_rows += 1;
        report.total_tokens += tokens;
    }
    return report;
}

nlohmann::json composition_report_to_json(const CompositionReport& report) {
    nlohmann::json obj;
    obj["rows_per_category"] = report.rows_per_category;
    obj["tokens_per_category"] = report.tokens_per_category;
    obj["total_rows"] = report.total_rows;
    obj["total_tokens"] = report.total_tokens;
    return obj;
}

}  // namespace orepipe
