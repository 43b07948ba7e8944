#include "orepipe/glossary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace orepipe {

namespace {

std::string fold_case(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Glossary load_glossary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open glossary " + path);

    Glossary glossary;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line[0] == '#') continue;
        if (trim(line).empty()) continue;

        GlossaryEntry entry;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            entry.keyword = trim(line);
        } else {
            entry.keyword = trim(line.substr(0, tab));
            std::string def = trim(line.substr(tab + 1));
            if (!def.empty()) entry.definition = def;
        }
        if (entry.keyword.empty()) {
            throw std::runtime_error("glossary " + path + " line " +
                                     std::to_string(line_number) +
                                     ": empty keyword");
        }
        if (!seen.insert(fold_case(entry.keyword)).second) {
            throw std::runtime_error("glossary " + path +
                                     ": duplicate keyword \"" + entry.keyword +
                                     "\" (case-insensitive)");
        }
        glossary.entries.push_back(std::move(entry));
    }
    if (glossary.entries.empty())
        throw std::runtime_error("empty glossary: " + path);
    return glossary;
}

KeywordMatcher::KeywordMatcher(const Glossary& glossary) {
    nodes_.emplace_back();  // root
    for (const GlossaryEntry& entry : glossary.entries) {
        std::vector<std::string> tokens = word_tokens(entry.keyword);
        if (tokens.empty())
            throw std::runtime_error("keyword \"" + entry.keyword +
                                     "\" has no alphanumeric content");
        int node = 0;
        for (const std::string& token : tokens) {
            auto it = nodes_[node].children.find(token);
            if (it == nodes_[node].children.end()) {
                nodes_.emplace_back();
                it = nodes_[node].children
                         .emplace(token, static_cast<int>(nodes_.size() - 1))
                         .first;
            }
            node = it->second;
        }
        nodes_[node].keyword_index = static_cast<int>(display_.size());
        display_.push_back(entry.keyword);
        max_tokens_ = std::max(max_tokens_, tokens.size());
    }
}

KeywordMatchResult KeywordMatcher::match(const std::string& text) const {
    std::vector<std::string> tokens = word_tokens(text);
    KeywordMatchResult result;
    // Per keyword, the first token position still eligible for a
    // non-overlapping match.
    std::vector<std::size_t> next_allowed(display_.size(), 0);
    std::vector<std::uint64_t> counts(display_.size(), 0);

    for (std::size_t start = 0; start < tokens.size(); ++start) {
        int node = 0;
        for (std::size_t j = start;
             j < tokens.size() && j - start < max_tokens_; ++j) {
            auto it = nodes_[node].children.find(tokens[j]);
            if (it == nodes_[node].children.end()) break;
            node = it->second;
            int kw = nodes_[node].keyword_index;
            if (kw >= 0 && start >= next_allowed[kw]) {
                counts[kw] += 1;
                next_allowed[kw] = j + 1;
            }
        }
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > 0) {
            result.counts[display_[i]] = counts[i];
            result.matched = true;
        }
    }
    return result;
}

KeywordMatchResult match_keywords(const Document& doc, const Glossary& glossary) {
    return KeywordMatcher(glossary).match(doc.text);
}

Dataset filter_by_keywords(const Dataset& dataset, const Glossary& glossary,
                           std::size_t batch_size) {
    if (batch_size == 0) batch_size = 1;
    KeywordMatcher matcher(glossary);
    Dataset out;
    out.provenance = dataset.provenance;
    for (std::size_t begin = 0; begin < dataset.documents.size();
         begin += batch_size) {
        std::size_t end =
            std::min(begin + batch_size, dataset.documents.size());
        for (std::size_t i = begin; i < end; ++i) {
            if (matcher.match(dataset.documents[i].text).matched)
                out.documents.push_back(dataset.documents[i]);
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::uint64_t>> keyword_frequencies(
    const Dataset& dataset, const Glossary& glossary) {
    KeywordMatcher matcher(glossary);
    std::map<std::string, std::uint64_t> totals;
    for (const Document& doc : dataset.documents) {
        for (const auto& [keyword, count] : matcher.match(doc.text).counts)
            totals[keyword] += count;
    }
    std::vector<std::pair<std::string, std::uint64_t>> ranked(totals.begin(),
                                                              totals.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

}  // namespace orepipe
