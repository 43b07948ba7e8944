#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "orepipe/corpus.hpp"

namespace orepipe {

struct GlossaryEntry {
    std::string keyword;                    // original casing, for display
    std::optional<std::string> definition;
};

struct Glossary {
    std::vector<GlossaryEntry> entries;
};

struct KeywordMatchResult {
    // display keyword -> non-overlapping occurrence count (zero counts omitted)
    std::map<std::string, std::uint64_t> counts;
    bool matched = false;
};

// Compiled token-sequence trie over the case-folded glossary. Matching is a
// single pass over the document's alphanumeric tokens, so a 600-keyword
// glossary costs the same scan as a 1-keyword one. Immutable after build and
// shareable across threads.
class KeywordMatcher {
public:
    explicit KeywordMatcher(const Glossary& glossary);

    KeywordMatchResult match(const std::string& text) const;

private:
    struct Node {
        std::map<std::string, int> children;
        int keyword_index = -1;  // terminal marker
    };

    std::vector<Node> nodes_;
    std::vector<std::string> display_;  // keyword_index -> original casing
    std::size_t max_tokens_ = 0;        // longest keyword, in tokens
};

Glossary load_glossary(const std::string& path);

KeywordMatchResult match_keywords(const Document& doc, const Glossary& glossary);

Dataset filter_by_keywords(const Dataset& dataset, const Glossary& glossary,
                           std::size_t batch_size = 1'000'000);

// Total occurrences per keyword across the dataset, sorted descending by
// count, ties broken alphabetically. Zero-count keywords are omitted.
std::vector<std::pair<std::string, std::uint64_t>> keyword_frequencies(
    const Dataset& dataset, const Glossary& glossary);

// Case-folded alphanumeric token runs; boundaries are transitions between
// alphanumeric and non-alphanumeric characters or the text edges.
std::vector<std::string> word_tokens(const std::string& text);

}  // namespace orepipe
