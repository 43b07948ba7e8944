#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "orepipe/corpus.hpp"

namespace orepipe {

struct CrawlJob {
    std::vector<std::string> seed_urls;
    std::string link_pattern;  // regex over resolved link URLs
    std::size_t max_docs = 100;
    int politeness_delay_ms = 0;
    std::string user_agent = "orepipe-crawler/1.0";
};

// url -> body, or nullopt on fetch failure. The default fetcher handles
// http(s) URLs and plain filesystem paths (test fixtures).
using Fetcher = std::function<std::optional<std::string>(const std::string& url)>;

Fetcher default_fetcher(const std::string& user_agent = "orepipe-crawler/1.0");

struct FetchedDoc {
    std::string url;
    std::string body;
};

struct CrawlReport {
    std::vector<std::string> failed_urls;
};

// Breadth-first over the seed listing pages; fetches links that match
// link_pattern, at most once per URL, up to max_docs. Per-URL failures are
// recorded and skipped; the crawl fails only if every seed is unreachable.
std::vector<FetchedDoc> crawl(const CrawlJob& job, const Fetcher& fetch,
                              CrawlReport* report = nullptr);
std::vector<FetchedDoc> crawl(const CrawlJob& job, CrawlReport* report = nullptr);

// url + body -> extracted UTF-8 text, or nullopt for unsupported formats.
using TextExtractor = std::function<std::optional<std::string>(
    const std::string& url, const std::string& body)>;

// Default extractor: passes through plain text, rejects bodies that look
// binary (NUL bytes or empty after trim).
TextExtractor plain_text_extractor();

struct IngestReport {
    std::vector<std::string> skipped_urls;
};

Dataset to_documents(const std::vector<FetchedDoc>& raw,
                     const TextExtractor& extractor = plain_text_extractor(),
                     IngestReport* report = nullptr);

// href extraction from an HTML/listing page, resolved against the page URL.
std::vector<std::string> extract_links(const std::string& page_url,
                                       const std::string& body);

}  // namespace orepipe
