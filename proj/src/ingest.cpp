#include "orepipe/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <httplib.h>

namespace orepipe {

namespace {

bool is_http(const std::string& url) {
    return url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0;
}

// scheme://authority part of an http URL, "" for local paths.
std::string url_origin(const std::string& url) {
    if (!is_http(url)) return "";
    std::size_t scheme_end = url.find("://") + 3;
    std::size_t path_start = url.find('/', scheme_end);
    return path_start == std::string::npos ? url : url.substr(0, path_start);
}

std::string url_path(const std::string& url) {
    if (!is_http(url)) return url;
    std::size_t scheme_end = url.find("://") + 3;
    std::size_t path_start = url.find('/', scheme_end);
    return path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string parent_dir(const std::string& url) {
    std::size_t slash = url.find_last_of('/');
    return slash == std::string::npos ? "" : url.substr(0, slash);
}

std::string resolve_link(const std::string& page_url, std::string link) {
    std::size_t frag = link.find('#');
    if (frag != std::string::npos) link.resize(frag);
    if (link.empty()) return "";
    if (link.find("://") != std::string::npos) return link;
    if (!link.empty() && link[0] == '/') {
        std::string origin = url_origin(page_url);
        return origin.empty() ? link : origin + link;
    }
    std::string dir = parent_dir(page_url);
    return dir.empty() ? link : dir + "/" + link;
}

}  // namespace

std::vector<std::string> extract_links(const std::string& page_url,
                                       const std::string& body) {
    static const std::regex href_re(
        R"(href\s*=\s*["']([^"']+)["'])", std::regex::icase);
    std::vector<std::string> links;
    auto begin = std::sregex_iterator(body.begin(), body.end(), href_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        std::string resolved = resolve_link(page_url, (*it)[1].str());
        if (!resolved.empty()) links.push_back(std::move(resolved));
    }
    return links;
}

Fetcher default_fetcher(const std::string& user_agent) {
    return [user_agent](const std::string& url) -> std::optional<std::string> {
        if (is_http(url)) {
            httplib::Client client(url_origin(url));
            client.set_follow_location(true);
            client.set_read_timeout(30, 0);
            httplib::Headers headers{{"User-Agent", user_agent}};
            auto res = client.Get(url_path(url), headers);
            if (!res || res->status != 200) return std::nullopt;
            return res->body;
        }
        std::ifstream in(url, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
}

std::vector<FetchedDoc> crawl(const CrawlJob& job, const Fetcher& fetch,
                              CrawlReport* report) {
    if (job.seed_urls.empty()) throw std::invalid_argument("crawl: no seed URLs");
    if (job.max_docs < 1) throw std::invalid_argument("crawl: max_docs must be >= 1");

    std::regex link_re(job.link_pattern);
    std::unordered_set<std::string> visited;
    std::map<std::string, std::chrono::steady_clock::time_point> last_fetch;

    auto polite_fetch = [&](const std::string& url) {
        std::string host = url_origin(url);
        if (job.politeness_delay_ms > 0) {
            auto it = last_fetch.find(host);
            if (it != last_fetch.end()) {
                auto earliest =
                    it->second + std::chrono::milliseconds(job.politeness_delay_ms);
                std::this_thread::sleep_until(earliest);
            }
        }
        auto body = fetch(url);
        last_fetch[host] = std::chrono::steady_clock::now();
        return body;
    };

    std::vector<FetchedDoc> docs;
    std::deque<std::string> doc_queue;
    std::size_t reachable_seeds = 0;

    for (const std::string& seed : job.seed_urls) {
        if (!visited.insert(seed).second) continue;
        auto body = polite_fetch(seed);
        if (!body) {
            if (report) report->failed_urls.push_back(seed);
            continue;
        }
        ++reachable_seeds;
        for (std::string& link : extract_links(seed, *body)) {
            if (std::regex_search(link, link_re)) doc_queue.push_back(std::move(link));
        }
    }
    if (reachable_seeds == 0)
        throw std::runtime_error("crawl: all seed URLs unreachable");

    while (!doc_queue.empty() && docs.size() < job.max_docs) {
        std::string url = std::move(doc_queue.front());
        doc_queue.pop_front();
        if (!visited.insert(url).second) continue;
        auto body = polite_fetch(url);
        if (!body) {
            if (report) report->failed_urls.push_back(url);
            continue;
        }
        docs.push_back({std::move(url), std::move(*body)});
    }
    return docs;
}

std::vector<FetchedDoc> crawl(const CrawlJob& job, CrawlReport* report) {
    return crawl(job, default_fetcher(job.user_agent), report);
}

TextExtractor plain_text_extractor() {
    return [](const std::string&,
              const std::string& body) -> std::optional<std::string> {
        if (body.find('\0') != std::string::npos) return std::nullopt;
        bool has_content = std::any_of(body.begin(), body.end(), [](unsigned char c) {
            return !std::isspace(c);
        });
        if (!has_content) return std::nullopt;
        return body;
    };
}

Dataset to_documents(const std::vector<FetchedDoc>& raw,
                     const TextExtractor& extractor, IngestReport* report) {
    Dataset dataset;
    dataset.provenance = "crawl";
    for (const FetchedDoc& doc : raw) {
        auto text = extractor(doc.url, doc.body);
        if (!text) {
            if (report) report->skipped_urls.push_back(doc.url);
            continue;
        }
        Document d;
        d.id = doc.url;
        d.text = std::move(*text);
        d.source = "thesis";
        d.category = "thesis_reports";
        dataset.documents.push_back(std::move(d));
    }
    return dataset;
}

}  // namespace orepipe
