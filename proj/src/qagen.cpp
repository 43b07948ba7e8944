#include "orepipe/qagen.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <httplib.h>

namespace orepipe {

namespace {

constexpr const char* kPlaceholders[] = {"{domain_instruction}",
                                         "{document_text}",
                                         "{format_instruction}"};

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++count;
    return count;
}

void replace_once(std::string& text, const std::string& placeholder,
                  const std::string& value) {
    std::size_t pos = text.find(placeholder);
    text.replace(pos, placeholder.size(), value);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

PromptTemplate PromptTemplate::load(const std::string& template_text) {
    for (const char* placeholder : kPlaceholders) {
        std::size_t n = count_occurrences(template_text, placeholder);
        if (n != 1) {
            throw std::invalid_argument(
                std::string("prompt template must contain ") + placeholder +
                " exactly once (found " + std::to_string(n) + ")");
        }
    }
    return PromptTemplate(template_text);
}

PromptTemplate PromptTemplate::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open prompt template " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load(buf.str());
}

PromptTemplate PromptTemplate::default_template() {
    return load(
        "{domain_instruction}\n\n"
        "Text:\n{document_text}\n\n"
        "{format_instruction}\n");
}

std::string PromptTemplate::render(const Document& doc,
                                   const std::string& domain_instruction,
                                   const std::string& format_instruction,
                                   std::size_t char_budget,
                                   bool* truncated) const {
    if (trim(doc.text).empty())
        throw std::invalid_argument("render: empty document text");
    std::string text = doc.text;
    bool cut = text.size() > char_budget;
    if (cut) text.resize(char_budget);
    if (truncated) *truncated = cut;

    std::string out = text_;
    replace_once(out, "{domain_instruction}", domain_instruction);
    replace_once(out, "{document_text}", text);
    replace_once(out, "{format_instruction}", format_instruction);
    return out;
}

std::string chat_request_key(const std::string& prompt, int max_tokens,
                             double temperature) {
    std::ostringstream payload;
    payload << max_tokens << '|' << temperature << '|' << prompt;
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(payload.str())));
    return buf;
}

ChatClient http_chat_client(const std::string& base_url, int max_retries,
                            int backoff_ms) {
    return [base_url, max_retries, backoff_ms](const std::string& prompt,
                                               int max_tokens,
                                               double temperature) {
        nlohmann::json body;
        body["prompt"] = prompt;
        body["max_tokens"] = max_tokens;
        body["temperature"] = temperature;
        std::string last_error;
        for (int attempt = 0; attempt <= max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(backoff_ms << (attempt - 1)));
            httplib::Client client(base_url);
            client.set_read_timeout(120, 0);
            auto res = client.Post("/generate", body.dump(), "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            return nlohmann::json::parse(res->body).at("text").get<std::string>();
        }
        throw std::runtime_error("chat client: " + last_error + " after " +
                                 std::to_string(max_retries + 1) + " attempts");
    };
}

ChatClient replay_chat_client(const std::string& fixture_path) {
    std::ifstream in(fixture_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open replay fixture " + fixture_path);
    auto fixtures = std::make_shared<nlohmann::json>(nlohmann::json::parse(in));
    if (!fixtures->is_object())
        throw std::runtime_error("replay fixture must be a JSON object");
    return [fixtures, fixture_path](const std::string& prompt, int max_tokens,
                                    double temperature) {
        std::string key = chat_request_key(prompt, max_tokens, temperature);
        auto it = fixtures->find(key);
        if (it == fixtures->end())
            throw std::runtime_error("replay fixture " + fixture_path +
                                     " has no response for request " + key);
        return it->get<std::string>();
    };
}

std::vector<std::pair<std::string, std::string>> parse_qa_response(
    const std::string& text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::istringstream lines(text);
    std::string line;

    std::string question, answer;
    bool in_answer = false;
    auto flush_block = [&]() {
        std::string q = trim(question), a = trim(answer);
        if (!q.empty() && !a.empty()) pairs.emplace_back(q, a);
        question.clear();
        answer.clear();
        in_answer = false;
    };

    while (std::getline(lines, line)) {
        std::string trimmed = trim(line);
        // JSON-lines route
        if (!trimmed.empty() && trimmed.front() == '{') {
            auto obj = nlohmann::json::parse(trimmed, nullptr, false);
            if (obj.is_object() && obj.contains("question") &&
                obj.contains("answer") && obj["question"].is_string() &&
                obj["answer"].is_string()) {
                std::string q = trim(obj["question"].get<std::string>());
                std::string a = trim(obj["answer"].get<std::string>());
                if (!q.empty() && !a.empty()) pairs.emplace_back(q, a);
                continue;
            }
        }
        // Q:/A: block route
        if (trimmed.rfind("Q:", 0) == 0) {
            if (in_answer) flush_block();
            if (!question.empty()) question += ' ';
            question += trim(trimmed.substr(2));
        } else if (trimmed.rfind("A:", 0) == 0) {
            in_answer = true;
            if (!answer.empty()) answer += ' ';
            answer += trim(trimmed.substr(2));
        } else if (in_answer && !trimmed.empty()) {
            answer += ' ';
            answer += trimmed;
        } else if (in_answer && trimmed.empty()) {
            flush_block();
        }
    }
    flush_block();
    return pairs;
}

std::string default_domain_instruction(int per_doc) {
    return "You are a mining domain expert. Generate " + std::to_string(per_doc) +
           " question-answer pairs that test understanding of the text below.";
}

std::string default_format_instruction() {
    return "Write each pair as one JSON object per line: "
           "{\"question\": \"...\", \"answer\": \"...\"}";
}

std::string strict_format_instruction() {
    return default_format_instruction() +
           " Output only the JSON lines, with no other text.";
}

std::vector<QAPair> generate_qa(const ChatClient& client, const Dataset& docs,
                                const PromptTemplate& prompt_template,
                                int per_doc, std::uint64_t /*seed*/,
                                GenerationReport* report) {
    if (per_doc < 1) throw std::invalid_argument("generate_qa: per_doc must be >= 1");

    const std::string domain_instruction = default_domain_instruction(per_doc);
    const std::string format_instruction = default_format_instruction();
    const std::string strict_instruction = strict_format_instruction();

    GenerationReport local;
    GenerationReport& rep = report ? *report : local;
    std::vector<QAPair> pairs;

    for (const Document& doc : docs.documents) {
        std::vector<std::pair<std::string, std::string>> parsed;
        bool responded = false;
        for (int attempt = 0; attempt < 2 && parsed.empty(); ++attempt) {
            const std::string& fmt =
                attempt == 0 ? format_instruction : strict_instruction;
            std::string prompt = prompt_template.render(doc, domain_instruction, fmt);
            rep.requests += 1;
            if (attempt > 0) rep.retries += 1;
            try {
                parsed = parse_qa_response(client(prompt, 1024, 0.0));
                responded = true;
            } catch (const std::exception&) {
                // transport-level failure; loop acts as the bounded retry
            }
        }
        if (parsed.empty()) {
            if (responded) rep.parse_failures += 1;
            rep.skipped_doc_ids.push_back(doc.id);
            continue;
        }
        if (parsed.size() > static_cast<std::size_t>(per_doc))
            parsed.resize(per_doc);
        for (auto& [q, a] : parsed)
            pairs.push_back({std::move(q), std::move(a), doc.id});
    }
    if (pairs.empty())
        throw std::runtime_error("generate_qa: zero pairs generated");
    return pairs;
}

std::pair<std::vector<QAPair>, std::vector<QAPair>> split_train_eval(
    const std::vector<QAPair>& pairs, double eval_fraction, std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("split_train_eval: no pairs");
    if (eval_fraction <= 0.0 || eval_fraction >= 1.0)
        throw std::invalid_argument(
            "split_train_eval: eval_fraction must be in (0, 1)");

    // Groups by source_id, in order of first appearance.
    std::vector<std::string> group_order;
    std::unordered_map<std::string, std::size_t> group_sizes;
    for (const QAPair& p : pairs) {
        if (group_sizes.find(p.source_id) == group_sizes.end())
            group_order.push_back(p.source_id);
        group_sizes[p.source_id] += 1;
    }

    std::mt19937_64 rng(seed);
    std::shuffle(group_order.begin(), group_order.end(), rng);

    std::size_t target = static_cast<std::size_t>(
        std::llround(eval_fraction * static_cast<double>(pairs.size())));
    std::unordered_set<std::string> eval_groups;
    std::size_t eval_count = 0;
    for (const std::string& group : group_order) {
        if (eval_count >= target) break;
        eval_groups.insert(group);
        eval_count += group_sizes[group];
    }

    std::vector<QAPair> train, eval;
    for (const QAPair& p : pairs) {
        if (eval_groups.count(p.source_id))
            eval.push_back(p);
        else
            train.push_back(p);
    }
    return {std::move(train), std::move(eval)};
}

Dataset ablation_subset(const Dataset& dataset, const std::string& category,
                        std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.documents.size(); ++i)
        if (dataset.documents[i].category == category) members.push_back(i);
    if (n > members.size())
        throw std::invalid_argument("ablation_subset: requested " +
                                    std::to_string(n) + " rows but only " +
                                    std::to_string(members.size()) +
                                    " available in category \"" + category + "\"");
    std::mt19937_64 rng(seed);
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(n);
    std::sort(members.begin(), members.end());

    Dataset out;
    out.provenance = dataset.provenance;
    for (std::size_t i : members) out.documents.push_back(dataset.documents[i]);
    return out;
}

namespace {

nlohmann::json training_config_to_json(const TrainingConfig& config) {
    return {{"lora_rank", config.lora_rank},
            {"lora_alpha", config.lora_alpha},
            {"lora_dropout", config.lora_dropout},
            {"learning_rate", config.learning_rate},
            {"batch_size", config.batch_size},
            {"weight_decay", config.weight_decay},
            {"warmup_steps", config.warmup_steps},
            {"gradient_accumulation_steps", config.gradient_accumulation_steps},
            {"base_model", config.base_model},
            {"epochs", config.epochs}};
}

TrainingConfig training_config_from_json(const nlohmann::json& obj) {
    TrainingConfig config;
    config.lora_rank = obj.at("lora_rank").get<int>();
    config.lora_alpha = obj.at("lora_alpha").get<int>();
    config.lora_dropout = obj.at("lora_dropout").get<double>();
    config.learning_rate = obj.at("learning_rate").get<double>();
    config.batch_size = obj.at("batch_size").get<int>();
    config.weight_decay = obj.at("weight_decay").get<double>();
    config.warmup_steps = obj.at("warmup_steps").get<int>();
    config.gradient_accumulation_steps =
        obj.at("gradient_accumulation_steps").get<int>();
    config.base_model = obj.at("base_model").get<std::string>();
    config.epochs = obj.at("epochs").get<int>();
    return config;
}

void validate_training_config(const TrainingConfig& c) {
    if (c.lora_rank <= 0 || c.lora_alpha <= 0 || c.learning_rate <= 0 ||
        c.batch_size <= 0 || c.weight_decay < 0 || c.warmup_steps < 0 ||
        c.gradient_accumulation_steps <= 0 || c.epochs <= 0)
        throw std::invalid_argument("training config: non-positive field");
    if (c.lora_dropout < 0.0 || c.lora_dropout >= 1.0)
        throw std::invalid_argument("training config: dropout must be in [0, 1)");
}

}  // namespace

void emit_training_config(const TrainingConfig& config, const RunGrid& grid,
                          const std::string& path) {
    validate_training_config(config);
    if (grid.learning_rates.empty() || grid.epochs.empty())
        throw std::invalid_argument("emit_training_config: empty grid");

    nlohmann::json runs = nlohmann::json::array();
    for (double lr : grid.learning_rates) {
        for (int epoch : grid.epochs) {
            TrainingConfig cell = config;
            cell.learning_rate = lr;
            cell.epochs = epoch;
            nlohmann::json spec = training_config_to_json(cell);
            auto score = grid.scores.find({lr, epoch});
            if (score != grid.scores.end()) spec["score_percent"] = score->second;
            runs.push_back(std::move(spec));
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << nlohmann::json{{"runs", runs}}.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failure on " + path);
}

std::vector<TrainingConfig> parse_training_configs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for reading");
    nlohmann::json obj = nlohmann::json::parse(in);
    std::vector<TrainingConfig> configs;
    for (const auto& spec : obj.at("runs"))
        configs.push_back(training_config_from_json(spec));
    return configs;
}

void write_qa_jsonl(const std::vector<QAPair>& pairs, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const QAPair& p : pairs) {
        nlohmann::json obj{{"question", p.question},
                           {"answer", p.answer},
                           {"source_id", p.source_id}};
        out << obj.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failure on " + path);
}

std::vector<QAPair> read_qa_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path + " for reading");
    std::vector<QAPair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json obj = nlohmann::json::parse(line);
        pairs.push_back({obj.at("question").get<std::string>(),
                         obj.at("answer").get<std::string>(),
                         obj.value("source_id", std::string{})});
    }
    return pairs;
}

}  // namespace orepipe
