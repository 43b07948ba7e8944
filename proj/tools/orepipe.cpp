// orepipe: corpus curation and model evaluation pipeline CLI.
//
// Every stage of the pipeline is a subcommand; data moves through JSONL
// files, small reports go to stdout, logs to stderr. Exit codes: 0 success,
// 1 usage error, 2 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "orepipe/corpus.hpp"
#include "orepipe/embed.hpp"
#include "orepipe/evalkit.hpp"
#include "orepipe/glossary.hpp"
#include "orepipe/ingest.hpp"
#include "orepipe/pipeline.hpp"
#include "orepipe/qagen.hpp"
#include "orepipe/refkb.hpp"

namespace {

constexpr const char* kVersion = "orepipe 0.1.0";

using orepipe::PipelineConfig;

nlohmann::json meta_block(const PipelineConfig& config) {
    return {{"tool", kVersion},
            {"seed", config.seed},
            {"embedder", config.embedder_kind == "hash"
                             ? "hash-" + std::to_string(config.hash_dimension)
                             : "remote:" + config.remote_model}};
}

void write_meta_sidecar(const std::string& data_path,
                        const PipelineConfig& config,
                        nlohmann::json extras = nlohmann::json::object()) {
    nlohmann::json meta = meta_block(config);
    for (auto it = extras.begin(); it != extras.end(); ++it)
        meta[it.key()] = it.value();
    std::ofstream out(data_path + ".meta.json", std::ios::trunc);
    out << meta.dump(2) << '\n';
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const std::string& item : split_commas(s)) out.push_back(std::stod(item));
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    for (const std::string& item : split_commas(s)) out.push_back(std::stoi(item));
    return out;
}

// Flat key=value config file; '#' comment lines ignored. Flags override.
void load_config_file(const std::string& path, PipelineConfig& config,
                      std::string& llm_endpoint, std::string& model_endpoint,
                      double& judge_threshold) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line without '=': " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "glossary") config.glossary_path = value;
        else if (key == "refkb") config.refkb_path = value;
        else if (key == "embedder") config.embedder_kind = value;
        else if (key == "hash_dimension") config.hash_dimension = std::stoul(value);
        else if (key == "embed_endpoint") config.remote_endpoint = value;
        else if (key == "remote_model") config.remote_model = value;
        else if (key == "cutoff") config.cutoff = std::stod(value);
        else if (key == "batch_size") config.batch_size = std::stoul(value);
        else if (key == "seed") config.seed = std::stoull(value);
        else if (key == "jobs") config.jobs = std::stoi(value);
        else if (key == "llm_endpoint") llm_endpoint = value;
        else if (key == "model_endpoint") model_endpoint = value;
        else if (key == "judge_threshold") judge_threshold = std::stod(value);
        else throw std::runtime_error("unknown config key: " + key);
    }
}

std::vector<double> read_values_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain corpus curation and model evaluation pipeline"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    PipelineConfig config;
    std::string config_path;
    std::string llm_endpoint;
    std::string model_endpoint;
    double judge_threshold = 0.85;

    app.add_option("--config", config_path, "flat key=value config file")
        ->each([&](const std::string& path) {
            load_config_file(path, config, llm_endpoint, model_endpoint,
                             judge_threshold);
        });

    // Shared flags; each subcommand picks up the ones it needs through
    // `config`, so flag values override the config file.
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", config.seed, "random seed");
        cmd->add_option("--jobs", config.jobs, "worker threads");
        cmd->add_option("--batch-size", config.batch_size, "rows per batch");
        cmd->add_option("--embedder", config.embedder_kind, "hash | remote");
        cmd->add_option("--hash-dimension", config.hash_dimension,
                        "hash embedder dimension");
        cmd->add_option("--embed-endpoint", config.remote_endpoint,
                        "embedding service URL");
        cmd->add_option("--remote-model", config.remote_model,
                        "embedding model id");
    };

    std::string input, output, output2, glossary_path, refkb_path;
    std::string pattern, category, model_name, base_model, fixture_path;
    std::string edges_csv, lrs_csv, epochs_csv, scores_csv, summary_csv;
    std::string seeds_csv, x_path, y_path;
    double cutoff = 0.65, threshold = 0.999, eval_fraction = 0.2;
    double finetuned = 0.0, base = 0.0;
    std::size_t n = 0, per_band = 10, per_doc = 2, max_docs = 100, top_n = 10;
    int k = 8, delay_ms = 0;

    auto* filter_cmd = app.add_subcommand("filter-keywords",
                                          "stage-1 keyword filter");
    filter_cmd->add_option("--input", input)->required();
    filter_cmd->add_option("--output", output)->required();
    filter_cmd->add_option("--glossary", glossary_path);
    add_common(filter_cmd);
    filter_cmd->callback([&] {
        if (!glossary_path.empty()) config.glossary_path = glossary_path;
        auto dataset = orepipe::read_jsonl(input);
        auto glossary = orepipe::load_glossary(config.glossary_path);
        auto filtered =
            orepipe::filter_by_keywords(dataset, glossary, config.batch_size);
        orepipe::write_jsonl(filtered, output);
        write_meta_sidecar(output, config,
                           {{"input_rows", dataset.size()},
                            {"kept_rows", filtered.size()}});
        std::cout << nlohmann::json{{"input_rows", dataset.size()},
                                    {"kept_rows", filtered.size()}}
                         .dump()
                  << '\n';
    });

    auto* build_cmd = app.add_subcommand(
        "build-refkb", "validate a reference KB and report embedding stats");
    build_cmd->add_option("--input", input)->required();
    build_cmd->add_option("--output", output)->required();
    add_common(build_cmd);
    build_cmd->callback([&] {
        auto embedder = orepipe::make_embedder(config);
        auto kb = orepipe::build_reference_kb(orepipe::read_jsonl(input), *embedder);
        orepipe::write_jsonl(kb.rows, output);
        write_meta_sidecar(output, config,
                           {{"rows", kb.rows.size()},
                            {"dimension", kb.index.dimension()}});
        std::cout << nlohmann::json{{"rows", kb.rows.size()},
                                    {"dimension", kb.index.dimension()}}
                         .dump()
                  << '\n';
    });

    auto* dedup_cmd = app.add_subcommand("dedup-refkb",
                                         "nearest-neighbour deduplication");
    dedup_cmd->add_option("--input", input)->required();
    dedup_cmd->add_option("--output", output)->required();
    dedup_cmd->add_option("--threshold", threshold, "similarity in (0,1]");
    dedup_cmd->add_option("--report", output2, "dedup report JSON path");
    add_common(dedup_cmd);
    dedup_cmd->callback([&] {
        auto embedder = orepipe::make_embedder(config);
        auto kb = orepipe::build_reference_kb(orepipe::read_jsonl(input), *embedder);
        auto report = orepipe::dedup_nn(kb, threshold);
        orepipe::Dataset kept;
        for (int id : report.kept) kept.documents.push_back(kb.rows.documents[id]);
        orepipe::write_jsonl(kept, output);
        write_meta_sidecar(output, config,
                           {{"reduction_percent", report.reduction_percent}});
        nlohmann::json report_json = orepipe::dedup_report_to_json(report);
        if (!output2.empty()) {
            std::ofstream rep(output2, std::ios::trunc);
            report_json["_meta"] = meta_block(config);
            rep << report_json.dump(2) << '\n';
        }
        auto hist = orepipe::nn_similarity_histogram(kb);
        nlohmann::json hist_json = nlohmann::json::array();
        for (const auto& [lo, count] : hist)
            hist_json.push_back({{"bin_start", lo}, {"count", count}});
        std::cout << nlohmann::json{{"reduction_percent", report.reduction_percent},
                                    {"kept", report.kept.size()},
                                    {"removed", report.removed.size()},
                                    {"nn_similarity_histogram", hist_json}}
                         .dump(2)
                  << '\n';
    });

    auto* viz_cmd = app.add_subcommand(
        "cluster-viz", "k-means + 2-D PCA projection, written as CSV");
    viz_cmd->add_option("--input", input)->required();
    viz_cmd->add_option("--output", output)->required();
    viz_cmd->add_option("--k", k, "number of clusters");
    viz_cmd->add_option("--elbow", seeds_csv,
                        "comma-separated k values; print inertia per k");
    add_common(viz_cmd);
    viz_cmd->callback([&] {
        auto embedder = orepipe::make_embedder(config);
        auto dataset = orepipe::read_jsonl(input);
        std::vector<orepipe::EmbeddingVector> vectors;
        for (const auto& doc : dataset.documents)
            vectors.push_back(embedder->embed(doc.text));
        if (!seeds_csv.empty()) {
            auto elbow = orepipe::kmeans_elbow(vectors, parse_ints(seeds_csv),
                                               config.seed);
            nlohmann::json out_json = nlohmann::json::array();
            for (const auto& [kk, inertia] : elbow)
                out_json.push_back({{"k", kk}, {"inertia", inertia}});
            std::cout << out_json.dump(2) << '\n';
        }
        auto model = orepipe::kmeans(vectors, k, config.seed);
        auto pca = orepipe::pca_project(vectors);
        orepipe::cluster_viz_export(model, pca.points, output);
        write_meta_sidecar(output, config,
                           {{"k", k},
                            {"inertia", model.inertia},
                            {"explained_variance_ratio",
                             {pca.explained_variance_ratio[0],
                              pca.explained_variance_ratio[1]}}});
    });

    auto* score_cmd = app.add_subcommand(
        "score-similarity", "add max_similarity/ref_index columns");
    score_cmd->add_option("--input", input)->required();
    score_cmd->add_option("--output", output)->required();
    score_cmd->add_option("--refkb", refkb_path);
    add_common(score_cmd);
    score_cmd->callback([&] {
        if (!refkb_path.empty()) config.refkb_path = refkb_path;
        auto embedder = orepipe::make_embedder(config);
        auto kb = orepipe::build_reference_kb(
            orepipe::read_jsonl(config.refkb_path), *embedder);
        auto dataset = orepipe::read_jsonl(input);
        auto scored = orepipe::run_similarity_stage(
            dataset, kb, *embedder, config.batch_size, config.jobs,
            config.embed_char_budget);
        orepipe::write_scored_jsonl(scored, output);
        write_meta_sidecar(output, config, {{"rows", scored.size()}});
        std::cout << nlohmann::json{{"rows", scored.size()}}.dump() << '\n';
    });

    auto* cutoff_cmd = app.add_subcommand("apply-cutoff",
                                          "retain rows with similarity >= cutoff");
    cutoff_cmd->add_option("--input", input)->required();
    cutoff_cmd->add_option("--output", output)->required();
    cutoff_cmd->add_option("--cutoff", cutoff, "inclusive cutoff in (0,1)");
    add_common(cutoff_cmd);
    cutoff_cmd->callback([&] {
        auto scored = orepipe::read_scored_jsonl(input);
        auto kept = orepipe::apply_cutoff_scored(scored, cutoff);
        orepipe::write_scored_jsonl(kept, output);
        write_meta_sidecar(output, config,
                           {{"cutoff", cutoff},
                            {"input_rows", scored.size()},
                            {"kept_rows", kept.size()}});
        std::cout << nlohmann::json{{"input_rows", scored.size()},
                                    {"kept_rows", kept.size()}}
                         .dump()
                  << '\n';
    });

    auto* band_cmd = app.add_subcommand(
        "band-sample", "sample scored rows per similarity band");
    band_cmd->add_option("--input", input)->required();
    band_cmd->add_option("--edges", edges_csv, "comma-separated band edges")
        ->required();
    band_cmd->add_option("--per-band", per_band);
    add_common(band_cmd);
    band_cmd->callback([&] {
        auto scored = orepipe::read_scored_jsonl(input);
        auto edges = parse_doubles(edges_csv);
        auto bands =
            orepipe::score_band_sample(scored, edges, per_band, config.seed);
        nlohmann::json out_json;
        for (const auto& [band, docs] : bands) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& s : docs) arr.push_back(orepipe::scored_to_json(s));
            char label[64];
            std::snprintf(label, sizeof(label), "[%g,%g)", edges[band],
                          edges[band + 1]);
            out_json[label] = arr;
        }
        out_json["_meta"] = meta_block(config);
        std::cout << out_json.dump(2) << '\n';
    });

    auto* pipeline_cmd = app.add_subcommand(
        "pipeline", "full keyword -> similarity -> cutoff run");
    pipeline_cmd->add_option("--input", input)->required();
    pipeline_cmd->add_option("--output", output)->required();
    pipeline_cmd->add_option("--glossary", glossary_path);
    pipeline_cmd->add_option("--refkb", refkb_path);
    pipeline_cmd->add_option("--cutoff", config.cutoff);
    add_common(pipeline_cmd);
    pipeline_cmd->callback([&] {
        if (!glossary_path.empty()) config.glossary_path = glossary_path;
        if (!refkb_path.empty()) config.refkb_path = refkb_path;
        auto summary = orepipe::run_pipeline(config, input, output);
        write_meta_sidecar(output, config);
        std::cout << orepipe::summary_to_json(summary).dump(2) << '\n';
    });

    auto* crawl_cmd = app.add_subcommand("crawl", "fetch thesis reports");
    crawl_cmd->add_option("--seeds", seeds_csv, "comma-separated seed URLs")
        ->required();
    crawl_cmd->add_option("--pattern", pattern, "regex for document links")
        ->required();
    crawl_cmd->add_option("--output", output)->required();
    crawl_cmd->add_option("--max-docs", max_docs);
    crawl_cmd->add_option("--delay-ms", delay_ms, "per-host politeness delay");
    add_common(crawl_cmd);
    crawl_cmd->callback([&] {
        orepipe::CrawlJob job;
        job.seed_urls = split_commas(seeds_csv);
        job.link_pattern = pattern;
        job.max_docs = max_docs;
        job.politeness_delay_ms = delay_ms;
        orepipe::CrawlReport crawl_report;
        auto raw = orepipe::crawl(job, &crawl_report);
        orepipe::IngestReport ingest_report;
        auto dataset = orepipe::to_documents(raw, orepipe::plain_text_extractor(),
                                             &ingest_report);
        orepipe::write_jsonl(dataset, output);
        write_meta_sidecar(output, config);
        for (const auto& url : crawl_report.failed_urls)
            std::cerr << "fetch failed: " << url << '\n';
        std::cout << nlohmann::json{{"fetched", raw.size()},
                                    {"documents", dataset.size()},
                                    {"fetch_failures",
                                     crawl_report.failed_urls.size()},
                                    {"skipped", ingest_report.skipped_urls.size()}}
                         .dump()
                  << '\n';
    });

    auto* gen_cmd = app.add_subcommand("gen-qa", "generate QA pairs via LLM");
    gen_cmd->add_option("--input", input)->required();
    gen_cmd->add_option("--output", output)->required();
    gen_cmd->add_option("--per-doc", per_doc);
    gen_cmd->add_option("--fixture", fixture_path, "replay fixture JSON");
    gen_cmd->add_option("--llm-endpoint", llm_endpoint);
    add_common(gen_cmd);
    gen_cmd->callback([&] {
        orepipe::ChatClient client =
            !fixture_path.empty()
                ? orepipe::replay_chat_client(fixture_path)
                : orepipe::http_chat_client(llm_endpoint);
        if (fixture_path.empty() && llm_endpoint.empty())
            throw CLI::ValidationError("gen-qa needs --fixture or --llm-endpoint");
        auto docs = orepipe::read_jsonl(input);
        orepipe::GenerationReport report;
        auto pairs = orepipe::generate_qa(client, docs,
                                          orepipe::PromptTemplate::default_template(),
                                          static_cast<int>(per_doc), config.seed,
                                          &report);
        orepipe::write_qa_jsonl(pairs, output);
        write_meta_sidecar(output, config);
        std::cout << nlohmann::json{{"pairs", pairs.size()},
                                    {"requests", report.requests},
                                    {"retries", report.retries},
                                    {"parse_failures", report.parse_failures},
                                    {"skipped_docs", report.skipped_doc_ids.size()}}
                         .dump()
                  << '\n';
    });

    auto* split_cmd = app.add_subcommand("split", "group-wise train/eval split");
    split_cmd->add_option("--input", input)->required();
    split_cmd->add_option("--train-out", output)->required();
    split_cmd->add_option("--eval-out", output2)->required();
    split_cmd->add_option("--eval-fraction", eval_fraction);
    add_common(split_cmd);
    split_cmd->callback([&] {
        auto pairs = orepipe::read_qa_jsonl(input);
        auto [train, eval] =
            orepipe::split_train_eval(pairs, eval_fraction, config.seed);
        orepipe::write_qa_jsonl(train, output);
        orepipe::write_qa_jsonl(eval, output2);
        write_meta_sidecar(output, config);
        write_meta_sidecar(output2, config);
        std::cout << nlohmann::json{{"train", train.size()}, {"eval", eval.size()}}
                         .dump()
                  << '\n';
    });

    auto* ablate_cmd = app.add_subcommand("ablate-sample",
                                          "seeded category subset");
    ablate_cmd->add_option("--input", input)->required();
    ablate_cmd->add_option("--output", output)->required();
    ablate_cmd->add_option("--category", category)->required();
    ablate_cmd->add_option("--n", n)->required();
    add_common(ablate_cmd);
    ablate_cmd->callback([&] {
        auto dataset = orepipe::read_jsonl(input);
        auto subset = orepipe::ablation_subset(dataset, category, n, config.seed);
        orepipe::write_jsonl(subset, output);
        write_meta_sidecar(output, config);
        std::cout << nlohmann::json{{"rows", subset.size()}}.dump() << '\n';
    });

    auto* emit_cmd = app.add_subcommand("emit-train-config",
                                        "fine-tuning run specs per grid cell");
    emit_cmd->add_option("--output", output)->required();
    emit_cmd->add_option("--lrs", lrs_csv, "comma-separated learning rates")
        ->required();
    emit_cmd->add_option("--epochs", epochs_csv, "comma-separated epochs")
        ->required();
    emit_cmd->add_option("--base-model", base_model);
    add_common(emit_cmd);
    emit_cmd->callback([&] {
        orepipe::TrainingConfig training;
        if (!base_model.empty()) training.base_model = base_model;
        orepipe::RunGrid grid;
        grid.learning_rates = parse_doubles(lrs_csv);
        grid.epochs = parse_ints(epochs_csv);
        orepipe::emit_training_config(training, grid, output);
        std::cout << nlohmann::json{
                         {"runs", grid.learning_rates.size() * grid.epochs.size()}}
                         .dump()
                  << '\n';
    });

    auto* eval_cmd = app.add_subcommand("eval-domain",
                                        "similarity-judged QA evaluation");
    eval_cmd->add_option("--eval", input, "QA JSONL evalset")->required();
    eval_cmd->add_option("--output", output)->required();
    eval_cmd->add_option("--model-endpoint", model_endpoint);
    eval_cmd->add_option("--model-name", model_name)->required();
    eval_cmd->add_option("--threshold", judge_threshold);
    add_common(eval_cmd);
    eval_cmd->callback([&] {
        if (model_endpoint.empty())
            throw CLI::ValidationError("eval-domain needs --model-endpoint");
        auto evalset = orepipe::read_qa_jsonl(input);
        auto embedder = orepipe::make_embedder(config);
        auto result = orepipe::domain_eval(orepipe::http_model_client(model_endpoint),
                                           evalset, *embedder, judge_threshold,
                                           model_name);
        nlohmann::json result_json = orepipe::eval_result_to_json(result);
        result_json["_meta"] = meta_block(config);
        std::ofstream out_file(output, std::ios::trunc);
        out_file << result_json.dump(2) << '\n';
        std::cout << nlohmann::json{{"model", result.model_name},
                                    {"score_percent", result.score_percent}}
                         .dump()
                  << '\n';
    });

    auto* board_cmd = app.add_subcommand("leaderboard", "rank model scores");
    board_cmd->add_option("--scores", scores_csv,
                          "comma-separated name=score entries")
        ->required();
    board_cmd->add_option("--base", base_model, "base model for deltas")
        ->required();
    board_cmd->callback([&] {
        std::vector<std::pair<std::string, double>> scores;
        for (const std::string& entry : split_commas(scores_csv)) {
            std::size_t eq = entry.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("score entry without '=': " + entry);
            scores.emplace_back(entry.substr(0, eq),
                                std::stod(entry.substr(eq + 1)));
        }
        auto rows = orepipe::leaderboard(scores, base_model);
        std::cout << orepipe::leaderboard_to_json(rows).dump(2) << '\n';
    });

    auto* dev_cmd = app.add_subcommand("deviation",
                                       "score deviation as percent of base");
    dev_cmd->add_option("--finetuned", finetuned)->required();
    dev_cmd->add_option("--base", base)->required();
    dev_cmd->callback([&] {
        std::cout << nlohmann::json{
                         {"deviation_percent",
                          orepipe::deviation_metric(finetuned, base)}}
                         .dump()
                  << '\n';
    });

    auto* ttest_cmd = app.add_subcommand("ttest", "paired t-test");
    ttest_cmd->add_option("--summary", summary_csv, "m1,v1,m2,v2,n,r");
    ttest_cmd->add_option("--x", x_path, "file of values, one per line");
    ttest_cmd->add_option("--y", y_path, "file of values, one per line");
    ttest_cmd->callback([&] {
        orepipe::TTestReport report;
        if (!summary_csv.empty()) {
            auto v = parse_doubles(summary_csv);
            if (v.size() != 6)
                throw CLI::ValidationError("--summary needs m1,v1,m2,v2,n,r");
            report = orepipe::ttest_from_summary(
                v[0], v[1], v[2], v[3], static_cast<std::size_t>(v[4]), v[5]);
        } else if (!x_path.empty() && !y_path.empty()) {
            auto x = read_values_file(x_path);
            auto y = read_values_file(y_path);
            report = orepipe::paired_ttest(x, y);
        } else {
            throw CLI::ValidationError("ttest needs --summary or --x/--y");
        }
        std::cout << orepipe::ttest_report_to_json(report).dump(2) << '\n';
    });

    auto* report_cmd = app.add_subcommand(
        "report", "composition report and keyword frequencies");
    report_cmd->add_option("--input", input)->required();
    report_cmd->add_option("--glossary", glossary_path);
    report_cmd->add_option("--top", top_n, "top-N keywords");
    add_common(report_cmd);
    report_cmd->callback([&] {
        auto dataset = orepipe::read_jsonl(input);
        nlohmann::json out_json;
        out_json["composition"] =
            orepipe::composition_report_to_json(orepipe::composition_report(dataset));
        if (!glossary_path.empty()) {
            auto glossary = orepipe::load_glossary(glossary_path);
            auto freqs = orepipe::keyword_frequencies(dataset, glossary);
            if (freqs.size() > top_n) freqs.resize(top_n);
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& [keyword, count] : freqs)
                arr.push_back({{"keyword", keyword}, {"count", count}});
            out_json["top_keywords"] = arr;
        }
        out_json["_meta"] = meta_block(config);
        std::cout << out_json.dump(2) << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
