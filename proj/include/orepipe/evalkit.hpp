#pragma once

#include <functional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "orepipe/embed.hpp"
#include "orepipe/qagen.hpp"

namespace orepipe {

struct EvalRecord {
    std::string question;
    std::string gold_answer;
    std::string model_output;
    double similarity = 0.0;
    bool correct = false;
    bool inference_failed = false;
};

struct EvalResult {
    std::string model_name;
    std::string embedder_name;
    std::vector<EvalRecord> records;
    double score_percent = 0.0;
    std::size_t failed_inferences = 0;
};

// similarity between the embedded gold and model answers, and whether it
// strictly exceeds the threshold. Exactly-at-threshold is incorrect.
std::pair<double, bool> judge_answer(const std::string& gold,
                                     const std::string& output,
                                     const Embedder& embedder,
                                     double threshold = 0.85);

// question prompt -> model completion.
using ModelClient = std::function<std::string(const std::string& prompt)>;

ModelClient http_model_client(const std::string& base_url, int max_retries = 3,
                              int backoff_ms = 200);

// Failed inferences (after the client's own retries) count as incorrect and
// are flagged, never dropped.
EvalResult domain_eval(const ModelClient& model,
                       const std::vector<QAPair>& evalset,
                       const Embedder& embedder, double threshold,
                       const std::string& model_name);

struct LeaderboardRow {
    std::string model_name;
    double score_percent = 0.0;
    double delta_vs_base = 0.0;  // score points above the designated base
};

// Descending by score, ties alphabetical; delta column is versus base_model.
std::vector<LeaderboardRow> leaderboard(
    const std::vector<std::pair<std::string, double>>& scores,
    const std::string& base_model);
std::vector<LeaderboardRow> leaderboard(const std::vector<EvalResult>& results,
                                        const std::string& base_model);

// 100 * (finetuned - base) / base
double deviation_metric(double finetuned_score, double base_score);

// argmax over grid cells; ties go to the lowest learning rate, then epoch.
std::tuple<double, int, double> select_best_checkpoint(const RunGrid& grid);

double pearson(std::span<const double> x, std::span<const double> y);

struct TTestReport {
    double mean1 = 0.0, mean2 = 0.0;
    double variance1 = 0.0, variance2 = 0.0;
    std::size_t n = 0;
    double pearson_r = 0.0;
    double hypothesized_mean_difference = 0.0;
    std::size_t df = 0;
    double t_stat = 0.0;
    double p_one_tail = 0.0;
    double p_two_tail = 0.0;
    // "< 1e-300" when the double underflows, otherwise the numeric value.
    std::string p_one_tail_label;
    std::string p_two_tail_label;
    double t_critical_one_tail = 0.0;  // alpha = 0.05
    double t_critical_two_tail = 0.0;
};

TTestReport paired_ttest(std::span<const double> x, std::span<const double> y);

// Paired t-test from summary statistics:
// var_d = v1 + v2 - 2 r sqrt(v1 v2), t = (m1 - m2) / sqrt(var_d / n).
TTestReport ttest_from_summary(double m1, double v1, double m2, double v2,
                               std::size_t n, double r);

nlohmann::json ttest_report_to_json(const TTestReport& report);
nlohmann::json eval_result_to_json(const EvalResult& result);
nlohmann::json leaderboard_to_json(const std::vector<LeaderboardRow>& rows);

}  // namespace orepipe
