#include "orepipe/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <httplib.h>

namespace orepipe {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::pair<double, bool> judge_answer(const std::string& gold,
                                     const std::string& output,
                                     const Embedder& embedder,
                                     double threshold) {
    if (trim(gold).empty() || trim(output).empty())
        throw std::invalid_argument("judge_answer: empty string");
    double sim = cosine_similarity(embedder.embed(gold), embedder.embed(output));
    return {sim, sim > threshold};
}

ModelClient http_model_client(const std::string& base_url, int max_retries,
                              int backoff_ms) {
    return [base_url, max_retries, backoff_ms](const std::string& prompt) {
        nlohmann::json body{{"prompt", prompt}};
        std::string last_error;
        for (int attempt = 0; attempt <= max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(backoff_ms << (attempt - 1)));
            httplib::Client client(base_url);
            client.set_read_timeout(120, 0);
            auto res = client.Post("/infer", body.dump(), "application/json");
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
        throw std::runtime_error("model client: " + last_error + " after " +
                                 std::to_string(max_retries + 1) + " attempts");
    };
}

EvalResult domain_eval(const ModelClient& model,
                       const std::vector<QAPair>& evalset,
                       const Embedder& embedder, double threshold,
                       const std::string& model_name) {
    if (evalset.empty()) throw std::invalid_argument("domain_eval: empty evalset");

    EvalResult result;
    result.model_name = model_name;
    result.embedder_name = embedder.name();
    std::size_t correct = 0;
    for (const QAPair& qa : evalset) {
        EvalRecord record;
        record.question = qa.question;
        record.gold_answer = qa.answer;
        try {
            record.model_output = model(qa.question);
            auto [sim, ok] = judge_answer(qa.answer, record.model_output,
                                          embedder, threshold);
            record.similarity = sim;
            record.correct = ok;
        } catch (const std::exception&) {
            record.inference_failed = true;
            record.correct = false;
            result.failed_inferences += 1;
        }
        if (record.correct) ++correct;
        result.records.push_back(std::move(record));
    }
    result.score_percent = 100.0 * static_cast<double>(correct) /
                           static_cast<double>(result.records.size());
    return result;
}

std::vector<LeaderboardRow> leaderboard(
    const std::vector<std::pair<std::string, double>>& scores,
    const std::string& base_model) {
    if (scores.empty()) throw std::invalid_argument("leaderboard: no results");
    double base_score = 0.0;
    bool found_base = false;
    for (const auto& [name, score] : scores) {
        if (name == base_model) {
            base_score = score;
            found_base = true;
        }
    }
    if (!found_base)
        throw std::invalid_argument("leaderboard: base model \"" + base_model +
                                    "\" not among results");

    std::vector<LeaderboardRow> rows;
    rows.reserve(scores.size());
    for (const auto& [name, score] : scores)
        rows.push_back({name, score, score - base_score});
    std::sort(rows.begin(), rows.end(),
              [](const LeaderboardRow& a, const LeaderboardRow& b) {
                  if (a.score_percent != b.score_percent)
                      return a.score_percent > b.score_percent;
                  return a.model_name < b.model_name;
              });
    return rows;
}

std::vector<LeaderboardRow> leaderboard(const std::vector<EvalResult>& results,
                                        const std::string& base_model) {
    std::vector<std::pair<std::string, double>> scores;
    scores.reserve(results.size());
    for (const EvalResult& r : results)
        scores.emplace_back(r.model_name, r.score_percent);
    return leaderboard(scores, base_model);
}

double deviation_metric(double finetuned_score, double base_score) {
    if (base_score <= 0.0)
        throw std::invalid_argument("deviation_metric: base score must be > 0");
    return 100.0 * (finetuned_score - base_score) / base_score;
}

std::tuple<double, int, double> select_best_checkpoint(const RunGrid& grid) {
    if (grid.scores.empty())
        throw std::invalid_argument("select_best_checkpoint: empty grid");
    bool have_best = false;
    double best_lr = 0.0, best_score = 0.0;
    int best_epoch = 0;
    for (const auto& [cell, score] : grid.scores) {
        const auto& [lr, epoch] = cell;
        bool better = !have_best || score > best_score ||
                      (score == best_score &&
                       (lr < best_lr || (lr == best_lr && epoch < best_epoch)));
        if (better) {
            have_best = true;
            best_lr = lr;
            best_epoch = epoch;
            best_score = score;
        }
    }
    return {best_lr, best_epoch, best_score};
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("pearson: length mismatch");
    std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("pearson: need at least 2 points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

void fill_tail_probabilities(TTestReport& report) {
    boost::math::students_t dist(static_cast<double>(report.df));
    double p_one = boost::math::cdf(boost::math::complement(
        dist, std::abs(report.t_stat)));
    report.p_one_tail = p_one;
    report.p_two_tail = 2.0 * p_one;
    auto label = [](double p) {
        if (p < 1e-300) return std::string("< 1e-300");
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.6g", p);
        return std::string(buf);
    };
    report.p_one_tail_label = label(report.p_one_tail);
    report.p_two_tail_label = label(report.p_two_tail);
    report.t_critical_one_tail = boost::math::quantile(dist, 0.95);
    report.t_critical_two_tail = boost::math::quantile(dist, 0.975);
}

}  // namespace

TTestReport paired_ttest(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw std::invalid_argument("paired_ttest: length mismatch");
    std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("paired_ttest: need n >= 2");

    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - y[i];
    double mean_d = 0.0;
    for (double v : d) mean_d += v;
    mean_d /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean_d) * (v - mean_d);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0)
        throw std::invalid_argument(
            "paired_ttest: differences have zero standard deviation");

    TTestReport report;
    report.n = n;
    report.df = n - 1;
    double mx = 0.0, my = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    report.mean1 = mx;
    report.mean2 = my;
    report.variance1 = vx / static_cast<double>(n - 1);
    report.variance2 = vy / static_cast<double>(n - 1);
    if (report.variance1 > 0.0 && report.variance2 > 0.0)
        report.pearson_r = pearson(x, y);
    report.t_stat = mean_d / (sd / std::sqrt(static_cast<double>(n)));
    fill_tail_probabilities(report);
    return report;
}

TTestReport ttest_from_summary(double m1, double v1, double m2, double v2,
                               std::size_t n, double r) {
    if (v1 <= 0.0 || v2 <= 0.0)
        throw std::invalid_argument("ttest_from_summary: variances must be > 0");
    if (n < 2) throw std::invalid_argument("ttest_from_summary: need n >= 2");
    if (r < -1.0 || r > 1.0)
        throw std::invalid_argument("ttest_from_summary: r outside [-1, 1]");

    double var_d = v1 + v2 - 2.0 * r * std::sqrt(v1 * v2);
    if (var_d <= 0.0)
        throw std::invalid_argument(
            "ttest_from_summary: implied difference variance is non-positive");

    TTestReport report;
    report.mean1 = m1;
    report.mean2 = m2;
    report.variance1 = v1;
    report.variance2 = v2;
    report.n = n;
    report.df = n - 1;
    report.pearson_r = r;
    report.t_stat = (m1 - m2) / std::sqrt(var_d / static_cast<double>(n));
    fill_tail_probabilities(report);
    return report;
}

nlohmann::json ttest_report_to_json(const TTestReport& report) {
    return {{"mean1", report.mean1},
            {"mean2", report.mean2},
            {"variance1", report.variance1},
            {"variance2", report.variance2},
            {"n", report.n},
            {"pearson_r", report.pearson_r},
            {"hypothesized_mean_difference", report.hypothesized_mean_difference},
            {"df", report.df},
            {"t_stat", report.t_stat},
            {"p_one_tail", report.p_one_tail_label},
            {"p_two_tail", report.p_two_tail_label},
            {"t_critical_one_tail", report.t_critical_one_tail},
            {"t_critical_two_tail", report.t_critical_two_tail}};
}

nlohmann::json eval_result_to_json(const EvalResult& result) {
    nlohmann::json records = nlohmann::json::array();
    for (const EvalRecord& r : result.records) {
        records.push_back({{"question", r.question},
                           {"gold_answer", r.gold_answer},
                           {"model_output", r.model_output},
                           {"similarity", r.similarity},
                           {"correct", r.correct},
                           {"inference_failed", r.inference_failed}});
    }
    return {{"model_name", result.model_name},
            {"embedder", result.embedder_name},
            {"score_percent", result.score_percent},
            {"failed_inferences", result.failed_inferences},
            {"records", records}};
}

nlohmann::json leaderboard_to_json(const std::vector<LeaderboardRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const LeaderboardRow& row : rows) {
        out.push_back({{"model", row.model_name},
                       {"score_percent", row.score_percent},
                       {"delta_vs_base", row.delta_vs_base}});
    }
    return out;
}

}  // namespace orepipe
