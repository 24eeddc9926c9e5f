#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cdstack {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

ConfusionCounts confusion(const std::vector<int>& pred, const std::vector<int>& truth);

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool no_positive_predictions = false;
};

PrecisionRecallF1 precision_recall_f1(const std::vector<int>& pred, const std::vector<int>& truth);

// Rank-statistic AUC with tie-averaged ranks.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth);

struct QResult {
    double q = 0.0;
    bool degenerate = false;  // a*d + b*c == 0, reported as 0
};

// Pairwise agreement between two call vectors:
// a = both 1, d = both 0, b = first only, c = second only;
// Q = (a*d - b*c) / (a*d + b*c).
QResult q_statistic(const std::vector<int>& call_i, const std::vector<int>& call_j);

// Correctness-referenced variant: the contingency table is over per-item
// correctness of the two call vectors against the truth.
QResult q_statistic_truth(const std::vector<int>& call_i, const std::vector<int>& call_j,
                          const std::vector<int>& truth);

double q_average(const std::vector<std::vector<int>>& calls);
double q_average_truth(const std::vector<std::vector<int>>& calls, const std::vector<int>& truth);

struct PeheResult {
    double pehe_sq = 0.0;   // mean squared discrepancy (used for comparisons)
    double pehe_raw = 0.0;  // mean signed discrepancy (admits cancellation)
};

PeheResult pehe(const std::vector<double>& tau_hat, const std::vector<double>& tau_true);

// ---- comparison report --------------------------------------------------

struct ModelEvalInput {
    std::string name;
    std::string role;  // "learner", "meta", "baseline", "te_regressor"
    std::vector<int> calls;                          // over the evaluated rows
    std::vector<double> scores;                      // optional, for AUC
    std::optional<std::vector<double>> tau_hat;      // optional, for PEHE
};

struct ModelMetrics {
    std::string name;
    std::string role;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    std::optional<double> auc;
    std::optional<double> pehe_sq, pehe_raw;
    bool no_positive_predictions = false;
};

struct MetricsReport {
    std::vector<ModelMetrics> models;  // ordered by f1 descending, then name
    double q_av = 0.0;                 // over learner calls
    bool q_av_degenerate = false;
    double q_av_truth = 0.0;           // correctness-referenced variant
    std::optional<double> pehe_sq, pehe_raw;  // the stacked TE regressor
};

// One metrics row per model; the TE regressor (role "te_regressor")
// contributes the top-level PEHE numbers. tau_true may be empty when effects
// are unknown (real-data mode).
MetricsReport compare_learners_vs_meta(const std::vector<ModelEvalInput>& models,
                                       const std::vector<int>& truth,
                                       const std::vector<double>& tau_true);

}  // namespace cdstack
