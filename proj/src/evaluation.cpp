#include "cdstack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdstack/errors.hpp"

namespace cdstack {

ConfusionCounts confusion(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw DataError("confusion: length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && truth[i] == 1) ++c.tp;
        else if (pred[i] == 1 && truth[i] == 0) ++c.fp;
        else if (pred[i] == 0 && truth[i] == 1) ++c.fn;
        else ++c.tn;
    }
    return c;
}

PrecisionRecallF1 precision_recall_f1(const std::vector<int>& pred,
                                      const std::vector<int>& truth) {
    const ConfusionCounts c = confusion(pred, truth);
    if (c.tp + c.fn == 0) throw DataError("precision_recall_f1: truth has no positives");
    PrecisionRecallF1 out;
    if (c.tp + c.fp == 0) {
        out.no_positive_predictions = true;
        out.precision = 0.0;
    } else {
        out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) throw DataError("roc_auc: length mismatch");
    std::size_t npos = 0;
    for (int t : truth) npos += t;
    const std::size_t nneg = truth.size() - npos;
    if (npos == 0 || nneg == 0) throw DataError("roc_auc: single-class truth");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // tie-averaged ranks
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
    }
    double rpos = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k)
        if (truth[k] == 1) rpos += rank[k];
    const double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
    return (rpos - np * (np + 1.0) / 2.0) / (np * nn);
}

QResult q_statistic(const std::vector<int>& call_i, const std::vector<int>& call_j) {
    if (call_i.size() != call_j.size()) throw DataError("q_statistic: length mismatch");
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    for (std::size_t k = 0; k < call_i.size(); ++k) {
        if (call_i[k] == 1 && call_j[k] == 1) ++a;
        else if (call_i[k] == 1 && call_j[k] == 0) ++b;
        else if (call_i[k] == 0 && call_j[k] == 1) ++c;
        else ++d;
    }
    QResult out;
    const double denom = a * d + b * c;
    if (denom == 0.0) {
        out.degenerate = true;
        out.q = 0.0;
    } else {
        out.q = (a * d - b * c) / denom;
    }
    return out;
}

QResult q_statistic_truth(const std::vector<int>& call_i, const std::vector<int>& call_j,
                          const std::vector<int>& truth) {
    if (call_i.size() != truth.size() || call_j.size() != truth.size())
        throw DataError("q_statistic_truth: length mismatch");
    std::vector<int> ok_i(truth.size()), ok_j(truth.size());
    for (std::size_t k = 0; k < truth.size(); ++k) {
        ok_i[k] = call_i[k] == truth[k] ? 1 : 0;
        ok_j[k] = call_j[k] == truth[k] ? 1 : 0;
    }
    return q_statistic(ok_i, ok_j);
}

namespace {
template <typename PairFn>
double q_average_impl(std::size_t L, PairFn&& pair_q) {
    if (L < 2) throw DataError("q_average: need at least 2 call vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < L; ++i)
        for (std::size_t j = i + 1; j < L; ++j) acc += pair_q(i, j);
    return acc * 2.0 / (static_cast<double>(L) * static_cast<double>(L - 1));
}
}  // namespace

double q_average(const std::vector<std::vector<int>>& calls) {
    return q_average_impl(calls.size(),
                          [&](std::size_t i, std::size_t j) { return q_statistic(calls[i], calls[j]).q; });
}

double q_average_truth(const std::vector<std::vector<int>>& calls, const std::vector<int>& truth) {
    return q_average_impl(calls.size(), [&](std::size_t i, std::size_t j) {
        return q_statistic_truth(calls[i], calls[j], truth).q;
    });
}

PeheResult pehe(const std::vector<double>& tau_hat, const std::vector<double>& tau_true) {
    if (tau_hat.size() != tau_true.size()) throw DataError("pehe: length mismatch");
    if (tau_hat.empty()) throw DataError("pehe: empty vectors");
    PeheResult out;
    for (std::size_t i = 0; i < tau_hat.size(); ++i) {
        const double err = tau_true[i] - tau_hat[i];
        out.pehe_raw += err;
        out.pehe_sq += err * err;
    }
    const double n = static_cast<double>(tau_hat.size());
    out.pehe_raw /= n;
    out.pehe_sq /= n;
    return out;
}

MetricsReport compare_learners_vs_meta(const std::vector<ModelEvalInput>& models,
                                       const std::vector<int>& truth,
                                       const std::vector<double>& tau_true) {
    MetricsReport report;
    std::vector<std::vector<int>> learner_calls;

    for (const auto& m : models) {
        ModelMetrics row;
        row.name = m.name;
        row.role = m.role;
        if (!m.calls.empty()) {
            if (m.calls.size() != truth.size())
                throw DataError("compare: call rows misaligned for " + m.name);
            const PrecisionRecallF1 prf = precision_recall_f1(m.calls, truth);
            row.precision = prf.precision;
            row.recall = prf.recall;
            row.f1 = prf.f1;
            row.no_positive_predictions = prf.no_positive_predictions;
        }
        if (!m.scores.empty()) row.auc = roc_auc(m.scores, truth);
        if (m.tau_hat && !tau_true.empty()) {
            const PeheResult pr = pehe(*m.tau_hat, tau_true);
            row.pehe_sq = pr.pehe_sq;
            row.pehe_raw = pr.pehe_raw;
            if (m.role == "te_regressor") {
                report.pehe_sq = pr.pehe_sq;
                report.pehe_raw = pr.pehe_raw;
            }
        }
        if (m.role == "learner") learner_calls.push_back(m.calls);
        report.models.push_back(std::move(row));
    }

    if (learner_calls.size() >= 2) {
        report.q_av = q_average(learner_calls);
        report.q_av_truth = q_average_truth(learner_calls, truth);
        bool any_degenerate = false;
        for (std::size_t i = 0; i + 1 < learner_calls.size(); ++i)
            for (std::size_t j = i + 1; j < learner_calls.size(); ++j)
                any_degenerate |= q_statistic(learner_calls[i], learner_calls[j]).degenerate;
        report.q_av_degenerate = any_degenerate;
    }

    std::stable_sort(report.models.begin(), report.models.end(),
                     [](const ModelMetrics& a, const ModelMetrics& b) {
                         if (a.f1 != b.f1) return a.f1 > b.f1;
                         return a.name < b.name;
                     });
    return report;
}

}  // namespace cdstack
