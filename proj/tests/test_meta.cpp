#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "cdstack/elastic_net.hpp"
#include "cdstack/errors.hpp"
#include "cdstack/evaluation.hpp"
#include "cdstack/mathutil.hpp"
#include "cdstack/meta.hpp"
#include "cdstack/rng.hpp"

using namespace cdstack;

namespace {

// one informative feature (the latent causal flag plus noise), one pure-noise
// feature; labels reveal label_fraction of the causals
struct ToyLevel1 {
    Level1Dataset l1;
    std::vector<int> causal;  // ground truth per row
};

ToyLevel1 toy_level1(std::size_t V, std::size_t n_causal, double label_fraction, double noise_sd,
                     std::uint64_t seed) {
    Rng rng(seed);
    ToyLevel1 t;
    t.causal.assign(V, 0);
    auto idx = rng.sample_without_replacement(V, n_causal);
    for (auto i : idx) t.causal[i] = 1;

    t.l1.D1 = Matrix(V, 2);
    t.l1.labels.labels.assign(V, 0);
    for (std::size_t v = 0; v < V; ++v) {
        t.l1.D1.at(v, 0) = t.causal[v] + noise_sd * rng.normal();
        t.l1.D1.at(v, 1) = rng.normal();
        t.l1.variable_names.push_back("v" + std::to_string(v));
        if (t.causal[v] && rng.uniform() < label_fraction) t.l1.labels.labels[v] = 1;
    }
    // ensure at least 6 labeled positives for the adapter calibration fold
    std::size_t labeled = 0;
    for (int l : t.l1.labels.labels) labeled += l;
    for (std::size_t v = 0; v < V && labeled < 6; ++v) {
        if (t.causal[v] && !t.l1.labels.labels[v]) {
            t.l1.labels.labels[v] = 1;
            ++labeled;
        }
    }
    t.l1.feature_names = {"d0/a", "d0/b"};
    t.l1 = split_variables(std::move(t.l1), 0.67, seed ^ 0x5a5a);
    return t;
}

double train_f1(const MetaModel& model, const Level1Dataset& l1) {
    const std::vector<int> calls = predict_calls(model, l1, l1.train_rows);
    std::vector<int> truth;
    for (std::size_t r : l1.train_rows) truth.push_back(l1.labels.labels[r]);
    return precision_recall_f1(calls, truth).f1;
}

}  // namespace

TEST_SUITE("meta") {

TEST_CASE("separable toy: every kind reaches train F1 = 1") {
    // feature equals the label exactly; all causals labeled
    ToyLevel1 t = toy_level1(400, 80, 1.0, 0.0, 2024);
    MetaOptions opt;

    for (MetaKind kind : {MetaKind::LR, MetaKind::RF, MetaKind::NN}) {
        const MetaModel m = fit_classifier(kind, t.l1, opt, 7);
        CHECK(train_f1(m, t.l1) == doctest::Approx(1.0));
    }
    const auto [adapter, cal] = fit_adapter_pu(t.l1, opt, 7);
    CHECK(train_f1(adapter, t.l1) == doctest::Approx(1.0));
    const MetaModel upu = fit_upu(t.l1, 0.2, opt, 7);
    CHECK(train_f1(upu, t.l1) == doctest::Approx(1.0));
}

TEST_CASE("random kind matches the train positive rate over >= 10000 draws") {
    ToyLevel1 t = toy_level1(15000, 3000, 1.0, 0.3, 99);
    MetaOptions opt;
    const MetaModel m = fit_classifier(MetaKind::Random, t.l1, opt, 5);

    std::vector<std::size_t> all_rows(t.l1.variable_names.size());
    std::iota(all_rows.begin(), all_rows.end(), 0);
    const std::vector<int> calls = predict_calls(m, t.l1, all_rows);
    const double rate = std::get<RandomParams>(m.params).rate;
    const double observed =
        std::accumulate(calls.begin(), calls.end(), 0.0) / static_cast<double>(calls.size());
    const double sd = std::sqrt(rate * (1.0 - rate) / static_cast<double>(calls.size()));
    CHECK(std::fabs(observed - rate) <= 3.0 * sd);
}

TEST_CASE("same seed twice gives identical test predictions") {
    ToyLevel1 t = toy_level1(600, 90, 0.5, 0.4, 31);
    MetaOptions opt;
    for (MetaKind kind : {MetaKind::LR, MetaKind::RF, MetaKind::NN, MetaKind::Random}) {
        const MetaModel a = fit_classifier(kind, t.l1, opt, 42);
        const MetaModel b = fit_classifier(kind, t.l1, opt, 42);
        CHECK(predict_scores(a, t.l1, t.l1.test_rows) == predict_scores(b, t.l1, t.l1.test_rows));
        CHECK(predict_calls(a, t.l1, t.l1.test_rows) == predict_calls(b, t.l1, t.l1.test_rows));
    }
}

TEST_CASE("fit_classifier rejects kinds with dedicated entry points and bad labels") {
    ToyLevel1 t = toy_level1(100, 20, 1.0, 0.1, 8);
    MetaOptions opt;
    CHECK_THROWS_AS(fit_classifier(MetaKind::Ensemble, t.l1, opt, 1), ConfigError);

    Level1Dataset broken = t.l1;
    broken.train_rows.clear();
    for (std::size_t v = 0; v < broken.variable_names.size(); ++v)
        if (broken.labels.labels[v] == 0) broken.train_rows.push_back(v);
    CHECK_THROWS_AS(fit_classifier(MetaKind::LR, broken, opt, 1), DataError);

    Level1Dataset nosplit = t.l1;
    nosplit.has_split = false;
    CHECK_THROWS_AS(fit_classifier(MetaKind::LR, nosplit, opt, 1), DataError);
}

TEST_CASE("adapter correction: base 0.4 with c 0.8 gives 0.5, capped at 1") {
    MetaModel m;
    m.kind = MetaKind::AdapterPU;
    m.fitted = true;
    m.scaler.mean = {0.0};
    m.scaler.sd = {1.0};
    AdapterParams ap;
    ap.base.w = {0.0};
    ap.base.b = logit(0.4);
    ap.c = 0.8;
    m.params = ap;

    Level1Dataset l1;
    l1.D1 = Matrix(1, 1);
    l1.D1.at(0, 0) = 0.0;
    l1.variable_names = {"x"};
    l1.labels.labels = {0};
    l1.has_split = true;
    const std::vector<double> s = predict_scores(m, l1, {0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));

    ap.c = 0.2;  // base/c would be 2.0; capped
    m.params = ap;
    CHECK(predict_scores(m, l1, {0})[0] == doctest::Approx(1.0));
}

TEST_CASE("adapter on fully labeled data degenerates to the base classifier") {
    ToyLevel1 t = toy_level1(500, 100, 1.0, 0.2, 77);
    MetaOptions opt;
    const auto [model, cal] = fit_adapter_pu(t.l1, opt, 3);
    CHECK(cal.c >= 0.8);
    CHECK(cal.c <= 1.0);
    for (double s : predict_scores(model, t.l1, t.l1.test_rows)) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("adapter estimates the label frequency on a controlled PU problem") {
    // half of the causals labeled; plateau of the base score sits near 0.5
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        ToyLevel1 t = toy_level1(2000, 500, 0.5, 0.25, seed);
        MetaOptions opt;
        const auto [model, cal] = fit_adapter_pu(t.l1, opt, seed);
        CHECK(cal.c > 0.3);
        CHECK(cal.c < 0.7);
    }
}

TEST_CASE("adapter correction never lowers a score") {
    ToyLevel1 t = toy_level1(800, 160, 0.4, 0.3, 15);
    MetaOptions opt;
    const auto [model, cal] = fit_adapter_pu(t.l1, opt, 15);
    const auto& ap = std::get<AdapterParams>(model.params);
    const Matrix x = [&] {
        Matrix out(t.l1.test_rows.size(), 2);
        for (std::size_t i = 0; i < t.l1.test_rows.size(); ++i)
            for (std::size_t j = 0; j < 2; ++j)
                out.at(i, j) = (t.l1.D1.at(t.l1.test_rows[i], j) - model.scaler.mean[j]) /
                               model.scaler.sd[j];
        return out;
    }();
    const std::vector<double> corrected = predict_scores(model, t.l1, t.l1.test_rows);
    for (std::size_t i = 0; i < corrected.size(); ++i) {
        const double base =
            sigmoid(ap.base.b + ap.base.w[0] * x.at(i, 0) + ap.base.w[1] * x.at(i, 1));
        CHECK(corrected[i] >= base - 1e-12);
        CHECK(corrected[i] <= 1.0);
    }
}

TEST_CASE("adapter refuses to calibrate without enough labeled positives") {
    ToyLevel1 t = toy_level1(60, 10, 1.0, 0.1, 21);
    // strip labels down to 4 positives
    std::size_t kept = 0;
    for (std::size_t v = 0; v < t.l1.variable_names.size(); ++v) {
        if (t.l1.labels.labels[v] == 1) {
            if (kept >= 4) t.l1.labels.labels[v] = 0;
            else ++kept;
        }
    }
    t.l1 = split_variables(std::move(t.l1), 0.67, 5);
    MetaOptions opt;
    CHECK_THROWS_AS(fit_adapter_pu(t.l1, opt, 1), DataError);
}

TEST_CASE("upu risk estimator matches a hand-computed four-point sum") {
    Matrix x(4, 1);
    x.at(0, 0) = 1.0;
    x.at(1, 0) = -2.0;
    x.at(2, 0) = 0.5;
    x.at(3, 0) = 3.0;
    const std::vector<int> labels = {1, 0, 0, 1};
    LinearParams p;
    p.w = {0.5};
    p.b = -0.2;
    const double prior = 0.3, l2 = 0.1;

    auto lpos = [](double g) { return std::log1p(std::exp(-g)); };
    auto lneg = [](double g) { return std::log1p(std::exp(g)); };
    const double g0 = 0.5 * 1.0 - 0.2;
    const double g1 = 0.5 * -2.0 - 0.2;
    const double g2 = 0.5 * 0.5 - 0.2;
    const double g3 = 0.5 * 3.0 - 0.2;
    // positive terms over the 2 labeled rows, marginal term over all 4 rows
    const double expected = prior * (lpos(g0) + lpos(g3)) / 2.0 -
                            prior * (lneg(g0) + lneg(g3)) / 2.0 +
                            (lneg(g0) + lneg(g1) + lneg(g2) + lneg(g3)) / 4.0 +
                            0.5 * l2 * 0.25;
    CHECK(upu_risk(x, labels, p, prior, l2) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("upu with purely negative unlabeled data agrees with plain logistic regression") {
    // balanced two-Gaussian problem, all positives labeled
    Rng rng(404);
    const std::size_t V = 1200;
    Level1Dataset l1;
    l1.D1 = Matrix(V, 2);
    std::vector<int> truth(V);
    for (std::size_t v = 0; v < V; ++v) {
        truth[v] = v % 2 == 0 ? 1 : 0;
        const double mu = truth[v] ? 1.2 : -1.2;
        l1.D1.at(v, 0) = mu + rng.normal();
        l1.D1.at(v, 1) = 0.5 * rng.normal();
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(truth[v]);
    }
    l1.feature_names = {"a", "b"};
    l1 = split_variables(std::move(l1), 0.67, 9);

    MetaOptions opt;
    const MetaModel upu = fit_upu(l1, 0.5, opt, 3);
    const std::vector<int> upu_calls = predict_calls(upu, l1, l1.test_rows);

    opt.balanced_weights = false;
    const MetaModel lr = fit_classifier(MetaKind::LR, l1, opt, 3);
    const std::vector<int> lr_calls = predict_calls(lr, l1, l1.test_rows);

    std::size_t agree = 0;
    for (std::size_t i = 0; i < upu_calls.size(); ++i)
        if (upu_calls[i] == lr_calls[i]) ++agree;
    CHECK(static_cast<double>(agree) >= 0.95 * static_cast<double>(upu_calls.size()));
}

TEST_CASE("upu prior validation and extreme-prior degeneracy") {
    ToyLevel1 t = toy_level1(300, 60, 0.5, 0.3, 5);
    MetaOptions opt;
    CHECK_THROWS_AS(fit_upu(t.l1, 1.2, opt, 1), ConfigError);
    CHECK_THROWS_AS(fit_upu(t.l1, 0.0, opt, 1), ConfigError);

    const MetaModel m = fit_upu(t.l1, 0.97, opt, 1);
    const std::vector<int> calls = predict_calls(m, t.l1, t.l1.test_rows);
    const double rate =
        std::accumulate(calls.begin(), calls.end(), 0.0) / static_cast<double>(calls.size());
    CHECK(rate > 0.9);  // nearly everything called positive
}

TEST_CASE("ensemble vote: majority wins, even ties go to zero, idempotent on clones") {
    Level1Dataset l1;
    l1.D1 = Matrix(4, 1);
    for (std::size_t v = 0; v < 4; ++v) {
        l1.D1.at(v, 0) = static_cast<double>(v);
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(v % 2 == 0 ? 1 : 0);
    }
    l1.has_split = true;
    l1.train_rows = {0, 1};
    l1.test_rows = {2, 3};

    auto constant_model = [](int vote) {
        MetaModel m;
        m.kind = MetaKind::LR;
        m.fitted = true;
        m.scaler.mean = {0.0};
        m.scaler.sd = {1.0};
        LinearParams p;
        p.w = {0.0};
        p.b = vote == 1 ? 20.0 : -20.0;
        m.params = p;
        return m;
    };

    const std::vector<MetaModel> majority{constant_model(1), constant_model(1),
                                          constant_model(0)};
    CHECK(ensemble_vote(majority, l1, l1.test_rows) == std::vector<int>{1, 1});

    const std::vector<MetaModel> tied{constant_model(1), constant_model(1), constant_model(0),
                                      constant_model(0)};
    CHECK(ensemble_vote(tied, l1, l1.test_rows) == std::vector<int>{0, 0});

    const std::vector<MetaModel> clones{constant_model(1), constant_model(1), constant_model(1)};
    CHECK(ensemble_vote(clones, l1, l1.test_rows) ==
          predict_calls(clones[0], l1, l1.test_rows));

    CHECK_THROWS_AS(ensemble_vote({constant_model(1), constant_model(0)}, l1, l1.test_rows),
                    ConfigError);
}

TEST_CASE("probabilistic meta-scores stay inside [0,1]") {
    ToyLevel1 t = toy_level1(500, 100, 0.4, 0.5, 606);
    MetaOptions opt;
    for (MetaKind kind : {MetaKind::LR, MetaKind::RF, MetaKind::NN, MetaKind::Random}) {
        const MetaModel m = fit_classifier(kind, t.l1, opt, 17);
        for (double s : predict_scores(m, t.l1, t.l1.test_rows)) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
    }
}

TEST_CASE("fully labeled separable toy: AdapterPU, UPU and LR rank test rows identically") {
    // single informative feature with distinct values: ranking must coincide
    Rng rng(5150);
    const std::size_t V = 300;
    Level1Dataset l1;
    l1.D1 = Matrix(V, 1);
    for (std::size_t v = 0; v < V; ++v) {
        const int causal = v < 60 ? 1 : 0;
        l1.D1.at(v, 0) = causal * 3.0 + 0.001 * static_cast<double>(v) + 0.1 * rng.normal();
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(causal);
    }
    l1.feature_names = {"f"};
    l1 = split_variables(std::move(l1), 0.67, 3);

    MetaOptions opt;
    const auto [adapter, cal] = fit_adapter_pu(l1, opt, 2);
    const MetaModel upu = fit_upu(l1, 0.2, opt, 2);
    const MetaModel lr = fit_classifier(MetaKind::LR, l1, opt, 2);

    auto tie_ranks = [&](const MetaModel& m) {
        const std::vector<double> s = predict_scores(m, l1, l1.test_rows);
        std::vector<std::size_t> order(s.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
        std::vector<double> rank(s.size());
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && s[order[j + 1]] == s[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
            i = j + 1;
        }
        return rank;
    };
    auto spearman = [](const std::vector<double>& ra, const std::vector<double>& rb) {
        const double n = static_cast<double>(ra.size());
        double ma = 0.0, mb = 0.0;
        for (std::size_t k = 0; k < ra.size(); ++k) {
            ma += ra[k];
            mb += rb[k];
        }
        ma /= n;
        mb /= n;
        double cov = 0.0, va = 0.0, vb = 0.0;
        for (std::size_t k = 0; k < ra.size(); ++k) {
            cov += (ra[k] - ma) * (rb[k] - mb);
            va += (ra[k] - ma) * (ra[k] - ma);
            vb += (rb[k] - mb) * (rb[k] - mb);
        }
        return cov / std::sqrt(va * vb);
    };
    const auto ra = tie_ranks(adapter);
    const auto ru = tie_ranks(upu);
    const auto rl = tie_ranks(lr);
    CHECK(ru == rl);  // both linear, uncapped: ranks coincide exactly
    // the adapter caps saturated scores at 1, which ties its top block;
    // tie-averaged Spearman stays at 1 up to that rounding
    CHECK(spearman(ra, rl) >= 0.995);
}

TEST_CASE("te regressor: identity feature recovers weight 1 and zero PEHE") {
    Rng rng(8);
    const std::size_t V = 200;
    Level1Dataset l1;
    l1.D1 = Matrix(V, 1);
    std::vector<double> tau(V);
    for (std::size_t v = 0; v < V; ++v) {
        tau[v] = rng.normal();
        l1.D1.at(v, 0) = tau[v];
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(v < 40 ? 1 : 0);
    }
    l1.feature_names = {"f"};
    l1 = split_variables(std::move(l1), 0.67, 4);

    const TeMetaRegressor reg = fit_te_regressor(l1, tau);
    CHECK(reg.weights[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(reg.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK_FALSE(reg.ridge_fallback);

    const std::vector<double> pred = te_predict(reg, l1, l1.test_rows);
    std::vector<double> tau_test;
    for (std::size_t r : l1.test_rows) tau_test.push_back(tau[r]);
    const PeheResult res = pehe(pred, tau_test);
    CHECK(res.pehe_sq == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("te regressor on pure noise predicts near the mean: PEHE ~ variance") {
    Rng rng(55);
    const std::size_t V = 4000;
    Level1Dataset l1;
    l1.D1 = Matrix(V, 1);
    std::vector<double> tau(V);
    for (std::size_t v = 0; v < V; ++v) {
        tau[v] = rng.normal();  // zero-mean effects
        l1.D1.at(v, 0) = rng.normal();  // feature carries no information
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(v % 5 == 0 ? 1 : 0);
    }
    l1.feature_names = {"noise"};
    l1 = split_variables(std::move(l1), 0.67, 6);

    const TeMetaRegressor reg = fit_te_regressor(l1, tau);
    const std::vector<double> pred = te_predict(reg, l1, l1.test_rows);
    std::vector<double> tau_test;
    for (std::size_t r : l1.test_rows) tau_test.push_back(tau[r]);
    const PeheResult res = pehe(pred, tau_test);
    CHECK(res.pehe_sq == doctest::Approx(variance(tau_test)).epsilon(0.1));
}

TEST_CASE("te regressor normal equations agree with gradient descent to 1e-8") {
    Rng rng(66);
    const std::size_t V = 150;
    Level1Dataset l1;
    l1.D1 = Matrix(V, 2);
    std::vector<double> tau(V);
    for (std::size_t v = 0; v < V; ++v) {
        l1.D1.at(v, 0) = rng.normal();
        l1.D1.at(v, 1) = rng.normal();
        tau[v] = 0.7 * l1.D1.at(v, 0) - 0.3 * l1.D1.at(v, 1) + 0.05 * rng.normal();
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(v < 30 ? 1 : 0);
    }
    l1.feature_names = {"a", "b"};
    l1 = split_variables(std::move(l1), 0.67, 7);
    const TeMetaRegressor reg = fit_te_regressor(l1, tau);

    // independent gradient-descent solver on the same least squares problem
    double w0 = 0.0, w1 = 0.0, b = 0.0;
    const auto& rows = l1.train_rows;
    const double n = static_cast<double>(rows.size());
    for (int it = 0; it < 200000; ++it) {
        double g0 = 0.0, g1 = 0.0, gb = 0.0;
        for (std::size_t r : rows) {
            const double err = b + w0 * l1.D1.at(r, 0) + w1 * l1.D1.at(r, 1) - tau[r];
            g0 += err * l1.D1.at(r, 0);
            g1 += err * l1.D1.at(r, 1);
            gb += err;
        }
        w0 -= 0.5 * g0 / n;
        w1 -= 0.5 * g1 / n;
        b -= 0.5 * gb / n;
    }
    CHECK(std::fabs(reg.weights[0] - w0) <= 1e-8);
    CHECK(std::fabs(reg.weights[1] - w1) <= 1e-8);
    CHECK(std::fabs(reg.intercept - b) <= 1e-8);
}

TEST_CASE("te regressor falls back to ridge on a rank-deficient design") {
    Rng rng(77);
    const std::size_t V = 80;
    Level1Dataset l1;
    l1.D1 = Matrix(V, 2);
    std::vector<double> tau(V);
    for (std::size_t v = 0; v < V; ++v) {
        const double x = rng.normal();
        l1.D1.at(v, 0) = x;
        l1.D1.at(v, 1) = 2.0 * x;  // exactly collinear
        tau[v] = x;
        l1.variable_names.push_back("v" + std::to_string(v));
        l1.labels.labels.push_back(v < 16 ? 1 : 0);
    }
    l1.feature_names = {"a", "a2"};
    l1 = split_variables(std::move(l1), 0.67, 8);
    const TeMetaRegressor reg = fit_te_regressor(l1, tau);
    CHECK(reg.ridge_fallback);
    for (double w : reg.weights) CHECK(std::isfinite(w));
}

}  // TEST_SUITE
