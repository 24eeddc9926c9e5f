#include "cdstack/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdstack/errors.hpp"
#include "cdstack/kernels.hpp"
#include "cdstack/mathutil.hpp"
#include "cdstack/parallel.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

namespace {

// standardized [X | Z] with Z columns standardized as well
Matrix augmented_design(const Matrix& x_std, const Matrix& z) {
    const std::size_t n = x_std.rows(), v = x_std.cols(), k = z.cols();
    if (z.rows() != n) throw DataError("augmented_design: proxy row mismatch");
    const ColumnStats zst = column_stats(z);
    Matrix out(n, v + k);
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = out.row(i);
        std::copy(x_std.row(i), x_std.row(i) + v, dst);
        for (std::size_t a = 0; a < k; ++a) {
            const double sd = zst.sd[a] > 1e-12 ? zst.sd[a] : 1.0;
            dst[v + a] = (z.at(i, a) - zst.mean[a]) / sd;
        }
    }
    return out;
}

std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1}; }

}  // namespace

double two_tailed_zero_test(const std::vector<double>& samples) {
    if (samples.empty()) throw DataError("two_tailed_zero_test: empty sample vector");
    std::size_t le = 0, ge = 0;
    for (double s : samples) {
        if (s <= 0.0) ++le;
        if (s >= 0.0) ++ge;
    }
    const double n = static_cast<double>(samples.size());
    const double p = 2.0 * std::min(static_cast<double>(le) / n, static_cast<double>(ge) / n);
    return std::min(p, 1.0);
}

BootstrapResult bootstrap_effects(const Level0Dataset& ds, const LearnerFn& learner, int B,
                                  std::uint64_t seed) {
    if (B < 20) throw ConfigError("bootstrap_effects: B must be >= 20");
    const std::size_t J = ds.n_samples();
    const std::size_t V = ds.n_variables();
    const std::size_t sub = static_cast<std::size_t>(0.9 * static_cast<double>(J));
    if (sub < 2) throw DataError("bootstrap_effects: subsample too small");

    BootstrapResult res;
    res.B = B;
    res.subsample_size = sub;
    res.samples = Matrix(B, V);

    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        Rng rng(derive_seed(seed, "bootstrap", b));
        auto rows = rng.sample_without_replacement(J, sub);
        std::sort(rows.begin(), rows.end());
        const Level0Dataset repl = ds.subset_rows(rows);
        const std::vector<double> phi = learner(repl, derive_seed(seed, "bootstrap_fit", b));
        if (phi.size() != V) throw NumericError("bootstrap replicate returned wrong length");
        std::copy(phi.begin(), phi.end(), res.samples.row(b));
    });

    res.mean.assign(V, 0.0);
    for (int b = 0; b < B; ++b) kernels::axpy(1.0, res.samples.row(b), res.mean.data(), V);
    for (double& m : res.mean) m /= static_cast<double>(B);

    res.p_value.resize(V);
    std::vector<double> col(B);
    for (std::size_t v = 0; v < V; ++v) {
        for (int b = 0; b < B; ++b) col[b] = res.samples.at(b, v);
        res.p_value[v] = two_tailed_zero_test(col);
    }
    return res;
}

std::vector<int> binarize(const LearnerOutput& output, BinarizeStrategy strategy, double param) {
    const std::size_t V = output.phi.size();
    std::vector<int> call(V, 0);
    if (strategy == BinarizeStrategy::Significance) {
        if (!output.p_values) throw DataError("binarize: significance strategy needs p_values");
        for (std::size_t v = 0; v < V; ++v)
            if ((*output.p_values)[v] <= param) call[v] = 1;
        return call;
    }
    if (!(param > 0.0 && param < 1.0))
        throw ConfigError("binarize: top_fraction param must be in (0,1)");
    const std::size_t m = static_cast<std::size_t>(
        std::ceil(param * static_cast<double>(V)));
    std::vector<std::size_t> idx(V);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double fa = std::fabs(output.phi[a]);
        const double fb = std::fabs(output.phi[b]);
        if (fa != fb) return fa > fb;
        return a < b;  // ties: lower variable index wins
    });
    for (std::size_t i = 0; i < m && i < V; ++i) call[idx[i]] = 1;
    return call;
}

DaLearnerResult run_da_learner(const Level0Dataset& ds, const DaLearnerConfig& cfg,
                               std::uint64_t seed) {
    DaLearnerResult res;
    const std::size_t J = ds.n_samples();
    const std::size_t V = ds.n_variables();
    const std::size_t sub = static_cast<std::size_t>(0.9 * static_cast<double>(J));
    if (sub < 2 * static_cast<std::size_t>(cfg.k))
        throw DataError("run_da_learner: subsample smaller than 2k, factor model underdetermined");

    // hard gate: factor model must pass its predictive check
    const PredictiveCheckResult check =
        run_predictive_check(ds.X, cfg.k, cfg.check, derive_seed(seed, "da_check"));
    res.check_p = check.p_value;
    if (!check.pass) {
        res.excluded = true;
        res.exclusion_reason = "predictive check failed (p=" + std::to_string(check.p_value) + ")";
        return res;
    }

    PpcaOptions popt;
    popt.max_iter = cfg.ppca_max_iter;
    popt.tol = cfg.ppca_tol;
    popt.seed = derive_seed(seed, "da_ppca_full");
    res.model = fit_ppca(ds.X, cfg.k, popt);

    const ColumnStats stats = column_stats(ds.X);
    const Matrix x_std = standardize_columns(ds.X, stats);
    const Matrix design = augmented_design(x_std, res.model.Z);

    double lambda = cfg.lambda.value_or(0.0);
    if (!cfg.lambda) {
        lambda = choose_lambda_cv(design, ds.y0, cfg.l1_ratio, default_lambda_grid(), 3,
                                  derive_seed(seed, "da_lambda"));
    }
    res.lambda_used = lambda;

    const PpcaModel* warm = &res.model;
    const auto replicate = [&](const Level0Dataset& sample,
                               std::uint64_t rseed) -> std::vector<double> {
        PpcaOptions ropt;
        ropt.max_iter = cfg.ppca_replicate_max_iter;
        ropt.tol = cfg.ppca_replicate_tol;
        ropt.seed = rseed;
        ropt.warm_start = warm;
        const PpcaModel sub_model = fit_ppca(sample.X, cfg.k, ropt);
        const ColumnStats sst = column_stats(sample.X);
        const Matrix sub_std = standardize_columns(sample.X, sst);
        const Matrix sub_design = augmented_design(sub_std, sub_model.Z);
        ElasticNetOptions eopt;
        eopt.l1_ratio = cfg.l1_ratio;
        eopt.lambda = lambda;
        const OutcomeModel m = fit_logistic_elastic_net(sub_design, sample.y0, eopt);
        return {m.coef.begin(), m.coef.begin() + static_cast<std::ptrdiff_t>(V)};
    };

    const BootstrapResult boot =
        bootstrap_effects(ds, replicate, cfg.bootstrap_b, derive_seed(seed, "da_boot"));

    LearnerOutput out;
    out.dataset_id = ds.dataset_id;
    out.learner_id = "da";
    out.variable_names = ds.variable_names;
    out.phi = boot.mean;
    out.p_values = boot.p_value;
    out.n_bootstrap = boot.B;
    out.causal_call = binarize(out, BinarizeStrategy::Significance, cfg.significance_alpha);
    res.output = std::move(out);
    return res;
}

LearnerOutput run_cate_learner(const Level0Dataset& ds, const Matrix& proxies,
                               const OutcomeModel& regressor, double top_fraction) {
    const std::size_t J = ds.n_samples();
    const std::size_t V = ds.n_variables();
    if (regressor.coef.size() != V + proxies.cols())
        throw DataError("run_cate_learner: regressor not fitted on [X | Z]");
    if (proxies.rows() != J) throw DataError("run_cate_learner: proxy rows mismatch");

    const ColumnStats stats = column_stats(ds.X);
    const Matrix design = augmented_design(standardize_columns(ds.X, stats), proxies);
    const std::vector<double> eta = linear_scores(design, regressor.coef, regressor.intercept);

    LearnerOutput out;
    out.dataset_id = ds.dataset_id;
    out.learner_id = "cate";
    out.variable_names = ds.variable_names;
    out.phi.assign(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        const double w = regressor.coef[v];
        if (w == 0.0) continue;  // no pathway from x_v to the outcome
        const double shift = w / stats.sd[v];
        double acc = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            const double base = eta[i] - w * design.at(i, v);
            acc += sigmoid(base + shift) - sigmoid(base);
        }
        out.phi[v] = acc / static_cast<double>(J);
    }
    out.causal_call = binarize(out, BinarizeStrategy::TopFraction, top_fraction);
    return out;
}

LearnerOutput run_proxy_cate_learner(const Level0Dataset& ds, const CateLearnerConfig& cfg,
                                     std::uint64_t seed, const PpcaModel* reuse_model) {
    PpcaModel local;
    const PpcaModel* model = reuse_model;
    if (model == nullptr) {
        PpcaOptions popt;
        popt.max_iter = cfg.ppca_max_iter;
        popt.tol = cfg.ppca_tol;
        popt.seed = derive_seed(seed, "cate_ppca");
        local = fit_ppca(ds.X, cfg.k, popt);
        model = &local;
    }
    const ColumnStats stats = column_stats(ds.X);
    const Matrix design = augmented_design(standardize_columns(ds.X, stats), model->Z);
    ElasticNetOptions eopt;
    eopt.l1_ratio = cfg.l1_ratio;
    eopt.lambda = cfg.lambda;
    const OutcomeModel reg = fit_logistic_elastic_net(design, ds.y0, eopt);
    return run_cate_learner(ds, model->Z, reg, cfg.top_fraction);
}

UnivariateLogit univariate_logistic(const std::vector<double>& x, const std::vector<int>& y) {
    UnivariateLogit fit;
    const std::size_t n = x.size();
    const double mx = mean(x);
    double var = 0.0;
    for (double v : x) var += (v - mx) * (v - mx);
    var /= static_cast<double>(n);
    if (var <= 1e-24) {
        fit.constant_column = true;
        fit.slope = 0.0;
        fit.p_value = 1.0;
        return fit;
    }
    const double sd = std::sqrt(var);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = (x[i] - mx) / sd;

    double b0 = 0.0, w = 0.0;
    constexpr double kSlopeCap = 10.0;
    constexpr int kMaxIter = 50;
    bool capped = false;
    for (int it = 0; it < kMaxIter; ++it) {
        double g0 = 0.0, g1 = 0.0, i00 = 0.0, i01 = 0.0, i11 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(b0 + w * xs[i]);
            const double r = y[i] - p;
            const double pq = std::max(p * (1.0 - p), 1e-12);
            g0 += r;
            g1 += r * xs[i];
            i00 += pq;
            i01 += pq * xs[i];
            i11 += pq * xs[i] * xs[i];
        }
        const double det = i00 * i11 - i01 * i01;
        if (det <= 1e-12) {
            fit.converged = false;
            break;
        }
        const double d0 = (i11 * g0 - i01 * g1) / det;
        const double d1 = (i00 * g1 - i01 * g0) / det;
        b0 += d0;
        w += d1;
        if (std::fabs(w) > kSlopeCap) {
            w = w > 0.0 ? kSlopeCap : -kSlopeCap;
            capped = true;
            break;  // separation: probabilities saturated
        }
        if (std::fabs(d0) < 1e-10 && std::fabs(d1) < 1e-10) break;
        if (it == kMaxIter - 1) fit.converged = false;
    }
    if (capped) fit.converged = false;
    fit.slope = w;
    fit.intercept = b0;

    if (capped) {
        // Separation saturates the information matrix and wrecks the Wald
        // statistic (Hauck-Donner); fall back to the likelihood ratio.
        double ll_full = 0.0, ll_null = 0.0;
        double ybar = 0.0;
        for (int yy : y) ybar += yy;
        ybar /= static_cast<double>(n);
        ybar = std::clamp(ybar, 1e-12, 1.0 - 1e-12);
        const double b_null = logit(ybar);
        for (std::size_t i = 0; i < n; ++i) {
            ll_full -= logistic_loss(y[i], b0 + w * xs[i]);
            ll_null -= logistic_loss(y[i], b_null);
        }
        const double stat = std::max(0.0, 2.0 * (ll_full - ll_null));
        fit.p_value = std::erfc(std::sqrt(stat / 2.0));  // chi-square, 1 df
        return fit;
    }

    // Wald test from the observed information at the solution
    double i00 = 0.0, i01 = 0.0, i11 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = sigmoid(b0 + w * xs[i]);
        const double pq = std::max(p * (1.0 - p), 1e-12);
        i00 += pq;
        i01 += pq * xs[i];
        i11 += pq * xs[i] * xs[i];
    }
    const double det = i00 * i11 - i01 * i01;
    if (det > 1e-12) {
        const double se = std::sqrt(i00 / det);
        const double z = w / se;
        fit.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(z)));
    } else {
        fit.p_value = 1.0;
    }
    return fit;
}

LearnerOutput run_marginal_learner(const Level0Dataset& ds, double top_fraction) {
    const std::size_t V = ds.n_variables();
    LearnerOutput out;
    out.dataset_id = ds.dataset_id;
    out.learner_id = "marginal";
    out.variable_names = ds.variable_names;
    out.phi.assign(V, 0.0);
    std::vector<double> pvals(V, 1.0);

    parallel_for(V, [&](std::size_t v) {
        const UnivariateLogit fit = univariate_logistic(ds.X.col_copy(v), ds.y0);
        out.phi[v] = fit.slope;
        pvals[v] = fit.p_value;
    });
    out.p_values = std::move(pvals);
    out.causal_call = binarize(out, BinarizeStrategy::TopFraction, top_fraction);
    return out;
}

}  // namespace cdstack
