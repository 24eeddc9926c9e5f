#include "cdstack/ppca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdstack/errors.hpp"
#include "cdstack/kernels.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

namespace {

constexpr double kSigma2Floor = 1e-12;

struct EmWorkspace {
    Matrix Wt;       // k x V, row per latent dimension
    double sigma2 = 1.0;
};

// M = Wt Wt^T + sigma2 I
Matrix latent_gram(const Matrix& Wt, double sigma2) {
    const std::size_t k = Wt.rows(), V = Wt.cols();
    Matrix m(k, k);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            const double d = kernels::dot(Wt.row(a), Wt.row(b), V);
            m.at(a, b) = d;
            m.at(b, a) = d;
        }
    }
    for (std::size_t a = 0; a < k; ++a) m.at(a, a) += sigma2;
    return m;
}

}  // namespace

PpcaModel fit_ppca(const Matrix& x_raw, int k, const PpcaOptions& opt) {
    const std::size_t J = x_raw.rows();
    const std::size_t V = x_raw.cols();
    if (k < 1) throw ConfigError("fit_ppca: k must be >= 1");
    if (static_cast<std::size_t>(k) >= std::min(J, V))
        throw ConfigError("fit_ppca: k must be < min(J, V)");

    PpcaModel model;
    model.k = k;

    ColumnStats stats = column_stats(x_raw);
    for (std::size_t j = 0; j < V; ++j) {
        if (stats.sd[j] <= 1e-12)
            throw NumericError("fit_ppca: zero-variance column " + std::to_string(j));
    }
    model.col_mean = stats.mean;
    model.col_sd = stats.sd;
    Matrix xs = standardize_columns(x_raw, stats);

    // center (standardized columns already have mean ~0 when stats come from
    // the same rows, but warm starts score other row sets)
    model.mu.assign(V, 0.0);
    for (std::size_t i = 0; i < J; ++i) {
        const double* r = xs.row(i);
        for (std::size_t j = 0; j < V; ++j) model.mu[j] += r[j];
    }
    for (std::size_t j = 0; j < V; ++j) model.mu[j] /= static_cast<double>(J);
    for (std::size_t i = 0; i < J; ++i) {
        double* r = xs.row(i);
        for (std::size_t j = 0; j < V; ++j) r[j] -= model.mu[j];
    }

    EmWorkspace ws;
    ws.Wt = Matrix(k, V);
    if (opt.warm_start && opt.warm_start->k == k &&
        opt.warm_start->W.rows() == V) {
        ws.Wt = opt.warm_start->W.transposed();
        ws.sigma2 = std::max(opt.warm_start->sigma2, kSigma2Floor);
    } else {
        Rng rng(derive_seed(opt.seed, "ppca_init"));
        const double scale = 1.0 / std::sqrt(static_cast<double>(k));
        for (std::size_t a = 0; a < static_cast<std::size_t>(k); ++a)
            for (std::size_t j = 0; j < V; ++j) ws.Wt.at(a, j) = scale * rng.normal();
        ws.sigma2 = 0.5;
    }

    double ssq = 0.0;
    for (std::size_t i = 0; i < J; ++i) ssq += kernels::dot(xs.row(i), xs.row(i), V);

    const double vlog2pi = static_cast<double>(V) * std::log(2.0 * M_PI);
    double prev_ll = -std::numeric_limits<double>::infinity();
    model.loglik_path.clear();

    Matrix A(k, V);            // sum_i zbar_i xtilde_i^T
    Matrix Bsum(k, k);         // sum_i E[z z^T]
    std::vector<double> t(k), zbar(k);

    for (int it = 0; it < opt.max_iter; ++it) {
        Matrix M = latent_gram(ws.Wt, ws.sigma2);
        Matrix chol = M;
        if (!cholesky_factor(chol)) throw NumericError("fit_ppca: latent Gram not SPD");
        const Matrix Minv = cholesky_inverse(chol);
        const double logdetM = cholesky_logdet(chol);

        A = Matrix(k, V);
        Bsum = Matrix(k, k);
        double quad = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            const double* x = xs.row(i);
            for (int a = 0; a < k; ++a) t[a] = kernels::dot(ws.Wt.row(a), x, V);
            for (int a = 0; a < k; ++a) {
                double s = 0.0;
                for (int b = 0; b < k; ++b) s += Minv.at(a, b) * t[b];
                zbar[a] = s;
                quad += s * t[a];
            }
            for (int a = 0; a < k; ++a) {
                kernels::axpy(zbar[a], x, A.row(a), V);
                for (int b = 0; b < k; ++b) Bsum.at(a, b) += zbar[a] * zbar[b];
            }
        }
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b)
                Bsum.at(a, b) += static_cast<double>(J) * ws.sigma2 * Minv.at(a, b);

        // marginal log-likelihood at the current parameters
        const double ll = -0.5 * static_cast<double>(J) *
                              (vlog2pi + static_cast<double>(V - k) * std::log(ws.sigma2) +
                               logdetM) -
                          0.5 / ws.sigma2 * (ssq - quad);
        if (std::isfinite(prev_ll) && ll < prev_ll - 1e-6 * (1.0 + std::fabs(prev_ll)))
            throw NumericError("fit_ppca: EM log-likelihood decreased");
        model.loglik_path.push_back(ll);

        const bool done =
            std::isfinite(prev_ll) &&
            std::fabs(ll - prev_ll) < opt.tol * (1.0 + std::fabs(prev_ll));
        prev_ll = ll;
        model.n_iter = it + 1;
        if (done) {
            model.converged = true;
            break;
        }

        // M-step
        Matrix bchol = Bsum;
        if (!cholesky_factor(bchol)) throw NumericError("fit_ppca: E[zz^T] not SPD");
        const Matrix Binv = cholesky_inverse(bchol);
        Matrix WtNew(k, V);
        for (int a = 0; a < k; ++a) {
            for (int b = 0; b < k; ++b) kernels::axpy(Binv.at(a, b), A.row(b), WtNew.row(a), V);
        }

        double cross = 0.0;  // tr(Wnew^T sum x z^T) = <WtNew, A>
        for (int a = 0; a < k; ++a) cross += kernels::dot(WtNew.row(a), A.row(a), V);
        Matrix G(k, k);  // Wnew^T Wnew
        for (int a = 0; a < k; ++a)
            for (int b = a; b < k; ++b) {
                const double d = kernels::dot(WtNew.row(a), WtNew.row(b), V);
                G.at(a, b) = d;
                G.at(b, a) = d;
            }
        double trace_bg = 0.0;
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) trace_bg += Bsum.at(a, b) * G.at(b, a);

        ws.Wt = std::move(WtNew);
        ws.sigma2 = std::max((ssq - 2.0 * cross + trace_bg) /
                                 (static_cast<double>(J) * static_cast<double>(V)),
                             kSigma2Floor);
    }

    model.sigma2 = ws.sigma2;
    model.W = ws.Wt.transposed();

    // posterior scores under the final parameters
    Matrix M = latent_gram(ws.Wt, ws.sigma2);
    Matrix chol = M;
    if (!cholesky_factor(chol)) throw NumericError("fit_ppca: latent Gram not SPD");
    const Matrix Minv = cholesky_inverse(chol);
    model.Z = Matrix(J, k);
    for (std::size_t i = 0; i < J; ++i) {
        const double* x = xs.row(i);
        for (int a = 0; a < k; ++a) t[a] = kernels::dot(ws.Wt.row(a), x, V);
        for (int a = 0; a < k; ++a) {
            double s = 0.0;
            for (int b = 0; b < k; ++b) s += Minv.at(a, b) * t[b];
            model.Z.at(i, a) = s;
        }
    }
    return model;
}

PpcaModel fit_ppca(const Level0Dataset& ds, int k, int max_iter, double tol, std::uint64_t seed) {
    PpcaOptions opt;
    opt.max_iter = max_iter;
    opt.tol = tol;
    opt.seed = seed;
    try {
        return fit_ppca(ds.X, k, opt);
    } catch (const NumericError& e) {
        // name the variable, not just the column index
        const std::string msg = e.what();
        const std::string tag = "zero-variance column ";
        auto pos = msg.find(tag);
        if (pos != std::string::npos) {
            const std::size_t col = std::stoul(msg.substr(pos + tag.size()));
            if (col < ds.variable_names.size())
                throw NumericError("fit_ppca: zero-variance variable '" +
                                   ds.variable_names[col] + "'");
        }
        throw;
    }
}

namespace {

// rows standardized with the model stats and centered on mu
Matrix to_model_space(const PpcaModel& model, const Matrix& x_raw) {
    if (x_raw.cols() != model.W.rows()) throw DataError("ppca: column count mismatch");
    ColumnStats st{model.col_mean, model.col_sd};
    Matrix xs = standardize_columns(x_raw, st);
    for (std::size_t i = 0; i < xs.rows(); ++i) {
        double* r = xs.row(i);
        for (std::size_t j = 0; j < xs.cols(); ++j) r[j] -= model.mu[j];
    }
    return xs;
}

struct LoglikContext {
    Matrix Wt;
    Matrix Minv;
    double logdetM = 0.0;
    double sigma2 = 1.0;
    double vlog2pi = 0.0;
    int k = 0;

    explicit LoglikContext(const PpcaModel& model) {
        Wt = model.W.transposed();
        k = model.k;
        sigma2 = model.sigma2;
        Matrix M = latent_gram(Wt, sigma2);
        Matrix chol = M;
        if (!cholesky_factor(chol)) throw NumericError("ppca: latent Gram not SPD");
        Minv = cholesky_inverse(chol);
        logdetM = cholesky_logdet(chol);
        vlog2pi = static_cast<double>(model.W.rows()) * std::log(2.0 * M_PI);
    }

    double row_loglik(const double* x, std::size_t V) const {
        std::vector<double> t(k);
        for (int a = 0; a < k; ++a) t[a] = kernels::dot(Wt.row(a), x, V);
        double quad = 0.0;
        for (int a = 0; a < k; ++a) {
            double s = 0.0;
            for (int b = 0; b < k; ++b) s += Minv.at(a, b) * t[b];
            quad += s * t[a];
        }
        const double ssq = kernels::dot(x, x, V);
        return -0.5 * (vlog2pi + static_cast<double>(V - static_cast<std::size_t>(k)) *
                                     std::log(sigma2) +
                       logdetM + (ssq - quad) / sigma2);
    }
};

}  // namespace

Matrix posterior_scores(const PpcaModel& model, const Matrix& x_raw) {
    const Matrix xs = to_model_space(model, x_raw);
    const LoglikContext ctx(model);
    const std::size_t V = xs.cols();
    Matrix z(xs.rows(), model.k);
    std::vector<double> t(model.k);
    for (std::size_t i = 0; i < xs.rows(); ++i) {
        for (int a = 0; a < model.k; ++a) t[a] = kernels::dot(ctx.Wt.row(a), xs.row(i), V);
        for (int a = 0; a < model.k; ++a) {
            double s = 0.0;
            for (int b = 0; b < model.k; ++b) s += ctx.Minv.at(a, b) * t[b];
            z.at(i, a) = s;
        }
    }
    return z;
}

double marginal_loglik(const PpcaModel& model, const Matrix& x_raw) {
    const Matrix xs = to_model_space(model, x_raw);
    const LoglikContext ctx(model);
    double ll = 0.0;
    for (std::size_t i = 0; i < xs.rows(); ++i) ll += ctx.row_loglik(xs.row(i), xs.cols());
    return ll;
}

double predictive_check_heldout(const PpcaModel& model, const Matrix& heldout_raw,
                                int n_replicates, std::uint64_t seed) {
    if (heldout_raw.rows() == 0) throw DataError("predictive_check: empty holdout");
    if (n_replicates < 1) throw ConfigError("predictive_check: n_replicates must be >= 1");

    const Matrix xs = to_model_space(model, heldout_raw);
    const LoglikContext ctx(model);
    const std::size_t V = xs.cols();

    std::vector<double> ll_obs(xs.rows());
    for (std::size_t i = 0; i < xs.rows(); ++i) ll_obs[i] = ctx.row_loglik(xs.row(i), V);

    // one shared pool of replicated rows drawn from the fitted model
    Rng rng(derive_seed(seed, "ppca_check_replicates"));
    const double sd = std::sqrt(model.sigma2);
    std::vector<double> ll_rep(n_replicates);
    std::vector<double> row(V), z(model.k);
    for (int r = 0; r < n_replicates; ++r) {
        for (int a = 0; a < model.k; ++a) z[a] = rng.normal();
        for (std::size_t j = 0; j < V; ++j) row[j] = sd * rng.normal();
        for (int a = 0; a < model.k; ++a) kernels::axpy(z[a], ctx.Wt.row(a), row.data(), V);
        ll_rep[r] = ctx.row_loglik(row.data(), V);
    }

    double p_sum = 0.0;
    for (double obs : ll_obs) {
        std::size_t below = 0;
        for (double rep : ll_rep)
            if (rep <= obs) ++below;
        p_sum += static_cast<double>(below) / static_cast<double>(n_replicates);
    }
    return p_sum / static_cast<double>(ll_obs.size());
}

std::vector<std::size_t> predictive_check_holdout_rows(std::size_t n_rows, double holdout_fraction,
                                                       std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw ConfigError("holdout_fraction must be in (0,1)");
    const std::size_t n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n_rows))));
    if (n_hold >= n_rows) throw DataError("predictive_check: holdout would consume all rows");
    Rng rng(derive_seed(seed, "ppca_check_holdout"));
    auto rows = rng.sample_without_replacement(n_rows, n_hold);
    std::sort(rows.begin(), rows.end());
    return rows;
}

double predictive_check(const PpcaModel& model, const Level0Dataset& ds, double holdout_fraction,
                        int n_replicates, std::uint64_t seed) {
    const auto hold = predictive_check_holdout_rows(ds.n_samples(), holdout_fraction, seed);
    Matrix heldout(hold.size(), ds.n_variables());
    for (std::size_t i = 0; i < hold.size(); ++i)
        std::copy(ds.X.row(hold[i]), ds.X.row(hold[i]) + ds.n_variables(), heldout.row(i));
    return predictive_check_heldout(model, heldout, n_replicates, seed);
}

PredictiveCheckResult run_predictive_check(const Matrix& x_raw, int k,
                                           const PredictiveCheckOptions& opt, std::uint64_t seed) {
    const auto hold = predictive_check_holdout_rows(x_raw.rows(), opt.holdout_fraction, seed);
    std::vector<char> is_held(x_raw.rows(), 0);
    for (auto h : hold) is_held[h] = 1;

    Matrix kept(x_raw.rows() - hold.size(), x_raw.cols());
    Matrix heldout(hold.size(), x_raw.cols());
    std::size_t ik = 0, ih = 0;
    for (std::size_t i = 0; i < x_raw.rows(); ++i) {
        const double* src = x_raw.row(i);
        double* dst = is_held[i] ? heldout.row(ih++) : kept.row(ik++);
        std::copy(src, src + x_raw.cols(), dst);
    }

    PpcaOptions popt;
    popt.max_iter = opt.max_iter;
    popt.tol = opt.tol;
    popt.seed = derive_seed(seed, "ppca_check_fit");

    PredictiveCheckResult res;
    res.holdout_model = fit_ppca(kept, k, popt);
    res.p_value = predictive_check_heldout(res.holdout_model, heldout, opt.n_replicates, seed);
    res.pass = res.p_value >= opt.pass_low && res.p_value <= opt.pass_high;
    return res;
}

}  // namespace cdstack
