#include "cdstack/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdstack/data_model.hpp"
#include "cdstack/errors.hpp"
#include "cdstack/kernels.hpp"
#include "cdstack/mathutil.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

namespace {

constexpr double kMinWorkingWeight = 1e-6;

std::vector<double> normalized_weights(const std::vector<int>& y,
                                       const std::vector<double>* sample_weights) {
    const std::size_t n = y.size();
    std::vector<double> w(n, 1.0);
    if (sample_weights) {
        if (sample_weights->size() != n) throw DataError("sample_weights length mismatch");
        double s = 0.0;
        for (double v : *sample_weights) {
            if (v < 0.0) throw ConfigError("negative sample weight");
            s += v;
        }
        if (s <= 0.0) throw ConfigError("sample weights sum to zero");
        for (std::size_t i = 0; i < n; ++i) w[i] = (*sample_weights)[i] * static_cast<double>(n) / s;
    }
    return w;
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

}  // namespace

std::vector<double> linear_scores(const Matrix& x, const std::vector<double>& coef,
                                  double intercept) {
    std::vector<double> eta(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        eta[i] = intercept + kernels::dot(x.row(i), coef.data(), x.cols());
    return eta;
}

double elastic_net_objective(const Matrix& x, const std::vector<int>& y,
                             const std::vector<double>& coef, double intercept, double lambda,
                             double l1_ratio, const std::vector<double>* sample_weights) {
    const std::size_t n = x.rows();
    const auto w = normalized_weights(y, sample_weights);
    const auto eta = linear_scores(x, coef, intercept);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) loss += w[i] * logistic_loss(y[i], eta[i]);
    loss /= static_cast<double>(n);
    double l1 = 0.0, l2 = 0.0;
    for (double b : coef) {
        l1 += std::fabs(b);
        l2 += b * b;
    }
    return loss + lambda * (l1_ratio * l1 + 0.5 * (1.0 - l1_ratio) * l2);
}

std::vector<double> elastic_net_smooth_gradient(const Matrix& x, const std::vector<int>& y,
                                                const std::vector<double>& coef, double intercept,
                                                double lambda, double l1_ratio,
                                                const std::vector<double>* sample_weights) {
    const std::size_t n = x.rows(), p = x.cols();
    const auto w = normalized_weights(y, sample_weights);
    const auto eta = linear_scores(x, coef, intercept);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = w[i] * (sigmoid(eta[i]) - y[i]);

    std::vector<double> g(p + 1, 0.0);
    g[0] = kernels::sum(resid.data(), n) / static_cast<double>(n);
    for (std::size_t j = 0; j < p; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += resid[i] * x.at(i, j);
        g[j + 1] = acc / static_cast<double>(n) + lambda * (1.0 - l1_ratio) * coef[j];
    }
    return g;
}

double elastic_net_kkt_residual(const Matrix& x, const std::vector<int>& y,
                                const OutcomeModel& model,
                                const std::vector<double>* sample_weights) {
    const auto g = elastic_net_smooth_gradient(x, y, model.coef, model.intercept, model.lambda,
                                               model.l1_ratio, sample_weights);
    const double thr = model.lambda * model.l1_ratio;
    double worst = std::fabs(g[0]);
    for (std::size_t j = 0; j < model.coef.size(); ++j) {
        const double b = model.coef[j];
        double r;
        if (b != 0.0) r = std::fabs(g[j + 1] + thr * (b > 0.0 ? 1.0 : -1.0));
        else r = std::max(0.0, std::fabs(g[j + 1]) - thr);
        worst = std::max(worst, r);
    }
    return worst;
}

OutcomeModel fit_logistic_elastic_net(const Matrix& x, const std::vector<int>& y,
                                      const ElasticNetOptions& opt) {
    const std::size_t n = x.rows(), p = x.cols();
    if (y.size() != n) throw DataError("elastic net: y length mismatch");
    if (opt.lambda < 0.0) throw ConfigError("elastic net: lambda must be >= 0");
    if (!(opt.l1_ratio >= 0.0 && opt.l1_ratio <= 1.0))
        throw ConfigError("elastic net: l1_ratio must be in [0,1]");

    const auto sw = normalized_weights(y, opt.sample_weights);
    double wy = 0.0, wtot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wy += sw[i] * y[i];
        wtot += sw[i];
    }
    const double ybar = wy / wtot;
    if (ybar <= 0.0 || ybar >= 1.0) throw DataError("elastic net: single-class outcome");

    // feature-major copy so each coordinate's data is contiguous
    const Matrix cols = x.transposed();

    OutcomeModel model;
    model.l1_ratio = opt.l1_ratio;
    model.lambda = opt.lambda;
    model.coef.assign(p, 0.0);
    model.intercept = logit(ybar);

    auto objective_at = [&](const std::vector<double>& coef, double intercept) {
        return elastic_net_objective(x, y, coef, intercept, opt.lambda, opt.l1_ratio,
                                     opt.sample_weights);
    };

    std::vector<double> eta(n, model.intercept);
    double obj = objective_at(model.coef, model.intercept);

    const double l1pen = opt.lambda * opt.l1_ratio;
    const double l2pen = opt.lambda * (1.0 - opt.l1_ratio);
    const double dn = static_cast<double>(n);

    std::vector<double> wrk(n), s(n), denom(p);

    for (int outer = 0; outer < opt.max_outer; ++outer) {
        model.n_outer = outer + 1;
        const std::vector<double> coef_prev = model.coef;
        const double intercept_prev = model.intercept;

        // weighted least-squares approximation at the current eta
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = sigmoid(eta[i]);
            const double pq = std::max(pi * (1.0 - pi), kMinWorkingWeight);
            wrk[i] = sw[i] * pq;
            s[i] = wrk[i] > 0.0 ? (y[i] - pi) / pq : 0.0;  // working residual z_i - eta_i
            wsum += wrk[i];
        }
        for (std::size_t j = 0; j < p; ++j)
            denom[j] = kernels::dot3(wrk.data(), cols.row(j), cols.row(j), n) / dn + l2pen;

        // coordinate descent on the quadratic model
        for (int sweep = 0; sweep < opt.max_inner; ++sweep) {
            double max_delta = 0.0;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += wrk[i] * s[i];
            const double d0 = acc / wsum;
            if (d0 != 0.0) {
                model.intercept += d0;
                for (std::size_t i = 0; i < n; ++i) s[i] -= d0;
                max_delta = std::fabs(d0);
            }
            for (std::size_t j = 0; j < p; ++j) {
                if (denom[j] <= 0.0) continue;
                const double* xj = cols.row(j);
                const double g = kernels::dot3(wrk.data(), xj, s.data(), n) / dn +
                                 (denom[j] - l2pen) * model.coef[j];
                const double bnew = soft_threshold(g, l1pen) / denom[j];
                const double delta = bnew - model.coef[j];
                if (delta != 0.0) {
                    model.coef[j] = bnew;
                    kernels::axpy(-delta, xj, s.data(), n);
                    max_delta = std::max(max_delta, std::fabs(delta));
                }
            }
            if (max_delta < 1e-11) break;
        }

        // backtrack toward the previous iterate until the true objective drops
        const std::vector<double> cand_coef = model.coef;
        const double cand_intercept = model.intercept;
        double cand_obj = objective_at(model.coef, model.intercept);
        double t = 1.0;
        int halvings = 0;
        while (cand_obj > obj + 1e-12 && halvings < 30) {
            t *= 0.5;
            ++halvings;
            for (std::size_t j = 0; j < p; ++j)
                model.coef[j] = coef_prev[j] + t * (cand_coef[j] - coef_prev[j]);
            model.intercept = intercept_prev + t * (cand_intercept - intercept_prev);
            cand_obj = objective_at(model.coef, model.intercept);
        }
        if (cand_obj > obj + 1e-12) {
            // no descent direction left: restore and stop
            model.coef = coef_prev;
            model.intercept = intercept_prev;
            break;
        }
        obj = cand_obj;
        eta = linear_scores(x, model.coef, model.intercept);

        double max_change = std::fabs(model.intercept - intercept_prev);
        for (std::size_t j = 0; j < p; ++j)
            max_change = std::max(max_change, std::fabs(model.coef[j] - coef_prev[j]));
        if (max_change < opt.tol) {
            model.kkt_residual = elastic_net_kkt_residual(x, y, model, opt.sample_weights);
            if (model.kkt_residual <= opt.kkt_tol) {
                model.converged = true;
                break;
            }
        }
    }

    model.objective = obj;
    model.kkt_residual = elastic_net_kkt_residual(x, y, model, opt.sample_weights);
    return model;
}

OutcomeModel fit_outcome_model(const Matrix& x_aug, const std::vector<int>& y0, double l1_ratio,
                               double lambda) {
    ElasticNetOptions opt;
    opt.l1_ratio = l1_ratio;
    opt.lambda = lambda;
    return fit_logistic_elastic_net(x_aug, y0, opt);
}

double choose_lambda_cv(const Matrix& x, const std::vector<int>& y, double l1_ratio,
                        const std::vector<double>& grid, int n_folds, std::uint64_t seed) {
    if (grid.empty()) throw ConfigError("choose_lambda_cv: empty grid");
    if (n_folds < 2) throw ConfigError("choose_lambda_cv: need >= 2 folds");
    const std::size_t n = x.rows();

    // stratified fold assignment
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (y[i] == 1 ? pos : neg).push_back(i);
    Rng rng(derive_seed(seed, "lambda_cv"));
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<int> fold(n, 0);
    for (std::size_t i = 0; i < pos.size(); ++i) fold[pos[i]] = static_cast<int>(i % n_folds);
    for (std::size_t i = 0; i < neg.size(); ++i) fold[neg[i]] = static_cast<int>(i % n_folds);

    double best_lambda = grid.front();
    double best_loss = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double loss = 0.0;
        std::size_t count = 0;
        bool valid = true;
        for (int f = 0; f < n_folds && valid; ++f) {
            std::vector<std::size_t> tr, va;
            for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? va : tr).push_back(i);
            Matrix xtr(tr.size(), x.cols());
            std::vector<int> ytr(tr.size());
            for (std::size_t i = 0; i < tr.size(); ++i) {
                std::copy(x.row(tr[i]), x.row(tr[i]) + x.cols(), xtr.row(i));
                ytr[i] = y[tr[i]];
            }
            int c0 = 0, c1 = 0;
            for (int yy : ytr) (yy ? c1 : c0)++;
            if (c0 == 0 || c1 == 0) {
                valid = false;
                break;
            }
            ElasticNetOptions opt;
            opt.l1_ratio = l1_ratio;
            opt.lambda = lambda;
            opt.max_outer = 50;
            const OutcomeModel m = fit_logistic_elastic_net(xtr, ytr, opt);
            for (std::size_t idx : va) {
                const double eta =
                    m.intercept + kernels::dot(x.row(idx), m.coef.data(), x.cols());
                loss += logistic_loss(y[idx], eta);
                ++count;
            }
        }
        if (!valid || count == 0) continue;
        loss /= static_cast<double>(count);
        if (loss < best_loss) {
            best_loss = loss;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

}  // namespace cdstack
