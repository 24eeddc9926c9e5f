#pragma once

#include <cstdint>
#include <vector>

#include "cdstack/data_model.hpp"
#include "cdstack/matrix.hpp"

namespace cdstack {

// Probabilistic PCA fit by EM: x = W z + mu + eps, z ~ N(0, I_k),
// eps ~ N(0, sigma2 I). Columns are standardized internally; col_mean/col_sd
// record the transform so new rows can be scored consistently.
struct PpcaModel {
    int k = 0;
    Matrix W;                   // V x k loadings
    std::vector<double> mu;     // length V, in standardized space
    double sigma2 = 1.0;
    Matrix Z;                   // J x k posterior mean scores of the training rows
    std::vector<double> col_mean, col_sd;
    bool converged = false;
    int n_iter = 0;
    std::vector<double> loglik_path;  // one entry per EM iteration, non-decreasing
};

struct PpcaOptions {
    int max_iter = 200;
    double tol = 1e-7;  // relative log-likelihood change
    std::uint64_t seed = 0;
    const PpcaModel* warm_start = nullptr;
};

PpcaModel fit_ppca(const Matrix& x_raw, int k, const PpcaOptions& opt = {});
PpcaModel fit_ppca(const Level0Dataset& ds, int k, int max_iter, double tol,
                   std::uint64_t seed = 0);

// Posterior mean latent scores for new raw rows under a fitted model.
Matrix posterior_scores(const PpcaModel& model, const Matrix& x_raw);

// Marginal log-likelihood of raw rows under the fitted model.
double marginal_loglik(const PpcaModel& model, const Matrix& x_raw);

// Posterior predictive check. The statistic is the per-row marginal
// log-likelihood; p = mean over held-out rows of the fraction of replicated
// statistics that fall at or below the observed one. Well-calibrated models
// land near 0.5; the check passes when p is inside [pass_low, pass_high].
double predictive_check_heldout(const PpcaModel& model, const Matrix& heldout_raw,
                                int n_replicates, std::uint64_t seed);

// Deterministic holdout-row selection shared by the check entry points.
std::vector<std::size_t> predictive_check_holdout_rows(std::size_t n_rows,
                                                       double holdout_fraction,
                                                       std::uint64_t seed);

// Entry point matching the fit-on-the-rest protocol: the model must have been
// fitted on the complement of the holdout rows derived from this same seed.
double predictive_check(const PpcaModel& model, const Level0Dataset& ds, double holdout_fraction,
                        int n_replicates, std::uint64_t seed);

struct PredictiveCheckResult {
    double p_value = 0.0;
    bool pass = false;
    PpcaModel holdout_model;  // fitted on the non-held-out rows
};

struct PredictiveCheckOptions {
    double holdout_fraction = 0.1;
    int n_replicates = 100;
    double pass_low = 0.05;
    double pass_high = 0.95;
    int max_iter = 200;
    double tol = 1e-7;
};

// Splits rows, fits on the kept rows, checks on the held-out rows.
PredictiveCheckResult run_predictive_check(const Matrix& x_raw, int k,
                                           const PredictiveCheckOptions& opt, std::uint64_t seed);

}  // namespace cdstack
