#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cdstack/data_model.hpp"
#include "cdstack/elastic_net.hpp"
#include "cdstack/matrix.hpp"
#include "cdstack/ppca.hpp"

namespace cdstack {

// One value per candidate cause from one level-0 learner.
struct LearnerOutput {
    std::string dataset_id;
    std::string learner_id;
    std::vector<double> phi;                          // effect estimate per variable
    std::optional<std::vector<double>> p_values;
    std::vector<int> causal_call;
    int n_bootstrap = 0;
    std::vector<std::string> variable_names;
};

struct BootstrapResult {
    Matrix samples;               // B x V replicate estimates
    std::vector<double> mean;     // column means
    std::vector<double> p_value;  // two-tailed sign test per variable
    int B = 0;
    std::size_t subsample_size = 0;
};

// Replicate estimator: gets the subsampled dataset and a derived seed.
using LearnerFn =
    std::function<std::vector<double>(const Level0Dataset&, std::uint64_t replicate_seed)>;

// B subsamples of size floor(0.9*J) without replacement; replicates run in
// parallel, merged by index.
BootstrapResult bootstrap_effects(const Level0Dataset& ds, const LearnerFn& learner, int B,
                                  std::uint64_t seed);

// Percentile sign test of H0: phi = 0; p = 2*min(frac(<=0), frac(>=0)), capped at 1.
double two_tailed_zero_test(const std::vector<double>& samples);

enum class BinarizeStrategy { Significance, TopFraction };

std::vector<int> binarize(const LearnerOutput& output, BinarizeStrategy strategy, double param);

// ---- Deconfounder learner: PPCA proxies + elastic-net outcome model, -------
// ---- bootstrap mean coefficients, sign-test significance calls. ------------

struct DaLearnerConfig {
    int k = 15;
    int bootstrap_b = 50;
    double l1_ratio = 0.5;
    std::optional<double> lambda;  // unset: chosen by a small CV grid on the full data
    double significance_alpha = 0.05;
    PredictiveCheckOptions check;
    int ppca_max_iter = 200;
    int ppca_replicate_max_iter = 40;  // warm-started refits inside the bootstrap
    double ppca_tol = 1e-7;
    double ppca_replicate_tol = 1e-5;
};

struct DaLearnerResult {
    std::optional<LearnerOutput> output;  // absent when the predictive check fails
    double check_p = 0.0;
    bool excluded = false;
    std::string exclusion_reason;
    double lambda_used = 0.0;
    PpcaModel model;  // full-data factor model (valid when not excluded)
};

DaLearnerResult run_da_learner(const Level0Dataset& ds, const DaLearnerConfig& cfg,
                               std::uint64_t seed);

// ---- Proxy-CATE learner: plug-in do-intervention difference, proxies fixed.

// phi[v] = mean_i [ g(x_i with x_iv := mean_v + 1, z_i) - g(x_i with x_iv := mean_v, z_i) ]
// where g is a logistic regressor fitted on standardized [X | Z]. The +1 step
// is on the raw dosage/expression scale.
LearnerOutput run_cate_learner(const Level0Dataset& ds, const Matrix& proxies,
                               const OutcomeModel& regressor, double top_fraction = 0.10);

struct CateLearnerConfig {
    int k = 15;
    double l1_ratio = 0.0;  // ridge regressor; decorrelates its calls from the DA learner
    double lambda = 1e-2;
    double top_fraction = 0.10;
    int ppca_max_iter = 200;
    double ppca_tol = 1e-7;
};

// Fits (or reuses) the factor model, fits the plug-in regressor, runs the op.
LearnerOutput run_proxy_cate_learner(const Level0Dataset& ds, const CateLearnerConfig& cfg,
                                     std::uint64_t seed, const PpcaModel* reuse_model = nullptr);

// ---- Marginal learner: per-variable univariate logistic + Wald test. ------

LearnerOutput run_marginal_learner(const Level0Dataset& ds, double top_fraction = 0.10);

// Single univariate fit, exposed for tests: slope on the standardized scale.
struct UnivariateLogit {
    double slope = 0.0;
    double intercept = 0.0;
    double p_value = 1.0;
    bool converged = true;
    bool constant_column = false;
};
UnivariateLogit univariate_logistic(const std::vector<double>& x, const std::vector<int>& y);

}  // namespace cdstack
