#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cdstack/matrix.hpp"

namespace cdstack {

// L2+L1 penalized logistic regression:
//   (1/J) sum_i w_i * logloss(y_i, b0 + x_i'beta)
//     + lambda * (l1_ratio*||beta||_1 + (1-l1_ratio)/2*||beta||_2^2)
// Intercept unpenalized. Solved by IRLS with coordinate-descent inner loops;
// every accepted outer step decreases the true objective (backtracked).
struct ElasticNetOptions {
    double l1_ratio = 0.5;
    double lambda = 1e-3;
    int max_outer = 100;
    int max_inner = 200;
    double tol = 1e-8;      // sup-norm coefficient change
    double kkt_tol = 1e-4;  // max KKT residual required for convergence
    const std::vector<double>* sample_weights = nullptr;  // optional, mean-normalized
};

struct OutcomeModel {
    std::vector<double> coef;
    double intercept = 0.0;
    double l1_ratio = 0.5;
    double lambda = 1e-3;
    bool converged = false;
    int n_outer = 0;
    double objective = 0.0;
    double kkt_residual = 0.0;
};

OutcomeModel fit_logistic_elastic_net(const Matrix& x, const std::vector<int>& y,
                                      const ElasticNetOptions& opt);

// Spec-facing wrapper over the solver with defaults from the options struct.
OutcomeModel fit_outcome_model(const Matrix& x_aug, const std::vector<int>& y0, double l1_ratio,
                               double lambda);

double elastic_net_objective(const Matrix& x, const std::vector<int>& y,
                             const std::vector<double>& coef, double intercept, double lambda,
                             double l1_ratio, const std::vector<double>* sample_weights = nullptr);

// Gradient of the smooth part (logistic loss + ridge term); index 0 is the
// intercept, 1..P the coefficients.
std::vector<double> elastic_net_smooth_gradient(const Matrix& x, const std::vector<int>& y,
                                                const std::vector<double>& coef, double intercept,
                                                double lambda, double l1_ratio,
                                                const std::vector<double>* sample_weights = nullptr);

// Max over coordinates of the subgradient optimality residual.
double elastic_net_kkt_residual(const Matrix& x, const std::vector<int>& y,
                                const OutcomeModel& model,
                                const std::vector<double>* sample_weights = nullptr);

// Small stratified-CV grid search minimizing validation logistic loss.
double choose_lambda_cv(const Matrix& x, const std::vector<int>& y, double l1_ratio,
                        const std::vector<double>& grid, int n_folds, std::uint64_t seed);

// Linear scores b0 + X beta.
std::vector<double> linear_scores(const Matrix& x, const std::vector<double>& coef,
                                  double intercept);

}  // namespace cdstack
