#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cdstack/matrix.hpp"
#include "cdstack/stacker.hpp"

namespace cdstack {

enum class MetaKind { LR, RF, NN, AdapterPU, UPU, Ensemble, Random };

std::string meta_kind_name(MetaKind kind);
MetaKind meta_kind_from_name(const std::string& name);

struct MetaOptions {
    double threshold = 0.5;
    double lr_lambda = 1e-4;  // L2 strength of the logistic meta-learner
    bool balanced_weights = true;  // class-balance LR/RF/NN training
    int rf_trees = 200;
    int rf_min_leaf = 5;
    int rf_max_depth = 32;
    int nn_hidden = 16;
    int nn_max_epochs = 500;
    double nn_learning_rate = 0.01;
    int nn_patience = 25;
    double nn_validation_fraction = 0.2;
    double adapter_base_lambda = 1e-4;
    std::optional<double> upu_prior;  // unset: label-frequency corrected positive rate
    // The unbiased PU risk is unbounded below in the weight direction once the
    // prior exceeds the labeled rate; the ridge term is what keeps the problem
    // well-posed, so it is set noticeably stronger than the LR default.
    double upu_lambda = 1e-2;
};

struct LinearParams {
    std::vector<double> w;
    double b = 0.0;
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    double leaf = 0.0;  // weighted positive fraction
};

struct RfParams {
    std::vector<std::vector<TreeNode>> trees;
};

struct NnParams {
    Matrix w1;  // hidden x features
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
};

struct AdapterParams {
    LinearParams base;
    double c = 1.0;  // estimated label frequency p(labeled | causal)
};

struct UpuParams {
    LinearParams lin;
    double prior = 0.5;
};

struct RandomParams {
    double rate = 0.5;
};

struct FeatureScaler {
    std::vector<double> mean, sd;  // train-row statistics
};

struct MetaModel {
    MetaKind kind = MetaKind::LR;
    double threshold = 0.5;
    std::uint64_t train_seed = 0;
    FeatureScaler scaler;
    std::variant<LinearParams, RfParams, NnParams, AdapterParams, UpuParams, RandomParams> params;
    bool fitted = false;
};

struct PuCalibration {
    double c = 1.0;
    std::string estimation_fold;  // description of the held-out positive set
};

// Fits LR / RF / NN / Random on the train rows of l1 (row_split required).
MetaModel fit_classifier(MetaKind kind, const Level1Dataset& l1, const MetaOptions& opt,
                         std::uint64_t seed);

// Elkan-Noto adapter over the LR base: c = mean base score on held-out
// labeled positives; corrected score = min(1, base/c).
std::pair<MetaModel, PuCalibration> fit_adapter_pu(const Level1Dataset& l1, const MetaOptions& opt,
                                                   std::uint64_t seed);

// Unbiased PU risk with the logistic surrogate and a linear model.
MetaModel fit_upu(const Level1Dataset& l1, double class_prior, const MetaOptions& opt,
                  std::uint64_t seed);

// Risk estimator value, exposed for oracle tests. labels: 1 = labeled
// positive, 0 = unlabeled. All rows form the marginal sample for the
// unlabeled term. Features are used as given (no scaling).
double upu_risk(const Matrix& x, const std::vector<int>& labels, const LinearParams& params,
                double prior, double l2);

// Scores in [0,1] for the given rows; labels are never an input.
std::vector<double> predict_scores(const MetaModel& model, const Level1Dataset& l1,
                                   const std::vector<std::size_t>& rows);
std::vector<int> predict_calls(const MetaModel& model, const Level1Dataset& l1,
                               const std::vector<std::size_t>& rows);

// Majority vote of fitted members; even ties resolve to 0.
std::vector<int> ensemble_vote(const std::vector<MetaModel>& models, const Level1Dataset& l1,
                               const std::vector<std::size_t>& rows);

// Ordinary least squares of true effects on level-1 features (raw scale).
struct TeMetaRegressor {
    std::vector<double> weights;
    double intercept = 0.0;
    bool ridge_fallback = false;  // rank-deficient design, refit with lambda=1e-6
};

// rows: training subset of l1 rows (defaults to the train split when null).
TeMetaRegressor fit_te_regressor(const Level1Dataset& l1, const std::vector<double>& tau_true,
                                 const std::vector<std::size_t>* rows = nullptr);
std::vector<double> te_predict(const TeMetaRegressor& reg, const Level1Dataset& l1,
                               const std::vector<std::size_t>& rows);

}  // namespace cdstack
