#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "cdstack/data_model.hpp"

namespace cdstack {

struct SimConfig {
    std::size_t n_individuals = 5000;
    std::size_t n_snps = 10000;
    double causal_fraction = 0.10;
    int n_groups = 3;              // latent confounder levels
    double effect_sd = 0.5;        // sd of nonzero coefficients
    double confounder_strength = 1.0;
    double maf_lo = 0.05;
    double maf_hi = 0.45;
    double target_prevalence = 0.36;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct SimulatedTruth {
    std::vector<int> causal_mask;          // length V
    std::vector<double> beta;              // zero off-mask
    std::vector<int> group_assignment;     // length J
    std::vector<double> group_intercepts;  // c_g, unscaled; enters as strength*c_g
    std::vector<double> tau_true;          // true effect per variable, probability scale
    double b0 = 0.0;                       // trait intercept after prevalence tuning
    SimConfig config;
};

// Population-structure confounded SNP/trait generator. Groups shift both the
// per-group allele frequencies (logit-scale perturbation) and the trait
// intercept, so they confound every marginal SNP-trait association.
std::pair<Level0Dataset, SimulatedTruth> simulate_dataset(const SimConfig& cfg);

// tau_true[v] = mean_i sigma(logit_i with x_iv := mean_v + 1) - sigma(logit_i with x_iv := mean_v)
// under the true coefficients; exactly zero off the causal mask.
std::vector<double> true_effects(const SimulatedTruth& truth, const Level0Dataset& ds);

}  // namespace cdstack
