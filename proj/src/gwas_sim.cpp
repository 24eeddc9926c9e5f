#include "cdstack/gwas_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdstack/errors.hpp"
#include "cdstack/mathutil.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

namespace {

// base sd of the per-group logit-frequency perturbation at strength 1
constexpr double kGroupLogitScale = 0.4;
constexpr int kMaxPrevalenceAttempts = 100;

double tune_intercept(const std::vector<double>& eta, double target) {
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double prev = 0.0;
        for (double e : eta) prev += sigmoid(mid + e);
        prev /= static_cast<double>(eta.size());
        if (prev < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void SimConfig::validate() const {
    if (n_individuals < 4) throw ConfigError("n_individuals too small");
    if (n_snps < 2) throw ConfigError("n_snps too small");
    if (!(causal_fraction > 0.0 && causal_fraction < 1.0))
        throw ConfigError("causal_fraction must be in (0,1)");
    if (n_groups < 2) throw ConfigError("n_groups must be >= 2");
    if (effect_sd < 0.0) throw ConfigError("effect_sd must be >= 0");
    if (confounder_strength < 0.0) throw ConfigError("confounder_strength must be >= 0");
    if (!(maf_lo > 0.0 && maf_hi <= 0.5 && maf_lo <= maf_hi))
        throw ConfigError("maf_range must be within (0, 0.5]");
    if (!(target_prevalence > 0.0 && target_prevalence < 1.0))
        throw ConfigError("target_prevalence must be in (0,1)");
}

std::pair<Level0Dataset, SimulatedTruth> simulate_dataset(const SimConfig& cfg) {
    cfg.validate();
    const std::size_t J = cfg.n_individuals;
    const std::size_t V = cfg.n_snps;
    const int G = cfg.n_groups;

    SimulatedTruth truth;
    truth.config = cfg;

    Rng rng(derive_seed(cfg.seed, "gwas_sim"));

    // latent groups
    truth.group_assignment.resize(J);
    for (std::size_t i = 0; i < J; ++i)
        truth.group_assignment[i] = static_cast<int>(rng.uniform_int(G));

    // per-SNP base frequency and per-group logit perturbation
    std::vector<double> base_freq(V);
    for (std::size_t v = 0; v < V; ++v) base_freq[v] = rng.uniform(cfg.maf_lo, cfg.maf_hi);
    std::vector<double> group_freq(static_cast<std::size_t>(G) * V);
    for (int g = 0; g < G; ++g) {
        for (std::size_t v = 0; v < V; ++v) {
            const double shift =
                cfg.confounder_strength * rng.normal(0.0, kGroupLogitScale);
            group_freq[static_cast<std::size_t>(g) * V + v] = sigmoid(logit(base_freq[v]) + shift);
        }
    }

    Level0Dataset ds;
    ds.dataset_id = "sim_" + std::to_string(cfg.seed);
    ds.X = Matrix(J, V);
    for (std::size_t i = 0; i < J; ++i) {
        const double* freqs = &group_freq[static_cast<std::size_t>(truth.group_assignment[i]) * V];
        double* row = ds.X.row(i);
        for (std::size_t v = 0; v < V; ++v)
            row[v] = static_cast<double>(rng.binomial2(freqs[v]));
    }

    // causal mask: exactly round(causal_fraction * V) ones
    const std::size_t n_causal =
        static_cast<std::size_t>(std::llround(cfg.causal_fraction * static_cast<double>(V)));
    std::vector<std::size_t> order(V);
    for (std::size_t v = 0; v < V; ++v) order[v] = v;
    rng.shuffle(order);
    truth.causal_mask.assign(V, 0);
    truth.beta.assign(V, 0.0);
    // effects are coded on the risk allele: nonzero coefficients are
    // half-normal with scale effect_sd, so every causal dosage raises risk
    for (std::size_t m = 0; m < n_causal; ++m) {
        truth.causal_mask[order[m]] = 1;
        truth.beta[order[m]] = std::fabs(rng.normal(0.0, cfg.effect_sd));
    }

    // group intercepts at Gaussian quantiles: unit-scale spread like N(0,1)
    // draws, but no dataset can land on a degenerate all-equal realization
    truth.group_intercepts.resize(G);
    for (int g = 0; g < G; ++g) {
        const double u = (static_cast<double>(g) + 0.5) / static_cast<double>(G);
        double lo = -8.0, hi = 8.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            (normal_cdf(mid) < u ? lo : hi) = mid;
        }
        truth.group_intercepts[g] = 0.5 * (lo + hi);
    }

    // linear predictor on standardized dosages, before intercept
    const ColumnStats stats = column_stats(ds.X);
    std::vector<double> eta(J, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        if (truth.causal_mask[v] == 0) continue;
        if (stats.sd[v] <= 0.0)
            throw NumericError("simulated SNP " + std::to_string(v) + " is constant");
        const double scale = truth.beta[v] / stats.sd[v];
        for (std::size_t i = 0; i < J; ++i)
            eta[i] += scale * (ds.X.at(i, v) - stats.mean[v]);
    }
    for (std::size_t i = 0; i < J; ++i)
        eta[i] += cfg.confounder_strength * truth.group_intercepts[truth.group_assignment[i]];

    truth.b0 = tune_intercept(eta, cfg.target_prevalence);

    // draw the trait; resample if prevalence lands outside [0.15, 0.85]
    ds.y0.resize(J);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxPrevalenceAttempts && !ok; ++attempt) {
        Rng yrng(derive_seed(cfg.seed, "gwas_sim/trait", attempt));
        std::size_t ones = 0;
        for (std::size_t i = 0; i < J; ++i) {
            ds.y0[i] = yrng.bernoulli(sigmoid(truth.b0 + eta[i])) ? 1 : 0;
            ones += ds.y0[i];
        }
        const double prev = static_cast<double>(ones) / static_cast<double>(J);
        ok = prev >= 0.15 && prev <= 0.85 && ones > 0 && ones < J;
    }
    if (!ok)
        throw NumericError("trait prevalence rejection failed after " +
                           std::to_string(kMaxPrevalenceAttempts) + " attempts");

    ds.variable_names.resize(V);
    for (std::size_t v = 0; v < V; ++v) {
        std::string num = std::to_string(v + 1);
        ds.variable_names[v] = "snp_" + std::string(6 - std::min<std::size_t>(6, num.size()), '0') + num;
    }
    ds.sample_ids.resize(J);
    for (std::size_t i = 0; i < J; ++i) ds.sample_ids[i] = "ind_" + std::to_string(i + 1);

    ds.validate();
    truth.tau_true = true_effects(truth, ds);
    return {std::move(ds), std::move(truth)};
}

std::vector<double> true_effects(const SimulatedTruth& truth, const Level0Dataset& ds) {
    const std::size_t J = ds.n_samples();
    const std::size_t V = ds.n_variables();
    if (truth.causal_mask.size() != V || truth.group_assignment.size() != J)
        throw DataError("true_effects: truth and dataset are misaligned");

    const ColumnStats stats = column_stats(ds.X);
    std::vector<double> eta(J, truth.b0);
    for (std::size_t v = 0; v < V; ++v) {
        if (truth.causal_mask[v] == 0) continue;
        if (stats.sd[v] <= 0.0)
            throw NumericError("true_effects: constant causal column " + std::to_string(v));
        const double scale = truth.beta[v] / stats.sd[v];
        for (std::size_t i = 0; i < J; ++i)
            eta[i] += scale * (ds.X.at(i, v) - stats.mean[v]);
    }
    for (std::size_t i = 0; i < J; ++i)
        eta[i] += truth.config.confounder_strength *
                  truth.group_intercepts[truth.group_assignment[i]];

    std::vector<double> tau(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        if (truth.causal_mask[v] == 0) continue;
        const double scale = truth.beta[v] / stats.sd[v];
        const double dose_shift = truth.beta[v] / stats.sd[v];  // +1 raw dosage above the mean
        double acc = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            const double base = eta[i] - scale * (ds.X.at(i, v) - stats.mean[v]);
            acc += sigmoid(base + dose_shift) - sigmoid(base);
        }
        tau[v] = acc / static_cast<double>(J);
    }
    return tau;
}

}  // namespace cdstack
