#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace cdstack {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow
inline double softplus(double t) {
    if (t > 35.0) return t;
    if (t < -35.0) return std::exp(t);
    return std::log1p(std::exp(t));
}

// logistic loss for y in {0,1} at linear score eta: -y*eta + log(1+exp(eta))
inline double logistic_loss(int y, double eta) {
    return softplus(eta) - y * eta;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// population variance (divide by n)
inline double variance(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// standard normal CDF
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline bool is_finite(double x) { return std::isfinite(x); }

}  // namespace cdstack
