#include "cdstack/meta.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "cdstack/elastic_net.hpp"
#include "cdstack/errors.hpp"
#include "cdstack/kernels.hpp"
#include "cdstack/mathutil.hpp"
#include "cdstack/parallel.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

std::string meta_kind_name(MetaKind kind) {
    switch (kind) {
        case MetaKind::LR: return "LR";
        case MetaKind::RF: return "RF";
        case MetaKind::NN: return "NN";
        case MetaKind::AdapterPU: return "AdapterPU";
        case MetaKind::UPU: return "UPU";
        case MetaKind::Ensemble: return "Ensemble";
        case MetaKind::Random: return "Random";
    }
    return "?";
}

MetaKind meta_kind_from_name(const std::string& name) {
    if (name == "LR") return MetaKind::LR;
    if (name == "RF") return MetaKind::RF;
    if (name == "NN") return MetaKind::NN;
    if (name == "AdapterPU") return MetaKind::AdapterPU;
    if (name == "UPU") return MetaKind::UPU;
    if (name == "Ensemble") return MetaKind::Ensemble;
    if (name == "Random") return MetaKind::Random;
    throw ConfigError("unknown meta-learner kind: " + name);
}

namespace {

void require_split(const Level1Dataset& l1) {
    if (!l1.has_split) throw DataError("meta: level-1 row split not set");
}

FeatureScaler train_scaler(const Level1Dataset& l1) {
    const std::size_t F = l1.D1.cols();
    FeatureScaler sc;
    sc.mean.assign(F, 0.0);
    sc.sd.assign(F, 1.0);
    const auto& rows = l1.train_rows;
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < F; ++j) sc.mean[j] += l1.D1.at(r, j);
    for (std::size_t j = 0; j < F; ++j) sc.mean[j] /= static_cast<double>(rows.size());
    std::vector<double> ss(F, 0.0);
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < F; ++j) {
            const double d = l1.D1.at(r, j) - sc.mean[j];
            ss[j] += d * d;
        }
    for (std::size_t j = 0; j < F; ++j) {
        const double sd = std::sqrt(ss[j] / static_cast<double>(rows.size()));
        sc.sd[j] = sd > 1e-12 ? sd : 1.0;
    }
    return sc;
}

Matrix scaled_rows(const Level1Dataset& l1, const FeatureScaler& sc,
                   const std::vector<std::size_t>& rows) {
    const std::size_t F = l1.D1.cols();
    Matrix out(rows.size(), F);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < F; ++j)
            out.at(i, j) = (l1.D1.at(rows[i], j) - sc.mean[j]) / sc.sd[j];
    return out;
}

std::vector<int> labels_at(const Level1Dataset& l1, const std::vector<std::size_t>& rows) {
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = l1.labels.labels[rows[i]];
    return y;
}

std::vector<double> balanced_weights(const std::vector<int>& y) {
    std::size_t pos = 0;
    for (int v : y) pos += v;
    const std::size_t neg = y.size() - pos;
    if (pos == 0 || neg == 0) throw DataError("meta: single-class training labels");
    const double wp = static_cast<double>(y.size()) / (2.0 * static_cast<double>(pos));
    const double wn = static_cast<double>(y.size()) / (2.0 * static_cast<double>(neg));
    std::vector<double> w(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] ? wp : wn;
    return w;
}

LinearParams fit_linear_logistic(const Matrix& x, const std::vector<int>& y, double lambda,
                                 const std::vector<double>* weights) {
    ElasticNetOptions opt;
    opt.l1_ratio = 0.0;
    opt.lambda = lambda;
    opt.sample_weights = weights;
    const OutcomeModel m = fit_logistic_elastic_net(x, y, opt);
    LinearParams p;
    p.w = m.coef;
    p.b = m.intercept;
    return p;
}

// ---------------- random forest ----------------

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    const std::vector<double>& w;
    int mtry, min_leaf, max_depth;
    Rng& rng;
    std::vector<TreeNode> nodes;

    int build(std::vector<std::size_t>& idx, int depth) {
        double wpos = 0.0, wtot = 0.0;
        for (std::size_t i : idx) {
            wtot += w[i];
            if (y[i]) wpos += w[i];
        }
        const double frac = wtot > 0.0 ? wpos / wtot : 0.0;
        const bool pure = frac <= 0.0 || frac >= 1.0;
        if (pure || depth >= max_depth ||
            idx.size() < 2 * static_cast<std::size_t>(min_leaf)) {
            nodes.push_back({-1, 0.0, -1, -1, frac});
            return static_cast<int>(nodes.size() - 1);
        }

        const std::size_t F = x.cols();
        std::vector<std::size_t> feats(F);
        std::iota(feats.begin(), feats.end(), 0);
        rng.shuffle(feats);

        int best_feat = -1;
        double best_thr = 0.0, best_gain = 1e-12;
        const double total_gini = wpos * (wtot - wpos) / wtot;  // wtot * gini/2

        for (int fi = 0; fi < mtry && fi < static_cast<int>(F); ++fi) {
            const std::size_t f = feats[fi];
            std::vector<std::pair<double, std::size_t>> vals;
            vals.reserve(idx.size());
            for (std::size_t i : idx) vals.emplace_back(x.at(i, f), i);
            std::sort(vals.begin(), vals.end());
            double lw = 0.0, lp = 0.0;
            for (std::size_t s = 0; s + 1 < vals.size(); ++s) {
                const std::size_t i = vals[s].second;
                lw += w[i];
                lp += y[i] ? w[i] : 0.0;
                if (vals[s].first == vals[s + 1].first) continue;
                const double rw = wtot - lw, rp = wpos - lp;
                if (lw <= 0.0 || rw <= 0.0) continue;
                const double gain = total_gini - lp * (lw - lp) / lw - rp * (rw - rp) / rw;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feat = static_cast<int>(f);
                    best_thr = 0.5 * (vals[s].first + vals[s + 1].first);
                }
            }
        }

        if (best_feat < 0) {
            nodes.push_back({-1, 0.0, -1, -1, frac});
            return static_cast<int>(nodes.size() - 1);
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx)
            (x.at(i, static_cast<std::size_t>(best_feat)) <= best_thr ? left : right).push_back(i);
        if (left.empty() || right.empty()) {
            nodes.push_back({-1, 0.0, -1, -1, frac});
            return static_cast<int>(nodes.size() - 1);
        }
        const int self = static_cast<int>(nodes.size());
        nodes.push_back({best_feat, best_thr, -1, -1, frac});
        nodes[self].left = build(left, depth + 1);
        nodes[self].right = build(right, depth + 1);
        return self;
    }
};

double tree_score(const std::vector<TreeNode>& nodes, const double* row) {
    int cur = 0;
    while (nodes[cur].feature >= 0)
        cur = row[nodes[cur].feature] <= nodes[cur].threshold ? nodes[cur].left : nodes[cur].right;
    return nodes[cur].leaf;
}

RfParams fit_forest(const Matrix& x, const std::vector<int>& y, const std::vector<double>& w,
                    const MetaOptions& opt, std::uint64_t seed) {
    RfParams rf;
    rf.trees.resize(opt.rf_trees);
    const int mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(
                                  static_cast<double>(x.cols())))));
    parallel_for(static_cast<std::size_t>(opt.rf_trees), [&](std::size_t t) {
        Rng rng(derive_seed(seed, "rf_tree", t));
        std::vector<std::size_t> idx(x.rows());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = rng.uniform_int(x.rows());
        TreeBuilder builder{x, y, w, mtry, opt.rf_min_leaf, opt.rf_max_depth, rng, {}};
        std::vector<std::size_t> root_idx = idx;
        builder.build(root_idx, 0);
        rf.trees[t] = std::move(builder.nodes);
    });
    return rf;
}

// ---------------- small MLP ----------------

struct NnWorkspace {
    NnParams p;
    std::vector<double> hidden;
};

double nn_forward(const NnParams& p, const double* row, std::size_t F,
                  std::vector<double>& hidden) {
    const std::size_t H = p.b1.size();
    hidden.resize(H);
    double out = p.b2;
    for (std::size_t h = 0; h < H; ++h) {
        const double a = p.b1[h] + kernels::dot(p.w1.row(h), row, F);
        hidden[h] = std::tanh(a);
        out += p.w2[h] * hidden[h];
    }
    return sigmoid(out);
}

double nn_weighted_loss(const NnParams& p, const Matrix& x, const std::vector<int>& y,
                        const std::vector<double>& w) {
    std::vector<double> hidden;
    double loss = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double s = nn_forward(p, x.row(i), x.cols(), hidden);
        const double eps = 1e-12;
        loss += w[i] * -(y[i] * std::log(s + eps) + (1 - y[i]) * std::log(1.0 - s + eps));
        wsum += w[i];
    }
    return loss / wsum;
}

NnParams fit_mlp(const Matrix& x, const std::vector<int>& y, const std::vector<double>& w,
                 const MetaOptions& opt, std::uint64_t seed) {
    const std::size_t F = x.cols();
    const std::size_t H = static_cast<std::size_t>(opt.nn_hidden);
    Rng rng(derive_seed(seed, "nn_init"));

    NnParams p;
    p.w1 = Matrix(H, F);
    p.b1.assign(H, 0.0);
    p.w2.assign(H, 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(F, 1)));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t j = 0; j < F; ++j) p.w1.at(h, j) = s1 * rng.normal();
        p.w2[h] = s2 * rng.normal();
    }

    // stratified validation slice for early stopping
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<std::size_t> val, tr;
    const auto take = [&](std::vector<std::size_t>& src) {
        const std::size_t nv = std::max<std::size_t>(
            1, static_cast<std::size_t>(opt.nn_validation_fraction *
                                        static_cast<double>(src.size())));
        for (std::size_t i = 0; i < src.size(); ++i)
            (i < nv && src.size() > 1 ? val : tr).push_back(src[i]);
    };
    take(pos);
    take(neg);

    Matrix xtr(tr.size(), F), xval(val.size(), F);
    std::vector<int> ytr(tr.size()), yval(val.size());
    std::vector<double> wtr(tr.size()), wval(val.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        std::copy(x.row(tr[i]), x.row(tr[i]) + F, xtr.row(i));
        ytr[i] = y[tr[i]];
        wtr[i] = w[tr[i]];
    }
    for (std::size_t i = 0; i < val.size(); ++i) {
        std::copy(x.row(val[i]), x.row(val[i]) + F, xval.row(i));
        yval[i] = y[val[i]];
        wval[i] = w[val[i]];
    }

    // Adam, full batch
    const double lr = opt.nn_learning_rate, b1m = 0.9, b2m = 0.999, eps = 1e-8;
    const std::size_t nparam = H * F + H + H + 1;
    std::vector<double> m(nparam, 0.0), v(nparam, 0.0), g(nparam);
    NnParams best = p;
    double best_val = nn_weighted_loss(p, xval, yval, wval);
    int since_best = 0;

    std::vector<double> hidden;
    double wsum = 0.0;
    for (double wi : wtr) wsum += wi;

    for (int epoch = 1; epoch <= opt.nn_max_epochs; ++epoch) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < xtr.rows(); ++i) {
            const double* row = xtr.row(i);
            const double s = nn_forward(p, row, F, hidden);
            const double d_out = wtr[i] * (s - ytr[i]) / wsum;  // dL/d(pre-sigmoid)
            std::size_t gi = 0;
            for (std::size_t h = 0; h < H; ++h) {
                const double dh = d_out * p.w2[h] * (1.0 - hidden[h] * hidden[h]);
                for (std::size_t j = 0; j < F; ++j) g[gi + j] += dh * row[j];
                gi += F;
            }
            for (std::size_t h = 0; h < H; ++h)
                g[H * F + h] += d_out * p.w2[h] * (1.0 - hidden[h] * hidden[h]);
            for (std::size_t h = 0; h < H; ++h) g[H * F + H + h] += d_out * hidden[h];
            g[H * F + H + H] += d_out;
        }
        // Adam update
        const double bc1 = 1.0 - std::pow(b1m, epoch);
        const double bc2 = 1.0 - std::pow(b2m, epoch);
        auto step = [&](double& param, std::size_t gi) {
            m[gi] = b1m * m[gi] + (1.0 - b1m) * g[gi];
            v[gi] = b2m * v[gi] + (1.0 - b2m) * g[gi] * g[gi];
            param -= lr * (m[gi] / bc1) / (std::sqrt(v[gi] / bc2) + eps);
        };
        std::size_t gi = 0;
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t j = 0; j < F; ++j) step(p.w1.at(h, j), gi++);
        for (std::size_t h = 0; h < H; ++h) step(p.b1[h], gi++);
        for (std::size_t h = 0; h < H; ++h) step(p.w2[h], gi++);
        step(p.b2, gi);

        const double val_loss = nn_weighted_loss(p, xval, yval, wval);
        if (val_loss < best_val - 1e-9) {
            best_val = val_loss;
            best = p;
            since_best = 0;
        } else if (++since_best >= opt.nn_patience) {
            break;
        }
    }
    return best;
}

}  // namespace

MetaModel fit_classifier(MetaKind kind, const Level1Dataset& l1, const MetaOptions& opt,
                         std::uint64_t seed) {
    require_split(l1);
    MetaModel model;
    model.kind = kind;
    model.threshold = opt.threshold;
    model.train_seed = seed;
    model.scaler = train_scaler(l1);

    const Matrix xtr = scaled_rows(l1, model.scaler, l1.train_rows);
    const std::vector<int> ytr = labels_at(l1, l1.train_rows);

    switch (kind) {
        case MetaKind::LR: {
            std::vector<double> w;
            const std::vector<double>* wp = nullptr;
            if (opt.balanced_weights) {
                w = balanced_weights(ytr);
                wp = &w;
            }
            model.params = fit_linear_logistic(xtr, ytr, opt.lr_lambda, wp);
            break;
        }
        case MetaKind::RF: {
            const std::vector<double> w =
                opt.balanced_weights ? balanced_weights(ytr) : std::vector<double>(ytr.size(), 1.0);
            model.params = fit_forest(xtr, ytr, w, opt, seed);
            break;
        }
        case MetaKind::NN: {
            const std::vector<double> w =
                opt.balanced_weights ? balanced_weights(ytr) : std::vector<double>(ytr.size(), 1.0);
            model.params = fit_mlp(xtr, ytr, w, opt, seed);
            break;
        }
        case MetaKind::Random: {
            double rate = 0.0;
            for (int v : ytr) rate += v;
            rate /= static_cast<double>(ytr.size());
            model.params = RandomParams{rate};
            break;
        }
        default:
            throw ConfigError("fit_classifier: kind " + meta_kind_name(kind) +
                              " is fitted through its dedicated entry point");
    }
    model.fitted = true;
    return model;
}

std::pair<MetaModel, PuCalibration> fit_adapter_pu(const Level1Dataset& l1, const MetaOptions& opt,
                                                   std::uint64_t seed) {
    require_split(l1);
    MetaModel model;
    model.kind = MetaKind::AdapterPU;
    model.threshold = opt.threshold;
    model.train_seed = seed;
    model.scaler = train_scaler(l1);

    std::vector<std::size_t> pos_rows, other_rows;
    for (std::size_t r : l1.train_rows)
        (l1.labels.labels[r] == 1 ? pos_rows : other_rows).push_back(r);
    if (pos_rows.size() < 5)
        throw DataError("fit_adapter_pu: too few labeled positives to calibrate (need >= 5, have " +
                        std::to_string(pos_rows.size()) + ")");

    // c is cross-fitted: each labeled positive is scored by a base model that
    // did not see it. The deployed base is then refit on all train rows.
    const int n_folds = 3;
    Rng rng(derive_seed(seed, "adapter_fold"));
    rng.shuffle(pos_rows);

    double c = 0.0;
    for (int f = 0; f < n_folds; ++f) {
        std::vector<std::size_t> held, base_rows(other_rows);
        for (std::size_t i = 0; i < pos_rows.size(); ++i)
            (static_cast<int>(i % n_folds) == f ? held : base_rows).push_back(pos_rows[i]);
        if (held.empty()) continue;
        std::sort(base_rows.begin(), base_rows.end());
        const Matrix xb = scaled_rows(l1, model.scaler, base_rows);
        const std::vector<int> yb = labels_at(l1, base_rows);
        const LinearParams fold_base = fit_linear_logistic(xb, yb, opt.adapter_base_lambda, nullptr);
        const Matrix xh = scaled_rows(l1, model.scaler, held);
        for (std::size_t i = 0; i < xh.rows(); ++i)
            c += sigmoid(fold_base.b + kernels::dot(xh.row(i), fold_base.w.data(), xh.cols()));
    }
    c /= static_cast<double>(pos_rows.size());

    // unweighted so the base scores stay calibrated to p(labeled | x)
    const Matrix xall = scaled_rows(l1, model.scaler, l1.train_rows);
    const std::vector<int> yall = labels_at(l1, l1.train_rows);
    AdapterParams ap;
    ap.base = fit_linear_logistic(xall, yall, opt.adapter_base_lambda, nullptr);
    ap.c = std::clamp(c, 1e-6, 1.0);

    model.params = ap;
    model.fitted = true;

    PuCalibration cal;
    cal.c = ap.c;
    cal.estimation_fold = std::to_string(n_folds) + "-fold cross-fit over " +
                          std::to_string(pos_rows.size()) + " labeled positives";
    return {model, cal};
}

double upu_risk(const Matrix& x, const std::vector<int>& labels, const LinearParams& params,
                double prior, double l2) {
    // Every row is a draw from the marginal, so the unlabeled negative-risk
    // term averages over all rows; labeled positives additionally contribute
    // the positive-risk and bias-cancellation terms. With purely negative
    // unlabeled rows this reduces exactly to the ordinary PN logistic risk.
    double rp_pos = 0.0, rp_neg = 0.0, ru_neg = 0.0;
    std::size_t np = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double g = params.b + kernels::dot(x.row(i), params.w.data(), x.cols());
        ru_neg += softplus(g);
        if (labels[i] == 1) {
            rp_pos += softplus(-g);  // loss as a positive
            rp_neg += softplus(g);   // loss as a negative
            ++np;
        }
    }
    if (np == 0 || np == x.rows())
        throw DataError("upu_risk: need both labeled and unlabeled rows");
    double reg = 0.0;
    for (double wv : params.w) reg += wv * wv;
    return prior * rp_pos / static_cast<double>(np) - prior * rp_neg / static_cast<double>(np) +
           ru_neg / static_cast<double>(x.rows()) + 0.5 * l2 * reg;
}

MetaModel fit_upu(const Level1Dataset& l1, double class_prior, const MetaOptions& opt,
                  std::uint64_t seed) {
    require_split(l1);
    if (!(class_prior > 0.0 && class_prior < 1.0))
        throw ConfigError("fit_upu: class prior must be in (0,1)");
    if (class_prior > 0.95)
        std::cerr << "[upu] warning: class prior " << class_prior
                  << " is extreme; predictions will be nearly all-positive\n";

    MetaModel model;
    model.kind = MetaKind::UPU;
    model.threshold = opt.threshold;
    model.train_seed = seed;
    model.scaler = train_scaler(l1);

    const Matrix x = scaled_rows(l1, model.scaler, l1.train_rows);
    const std::vector<int> y = labels_at(l1, l1.train_rows);
    const std::size_t n = x.rows(), F = x.cols();

    std::vector<std::size_t> pos, unl;
    for (std::size_t i = 0; i < n; ++i) (y[i] == 1 ? pos : unl).push_back(i);
    if (pos.empty() || unl.empty()) throw DataError("fit_upu: need labeled and unlabeled rows");

    LinearParams p;
    p.w.assign(F, 0.0);
    p.b = 0.0;

    auto risk_at = [&](const LinearParams& q) {
        return upu_risk(x, y, q, class_prior, opt.upu_lambda);
    };
    auto gradient = [&](const LinearParams& q, std::vector<double>& gw, double& gb) {
        gw.assign(F, 0.0);
        gb = 0.0;
        const double cp = class_prior / static_cast<double>(pos.size());
        for (std::size_t i : pos) {
            // d/dg [softplus(-g) - softplus(g)] = -1
            gb -= cp;
            kernels::axpy(-cp, x.row(i), gw.data(), F);
        }
        const double cu = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double g = q.b + kernels::dot(x.row(i), q.w.data(), F);
            const double d = cu * sigmoid(g);
            gb += d;
            kernels::axpy(d, x.row(i), gw.data(), F);
        }
        for (std::size_t j = 0; j < F; ++j) gw[j] += opt.upu_lambda * q.w[j];
    };

    double risk = risk_at(p);
    std::vector<double> gw;
    double gb = 0.0;
    for (int it = 0; it < 500; ++it) {
        gradient(p, gw, gb);
        double gnorm2 = gb * gb;
        for (double v : gw) gnorm2 += v * v;
        if (gnorm2 < 1e-16) break;

        double step = 1.0;
        LinearParams cand = p;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            for (std::size_t j = 0; j < F; ++j) cand.w[j] = p.w[j] - step * gw[j];
            cand.b = p.b - step * gb;
            const double cand_risk = risk_at(cand);
            if (cand_risk <= risk - 1e-4 * step * gnorm2) {
                p = cand;
                risk = cand_risk;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }

    model.params = UpuParams{p, class_prior};
    model.fitted = true;
    return model;
}

namespace {

double model_score(const MetaModel& model, const double* row, std::size_t F,
                   std::vector<double>& scratch, Rng* random_rng) {
    switch (model.kind) {
        case MetaKind::LR: {
            const auto& p = std::get<LinearParams>(model.params);
            return sigmoid(p.b + kernels::dot(row, p.w.data(), F));
        }
        case MetaKind::RF: {
            const auto& p = std::get<RfParams>(model.params);
            double acc = 0.0;
            for (const auto& tree : p.trees) acc += tree_score(tree, row);
            return acc / static_cast<double>(p.trees.size());
        }
        case MetaKind::NN: {
            const auto& p = std::get<NnParams>(model.params);
            return nn_forward(p, row, F, scratch);
        }
        case MetaKind::AdapterPU: {
            const auto& p = std::get<AdapterParams>(model.params);
            const double base = sigmoid(p.base.b + kernels::dot(row, p.base.w.data(), F));
            return std::min(1.0, base / p.c);
        }
        case MetaKind::UPU: {
            const auto& p = std::get<UpuParams>(model.params);
            return sigmoid(p.lin.b + kernels::dot(row, p.lin.w.data(), F));
        }
        case MetaKind::Random:
            return random_rng ? random_rng->uniform() : 0.5;
        case MetaKind::Ensemble:
            throw ConfigError("ensemble has no standalone score; use ensemble_vote");
    }
    return 0.0;
}

}  // namespace

std::vector<double> predict_scores(const MetaModel& model, const Level1Dataset& l1,
                                   const std::vector<std::size_t>& rows) {
    if (!model.fitted) throw DataError("predict: model not fitted");
    const Matrix x = scaled_rows(l1, model.scaler, rows);
    std::vector<double> out(rows.size());
    std::vector<double> scratch;
    Rng rng(derive_seed(model.train_seed, "random_scores"));
    for (std::size_t i = 0; i < rows.size(); ++i)
        out[i] = model_score(model, x.row(i), x.cols(), scratch, &rng);
    return out;
}

std::vector<int> predict_calls(const MetaModel& model, const Level1Dataset& l1,
                               const std::vector<std::size_t>& rows) {
    const std::vector<double> scores = predict_scores(model, l1, rows);
    std::vector<int> calls(scores.size());
    if (model.kind == MetaKind::Random) {
        const double rate = std::get<RandomParams>(model.params).rate;
        for (std::size_t i = 0; i < scores.size(); ++i) calls[i] = scores[i] < rate ? 1 : 0;
        return calls;
    }
    for (std::size_t i = 0; i < scores.size(); ++i)
        calls[i] = scores[i] > model.threshold ? 1 : 0;
    return calls;
}

std::vector<int> ensemble_vote(const std::vector<MetaModel>& models, const Level1Dataset& l1,
                               const std::vector<std::size_t>& rows) {
    if (models.size() < 3) throw ConfigError("ensemble_vote: need at least 3 members");
    std::vector<std::vector<int>> votes;
    votes.reserve(models.size());
    for (const auto& m : models) votes.push_back(predict_calls(m, l1, rows));
    std::vector<int> out(rows.size(), 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::size_t ones = 0;
        for (const auto& v : votes) ones += v[i];
        out[i] = 2 * ones > models.size() ? 1 : 0;  // ties go to 0
    }
    return out;
}

TeMetaRegressor fit_te_regressor(const Level1Dataset& l1, const std::vector<double>& tau_true,
                                 const std::vector<std::size_t>* rows) {
    require_split(l1);
    if (tau_true.size() != l1.variable_names.size())
        throw DataError("fit_te_regressor: tau_true length mismatch");
    const std::vector<std::size_t>& train = rows ? *rows : l1.train_rows;
    if (train.empty()) throw DataError("fit_te_regressor: empty training row set");
    const std::size_t F = l1.D1.cols();

    // normal equations over [1 | features]
    Matrix g(F + 1, F + 1);
    std::vector<double> rhs(F + 1, 0.0);
    for (std::size_t r : train) {
        std::vector<double> a(F + 1);
        a[0] = 1.0;
        for (std::size_t j = 0; j < F; ++j) a[j + 1] = l1.D1.at(r, j);
        for (std::size_t i = 0; i <= F; ++i) {
            rhs[i] += a[i] * tau_true[r];
            for (std::size_t j = i; j <= F; ++j) g.at(i, j) += a[i] * a[j];
        }
    }
    for (std::size_t i = 0; i <= F; ++i)
        for (std::size_t j = 0; j < i; ++j) g.at(i, j) = g.at(j, i);

    TeMetaRegressor reg;
    Matrix chol = g;
    if (!cholesky_factor(chol)) {
        reg.ridge_fallback = true;
        for (std::size_t i = 0; i <= F; ++i) g.at(i, i) += 1e-6;
        chol = g;
        if (!cholesky_factor(chol))
            throw NumericError("fit_te_regressor: design is numerically singular");
    }
    const std::vector<double> sol = cholesky_solve(chol, rhs);
    reg.intercept = sol[0];
    reg.weights.assign(sol.begin() + 1, sol.end());
    return reg;
}

std::vector<double> te_predict(const TeMetaRegressor& reg, const Level1Dataset& l1,
                               const std::vector<std::size_t>& rows) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out[i] = reg.intercept + kernels::dot(l1.D1.row(rows[i]), reg.weights.data(), l1.D1.cols());
    return out;
}

}  // namespace cdstack
