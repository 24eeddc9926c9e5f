#include "cdstack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "cdstack/csv.hpp"
#include "cdstack/errors.hpp"
#include "cdstack/rng.hpp"

namespace cdstack {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + key + "' has the wrong type");
    }
}

const json& subobject(const json& j, const std::string& key) {
    static const json empty = json::object();
    if (!j.contains(key) || j.at(key).is_null()) return empty;
    if (!j.at(key).is_object()) throw ConfigError("config field '" + key + "' must be an object");
    return j.at(key);
}

std::string hash_hex(const std::string& s) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s)));
    return buf;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void RunConfig::validate() const {
    if (mode != "simulate" && mode != "real")
        throw ConfigError("mode must be 'simulate' or 'real'");
    if (output_dir.empty()) throw ConfigError("output_dir is required (config, --out, or CDSTACK_OUT)");
    if (mode == "simulate") {
        if (n_datasets < 1) throw ConfigError("simulate.n_datasets must be >= 1");
        sim.validate();
    } else {
        if (datasets.empty()) throw ConfigError("real mode needs at least one dataset");
        if (known_causes_csv.empty()) throw ConfigError("real mode needs known_causes_csv");
    }
    int learners = (da_enabled ? 1 : 0) + (cate_enabled ? 1 : 0) + (marginal_enabled ? 1 : 0);
    if (mode == "real") learners *= static_cast<int>(datasets.size());
    if (learners < 2)
        throw ConfigError("need at least 2 learner columns for level-1 data");
    if (meta_kinds.empty()) throw ConfigError("need at least one meta-learner kind");
    if (masking.empty()) throw ConfigError("masking list must be nonempty");
    for (double p : masking)
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("masking proportions must be in (0,1]");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must be in (0,1)");
}

RunConfig config_from_json(json j, const CliOverrides& overrides) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    RunConfig cfg;
    cfg.mode = get_or<std::string>(j, "mode", "simulate");
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
    if (overrides.seed) cfg.master_seed = *overrides.seed;

    std::string out = get_or<std::string>(j, "output_dir", "");
    if (overrides.out) out = overrides.out->string();
    if (const char* env = std::getenv("CDSTACK_OUT"); env && *env) out = env;
    cfg.output_dir = out;

    const json& sim = subobject(j, "simulate");
    cfg.n_datasets = get_or<int>(sim, "n_datasets", 1);
    cfg.sim.n_individuals = get_or<std::size_t>(sim, "n_individuals", 5000);
    cfg.sim.n_snps = get_or<std::size_t>(sim, "n_snps", 10000);
    cfg.sim.causal_fraction = get_or<double>(sim, "causal_fraction", 0.10);
    cfg.sim.n_groups = get_or<int>(sim, "n_groups", 3);
    cfg.sim.effect_sd = get_or<double>(sim, "effect_sd", 0.5);
    cfg.sim.confounder_strength = get_or<double>(sim, "confounder_strength", 1.0);
    if (sim.contains("maf_range")) {
        const auto& mr = sim.at("maf_range");
        if (!mr.is_array() || mr.size() != 2) throw ConfigError("maf_range must be [lo, hi]");
        cfg.sim.maf_lo = mr[0].get<double>();
        cfg.sim.maf_hi = mr[1].get<double>();
    }
    cfg.sim.target_prevalence = get_or<double>(sim, "target_prevalence", 0.36);

    if (j.contains("datasets")) {
        for (const auto& d : j.at("datasets")) {
            DatasetSpec spec;
            spec.id = get_or<std::string>(d, "id", "");
            spec.csv = get_or<std::string>(d, "csv", "");
            spec.outcome_column = get_or<std::string>(d, "outcome_column", "y");
            if (spec.id.empty() || spec.csv.empty())
                throw ConfigError("each dataset needs 'id' and 'csv'");
            if (d.contains("filter") && !d.at("filter").is_null()) {
                const auto& f = d.at("filter");
                spec.filter_metadata_csv = fs::path(get_or<std::string>(f, "metadata_csv", ""));
                spec.filter_column = get_or<std::string>(f, "column", "");
                spec.filter_equals = get_or<std::string>(f, "equals", "");
                if (spec.filter_metadata_csv->empty() || spec.filter_column.empty())
                    throw ConfigError("dataset filter needs metadata_csv and column");
            }
            cfg.datasets.push_back(std::move(spec));
        }
    }
    cfg.known_causes_csv = get_or<std::string>(j, "known_causes_csv", "");

    const json& learners = subobject(j, "learners");
    {
        const json& da = subobject(learners, "da");
        cfg.da_enabled = get_or<bool>(da, "enabled", true);
        cfg.da.k = get_or<int>(da, "k", 15);
        cfg.da.bootstrap_b = get_or<int>(da, "bootstrap_b", 50);
        cfg.da.l1_ratio = get_or<double>(da, "l1_ratio", 0.5);
        if (da.contains("lambda") && !da.at("lambda").is_null())
            cfg.da.lambda = da.at("lambda").get<double>();
        cfg.da.significance_alpha = get_or<double>(da, "significance_alpha", 0.05);
    }
    {
        const json& check = subobject(j, "predictive_check");
        cfg.da.check.holdout_fraction = get_or<double>(check, "holdout_fraction", 0.1);
        cfg.da.check.n_replicates = get_or<int>(check, "n_replicates", 100);
        cfg.da.check.pass_low = get_or<double>(check, "pass_low", 0.05);
        cfg.da.check.pass_high = get_or<double>(check, "pass_high", 0.95);
    }
    {
        const json& cate = subobject(learners, "cate");
        cfg.cate_enabled = get_or<bool>(cate, "enabled", true);
        cfg.cate.k = get_or<int>(cate, "k", cfg.da.k);
        cfg.cate.l1_ratio = get_or<double>(cate, "l1_ratio", 0.0);
        cfg.cate.lambda = get_or<double>(cate, "lambda", 1e-2);
        cfg.cate.top_fraction = get_or<double>(cate, "top_fraction", 0.10);
    }
    {
        const json& marg = subobject(learners, "marginal");
        cfg.marginal_enabled = get_or<bool>(marg, "enabled", true);
        cfg.marginal_top_fraction = get_or<double>(marg, "top_fraction", 0.10);
    }

    const json& stack = subobject(j, "stack");
    cfg.zero_noncausal = get_or<bool>(stack, "zero_noncausal", false);
    cfg.train_fraction = get_or<double>(stack, "train_fraction", 0.67);

    const json& meta = subobject(j, "meta");
    std::vector<std::string> kinds = get_or<std::vector<std::string>>(
        meta, "kinds", {"LR", "RF", "NN", "AdapterPU", "UPU", "Ensemble", "Random"});
    for (const auto& k : kinds) cfg.meta_kinds.push_back(meta_kind_from_name(k));
    cfg.meta.threshold = get_or<double>(meta, "threshold", 0.5);
    cfg.meta.lr_lambda = get_or<double>(meta, "lr_lambda", 1e-4);
    cfg.meta.balanced_weights = get_or<bool>(meta, "balanced_weights", true);
    cfg.meta.rf_trees = get_or<int>(meta, "rf_trees", 200);
    cfg.meta.rf_min_leaf = get_or<int>(meta, "rf_min_leaf", 5);
    cfg.meta.nn_hidden = get_or<int>(meta, "nn_hidden", 16);
    if (meta.contains("upu_prior") && !meta.at("upu_prior").is_null())
        cfg.meta.upu_prior = meta.at("upu_prior").get<double>();

    if (j.contains("masking") && !j.at("masking").is_null())
        cfg.masking = j.at("masking").get<std::vector<double>>();
    else
        cfg.masking = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    if (cfg.mode == "real") cfg.masking = {1.0};

    // canonical effective config: round-trips every knob that shapes results
    json canon;
    canon["mode"] = cfg.mode;
    canon["master_seed"] = cfg.master_seed;
    canon["simulate"] = {{"n_datasets", cfg.n_datasets},
                         {"n_individuals", cfg.sim.n_individuals},
                         {"n_snps", cfg.sim.n_snps},
                         {"causal_fraction", cfg.sim.causal_fraction},
                         {"n_groups", cfg.sim.n_groups},
                         {"effect_sd", cfg.sim.effect_sd},
                         {"confounder_strength", cfg.sim.confounder_strength},
                         {"maf_range", {cfg.sim.maf_lo, cfg.sim.maf_hi}},
                         {"target_prevalence", cfg.sim.target_prevalence}};
    json jds = json::array();
    for (const auto& d : cfg.datasets) {
        json e = {{"id", d.id}, {"csv", d.csv.string()}, {"outcome_column", d.outcome_column}};
        if (d.filter_metadata_csv)
            e["filter"] = {{"metadata_csv", d.filter_metadata_csv->string()},
                           {"column", d.filter_column},
                           {"equals", d.filter_equals}};
        jds.push_back(e);
    }
    canon["datasets"] = jds;
    canon["known_causes_csv"] = cfg.known_causes_csv.string();
    canon["learners"] = {
        {"da",
         {{"enabled", cfg.da_enabled},
          {"k", cfg.da.k},
          {"bootstrap_b", cfg.da.bootstrap_b},
          {"l1_ratio", cfg.da.l1_ratio},
          {"lambda", cfg.da.lambda ? json(*cfg.da.lambda) : json(nullptr)},
          {"significance_alpha", cfg.da.significance_alpha}}},
        {"cate",
         {{"enabled", cfg.cate_enabled},
          {"k", cfg.cate.k},
          {"l1_ratio", cfg.cate.l1_ratio},
          {"lambda", cfg.cate.lambda},
          {"top_fraction", cfg.cate.top_fraction}}},
        {"marginal",
         {{"enabled", cfg.marginal_enabled}, {"top_fraction", cfg.marginal_top_fraction}}}};
    canon["predictive_check"] = {{"holdout_fraction", cfg.da.check.holdout_fraction},
                                 {"n_replicates", cfg.da.check.n_replicates},
                                 {"pass_low", cfg.da.check.pass_low},
                                 {"pass_high", cfg.da.check.pass_high}};
    canon["stack"] = {{"zero_noncausal", cfg.zero_noncausal},
                      {"train_fraction", cfg.train_fraction}};
    json jkinds = json::array();
    for (MetaKind k : cfg.meta_kinds) jkinds.push_back(meta_kind_name(k));
    canon["meta"] = {{"kinds", jkinds},
                     {"threshold", cfg.meta.threshold},
                     {"lr_lambda", cfg.meta.lr_lambda},
                     {"balanced_weights", cfg.meta.balanced_weights},
                     {"rf_trees", cfg.meta.rf_trees},
                     {"rf_min_leaf", cfg.meta.rf_min_leaf},
                     {"nn_hidden", cfg.meta.nn_hidden},
                     {"upu_prior", cfg.meta.upu_prior ? json(*cfg.meta.upu_prior) : json(nullptr)}};
    canon["masking"] = cfg.masking;
    cfg.canonical = canon;
    cfg.config_hash = hash_hex(canon.dump());

    cfg.validate();
    return cfg;
}

RunConfig load_config(const fs::path& path, const CliOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return config_from_json(std::move(j), overrides);
}

// ---------------------------------------------------------------------------
// artifacts
// ---------------------------------------------------------------------------

namespace {

constexpr double kDiversityReferenceReal = -0.013;
constexpr double kDiversityReferenceSimulated = -0.051;

void write_json_file(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

bool json_artifact_valid(const fs::path& path, const std::string& hash) {
    if (!fs::exists(path)) return false;
    try {
        std::ifstream in(path);
        json j;
        in >> j;
        return j.contains("config_hash") && j.at("config_hash").get<std::string>() == hash;
    } catch (...) {
        return false;
    }
}

bool csv_artifact_valid(const fs::path& path, const std::string& hash) {
    if (!fs::exists(path)) return false;
    try {
        const CsvTable t = read_csv(path);
        for (const auto& c : t.comments)
            if (c == "config_hash=" + hash) return true;
        return false;
    } catch (...) {
        return false;
    }
}

std::vector<std::string> provenance_comments(const RunConfig& cfg) {
    return {"config_hash=" + cfg.config_hash,
            "master_seed=" + std::to_string(cfg.master_seed)};
}

std::string dataset_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "dataset_%02d", index);
    return buf;
}

}  // namespace

std::string mask_dir_name(double proportion) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "mask_%.2f", proportion);
    return buf;
}

json read_json_artifact(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("bad JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------
// simulate stage
// ---------------------------------------------------------------------------

namespace {

void write_level0_csv(const fs::path& path, const Level0Dataset& ds, const RunConfig& cfg) {
    CsvTable t;
    t.comments = provenance_comments(cfg);
    t.header.push_back("sample_id");
    for (const auto& v : ds.variable_names) t.header.push_back(v);
    t.header.push_back("y");
    t.rows.reserve(ds.n_samples());
    for (std::size_t i = 0; i < ds.n_samples(); ++i) {
        std::vector<std::string> row;
        row.reserve(ds.n_variables() + 2);
        row.push_back(ds.sample_ids[i]);
        for (std::size_t v = 0; v < ds.n_variables(); ++v)
            row.push_back(format_double(ds.X.at(i, v)));
        row.push_back(std::to_string(ds.y0[i]));
        t.rows.push_back(std::move(row));
    }
    fs::create_directories(path.parent_path());
    write_csv(path, t);
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, bool force) {
    if (cfg.mode != "simulate") throw ConfigError("simulate: config mode is not 'simulate'");
    const fs::path base = cfg.output_dir / "datasets";
    for (int i = 0; i < cfg.n_datasets; ++i) {
        const fs::path dir = base / dataset_dir_name(i);
        const fs::path csv_path = dir / "level0.csv";
        const fs::path truth_path = dir / "truth.json";
        const bool valid = csv_artifact_valid(csv_path, cfg.config_hash) &&
                           json_artifact_valid(truth_path, cfg.config_hash);
        if (valid && !force) {
            std::cerr << "[simulate] " << dir.string() << " up to date, skipping\n";
            continue;
        }
        if (!valid && !force && fs::exists(dir) && !fs::is_empty(dir))
            throw DataError("simulate: " + dir.string() +
                            " is non-empty with foreign content; rerun with --force");

        SimConfig sc = cfg.sim;
        sc.seed = derive_seed(cfg.master_seed, "dataset", static_cast<std::uint64_t>(i));
        auto [ds, truth] = simulate_dataset(sc);
        ds.dataset_id = dataset_dir_name(i);

        write_level0_csv(csv_path, ds, cfg);

        json jt;
        jt["dataset"] = ds.dataset_id;
        jt["causal_mask"] = truth.causal_mask;
        jt["beta"] = truth.beta;
        jt["tau_true"] = truth.tau_true;
        jt["group_assignment"] = truth.group_assignment;
        jt["group_intercepts"] = truth.group_intercepts;
        jt["b0"] = truth.b0;
        jt["dataset_seed"] = sc.seed;
        jt["config"] = cfg.canonical["simulate"];
        jt["config_hash"] = cfg.config_hash;
        jt["master_seed"] = cfg.master_seed;
        write_json_file(truth_path, jt);
        std::cerr << "[simulate] wrote " << dir.string() << "\n";
    }
}

// ---------------------------------------------------------------------------
// unit discovery (a unit = one level-1 stack)
// ---------------------------------------------------------------------------

namespace {

struct StackUnit {
    std::string id;
    fs::path dir;  // root for this unit's artifacts
    std::vector<Level0Dataset> level0;
    std::optional<std::vector<int>> truth_mask;
    std::optional<std::vector<double>> tau_true;
    std::optional<KnownCauseLabels> real_labels;
};

Level0Dataset apply_row_filter(Level0Dataset ds, const DatasetSpec& spec) {
    if (!spec.filter_metadata_csv) return ds;
    const CsvTable meta = read_csv(*spec.filter_metadata_csv);
    const std::size_t id_col = meta.column_index("sample_id");
    const std::size_t val_col = meta.column_index(spec.filter_column);
    if (id_col == CsvTable::npos)
        throw DataError(spec.filter_metadata_csv->string() + ": no sample_id column");
    if (val_col == CsvTable::npos)
        throw DataError(spec.filter_metadata_csv->string() + ": no column '" +
                        spec.filter_column + "'");
    std::map<std::string, std::string> lookup;
    for (const auto& row : meta.rows) lookup[row[id_col]] = row[val_col];

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.n_samples(); ++i) {
        auto it = lookup.find(ds.sample_ids[i]);
        if (it == lookup.end())
            throw DataError("sample '" + ds.sample_ids[i] + "' missing from metadata CSV");
        if (it->second == spec.filter_equals) keep.push_back(i);
    }
    if (keep.empty()) throw DataError("row filter on '" + spec.filter_column + "' kept no samples");
    Level0Dataset out = ds.subset_rows(keep);
    out.validate();
    return out;
}

KnownCauseLabels load_known_causes(const fs::path& path,
                                   const std::vector<std::string>& variable_names) {
    const CsvTable t = read_csv(path);
    std::set<std::string> known;
    for (const auto& row : t.rows)
        if (!row.empty() && !row[0].empty()) known.insert(row[0]);
    KnownCauseLabels labels;
    labels.labels.assign(variable_names.size(), 0);
    std::size_t hits = 0;
    for (std::size_t v = 0; v < variable_names.size(); ++v) {
        if (known.count(variable_names[v])) {
            labels.labels[v] = 1;
            ++hits;
        }
    }
    if (hits == 0) throw DataError(path.string() + ": no known cause matches any variable");
    labels.masked_fraction = 1.0;
    return labels;
}

std::vector<StackUnit> load_units(const RunConfig& cfg) {
    std::vector<StackUnit> units;
    if (cfg.mode == "simulate") {
        for (int i = 0; i < cfg.n_datasets; ++i) {
            StackUnit unit;
            unit.id = dataset_dir_name(i);
            unit.dir = cfg.output_dir / "datasets" / unit.id;
            const fs::path csv_path = unit.dir / "level0.csv";
            const fs::path truth_path = unit.dir / "truth.json";
            if (!fs::exists(csv_path) || !fs::exists(truth_path))
                throw DataError("missing simulated dataset " + unit.dir.string() +
                                "; run the simulate stage first");
            Level0Dataset ds = load_level0_csv(csv_path, "y", unit.id);
            const json jt = read_json_artifact(truth_path);
            unit.truth_mask = jt.at("causal_mask").get<std::vector<int>>();
            unit.tau_true = jt.at("tau_true").get<std::vector<double>>();
            unit.level0.push_back(std::move(ds));
            units.push_back(std::move(unit));
        }
    } else {
        StackUnit unit;
        unit.id = "all";
        unit.dir = cfg.output_dir;
        for (const auto& spec : cfg.datasets) {
            Level0Dataset ds = load_level0_csv(spec.csv, spec.outcome_column, spec.id);
            ds = apply_row_filter(std::move(ds), spec);
            unit.level0.push_back(std::move(ds));
        }
        unit.real_labels = load_known_causes(cfg.known_causes_csv, unit.level0.front().variable_names);
        units.push_back(std::move(unit));
    }
    return units;
}

// ---------------------------------------------------------------------------
// learn stage
// ---------------------------------------------------------------------------

fs::path learner_output_path(const StackUnit& unit, const std::string& dataset_id,
                             const std::string& learner_id) {
    return unit.dir / "learners" /
           ("learner_output_" + dataset_id + "_" + learner_id + ".csv");
}

void write_learner_output(const fs::path& path, const LearnerOutput& out, const RunConfig& cfg) {
    CsvTable t;
    t.comments = provenance_comments(cfg);
    t.comments.push_back("dataset=" + out.dataset_id);
    t.comments.push_back("learner=" + out.learner_id);
    t.comments.push_back("n_bootstrap=" + std::to_string(out.n_bootstrap));
    t.header = {"variable", "phi", "p_value", "causal_call"};
    for (std::size_t v = 0; v < out.phi.size(); ++v) {
        t.rows.push_back({out.variable_names[v], format_double(out.phi[v]),
                          out.p_values ? format_double((*out.p_values)[v]) : std::string{},
                          std::to_string(out.causal_call[v])});
    }
    fs::create_directories(path.parent_path());
    write_csv(path, t);
}

LearnerOutput read_learner_output(const fs::path& path) {
    const CsvTable t = read_csv(path);
    LearnerOutput out;
    for (const auto& c : t.comments) {
        if (c.rfind("dataset=", 0) == 0) out.dataset_id = c.substr(8);
        if (c.rfind("learner=", 0) == 0) out.learner_id = c.substr(8);
        if (c.rfind("n_bootstrap=", 0) == 0) out.n_bootstrap = std::stoi(c.substr(12));
    }
    std::vector<double> pvals;
    bool has_p = false;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        out.variable_names.push_back(row[0]);
        out.phi.push_back(parse_cell(row[1], i + 2, "phi"));
        if (!row[2].empty()) {
            pvals.push_back(parse_cell(row[2], i + 2, "p_value"));
            has_p = true;
        } else {
            pvals.push_back(1.0);
        }
        out.causal_call.push_back(static_cast<int>(parse_cell(row[3], i + 2, "causal_call")));
    }
    if (has_p) out.p_values = std::move(pvals);
    return out;
}

struct LearnStageResult {
    std::vector<LearnerOutput> outputs;
    std::vector<std::string> excluded;  // "dataset/learner: reason"
};

LearnStageResult run_learn_stage(const RunConfig& cfg, const StackUnit& unit, bool force) {
    const fs::path report_path = unit.dir / "learners" / "report.json";

    std::vector<std::pair<std::string, std::string>> expected;  // (dataset, learner)
    for (const auto& ds : unit.level0) {
        if (cfg.da_enabled) expected.emplace_back(ds.dataset_id, "da");
        if (cfg.cate_enabled) expected.emplace_back(ds.dataset_id, "cate");
        if (cfg.marginal_enabled) expected.emplace_back(ds.dataset_id, "marginal");
    }

    if (!force && json_artifact_valid(report_path, cfg.config_hash)) {
        const json report = read_json_artifact(report_path);
        LearnStageResult res;
        res.excluded = report.at("excluded").get<std::vector<std::string>>();
        bool ok = true;
        for (const auto& [dsid, learner] : expected) {
            const std::string key = dsid + "/" + learner;
            bool listed = false;
            for (const auto& e : res.excluded)
                if (e.rfind(key + ":", 0) == 0 || e == key) listed = true;
            if (listed) continue;
            const fs::path p = learner_output_path(unit, dsid, learner);
            if (!csv_artifact_valid(p, cfg.config_hash)) {
                ok = false;
                break;
            }
            res.outputs.push_back(read_learner_output(p));
        }
        if (ok) {
            std::cerr << "[learn] " << unit.id << " up to date, skipping\n";
            return res;
        }
        res.outputs.clear();
    }

    LearnStageResult res;
    json report;
    report["learners"] = json::object();

    for (const auto& ds : unit.level0) {
        const std::uint64_t ds_seed =
            derive_seed(cfg.master_seed, "learn/" + ds.dataset_id);
        const PpcaModel* shared_model = nullptr;
        DaLearnerResult da_res;

        if (cfg.da_enabled) {
            da_res = run_da_learner(ds, cfg.da, ds_seed);
            json jl;
            jl["check_p"] = da_res.check_p;
            jl["excluded"] = da_res.excluded;
            if (da_res.excluded) {
                jl["reason"] = da_res.exclusion_reason;
                res.excluded.push_back(ds.dataset_id + "/da: " + da_res.exclusion_reason);
                std::cerr << "[learn] " << ds.dataset_id << "/da excluded: "
                          << da_res.exclusion_reason << "\n";
            } else {
                jl["lambda"] = da_res.lambda_used;
                jl["n_bootstrap"] = da_res.output->n_bootstrap;
                write_learner_output(learner_output_path(unit, ds.dataset_id, "da"),
                                     *da_res.output, cfg);
                res.outputs.push_back(*da_res.output);
                shared_model = &da_res.model;
            }
            report["learners"][ds.dataset_id + "/da"] = jl;
        }
        if (cfg.cate_enabled) {
            CateLearnerConfig cc = cfg.cate;
            const PpcaModel* reuse = (shared_model && shared_model->k == cc.k) ? shared_model
                                                                               : nullptr;
            LearnerOutput out = run_proxy_cate_learner(ds, cc, ds_seed, reuse);
            out.dataset_id = ds.dataset_id;
            write_learner_output(learner_output_path(unit, ds.dataset_id, "cate"), out, cfg);
            report["learners"][ds.dataset_id + "/cate"] = {{"lambda", cc.lambda},
                                                           {"l1_ratio", cc.l1_ratio},
                                                           {"reused_factor_model", reuse != nullptr}};
            res.outputs.push_back(std::move(out));
        }
        if (cfg.marginal_enabled) {
            LearnerOutput out = run_marginal_learner(ds, cfg.marginal_top_fraction);
            out.dataset_id = ds.dataset_id;
            write_learner_output(learner_output_path(unit, ds.dataset_id, "marginal"), out, cfg);
            report["learners"][ds.dataset_id + "/marginal"] = {
                {"top_fraction", cfg.marginal_top_fraction}};
            res.outputs.push_back(std::move(out));
        }
    }

    report["excluded"] = res.excluded;
    report["config_hash"] = cfg.config_hash;
    report["master_seed"] = cfg.master_seed;
    write_json_file(report_path, report);
    return res;
}

// ---------------------------------------------------------------------------
// stack stage
// ---------------------------------------------------------------------------

void write_level1_csv(const fs::path& path, const Level1Dataset& l1, const RunConfig& cfg) {
    CsvTable t;
    t.comments = provenance_comments(cfg);
    t.header.push_back("variable");
    for (const auto& f : l1.feature_names) t.header.push_back(f);
    t.header.push_back("label");
    t.header.push_back("split");
    std::vector<char> in_train(l1.variable_names.size(), 0);
    for (std::size_t r : l1.train_rows) in_train[r] = 1;
    for (std::size_t v = 0; v < l1.variable_names.size(); ++v) {
        std::vector<std::string> row;
        row.push_back(l1.variable_names[v]);
        for (std::size_t j = 0; j < l1.D1.cols(); ++j) row.push_back(format_double(l1.D1.at(v, j)));
        row.push_back(std::to_string(l1.labels.labels[v]));
        row.push_back(in_train[v] ? "train" : "test");
        t.rows.push_back(std::move(row));
    }
    fs::create_directories(path.parent_path());
    write_csv(path, t);
}

Level1Dataset read_level1_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 4 || t.header.front() != "variable" ||
        t.header[t.header.size() - 2] != "label" || t.header.back() != "split")
        throw DataError(path.string() + ": unexpected level1 header");
    Level1Dataset l1;
    const std::size_t F = t.header.size() - 3;
    l1.feature_names.assign(t.header.begin() + 1, t.header.begin() + 1 + F);
    l1.D1 = Matrix(t.rows.size(), F);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        l1.variable_names.push_back(row[0]);
        for (std::size_t j = 0; j < F; ++j)
            l1.D1.at(i, j) = parse_cell(row[1 + j], i + 2, t.header[1 + j]);
        l1.labels.labels.push_back(static_cast<int>(parse_cell(row[1 + F], i + 2, "label")));
        if (row[2 + F] == "train") l1.train_rows.push_back(i);
        else l1.test_rows.push_back(i);
    }
    l1.has_split = true;
    return l1;
}

std::vector<double> masking_list(const RunConfig& cfg, std::optional<double> only) {
    if (only) return {*only};
    return cfg.masking;
}

void run_stack_stage(const RunConfig& cfg, const StackUnit& unit,
                     const LearnStageResult& learn, double proportion, bool force) {
    const fs::path dir = unit.dir / mask_dir_name(proportion);
    const fs::path path = dir / "level1.csv";
    if (!force && csv_artifact_valid(path, cfg.config_hash)) {
        std::cerr << "[stack] " << path.string() << " up to date, skipping\n";
        return;
    }
    if (learn.outputs.size() < 2)
        throw DataError("stack: fewer than 2 learner columns survive for unit " + unit.id);

    KnownCauseLabels labels;
    if (cfg.mode == "simulate") {
        labels = mask_known_causes(
            *unit.truth_mask, proportion,
            derive_seed(cfg.master_seed, "mask/" + unit.id,
                        static_cast<std::uint64_t>(std::llround(proportion * 100))));
    } else {
        labels = *unit.real_labels;
    }

    Level1Dataset l1 = assemble(learn.outputs, labels, cfg.zero_noncausal);
    l1 = split_variables(std::move(l1), cfg.train_fraction,
                         derive_seed(cfg.master_seed, "l1_split/" + unit.id,
                                     static_cast<std::uint64_t>(std::llround(proportion * 100))));
    write_level1_csv(path, l1, cfg);
    std::cerr << "[stack] wrote " << path.string() << "\n";
}

// ---------------------------------------------------------------------------
// meta stage
// ---------------------------------------------------------------------------

struct MetaStageOutputs {
    std::map<std::string, std::vector<double>> scores;  // kind -> test-row scores
    std::map<std::string, std::vector<int>> calls;
    json models_info;
};

MetaStageOutputs run_meta_models(const RunConfig& cfg, const Level1Dataset& l1,
                                 std::uint64_t stage_seed) {
    MetaStageOutputs out;
    out.models_info = json::object();

    std::vector<MetaModel> fitted;  // ensemble members (every kind except Ensemble/Random)
    std::optional<PuCalibration> calibration;

    double positive_rate = 0.0;
    for (std::size_t r : l1.train_rows) positive_rate += l1.labels.labels[r];
    positive_rate /= static_cast<double>(l1.train_rows.size());

    const bool want_upu =
        std::find(cfg.meta_kinds.begin(), cfg.meta_kinds.end(), MetaKind::UPU) !=
        cfg.meta_kinds.end();
    const bool want_adapter =
        std::find(cfg.meta_kinds.begin(), cfg.meta_kinds.end(), MetaKind::AdapterPU) !=
        cfg.meta_kinds.end();

    // Adapter first: UPU's default prior reuses its label-frequency estimate.
    if (want_adapter || (want_upu && !cfg.meta.upu_prior)) {
        auto [model, cal] = fit_adapter_pu(l1, cfg.meta, derive_seed(stage_seed, "AdapterPU"));
        calibration = cal;
        if (want_adapter) {
            out.scores["AdapterPU"] = predict_scores(model, l1, l1.test_rows);
            out.calls["AdapterPU"] = predict_calls(model, l1, l1.test_rows);
            out.models_info["AdapterPU"] = {{"c", cal.c},
                                            {"estimation_fold", cal.estimation_fold},
                                            {"base_lambda", cfg.meta.adapter_base_lambda},
                                            {"threshold", cfg.meta.threshold}};
            fitted.push_back(std::move(model));
        }
    }

    for (MetaKind kind : cfg.meta_kinds) {
        const std::string name = meta_kind_name(kind);
        const std::uint64_t seed = derive_seed(stage_seed, name);
        switch (kind) {
            case MetaKind::AdapterPU:
            case MetaKind::Ensemble:
                break;  // handled elsewhere
            case MetaKind::UPU: {
                double prior;
                if (cfg.meta.upu_prior) {
                    prior = *cfg.meta.upu_prior;
                } else {
                    prior = std::clamp(positive_rate / std::max(calibration->c, 1e-6), 1e-3, 0.95);
                }
                MetaModel model = fit_upu(l1, prior, cfg.meta, seed);
                out.scores[name] = predict_scores(model, l1, l1.test_rows);
                out.calls[name] = predict_calls(model, l1, l1.test_rows);
                out.models_info[name] = {{"class_prior", prior},
                                         {"lambda", cfg.meta.upu_lambda},
                                         {"threshold", cfg.meta.threshold}};
                fitted.push_back(std::move(model));
                break;
            }
            default: {
                MetaModel model = fit_classifier(kind, l1, cfg.meta, seed);
                out.scores[name] = predict_scores(model, l1, l1.test_rows);
                out.calls[name] = predict_calls(model, l1, l1.test_rows);
                json info = {{"threshold", cfg.meta.threshold}, {"seed", seed}};
                if (kind == MetaKind::LR) {
                    info["lambda"] = cfg.meta.lr_lambda;
                    info["balanced_weights"] = cfg.meta.balanced_weights;
                } else if (kind == MetaKind::RF) {
                    info["n_trees"] = cfg.meta.rf_trees;
                    info["min_leaf"] = cfg.meta.rf_min_leaf;
                } else if (kind == MetaKind::NN) {
                    info["hidden_units"] = cfg.meta.nn_hidden;
                } else if (kind == MetaKind::Random) {
                    info["rate"] = positive_rate;
                }
                out.models_info[name] = info;
                if (kind != MetaKind::Random) fitted.push_back(std::move(model));
                break;
            }
        }
    }

    const bool want_ensemble =
        std::find(cfg.meta_kinds.begin(), cfg.meta_kinds.end(), MetaKind::Ensemble) !=
        cfg.meta_kinds.end();
    if (want_ensemble) {
        if (fitted.size() < 3)
            throw ConfigError("ensemble requires at least 3 fitted member models");
        out.calls["Ensemble"] = ensemble_vote(fitted, l1, l1.test_rows);
        json members = json::array();
        for (const auto& m : fitted) members.push_back(meta_kind_name(m.kind));
        out.models_info["Ensemble"] = {{"members", members}, {"tie_break", "0"}};
    }
    return out;
}

void run_meta_stage(const RunConfig& cfg, const StackUnit& unit, double proportion, bool force) {
    const fs::path dir = unit.dir / mask_dir_name(proportion);
    const fs::path pred_path = dir / "predictions.csv";
    const fs::path models_path = dir / "meta_models.json";
    if (!force && csv_artifact_valid(pred_path, cfg.config_hash) &&
        json_artifact_valid(models_path, cfg.config_hash)) {
        std::cerr << "[meta] " << dir.string() << " up to date, skipping\n";
        return;
    }

    const Level1Dataset l1 = read_level1_csv(dir / "level1.csv");
    const std::uint64_t stage_seed =
        derive_seed(cfg.master_seed, "meta/" + unit.id,
                    static_cast<std::uint64_t>(std::llround(proportion * 100)));
    const MetaStageOutputs mo = run_meta_models(cfg, l1, stage_seed);

    CsvTable t;
    t.comments = provenance_comments(cfg);
    t.header.push_back("variable");
    std::vector<std::string> kinds;
    for (MetaKind k : cfg.meta_kinds) kinds.push_back(meta_kind_name(k));
    for (const auto& k : kinds) {
        t.header.push_back(k + "_score");
        t.header.push_back(k + "_call");
    }
    for (std::size_t i = 0; i < l1.test_rows.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(l1.variable_names[l1.test_rows[i]]);
        for (const auto& k : kinds) {
            if (mo.scores.count(k)) row.push_back(format_double(mo.scores.at(k)[i]));
            else row.push_back("");
            row.push_back(std::to_string(mo.calls.at(k)[i]));
        }
        t.rows.push_back(std::move(row));
    }
    fs::create_directories(dir);
    write_csv(pred_path, t);

    json jm;
    jm["models"] = mo.models_info;
    jm["stage_seed"] = stage_seed;
    jm["master_seed"] = cfg.master_seed;
    jm["config_hash"] = cfg.config_hash;
    write_json_file(models_path, jm);
    std::cerr << "[meta] wrote " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// eval stage
// ---------------------------------------------------------------------------

struct PredictionsTable {
    std::vector<std::string> variables;
    std::map<std::string, std::vector<double>> scores;
    std::map<std::string, std::vector<int>> calls;
};

PredictionsTable read_predictions(const fs::path& path) {
    const CsvTable t = read_csv(path);
    PredictionsTable pt;
    for (const auto& row : t.rows) pt.variables.push_back(row[0]);
    for (std::size_t j = 1; j < t.header.size(); ++j) {
        const std::string& h = t.header[j];
        const bool is_score = h.size() > 6 && h.rfind("_score") == h.size() - 6;
        const bool is_call = h.size() > 5 && h.rfind("_call") == h.size() - 5;
        if (is_score) {
            const std::string kind = h.substr(0, h.size() - 6);
            std::vector<double> v;
            bool any = false;
            for (std::size_t i = 0; i < t.rows.size(); ++i) {
                if (t.rows[i][j].empty()) {
                    v.push_back(0.0);
                } else {
                    v.push_back(parse_cell(t.rows[i][j], i + 2, h));
                    any = true;
                }
            }
            if (any) pt.scores[kind] = std::move(v);
        } else if (is_call) {
            const std::string kind = h.substr(0, h.size() - 5);
            std::vector<int> v;
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                v.push_back(static_cast<int>(parse_cell(t.rows[i][j], i + 2, h)));
            pt.calls[kind] = std::move(v);
        }
    }
    return pt;
}

json metrics_to_json(const RunConfig& cfg, const StackUnit& unit, double proportion,
                     const MetricsReport& report, const std::vector<std::string>& excluded,
                     const json& extra_seeds) {
    json j;
    j["dataset"] = unit.id;
    j["masking_proportion"] = proportion;
    json models = json::array();
    for (const auto& m : report.models) {
        json e;
        e["name"] = m.name;
        e["role"] = m.role;
        e["precision"] = m.precision;
        e["recall"] = m.recall;
        e["f1"] = m.f1;
        e["auc"] = m.auc ? json(*m.auc) : json(nullptr);
        e["pehe_sq"] = m.pehe_sq ? json(*m.pehe_sq) : json(nullptr);
        e["pehe_raw"] = m.pehe_raw ? json(*m.pehe_raw) : json(nullptr);
        e["no_positive_predictions"] = m.no_positive_predictions;
        models.push_back(e);
    }
    j["models"] = models;
    j["q_av"] = report.q_av;
    j["q_av_truth"] = report.q_av_truth;
    j["q_av_degenerate"] = report.q_av_degenerate;
    j["pehe_sq"] = report.pehe_sq ? json(*report.pehe_sq) : json(nullptr);
    j["pehe_raw"] = report.pehe_raw ? json(*report.pehe_raw) : json(nullptr);
    j["excluded"] = excluded;
    j["diversity_reference"] = {{"real", kDiversityReferenceReal},
                                {"simulated", kDiversityReferenceSimulated}};
    j["seeds"] = extra_seeds;
    j["config_hash"] = cfg.config_hash;
    j["generated_at"] = timestamp_utc();
    return j;
}

void run_eval_stage(const RunConfig& cfg, const StackUnit& unit,
                    const LearnStageResult& learn, double proportion, bool force) {
    const fs::path dir = unit.dir / mask_dir_name(proportion);
    const fs::path metrics_path = dir / "metrics.json";
    if (!force && json_artifact_valid(metrics_path, cfg.config_hash)) {
        std::cerr << "[eval] " << metrics_path.string() << " up to date, skipping\n";
        return;
    }

    const Level1Dataset l1 = read_level1_csv(dir / "level1.csv");
    const PredictionsTable preds = read_predictions(dir / "predictions.csv");

    // truth over test rows
    std::map<std::string, std::size_t> var_pos;
    for (std::size_t v = 0; v < l1.variable_names.size(); ++v) var_pos[l1.variable_names[v]] = v;
    std::vector<int> truth;
    std::vector<double> tau_true_test;
    const std::vector<int>* full_truth = nullptr;
    if (cfg.mode == "simulate") full_truth = &*unit.truth_mask;
    else full_truth = &unit.real_labels->labels;
    for (std::size_t r : l1.test_rows) truth.push_back((*full_truth)[r]);
    if (unit.tau_true)
        for (std::size_t r : l1.test_rows) tau_true_test.push_back((*unit.tau_true)[r]);

    std::vector<ModelEvalInput> inputs;

    // learners, restricted to level-1 test rows
    for (const auto& out : learn.outputs) {
        std::map<std::string, std::size_t> pos;
        for (std::size_t v = 0; v < out.variable_names.size(); ++v) pos[out.variable_names[v]] = v;
        ModelEvalInput in;
        in.name = out.dataset_id + "/" + out.learner_id;
        in.role = "learner";
        std::vector<double> tau;
        for (std::size_t r : l1.test_rows) {
            const std::size_t src = pos.at(l1.variable_names[r]);
            in.calls.push_back(out.causal_call[src]);
            in.scores.push_back(std::fabs(out.phi[src]));
            tau.push_back(out.phi[src]);
        }
        if (!tau_true_test.empty()) in.tau_hat = std::move(tau);
        inputs.push_back(std::move(in));
    }

    // meta-learners
    for (MetaKind kind : cfg.meta_kinds) {
        const std::string name = meta_kind_name(kind);
        if (!preds.calls.count(name)) continue;
        ModelEvalInput in;
        in.name = name;
        in.role = kind == MetaKind::Random ? "baseline" : "meta";
        in.calls = preds.calls.at(name);
        if (preds.scores.count(name)) in.scores = preds.scores.at(name);
        inputs.push_back(std::move(in));
    }

    // Stacked treatment-effect regressor (simulation only). Supervision
    // mirrors the PU labels: revealed causes contribute their true effect,
    // everything else is taken at face value as zero, so more revealed causes
    // mean a less attenuated fit.
    json te_info = json(nullptr);
    if (unit.tau_true) {
        std::size_t revealed_train = 0;
        for (std::size_t r : l1.train_rows) revealed_train += l1.labels.labels[r];
        if (revealed_train >= 1 && l1.train_rows.size() >= l1.D1.cols() + 2) {
            std::vector<double> observed_tau(l1.variable_names.size(), 0.0);
            for (std::size_t v = 0; v < observed_tau.size(); ++v)
                if (l1.labels.labels[v] == 1) observed_tau[v] = (*unit.tau_true)[v];
            const TeMetaRegressor reg = fit_te_regressor(l1, observed_tau);
            ModelEvalInput in;
            in.name = "TE_stack";
            in.role = "te_regressor";
            in.tau_hat = te_predict(reg, l1, l1.test_rows);
            inputs.push_back(std::move(in));
            te_info = json{{"weights", reg.weights},
                           {"intercept", reg.intercept},
                           {"ridge_fallback", reg.ridge_fallback},
                           {"n_revealed_in_train", revealed_train}};
        }
    }

    const MetricsReport report = compare_learners_vs_meta(inputs, truth, tau_true_test);

    json seeds;
    seeds["master"] = cfg.master_seed;
    seeds["label_mask"] = derive_seed(cfg.master_seed, "mask/" + unit.id,
                                      static_cast<std::uint64_t>(std::llround(proportion * 100)));
    seeds["row_split"] = derive_seed(cfg.master_seed, "l1_split/" + unit.id,
                                     static_cast<std::uint64_t>(std::llround(proportion * 100)));
    seeds["meta_stage"] = derive_seed(cfg.master_seed, "meta/" + unit.id,
                                      static_cast<std::uint64_t>(std::llround(proportion * 100)));

    json j = metrics_to_json(cfg, unit, proportion, report, learn.excluded, seeds);
    j["te_regressor"] = te_info;
    write_json_file(metrics_path, j);
    std::cerr << "[eval] wrote " << metrics_path.string() << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

void cmd_learn(const RunConfig& cfg, bool force) {
    for (const auto& unit : load_units(cfg)) {
        try {
            run_learn_stage(cfg, unit, force);
        } catch (const std::exception& e) {
            throw DataError("stage learn (" + unit.id + "): " + e.what());
        }
    }
}

void cmd_stack(const RunConfig& cfg, bool force, std::optional<double> proportion) {
    for (const auto& unit : load_units(cfg)) {
        const LearnStageResult learn = run_learn_stage(cfg, unit, false);
        for (double p : masking_list(cfg, proportion)) run_stack_stage(cfg, unit, learn, p, force);
    }
}

void cmd_meta(const RunConfig& cfg, bool force, std::optional<double> proportion) {
    for (const auto& unit : load_units(cfg))
        for (double p : masking_list(cfg, proportion)) run_meta_stage(cfg, unit, p, force);
}

void cmd_eval(const RunConfig& cfg, bool force, std::optional<double> proportion) {
    for (const auto& unit : load_units(cfg)) {
        const LearnStageResult learn = run_learn_stage(cfg, unit, false);
        for (double p : masking_list(cfg, proportion)) run_eval_stage(cfg, unit, learn, p, force);
    }
}

void cmd_pipeline(const RunConfig& cfg, bool force) {
    fs::create_directories(cfg.output_dir);
    write_json_file(cfg.output_dir / "config_used.json",
                    [&] {
                        json j = cfg.canonical;
                        j["config_hash"] = cfg.config_hash;
                        return j;
                    }());

    if (cfg.mode == "simulate") {
        try {
            cmd_simulate(cfg, force);
        } catch (const std::exception& e) {
            throw DataError(std::string("stage simulate: ") + e.what());
        }
    }

    const std::vector<StackUnit> units = load_units(cfg);
    std::vector<LearnStageResult> learned;
    for (const auto& unit : units) {
        try {
            learned.push_back(run_learn_stage(cfg, unit, force));
        } catch (const std::exception& e) {
            throw DataError("stage learn (" + unit.id + "): " + e.what());
        }
    }

    for (std::size_t u = 0; u < units.size(); ++u) {
        for (double p : cfg.masking) {
            try {
                run_stack_stage(cfg, units[u], learned[u], p, force);
                run_meta_stage(cfg, units[u], p, force);
                run_eval_stage(cfg, units[u], learned[u], p, force);
            } catch (const std::exception& e) {
                throw DataError("stage " + mask_dir_name(p) + " (" + units[u].id + "): " +
                                e.what());
            }
        }
    }

    // combined sweep: dataset x proportion x model
    CsvTable sweep;
    sweep.comments = provenance_comments(cfg);
    sweep.header = {"dataset", "proportion", "model",   "role",    "precision",
                    "recall",  "f1",         "auc",     "pehe_sq", "pehe_raw"};
    for (const auto& unit : units) {
        for (double p : cfg.masking) {
            const json j = read_json_artifact(unit.dir / mask_dir_name(p) / "metrics.json");
            for (const auto& m : j.at("models")) {
                std::vector<std::string> row;
                row.push_back(unit.id);
                row.push_back(format_double(p));
                row.push_back(m.at("name").get<std::string>());
                row.push_back(m.at("role").get<std::string>());
                row.push_back(format_double(m.at("precision").get<double>()));
                row.push_back(format_double(m.at("recall").get<double>()));
                row.push_back(format_double(m.at("f1").get<double>()));
                row.push_back(m.at("auc").is_null() ? "" : format_double(m.at("auc").get<double>()));
                row.push_back(m.at("pehe_sq").is_null() ? ""
                                                        : format_double(m.at("pehe_sq").get<double>()));
                row.push_back(m.at("pehe_raw").is_null()
                                  ? ""
                                  : format_double(m.at("pehe_raw").get<double>()));
                sweep.rows.push_back(std::move(row));
            }
        }
    }
    write_csv(cfg.output_dir / "sweep.csv", sweep);
    std::cerr << "[pipeline] wrote " << (cfg.output_dir / "sweep.csv").string() << "\n";
}

}  // namespace cdstack
