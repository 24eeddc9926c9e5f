#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cdstack/data_model.hpp"
#include "cdstack/evaluation.hpp"
#include "cdstack/gwas_sim.hpp"
#include "cdstack/learners.hpp"
#include "cdstack/meta.hpp"
#include "cdstack/stacker.hpp"

namespace cdstack {

struct DatasetSpec {
    std::string id;
    std::filesystem::path csv;
    std::string outcome_column = "y";
    // optional row filter over a metadata CSV joined on sample_id
    std::optional<std::filesystem::path> filter_metadata_csv;
    std::string filter_column;
    std::string filter_equals;
};

struct RunConfig {
    std::string mode = "simulate";  // simulate | real
    std::filesystem::path output_dir;
    std::uint64_t master_seed = 0;

    // simulate mode
    int n_datasets = 1;
    SimConfig sim;

    // real mode
    std::vector<DatasetSpec> datasets;
    std::filesystem::path known_causes_csv;

    // learners
    bool da_enabled = true;
    DaLearnerConfig da;
    bool cate_enabled = true;
    CateLearnerConfig cate;
    bool marginal_enabled = true;
    double marginal_top_fraction = 0.10;

    // stacking
    bool zero_noncausal = false;
    double train_fraction = 0.67;

    // meta
    std::vector<MetaKind> meta_kinds;
    MetaOptions meta;

    // masking sweep (simulate mode); real mode uses {1.0}
    std::vector<double> masking;

    nlohmann::json canonical;  // effective config with defaults filled
    std::string config_hash;   // fnv1a64 hex of the canonical dump

    void validate() const;
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
};

RunConfig config_from_json(nlohmann::json j, const CliOverrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const CliOverrides& overrides = {});

// stage entry points; each reads its inputs from and writes its outputs to
// the run directory, embedding the config hash for resumability
void cmd_simulate(const RunConfig& cfg, bool force);
void cmd_learn(const RunConfig& cfg, bool force);
void cmd_stack(const RunConfig& cfg, bool force, std::optional<double> proportion = {});
void cmd_meta(const RunConfig& cfg, bool force, std::optional<double> proportion = {});
void cmd_eval(const RunConfig& cfg, bool force, std::optional<double> proportion = {});
void cmd_pipeline(const RunConfig& cfg, bool force);

// helpers shared with tests
std::string mask_dir_name(double proportion);
nlohmann::json read_json_artifact(const std::filesystem::path& path);

}  // namespace cdstack
