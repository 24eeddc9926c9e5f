#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "cdstack/csv.hpp"
#include "cdstack/errors.hpp"
#include "cdstack/pipeline.hpp"
#include "cdstack/rng.hpp"

using namespace cdstack;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json small_sim_config(const fs::path& out, std::uint64_t seed) {
    json j;
    j["mode"] = "simulate";
    j["output_dir"] = out.string();
    j["master_seed"] = seed;
    j["simulate"] = {{"n_datasets", 1},       {"n_individuals", 250}, {"n_snps", 100},
                     {"causal_fraction", 0.2}, {"n_groups", 3},        {"effect_sd", 0.8},
                     {"confounder_strength", 1.0}};
    j["learners"] = {{"da", {{"k", 3}, {"bootstrap_b", 20}}},
                     {"cate", {{"k", 3}}},
                     {"marginal", json::object()}};
    j["meta"] = {{"kinds", {"LR", "RF", "NN", "AdapterPU", "UPU", "Ensemble", "Random"}},
                 {"rf_trees", 50}};
    j["masking"] = {0.6, 1.0};
    return j;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json load_metrics_without_timestamp(const fs::path& p) {
    json j = read_json_artifact(p);
    j.erase("generated_at");
    return j;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing: defaults, validation errors") {
    const fs::path out = fresh_dir("cfg_out");
    const RunConfig cfg = config_from_json(small_sim_config(out, 1));
    CHECK(cfg.mode == "simulate");
    CHECK(cfg.da.k == 3);
    CHECK(cfg.cate.l1_ratio == 0.0);
    CHECK(cfg.masking == std::vector<double>{0.6, 1.0});
    CHECK_FALSE(cfg.config_hash.empty());

    json bad = small_sim_config(out, 1);
    bad["mode"] = "nonsense";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);

    bad = small_sim_config(out, 1);
    bad["masking"] = {0.0, 0.5};
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);

    bad = small_sim_config(out, 1);
    bad["learners"]["da"]["enabled"] = false;
    bad["learners"]["cate"]["enabled"] = false;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);

    bad = small_sim_config(out, 1);
    bad["meta"]["kinds"] = {"LR", "Boost"};
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("config hash is stable and sensitive to knobs") {
    const fs::path out = fresh_dir("cfg_hash");
    const RunConfig a = config_from_json(small_sim_config(out, 1));
    const RunConfig b = config_from_json(small_sim_config(out, 1));
    CHECK(a.config_hash == b.config_hash);
    json j = small_sim_config(out, 1);
    j["simulate"]["effect_sd"] = 0.9;
    const RunConfig c = config_from_json(j);
    CHECK(a.config_hash != c.config_hash);
}

TEST_CASE("simulate: artifacts, resume, refusal on foreign content, deterministic rerun") {
    const fs::path out = fresh_dir("sim_stage");
    json j = small_sim_config(out, 7);
    j["simulate"]["n_datasets"] = 2;
    const RunConfig cfg = config_from_json(j);

    cmd_simulate(cfg, false);
    const fs::path csv0 = out / "datasets" / "dataset_00" / "level0.csv";
    const fs::path truth1 = out / "datasets" / "dataset_01" / "truth.json";
    REQUIRE(fs::exists(csv0));
    REQUIRE(fs::exists(truth1));

    const json t0 = read_json_artifact(out / "datasets" / "dataset_00" / "truth.json");
    const json t1 = read_json_artifact(truth1);
    CHECK(t0.at("dataset_seed") != t1.at("dataset_seed"));  // derived seeds differ
    CHECK(t0.at("config_hash") == cfg.config_hash);

    // resume: skipping leaves bytes untouched
    const auto before = fs::last_write_time(csv0);
    cmd_simulate(cfg, false);
    CHECK(fs::last_write_time(csv0) == before);

    // force: regenerate, bit-identical content
    std::ifstream f1(csv0);
    const std::string content1((std::istreambuf_iterator<char>(f1)), {});
    cmd_simulate(cfg, true);
    std::ifstream f2(csv0);
    const std::string content2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(content1 == content2);

    // foreign content without --force is refused
    const fs::path foreign = out / "datasets" / "dataset_00" / "notes.txt";
    std::ofstream(foreign) << "scratch";
    fs::remove(csv0);
    CHECK_THROWS_AS(cmd_simulate(cfg, false), DataError);
    fs::remove(foreign);
}

TEST_CASE("full pipeline: artifacts, sweep shape, resume, determinism") {
    const fs::path out = fresh_dir("pipe_a");
    const RunConfig cfg = config_from_json(small_sim_config(out, 13));
    cmd_pipeline(cfg, false);

    const fs::path unit = out / "datasets" / "dataset_00";
    REQUIRE(fs::exists(unit / "learners" / "learner_output_dataset_00_da.csv"));
    REQUIRE(fs::exists(unit / "learners" / "learner_output_dataset_00_cate.csv"));
    REQUIRE(fs::exists(unit / "learners" / "learner_output_dataset_00_marginal.csv"));
    for (const std::string mask : {"mask_0.60", "mask_1.00"}) {
        REQUIRE(fs::exists(unit / mask / "level1.csv"));
        REQUIRE(fs::exists(unit / mask / "predictions.csv"));
        REQUIRE(fs::exists(unit / mask / "meta_models.json"));
        REQUIRE(fs::exists(unit / mask / "metrics.json"));
    }
    REQUIRE(fs::exists(out / "sweep.csv"));

    const json metrics = read_json_artifact(unit / "mask_0.60" / "metrics.json");
    CHECK(metrics.at("config_hash") == cfg.config_hash);
    CHECK(metrics.at("models").size() == 3 + 7 + 1);  // learners + meta kinds + TE
    CHECK(metrics.contains("q_av"));
    CHECK(metrics.contains("pehe_sq"));
    CHECK(metrics.contains("seeds"));
    CHECK(metrics.at("diversity_reference").at("real") == doctest::Approx(-0.013));

    // sweep: (#proportions x #models) rows per dataset, plus header
    const CsvTable sweep = read_csv(out / "sweep.csv");
    CHECK(sweep.rows.size() == 2 * (3 + 7 + 1));

    // meta_models.json carries c-hat and the UPU prior
    const json mm = read_json_artifact(unit / "mask_0.60" / "meta_models.json");
    CHECK(mm.at("models").contains("AdapterPU"));
    CHECK(mm.at("models").at("AdapterPU").contains("c"));
    CHECK(mm.at("models").at("UPU").contains("class_prior"));

    // resume leaves metrics untouched
    const auto before = fs::last_write_time(unit / "mask_0.60" / "metrics.json");
    cmd_pipeline(cfg, false);
    CHECK(fs::last_write_time(unit / "mask_0.60" / "metrics.json") == before);

    // a second run in a fresh directory is byte-identical modulo the timestamp
    const fs::path out2 = fresh_dir("pipe_b");
    const RunConfig cfg2 = config_from_json(small_sim_config(out2, 13));
    cmd_pipeline(cfg2, false);
    for (const std::string mask : {"mask_0.60", "mask_1.00"}) {
        const json m1 = load_metrics_without_timestamp(unit / mask / "metrics.json");
        const json m2 = load_metrics_without_timestamp(out2 / "datasets" / "dataset_00" / mask /
                                                       "metrics.json");
        CHECK(m1.dump() == m2.dump());
    }
}

TEST_CASE("pipeline continues when a learner is excluded by its predictive check") {
    const fs::path out = fresh_dir("pipe_excl");
    json j = small_sim_config(out, 29);
    j["masking"] = {1.0};
    // no real check lands inside a razor-thin acceptance window
    j["predictive_check"] = {{"pass_low", 0.49999}, {"pass_high", 0.50001}};
    const RunConfig cfg = config_from_json(j);
    cmd_pipeline(cfg, false);

    const json metrics =
        read_json_artifact(out / "datasets" / "dataset_00" / "mask_1.00" / "metrics.json");
    REQUIRE(metrics.at("excluded").size() == 1);
    const std::string entry = metrics.at("excluded")[0].get<std::string>();
    CHECK(entry.find("da") != std::string::npos);
    CHECK(metrics.at("models").size() == 2 + 7 + 1);  // cate + marginal + meta + TE
}

TEST_CASE("real mode: row filter, known causes, single masking at 1.0") {
    const fs::path out = fresh_dir("pipe_real");

    // tiny expression table: 30 samples x 8 genes, outcome tied to gene_1
    const fs::path data_csv = out / "expr.csv";
    {
        std::ofstream f(data_csv);
        f << "sample_id";
        for (int g = 0; g < 8; ++g) f << ",gene_" << g;
        f << ",status\n";
        Rng rng(5);
        for (int i = 0; i < 30; ++i) {
            f << "s" << i;
            double g1 = 0.0;
            for (int g = 0; g < 8; ++g) {
                const double v = rng.normal();
                if (g == 1) g1 = v;
                f << "," << v;
            }
            f << "," << (g1 + 0.3 * rng.normal() > 0 ? 1 : 0) << "\n";
        }
    }
    const fs::path meta_csv = out / "clinical.csv";
    {
        std::ofstream f(meta_csv);
        f << "sample_id,gender\n";
        for (int i = 0; i < 30; ++i) f << "s" << i << "," << (i % 2 ? "f" : "m") << "\n";
    }
    const fs::path causes_csv = out / "known.csv";
    {
        std::ofstream f(causes_csv);
        f << "variable\ngene_1\ngene_3\ngene_5\n";
    }

    json j;
    j["mode"] = "real";
    j["output_dir"] = out.string();
    j["master_seed"] = 3;
    j["datasets"] = json::array(
        {{{"id", "all"}, {"csv", data_csv.string()}, {"outcome_column", "status"}},
         {{"id", "female"},
          {"csv", data_csv.string()},
          {"outcome_column", "status"},
          {"filter",
           {{"metadata_csv", meta_csv.string()}, {"column", "gender"}, {"equals", "f"}}}}});
    j["known_causes_csv"] = causes_csv.string();
    j["learners"] = {{"da", {{"enabled", false}}},  // 30 samples are too few for the factor model
                     {"cate", {{"k", 2}}},
                     {"marginal", json::object()}};
    j["meta"] = {{"kinds", {"LR", "Random"}}, {"adapter_holdout", 0.4}};
    j["stack"] = {{"train_fraction", 0.6}};
    j["masking"] = {0.2, 0.5};  // ignored in real mode

    const RunConfig cfg = config_from_json(j);
    CHECK(cfg.masking == std::vector<double>{1.0});
    cmd_pipeline(cfg, false);

    REQUIRE(fs::exists(out / "mask_1.00" / "metrics.json"));
    const json metrics = read_json_artifact(out / "mask_1.00" / "metrics.json");
    // 2 datasets x 2 learners + 2 meta kinds
    CHECK(metrics.at("models").size() == 4 + 2);
    const CsvTable l1 = read_csv(out / "mask_1.00" / "level1.csv");
    CHECK(l1.header.size() == 1 + 4 + 2);  // variable, 4 features, label, split
}

TEST_CASE("stage commands fail with a stage-tagged message when inputs are missing") {
    const fs::path out = fresh_dir("pipe_missing");
    const RunConfig cfg = config_from_json(small_sim_config(out, 99));
    try {
        cmd_learn(cfg, false);
        CHECK(false);
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("run the simulate stage first") != std::string::npos);
    }
}

}  // TEST_SUITE
