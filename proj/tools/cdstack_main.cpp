#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cdstack/errors.hpp"
#include "cdstack/kernels.hpp"
#include "cdstack/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool force = false;
    std::optional<double> proportion;
};

cdstack::RunConfig make_config(const CommonArgs& args) {
    cdstack::CliOverrides ov;
    ov.seed = args.seed;
    if (args.out) ov.out = *args.out;
    return cdstack::load_config(args.config_path, ov);
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_proportion) {
    cmd->add_option("--config", args.config_path, "JSON run configuration")->required();
    auto* seed = cmd->add_option("--seed", "override master_seed");
    seed->each([&args](const std::string& v) { args.seed = std::stoull(v); });
    auto* out = cmd->add_option("--out", "override output directory");
    out->each([&args](const std::string& v) { args.out = v; });
    cmd->add_flag("--force", args.force, "rebuild artifacts even when up to date");
    if (with_proportion) {
        auto* prop = cmd->add_option("--proportion", "run a single masking proportion");
        prop->each([&args](const std::string& v) { args.proportion = std::stod(v); });
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal-discovery stacking pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* sim = app.add_subcommand("simulate", "generate confounded SNP/trait datasets");
    add_common(sim, args, false);
    auto* learn = app.add_subcommand("learn", "run level-0 learners");
    add_common(learn, args, false);
    auto* stack = app.add_subcommand("stack", "assemble level-1 data");
    add_common(stack, args, true);
    auto* meta = app.add_subcommand("meta", "fit meta-learners and write predictions");
    add_common(meta, args, true);
    auto* eval = app.add_subcommand("eval", "compute metrics");
    add_common(eval, args, true);
    auto* pipe = app.add_subcommand("pipeline", "full run across the masking sweep");
    add_common(pipe, args, false);

    CLI11_PARSE(app, argc, argv);

    try {
        const cdstack::RunConfig cfg = make_config(args);
        std::cerr << "[cdstack] simd backend: "
                  << cdstack::kernels::backend_name(cdstack::kernels::active_backend())
                  << ", config hash: " << cfg.config_hash << "\n";
        if (sim->parsed()) cdstack::cmd_simulate(cfg, args.force);
        else if (learn->parsed()) cdstack::cmd_learn(cfg, args.force);
        else if (stack->parsed()) cdstack::cmd_stack(cfg, args.force, args.proportion);
        else if (meta->parsed()) cdstack::cmd_meta(cfg, args.force, args.proportion);
        else if (eval->parsed()) cdstack::cmd_eval(cfg, args.force, args.proportion);
        else if (pipe->parsed()) cdstack::cmd_pipeline(cfg, args.force);
    } catch (const cdstack::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cdstack::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const cdstack::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
