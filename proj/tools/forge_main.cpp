#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "forge/errors.hpp"
#include "forge/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Run configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", args.seed, "Override the run seed");
    cmd->add_option("--out", args.out_dir, "Override the output directory");
}

int run(const CommonArgs& args,
        const std::function<forge::CommandResult(const forge::RunConfig&)>& fn) {
    try {
        forge::RunConfig cfg = forge::load_run_config(args.config_path);
        forge::apply_overrides(cfg, args.seed, args.out_dir);
        const forge::CommandResult result = fn(cfg);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << result.summary;
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge - distractor ranking and generation data pipeline"};
    app.require_subcommand(1);

    CommonArgs augment_args;
    CLI::App* augment = app.add_subcommand("augment", "Generate synthetic distractor candidates");
    add_common(augment, augment_args);

    CommonArgs scd_args;
    CLI::App* build_scd =
        app.add_subcommand("build-scd", "Rank distractors into the student choice dataset");
    add_common(build_scd, scd_args);

    CommonArgs sft_args;
    std::string sft_role;
    CLI::App* emit_sft = app.add_subcommand("emit-sft", "Emit SFT training records");
    emit_sft->add_option("role", sft_role, "ranker|generator")->required();
    add_common(emit_sft, sft_args);

    CommonArgs dpo_args;
    std::string dpo_role;
    CLI::App* emit_dpo = app.add_subcommand("emit-dpo", "Emit DPO preference records");
    emit_dpo->add_option("role", dpo_role, "ranker|generator")->required();
    add_common(emit_dpo, dpo_args);

    CommonArgs eval_args;
    std::string eval_kind;
    CLI::App* eval = app.add_subcommand("eval", "Run an evaluation");
    eval->add_option("kind", eval_kind,
                     "rank-acc|consistency|plausibility|di|similarity|validity")
        ->required();
    add_common(eval, eval_args);

    CLI11_PARSE(app, argc, argv);

    if (augment->parsed()) return run(augment_args, forge::cmd_augment);
    if (build_scd->parsed()) return run(scd_args, forge::cmd_build_scd);
    if (emit_sft->parsed()) {
        return run(sft_args, [&](const forge::RunConfig& cfg) {
            return forge::cmd_emit_sft(cfg, sft_role);
        });
    }
    if (emit_dpo->parsed()) {
        return run(dpo_args, [&](const forge::RunConfig& cfg) {
            return forge::cmd_emit_dpo(cfg, dpo_role);
        });
    }
    if (eval->parsed()) {
        return run(eval_args, [&](const forge::RunConfig& cfg) {
            return forge::cmd_eval(cfg, eval_kind);
        });
    }
    return 0;
}
