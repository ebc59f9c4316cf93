#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/client.hpp"
#include "forge/emit.hpp"
#include "forge/eval.hpp"
#include "forge/mcq.hpp"
#include "forge/ranker.hpp"

namespace forge {

struct SourceConfig {
    std::string name;
    BackendConfig backend;
    bool knn_baseline = false;
};

/// Parsed run configuration. One seed governs every derived stream; API keys
/// are referenced by environment-variable name only.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string dataset_path;
    std::string out_dir = "out";

    ProtocolConfig protocol;            // rng_seed mirrors `seed`
    RankerPromptVariant ranker_variant = RankerPromptVariant::Reasoning;

    std::map<std::string, BackendConfig> backends; // ranker, teacher, sft_model, validity, embeddings

    // emit section
    DpoScheme dpo_scheme = DpoScheme::TopBottom;
    std::optional<int> window_n;
    std::optional<int> max_pairs_per_item;

    // eval section
    TournamentSetting setting = TournamentSetting::A;
    TournamentOptions tournament;
    int repetitions = 1;
    double di_cutoff = 0.27;
    std::vector<SourceConfig> sources;

    // upstream inputs; empty values default to <out_dir>/<standard name>
    std::string augmentation_path;
    std::string scd_path;
    std::string sft_ranker_path;
    std::string judgment_log_path;
    std::string matrix_path;
    std::string outputs_path;

    std::string raw_json; // exact config bytes, digested into manifests

    std::string resolve_augmentation() const;
    std::string resolve_scd() const;
    std::string resolve_sft_ranker() const;
};

RunConfig load_run_config(const std::string& path);
/// Applies `--seed` / `--out` command-line overrides.
void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                     const std::optional<std::string>& out_dir);

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::string template_version;
    std::map<std::string, std::string> template_digests;
    std::uint64_t rng_seed = 0;
    std::map<std::string, std::string> backend_models;
    std::map<std::string, std::string> input_digests;  // path -> sha256
    std::map<std::string, std::string> output_digests; // path -> sha256
    std::string started_at;
    std::string finished_at;
};

std::string manifest_to_json(const RunManifest& manifest);

struct CommandResult {
    RunManifest manifest;
    std::vector<std::string> warnings;
    std::string summary; // human-readable table, printed by the CLI
};

CommandResult cmd_augment(const RunConfig& cfg);
CommandResult cmd_build_scd(const RunConfig& cfg);
CommandResult cmd_emit_sft(const RunConfig& cfg, const std::string& role);
CommandResult cmd_emit_dpo(const RunConfig& cfg, const std::string& role);
/// kind: rank-acc | consistency | plausibility | di | similarity | validity.
CommandResult cmd_eval(const RunConfig& cfg, const std::string& kind);

} // namespace forge
