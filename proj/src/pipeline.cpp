#include "forge/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/bleu.hpp"
#include "forge/errors.hpp"
#include "forge/prompts.hpp"
#include "forge/scd.hpp"
#include "forge/util.hpp"

namespace forge {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

BackendConfig backend_from_json(const json& obj) {
    BackendConfig cfg;
    cfg.base_url = obj.value("base_url", std::string{});
    cfg.model_name = obj.value("model", std::string{});
    cfg.api_key_env = obj.value("api_key_env", std::string{});
    cfg.temperature = obj.value("temperature", 0.0);
    cfg.max_attempts_per_call = obj.value("max_attempts", 3);
    cfg.timeout = std::chrono::milliseconds(obj.value("timeout_ms", 30000));
    if (obj.contains("seed")) cfg.request_seed = obj.at("seed").get<std::int64_t>();
    cfg.backoff_base = std::chrono::milliseconds(obj.value("backoff_ms", 500));
    if (cfg.base_url.empty()) throw ConfigError("backend section missing base_url");
    if (cfg.max_attempts_per_call < 1) throw ConfigError("backend max_attempts must be >= 1");
    return cfg;
}

std::string iso_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

/// Reads `path` and records its digest; warns when a sibling manifest lists a
/// different digest for the same file (stale input).
void record_input(RunManifest& manifest, WarningLog& warnings, const std::string& path) {
    const std::string digest = sha256_file_hex(path);
    manifest.input_digests[path] = digest;
    const fs::path parent = fs::path(path).parent_path();
    const fs::path dir = parent.empty() ? fs::path(".") : parent;
    const std::string base = fs::path(path).filename().string();
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("manifest_", 0) != 0 || entry.path().extension() != ".json") continue;
        try {
            const json doc = json::parse(read_file(entry.path().string()));
            if (!doc.contains("output_digests")) continue;
            for (const auto& [out_path, out_digest] : doc.at("output_digests").items()) {
                if (fs::path(out_path).filename().string() == base &&
                    out_digest.get<std::string>() != digest) {
                    warnings.warn("stale input: " + path + " no longer matches the digest in " +
                                  entry.path().string());
                }
            }
        } catch (const std::exception&) {
            // unreadable sibling manifests never block a run
        }
    }
}

void record_output(RunManifest& manifest, const std::string& path) {
    manifest.output_digests[path] = sha256_file_hex(path);
}

RunManifest start_manifest(const RunConfig& cfg, const std::string& command) {
    RunManifest manifest;
    manifest.command = command;
    manifest.config_digest = sha256_hex(cfg.raw_json);
    manifest.template_version = kTemplateVersion;
    manifest.template_digests = template_hashes();
    manifest.rng_seed = cfg.seed;
    for (const auto& [name, backend] : cfg.backends) {
        manifest.backend_models[name] = backend.model_name;
    }
    for (const auto& source : cfg.sources) {
        manifest.backend_models["source:" + source.name] = source.backend.model_name;
    }
    manifest.started_at = iso_utc_now();
    return manifest;
}

void finish_manifest(const RunConfig& cfg, RunManifest& manifest) {
    manifest.finished_at = iso_utc_now();
    const std::string name = "manifest_" + manifest.command + ".json";
    write_file(join_path(cfg.out_dir, name), manifest_to_json(manifest));
}

ChatClient make_chat_client(const RunConfig& cfg, const std::string& name) {
    const auto it = cfg.backends.find(name);
    if (it != cfg.backends.end()) return ChatClient(it->second);
    if (name == "validity") {
        // validity judging defaults to the ranker backend
        const auto ranker = cfg.backends.find("ranker");
        if (ranker != cfg.backends.end()) return ChatClient(ranker->second);
    }
    throw ConfigError("config has no `" + name + "` backend section");
}

EmbeddingClient make_embedding_client(const RunConfig& cfg) {
    const auto it = cfg.backends.find("embeddings");
    if (it == cfg.backends.end()) throw ConfigError("config has no `embeddings` backend section");
    return EmbeddingClient(it->second);
}

void ensure_out_dir(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
}

/// Reports are also emitted as line-delimited records for downstream tooling.
void write_report_records(RunManifest& manifest, const std::string& path,
                          const std::vector<ordered_json>& records) {
    std::ostringstream out;
    for (const auto& r : records) out << r.dump() << "\n";
    write_file(path, out.str());
    record_output(manifest, path);
}

std::string format_table(const std::string& title,
                         const std::map<std::string, double>& per_subject, double overall) {
    std::ostringstream out;
    out << title << "\n";
    for (const auto& [subject, value] : per_subject) {
        out << "  " << std::left << std::setw(12) << subject << std::fixed << std::setprecision(3)
            << value << "\n";
    }
    out << "  " << std::left << std::setw(12) << "Avg." << std::fixed << std::setprecision(3)
        << overall << "\n";
    return out.str();
}

} // namespace

std::string RunConfig::resolve_augmentation() const {
    return augmentation_path.empty() ? (fs::path(out_dir) / "augmentation.jsonl").string()
                                     : augmentation_path;
}

std::string RunConfig::resolve_scd() const {
    return scd_path.empty() ? (fs::path(out_dir) / "scd.jsonl").string() : scd_path;
}

std::string RunConfig::resolve_sft_ranker() const {
    return sft_ranker_path.empty() ? (fs::path(out_dir) / "sft_ranker.jsonl").string()
                                   : sft_ranker_path;
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    cfg.raw_json = read_file(path);
    json doc;
    try {
        doc = json::parse(cfg.raw_json);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg.seed = doc.value("seed", 0ull);
    cfg.dataset_path = doc.value("dataset", std::string{});
    cfg.out_dir = doc.value("out_dir", std::string("out"));

    if (doc.contains("protocol")) {
        const auto& p = doc.at("protocol");
        cfg.protocol.temperature = p.value("temperature", 0.5);
        cfg.protocol.attempt_cap = p.value("attempt_cap", 10);
        cfg.protocol.fan_out = p.value("fan_out", 8);
        if (cfg.protocol.attempt_cap < 1) throw ConfigError("protocol.attempt_cap must be >= 1");
    }
    cfg.protocol.rng_seed = cfg.seed;
    cfg.ranker_variant = variant_from_string(doc.value("ranker_variant", std::string("reasoning")));

    if (doc.contains("backends")) {
        for (const auto& [name, value] : doc.at("backends").items()) {
            cfg.backends[name] = backend_from_json(value);
        }
    }

    if (doc.contains("emit")) {
        const auto& e = doc.at("emit");
        const std::string scheme = e.value("scheme", std::string("top-bottom"));
        if (scheme == "top-bottom") {
            cfg.dpo_scheme = DpoScheme::TopBottom;
        } else if (scheme == "sliding-window") {
            cfg.dpo_scheme = DpoScheme::SlidingWindow;
        } else {
            throw ConfigError("emit.scheme must be top-bottom|sliding-window");
        }
        if (e.contains("window_n")) cfg.window_n = e.at("window_n").get<int>();
        if (e.contains("max_pairs_per_item")) {
            cfg.max_pairs_per_item = e.at("max_pairs_per_item").get<int>();
        }
    }

    if (doc.contains("eval")) {
        const auto& ev = doc.at("eval");
        const std::string setting = ev.value("setting", std::string("A"));
        if (setting == "A") {
            cfg.setting = TournamentSetting::A;
        } else if (setting == "B") {
            cfg.setting = TournamentSetting::B;
        } else {
            throw ConfigError("eval.setting must be A|B");
        }
        cfg.tournament.setting_b_temperature = ev.value("setting_b_temperature", 1.0);
        cfg.tournament.max_rounds = ev.value("max_rounds", 3);
        cfg.repetitions = ev.value("repetitions", 1);
        cfg.di_cutoff = ev.value("di_cutoff", 0.27);
        if (ev.contains("sources")) {
            for (const auto& s : ev.at("sources")) {
                SourceConfig source;
                source.name = s.at("name").get<std::string>();
                source.backend = backend_from_json(s.at("backend"));
                source.knn_baseline = s.value("prompt_kind", std::string("standard")) == "knn-baseline";
                cfg.sources.push_back(std::move(source));
            }
        }
        cfg.judgment_log_path = ev.value("judgment_log", std::string{});
        cfg.matrix_path = ev.value("matrix", std::string{});
        cfg.outputs_path = ev.value("outputs", std::string{});
    }

    if (doc.contains("inputs")) {
        const auto& in = doc.at("inputs");
        cfg.augmentation_path = in.value("augmentation", std::string{});
        cfg.scd_path = in.value("scd", std::string{});
        cfg.sft_ranker_path = in.value("sft_ranker", std::string{});
    }
    return cfg;
}

void apply_overrides(RunConfig& cfg, std::optional<std::uint64_t> seed,
                     const std::optional<std::string>& out_dir) {
    if (seed) {
        cfg.seed = *seed;
        cfg.protocol.rng_seed = *seed;
    }
    if (out_dir) cfg.out_dir = *out_dir;
}

std::string manifest_to_json(const RunManifest& manifest) {
    ordered_json doc;
    doc["command"] = manifest.command;
    doc["config_digest"] = manifest.config_digest;
    doc["template_version"] = manifest.template_version;
    doc["template_digests"] = manifest.template_digests;
    doc["rng_seed"] = manifest.rng_seed;
    doc["backend_models"] = manifest.backend_models;
    doc["input_digests"] = manifest.input_digests;
    doc["output_digests"] = manifest.output_digests;
    doc["started_at"] = manifest.started_at;
    doc["finished_at"] = manifest.finished_at;
    return doc.dump(2) + "\n";
}

CommandResult cmd_augment(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "augment");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    record_input(result.manifest, warnings, cfg.dataset_path);
    const DatasetSplit split = load_dataset(cfg.dataset_path);

    ChatClient teacher = make_chat_client(cfg, "teacher");
    ChatClient validity = make_chat_client(cfg, "validity");

    std::vector<AugmentationResult> results(split.train.size());
    parallel_for(split.train.size(), cfg.protocol.fan_out, [&](std::size_t i) {
        results[i] = augment_distractors(split.train[i], teacher, validity, cfg.protocol, &warnings);
    });

    ensure_out_dir(cfg);
    const std::string out_path = join_path(cfg.out_dir, "augmentation.jsonl");
    write_augmentation_file(out_path, results);
    record_output(result.manifest, out_path);

    std::size_t excluded = 0;
    std::size_t accepted = 0;
    for (const auto& r : results) {
        if (r.excluded) ++excluded;
        accepted += r.accepted.size();
    }
    std::ostringstream summary;
    summary << "augment: " << split.train.size() << " items, " << accepted
            << " accepted synthetics, " << excluded << " excluded\n";
    result.summary = summary.str();

    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult cmd_build_scd(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "build-scd");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    record_input(result.manifest, warnings, cfg.dataset_path);
    const std::string augmentation_path = cfg.resolve_augmentation();
    record_input(result.manifest, warnings, augmentation_path);

    const DatasetSplit split = load_dataset(cfg.dataset_path);
    const ItemIndex items = build_item_index(split);
    const std::vector<AugmentationResult> augmented = read_augmentation_file(augmentation_path);

    ChatClient ranker = make_chat_client(cfg, "ranker");

    std::vector<RankedDistractorList> lists(augmented.size());
    std::vector<std::vector<PairJudgment>> judgments(augmented.size());
    parallel_for(augmented.size(), cfg.protocol.fan_out, [&](std::size_t i) {
        const auto& aug = augmented[i];
        const auto it = items.find(aug.item_id);
        if (it == items.end()) throw ConfigError("augmentation references unknown item: " + aug.item_id);
        if (aug.excluded) {
            lists[i].item_id = aug.item_id;
            lists[i].excluded = true;
            lists[i].exclusion_reason = aug.exclusion_reason;
            return;
        }
        lists[i] = build_ranked_list(it->second, aug.accepted, cfg.ranker_variant, ranker,
                                     cfg.protocol, &judgments[i], &warnings);
    });

    ensure_out_dir(cfg);
    const std::string scd_path = join_path(cfg.out_dir, "scd.jsonl");
    write_scd_file(scd_path, lists);
    record_output(result.manifest, scd_path);

    std::vector<PairJudgment> all_judgments;
    for (auto& j : judgments) {
        all_judgments.insert(all_judgments.end(), j.begin(), j.end());
    }
    const std::string log_path = join_path(cfg.out_dir, "judgments_scd.jsonl");
    write_judgment_log(log_path, all_judgments);
    record_output(result.manifest, log_path);

    std::ostringstream summary;
    summary << "build-scd: " << lists.size() << " items, avg synthetics in top-3 = " << std::fixed
            << std::setprecision(2) << mean_synthetics_in_top3(lists) << "\n";
    result.summary = summary.str();

    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult cmd_emit_sft(const RunConfig& cfg, const std::string& role) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "emit-sft-" + role);
    ensure_out_dir(cfg);

    if (role == "ranker") {
        if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
        record_input(result.manifest, warnings, cfg.dataset_path);
        const DatasetSplit split = load_dataset(cfg.dataset_path);
        ChatClient teacher = make_chat_client(cfg, "teacher");
        EmitOptions opts;
        opts.max_pairs_per_item = cfg.max_pairs_per_item;
        const std::vector<SftRecord> records =
            emit_ranker_sft(split.train, teacher, cfg.protocol, opts, &warnings);
        const std::string out_path = join_path(cfg.out_dir, "sft_ranker.jsonl");
        write_sft_file(out_path, records);
        record_output(result.manifest, out_path);
        result.summary = "emit-sft ranker: " + std::to_string(records.size()) + " records\n";
    } else if (role == "generator") {
        if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
        record_input(result.manifest, warnings, cfg.dataset_path);
        const std::string scd_path = cfg.resolve_scd();
        record_input(result.manifest, warnings, scd_path);
        const DatasetSplit split = load_dataset(cfg.dataset_path);
        const ItemIndex items = build_item_index(split);
        const std::vector<RankedDistractorList> scd = read_scd_file(scd_path);
        const std::vector<SftRecord> records = emit_generator_sft(scd, items, &warnings);
        const std::string out_path = join_path(cfg.out_dir, "sft_generator.jsonl");
        write_sft_file(out_path, records);
        record_output(result.manifest, out_path);
        result.summary = "emit-sft generator: " + std::to_string(records.size()) + " records\n";
    } else {
        throw ConfigError("emit-sft role must be ranker|generator");
    }

    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult cmd_emit_dpo(const RunConfig& cfg, const std::string& role) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "emit-dpo-" + role);
    ensure_out_dir(cfg);

    if (role == "ranker") {
        const std::string sft_path = cfg.resolve_sft_ranker();
        record_input(result.manifest, warnings, sft_path);
        const std::vector<SftRecord> sft_records = read_sft_file(sft_path);
        ChatClient sft_model = make_chat_client(cfg, "sft_model");
        const std::vector<PreferenceRecord> records =
            emit_ranker_dpo(sft_records, sft_model, cfg.protocol, &warnings);
        const std::string out_path = join_path(cfg.out_dir, "dpo_ranker.jsonl");
        write_preference_file(out_path, records);
        record_output(result.manifest, out_path);
        result.summary = "emit-dpo ranker: " + std::to_string(records.size()) + " records\n";
    } else if (role == "generator") {
        if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
        record_input(result.manifest, warnings, cfg.dataset_path);
        const std::string scd_path = cfg.resolve_scd();
        record_input(result.manifest, warnings, scd_path);
        const DatasetSplit split = load_dataset(cfg.dataset_path);
        const ItemIndex items = build_item_index(split);
        const std::vector<RankedDistractorList> scd = read_scd_file(scd_path);
        const std::vector<PreferenceRecord> records =
            emit_generator_dpo(scd, items, cfg.dpo_scheme, cfg.window_n, &warnings);
        const std::string out_path = join_path(cfg.out_dir, "dpo_generator.jsonl");
        write_preference_file(out_path, records);
        record_output(result.manifest, out_path);
        result.summary = "emit-dpo generator: " + std::to_string(records.size()) + " records\n";
    } else {
        throw ConfigError("emit-dpo role must be ranker|generator");
    }

    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

namespace {

CommandResult eval_rank_acc(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "eval-rank-acc");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    record_input(result.manifest, warnings, cfg.dataset_path);
    const DatasetSplit split = load_dataset(cfg.dataset_path);
    const ItemIndex items = build_item_index(split);

    std::vector<GroundTruthPair> pairs;
    for (const auto& item : split.test) {
        auto p = derive_ground_truth_pairs(item);
        pairs.insert(pairs.end(), p.begin(), p.end());
    }
    ChatClient ranker = make_chat_client(cfg, "ranker");
    const RankAccuracyReport report =
        rank_accuracy(pairs, items, cfg.ranker_variant, ranker, cfg.protocol, cfg.repetitions);

    ensure_out_dir(cfg);
    ordered_json doc;
    doc["repetitions"] = report.repetitions;
    doc["per_subject"] = report.per_subject;
    doc["overall_macro"] = report.overall_macro;
    doc["overall_micro"] = report.overall_micro;
    const std::string report_path = join_path(cfg.out_dir, "rank_accuracy.json");
    write_file(report_path, doc.dump(2) + "\n");
    record_output(result.manifest, report_path);
    std::vector<ordered_json> records;
    for (const auto& [subject, acc] : report.per_subject) {
        records.push_back(ordered_json{{"scope", "subject"}, {"name", subject}, {"accuracy", acc}});
    }
    records.push_back(ordered_json{{"scope", "overall"}, {"name", "macro"},
                                   {"accuracy", report.overall_macro}});
    records.push_back(ordered_json{{"scope", "overall"}, {"name", "micro"},
                                   {"accuracy", report.overall_micro}});
    write_report_records(result.manifest, join_path(cfg.out_dir, "rank_accuracy.jsonl"), records);
    const std::string log_path = join_path(cfg.out_dir, "judgments_rank_acc.jsonl");
    write_judgment_log(log_path, report.judgments);
    record_output(result.manifest, log_path);

    result.summary = format_table("Rank Accuracy", report.per_subject, report.overall_macro);
    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult eval_consistency(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "eval-consistency");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    const std::string log_path = cfg.judgment_log_path.empty()
                                     ? join_path(cfg.out_dir, "judgments_rank_acc.jsonl")
                                     : cfg.judgment_log_path;
    record_input(result.manifest, warnings, cfg.dataset_path);
    record_input(result.manifest, warnings, log_path);
    const DatasetSplit split = load_dataset(cfg.dataset_path);
    const ItemIndex items = build_item_index(split);
    const std::vector<PairJudgment> judgments = read_judgment_log(log_path);
    const ConsistencyReport report = consistency_metric(judgments, items);

    ensure_out_dir(cfg);
    ordered_json doc;
    doc["per_subject"] = report.per_subject;
    doc["overall_macro"] = report.overall_macro;
    doc["per_question"] = report.per_question;
    const std::string report_path = join_path(cfg.out_dir, "consistency.json");
    write_file(report_path, doc.dump(2) + "\n");
    record_output(result.manifest, report_path);
    std::vector<ordered_json> records;
    for (const auto& [item_id, attempts] : report.per_question) {
        records.push_back(ordered_json{{"scope", "question"}, {"name", item_id},
                                       {"mean_attempts", attempts}});
    }
    for (const auto& [subject, attempts] : report.per_subject) {
        records.push_back(ordered_json{{"scope", "subject"}, {"name", subject},
                                       {"mean_attempts", attempts}});
    }
    write_report_records(result.manifest, join_path(cfg.out_dir, "consistency.jsonl"), records);

    result.summary =
        format_table("Generation Attempts per Question", report.per_subject, report.overall_macro);
    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

ordered_json counts_to_json(const TournamentCounts& c) {
    return ordered_json{{"wins_x", c.wins_x}, {"loses_x", c.loses_x}, {"wins_y", c.wins_y},
                        {"loses_y", c.loses_y}, {"win_x", c.win_x},   {"tie", c.tie},
                        {"win_y", c.win_y},     {"skipped", c.skipped}};
}

CommandResult eval_plausibility(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "eval-plausibility");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    if (cfg.sources.size() < 2) throw ConfigError("eval plausibility requires two eval.sources");
    record_input(result.manifest, warnings, cfg.dataset_path);
    const DatasetSplit split = load_dataset(cfg.dataset_path);

    ChatClient ranker = make_chat_client(cfg, "ranker");
    ChatClient validity = make_chat_client(cfg, "validity");
    ChatClient client_x(cfg.sources[0].backend);
    ChatClient client_y(cfg.sources[1].backend);
    std::optional<EmbeddingClient> embedder;
    auto make_source = [&](const SourceConfig& sc, ChatClient& client) {
        GeneratorSource source;
        source.name = sc.name;
        source.client = &client;
        if (sc.knn_baseline) {
            source.prompt_kind = GeneratorSource::PromptKind::KnnBaseline;
            if (!embedder) {
                const auto it = cfg.backends.find("embeddings");
                if (it == cfg.backends.end()) {
                    throw ConfigError("kNN source requires an `embeddings` backend section");
                }
                embedder.emplace(it->second);
            }
            source.knn.pool = &split.train;
            source.knn.embedder = &*embedder;
        }
        return source;
    };
    GeneratorSource source_x = make_source(cfg.sources[0], client_x);
    GeneratorSource source_y = make_source(cfg.sources[1], client_y);

    // Repetition averaging is how fractional tallies arise in reports.
    std::vector<TournamentReport> reports;
    for (int rep = 0; rep < std::max(1, cfg.repetitions); ++rep) {
        reports.push_back(plausibility_tournament(source_x, source_y, split.test, cfg.setting,
                                                  cfg.ranker_variant, ranker, validity,
                                                  cfg.protocol, cfg.tournament, &warnings));
    }

    ensure_out_dir(cfg);
    ordered_json doc;
    doc["setting"] = cfg.setting == TournamentSetting::A ? "A" : "B";
    doc["source_x"] = source_x.name;
    doc["source_y"] = source_y.name;
    doc["repetitions"] = static_cast<int>(reports.size());
    auto average = [&](auto&& pick) {
        double sum = 0.0;
        for (const auto& r : reports) sum += static_cast<double>(pick(r.overall));
        return sum / static_cast<double>(reports.size());
    };
    doc["per_distractor"] = ordered_json{
        {"wins_x", average([](const TournamentCounts& c) { return c.wins_x; })},
        {"loses_x", average([](const TournamentCounts& c) { return c.loses_x; })},
        {"wins_y", average([](const TournamentCounts& c) { return c.wins_y; })},
        {"loses_y", average([](const TournamentCounts& c) { return c.loses_y; })}};
    doc["per_question"] = ordered_json{
        {"win_x", average([](const TournamentCounts& c) { return c.win_x; })},
        {"tie", average([](const TournamentCounts& c) { return c.tie; })},
        {"win_y", average([](const TournamentCounts& c) { return c.win_y; })},
        {"skipped", average([](const TournamentCounts& c) { return c.skipped; })}};
    ordered_json subjects;
    for (const auto& [subject, counts] : reports.front().per_subject) {
        (void)counts;
        TournamentCounts sum;
        for (const auto& r : reports) {
            const auto it = r.per_subject.find(subject);
            if (it != r.per_subject.end()) sum.add(it->second);
        }
        subjects[subject] = counts_to_json(sum);
    }
    doc["per_subject_totals"] = std::move(subjects);
    const std::string report_path = join_path(cfg.out_dir, "tournament.json");
    write_file(report_path, doc.dump(2) + "\n");
    record_output(result.manifest, report_path);
    std::vector<ordered_json> records;
    for (const auto& [subject, counts] : reports.front().per_subject) {
        TournamentCounts sum;
        for (const auto& r : reports) {
            const auto it = r.per_subject.find(subject);
            if (it != r.per_subject.end()) sum.add(it->second);
        }
        (void)counts;
        records.push_back(ordered_json{{"scope", "subject"}, {"name", subject},
                                       {"counts", counts_to_json(sum)}});
    }
    records.push_back(ordered_json{{"scope", "overall"}, {"name", "totals"},
                                   {"counts", counts_to_json([&] {
                                        TournamentCounts sum;
                                        for (const auto& r : reports) sum.add(r.overall);
                                        return sum;
                                    }())}});
    write_report_records(result.manifest, join_path(cfg.out_dir, "tournament.jsonl"), records);

    std::vector<PairJudgment> all_judgments;
    std::vector<SourceOutput> all_outputs;
    for (const auto& r : reports) {
        all_judgments.insert(all_judgments.end(), r.judgments.begin(), r.judgments.end());
        all_outputs.insert(all_outputs.end(), r.outputs.begin(), r.outputs.end());
    }
    const std::string log_path = join_path(cfg.out_dir, "judgments_tournament.jsonl");
    write_judgment_log(log_path, all_judgments);
    record_output(result.manifest, log_path);
    const std::string outputs_path = join_path(cfg.out_dir, "generated_distractors.jsonl");
    write_source_outputs(outputs_path, all_outputs);
    record_output(result.manifest, outputs_path);

    std::ostringstream summary;
    summary << "Plausibility (" << source_x.name << " vs " << source_y.name << ", Setting "
            << (cfg.setting == TournamentSetting::A ? "A" : "B")
            << "): win/lose per distractor, win/tie/lose per question\n";
    const double reps = static_cast<double>(reports.size());
    for (const auto& [subject, _] : reports.front().per_subject) {
        TournamentCounts sum;
        for (const auto& r : reports) {
            const auto it = r.per_subject.find(subject);
            if (it != r.per_subject.end()) sum.add(it->second);
        }
        summary << "  " << std::left << std::setw(12) << subject << sum.wins_x / reps << "/"
                << sum.loses_x / reps << "  " << sum.win_x / reps << "/" << sum.tie / reps << "/"
                << sum.win_y / reps << "\n";
    }
    summary << "  " << std::left << std::setw(12) << "All"
            << doc["per_distractor"]["wins_x"].get<double>() << "/"
            << doc["per_distractor"]["loses_x"].get<double>() << "  "
            << doc["per_question"]["win_x"].get<double>() << "/"
            << doc["per_question"]["tie"].get<double>() << "/"
            << doc["per_question"]["win_y"].get<double>() << "\n";
    result.summary = summary.str();
    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult eval_di(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "eval-di");
    if (cfg.matrix_path.empty()) throw ConfigError("eval di requires eval.matrix in the config");
    record_input(result.manifest, warnings, cfg.matrix_path);
    const StudentResponseMatrix matrix = read_matrix_file(cfg.matrix_path);
    const DiscriminationReport report = discrimination_index(matrix, cfg.di_cutoff);
    const SelectionCountReport selections = selection_counts(matrix, 0.5);

    ensure_out_dir(cfg);
    ordered_json doc;
    doc["cutoff"] = cfg.di_cutoff;
    doc["group_size"] = report.group_size;
    doc["per_source"] = report.per_source;
    doc["per_item"] = report.per_item;
    doc["selections_top_half"] = selections.upper_half;
    doc["selections_low_half"] = selections.lower_half;
    doc["selections_total"] = selections.total;
    const std::string report_path = join_path(cfg.out_dir, "di.json");
    write_file(report_path, doc.dump(2) + "\n");
    record_output(result.manifest, report_path);
    std::vector<ordered_json> records;
    for (std::size_t i = 0; i < matrix.items.size(); ++i) {
        records.push_back(ordered_json{{"scope", "item"},
                                       {"question_id", matrix.items[i].question_id},
                                       {"distractor_id", matrix.items[i].distractor_id},
                                       {"source", matrix.items[i].source},
                                       {"di", report.per_item[i]}});
    }
    for (const auto& [source, di_value] : report.per_source) {
        records.push_back(ordered_json{{"scope", "source"}, {"source", source}, {"di", di_value}});
    }
    write_report_records(result.manifest, join_path(cfg.out_dir, "di.jsonl"), records);

    std::map<std::string, double> per_source(report.per_source.begin(), report.per_source.end());
    double mean = 0.0;
    for (const auto& [_, v] : per_source) mean += v;
    result.summary = format_table("Discrimination Index", per_source,
                                  per_source.empty() ? 0.0 : mean / per_source.size());
    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult eval_similarity(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "eval-similarity");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    const std::string outputs_path = cfg.outputs_path.empty()
                                         ? join_path(cfg.out_dir, "generated_distractors.jsonl")
                                         : cfg.outputs_path;
    record_input(result.manifest, warnings, cfg.dataset_path);
    record_input(result.manifest, warnings, outputs_path);
    const DatasetSplit split = load_dataset(cfg.dataset_path);
    const ItemIndex items = build_item_index(split);
    const std::vector<SourceOutput> outputs = read_source_outputs(outputs_path);

    const auto bleu = bleu_similarity_report(outputs, items);
    EmbeddingClient embedder = make_embedding_client(cfg);
    const auto cosine = embedding_similarity_report(outputs, items, embedder);

    ensure_out_dir(cfg);
    ordered_json doc;
    auto dump_report = [](const std::map<std::string, std::map<std::string, MeanVariance>>& r) {
        ordered_json out;
        for (const auto& [source, by_subject] : r) {
            ordered_json s;
            for (const auto& [subject, mv] : by_subject) {
                s[subject] = ordered_json{{"mean", mv.mean}, {"variance", mv.variance},
                                          {"count", mv.count}};
            }
            out[source] = std::move(s);
        }
        return out;
    };
    doc["sbleu_vs_human"] = dump_report(bleu);
    doc["cosine_answer_vs_distractor"] = dump_report(cosine);
    const std::string report_path = join_path(cfg.out_dir, "similarity.json");
    write_file(report_path, doc.dump(2) + "\n");
    record_output(result.manifest, report_path);
    std::vector<ordered_json> records;
    auto add_records = [&](const char* metric,
                           const std::map<std::string, std::map<std::string, MeanVariance>>& r) {
        for (const auto& [source, by_subject] : r) {
            for (const auto& [subject, mv] : by_subject) {
                records.push_back(ordered_json{{"metric", metric}, {"source", source},
                                               {"subject", subject}, {"mean", mv.mean},
                                               {"variance", mv.variance}, {"count", mv.count}});
            }
        }
    };
    add_records("sbleu_vs_human", bleu);
    add_records("cosine_answer_vs_distractor", cosine);
    write_report_records(result.manifest, join_path(cfg.out_dir, "similarity.jsonl"), records);

    std::ostringstream summary;
    summary << "Similarity report\n";
    for (const auto& [source, by_subject] : bleu) {
        summary << "  sBLEU " << source << ":";
        for (const auto& [subject, mv] : by_subject) {
            summary << "  " << subject << "=" << std::fixed << std::setprecision(3) << mv.mean;
        }
        summary << "\n";
    }
    for (const auto& [source, by_subject] : cosine) {
        summary << "  cosine " << source << ":";
        for (const auto& [subject, mv] : by_subject) {
            summary << "  " << subject << "=" << std::fixed << std::setprecision(2) << mv.mean
                    << " (" << mv.variance << ")";
        }
        summary << "\n";
    }
    result.summary = summary.str();
    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

CommandResult eval_validity(const RunConfig& cfg) {
    CommandResult result;
    WarningLog warnings;
    result.manifest = start_manifest(cfg, "eval-validity");
    if (cfg.dataset_path.empty()) throw ConfigError("config missing `dataset` path");
    const std::string outputs_path = cfg.outputs_path.empty()
                                         ? join_path(cfg.out_dir, "generated_distractors.jsonl")
                                         : cfg.outputs_path;
    record_input(result.manifest, warnings, cfg.dataset_path);
    record_input(result.manifest, warnings, outputs_path);
    const DatasetSplit split = load_dataset(cfg.dataset_path);
    const ItemIndex items = build_item_index(split);
    const std::vector<SourceOutput> outputs = read_source_outputs(outputs_path);
    ChatClient validity = make_chat_client(cfg, "validity");
    const auto report = validity_rate(outputs, items, validity, cfg.protocol, &warnings);

    ensure_out_dir(cfg);
    ordered_json doc;
    for (const auto& [source, cells] : report) {
        ordered_json s;
        for (const auto& [cell, counts] : cells) {
            s[cell] = ordered_json{{"valid", counts.valid}, {"total", counts.total},
                                   {"rate", counts.rate()}};
        }
        doc[source] = std::move(s);
    }
    const std::string report_path = join_path(cfg.out_dir, "validity.json");
    write_file(report_path, doc.dump(2) + "\n");
    record_output(result.manifest, report_path);
    std::vector<ordered_json> records;
    for (const auto& [source, cells] : report) {
        for (const auto& [cell, counts] : cells) {
            records.push_back(ordered_json{{"source", source}, {"cell", cell},
                                           {"valid", counts.valid}, {"total", counts.total},
                                           {"rate", counts.rate()}});
        }
    }
    write_report_records(result.manifest, join_path(cfg.out_dir, "validity.jsonl"), records);

    std::ostringstream summary;
    summary << "Validity\n";
    for (const auto& [source, cells] : report) {
        summary << "  " << source << ":";
        for (const auto& [cell, counts] : cells) {
            summary << "  " << cell << "=" << std::fixed << std::setprecision(3) << counts.rate();
        }
        summary << "\n";
    }
    result.summary = summary.str();
    finish_manifest(cfg, result.manifest);
    result.warnings = warnings.snapshot();
    return result;
}

} // namespace

CommandResult cmd_eval(const RunConfig& cfg, const std::string& kind) {
    if (kind == "rank-acc") return eval_rank_acc(cfg);
    if (kind == "consistency") return eval_consistency(cfg);
    if (kind == "plausibility") return eval_plausibility(cfg);
    if (kind == "di") return eval_di(cfg);
    if (kind == "similarity") return eval_similarity(cfg);
    if (kind == "validity") return eval_validity(cfg);
    throw ConfigError("unknown eval kind: " + kind +
                      " (expected rank-acc|consistency|plausibility|di|similarity|validity)");
}

} // namespace forge
