#include "forge/emit.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/errors.hpp"

namespace forge {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json tags_to_json(const RecordTags& tags) {
    ordered_json obj;
    obj["role"] = tags.role;
    obj["item_id"] = tags.item_id;
    ordered_json params;
    for (const auto& [k, v] : tags.params) params[k] = v; // std::map keeps key order stable
    obj["params"] = std::move(params);
    return obj;
}

RecordTags tags_from_json(const nlohmann::json& obj) {
    RecordTags tags;
    tags.role = obj.value("role", std::string{});
    tags.item_id = obj.value("item_id", std::string{});
    if (obj.contains("params")) {
        for (const auto& [k, v] : obj.at("params").items()) {
            tags.params[k] = v.get<std::string>();
        }
    }
    return tags;
}

DistractorType type_for_polarity(Polarity p) {
    // A question asking for the correct option needs incorrect statements as
    // distractors, and vice versa.
    return p == Polarity::AskingCorrect ? DistractorType::IncorrectKnowledge
                                        : DistractorType::CorrectKnowledge;
}

} // namespace

std::vector<SftRecord> emit_ranker_sft(const std::vector<McqItem>& train, ChatClient& teacher,
                                       const ProtocolConfig& cfg, const EmitOptions& opts,
                                       WarningLog* warnings) {
    std::vector<SftRecord> records;
    for (const auto& item : train) {
        std::vector<GroundTruthPair> pairs = derive_ground_truth_pairs(item);
        if (opts.max_pairs_per_item && static_cast<int>(pairs.size()) > *opts.max_pairs_per_item) {
            pairs.resize(static_cast<std::size_t>(*opts.max_pairs_per_item));
        }
        for (const auto& pair : pairs) {
            SeededStream slot_stream(
                derive_seed(cfg.rng_seed, {"slot", item.id, pair.d_high.text, pair.d_low.text}));
            const bool high_is_a = slot_stream.next_bit();
            const std::string& da = high_is_a ? pair.d_high.text : pair.d_low.text;
            const std::string& db = high_is_a ? pair.d_low.text : pair.d_high.text;
            const ChoiceToken truth = high_is_a ? ChoiceToken::A : ChoiceToken::B;

            const std::string teacher_prompt =
                render_teacher_prompt(item.question, item.answer, da, db, truth);
            const std::string inference_prompt = render_ranker_prompt(
                RankerPromptVariant::Reasoning, item.question, item.answer, da, db);

            int failures = 0;
            for (double temperature : {0.0, 1.0}) {
                std::optional<std::string> completion;
                std::optional<ChoiceToken> parsed_choice;
                while (failures < cfg.attempt_cap) {
                    std::string response;
                    try {
                        response = teacher.chat_complete(teacher_prompt, temperature);
                    } catch (const TransportError& e) {
                        ++failures;
                        if (warnings) {
                            warnings->warn("teacher transport failure for item " + item.id + ": " +
                                           e.what());
                        }
                        continue;
                    }
                    try {
                        parsed_choice = parse_ranker_output(response).choice;
                        completion = response;
                        break;
                    } catch (const ParseError& e) {
                        ++failures;
                        if (warnings) {
                            warnings->warn("teacher output unparseable for item " + item.id + ": " +
                                           e.what());
                        }
                    }
                }
                if (!completion) break; // pair budget exhausted
                if (*parsed_choice != truth) {
                    if (warnings) {
                        warnings->warn("teacher contradicted ground truth for item " + item.id +
                                       "; record dropped");
                    }
                    continue;
                }
                SftRecord record;
                record.prompt = inference_prompt;
                record.completion = *completion;
                record.tags.role = "ranker";
                record.tags.item_id = item.id;
                record.tags.params["truth"] = truth == ChoiceToken::A ? "A" : "B";
                record.tags.params["temperature"] = temperature == 0.0 ? "0" : "1";
                records.push_back(std::move(record));
            }
        }
    }
    return records;
}

std::vector<PreferenceRecord> emit_ranker_dpo(const std::vector<SftRecord>& sft_records,
                                              ChatClient& sft_model, const ProtocolConfig& cfg,
                                              WarningLog* warnings) {
    std::vector<std::optional<PreferenceRecord>> slots(sft_records.size());
    parallel_for(sft_records.size(), cfg.fan_out, [&](std::size_t i) {
        const SftRecord& record = sft_records[i];
        const auto truth_it = record.tags.params.find("truth");
        if (truth_it == record.tags.params.end()) {
            throw ConfigError("SFT record missing ground-truth tag (params.truth)");
        }
        const ChoiceToken truth = truth_it->second == "A" ? ChoiceToken::A : ChoiceToken::B;
        const std::string output = sft_model.chat_complete(record.prompt);
        bool diverged = false;
        try {
            diverged = parse_ranker_output(output).choice != truth;
        } catch (const ParseError&) {
            diverged = true; // garbage output is a divergence; keep it as the rejected sample
        }
        if (!diverged) return;
        PreferenceRecord pref;
        pref.prompt = record.prompt;
        pref.chosen = record.completion;
        pref.rejected = output;
        pref.tags = record.tags;
        slots[i] = std::move(pref);
    });
    std::vector<PreferenceRecord> out;
    for (auto& slot : slots) {
        if (slot) out.push_back(std::move(*slot));
    }
    if (warnings && !out.empty()) {
        warnings->warn(std::to_string(out.size()) + " of " + std::to_string(sft_records.size()) +
                       " SFT prompts diverged from ground truth");
    }
    return out;
}

std::vector<SftRecord> emit_generator_sft(const std::vector<RankedDistractorList>& scd,
                                          const ItemIndex& items, WarningLog* warnings) {
    std::vector<SftRecord> records;
    for (const auto& list : scd) {
        if (list.excluded) continue;
        const auto it = items.find(list.item_id);
        if (it == items.end()) throw ConfigError("SCD references unknown item: " + list.item_id);
        const McqItem& item = it->second;
        if (list.entries.empty()) {
            if (warnings) warnings->warn("empty ranked list for item " + list.item_id + "; skipped");
            continue;
        }
        const DistractorType type = type_for_polarity(item.polarity);
        const std::size_t k = list.entries.size();
        for (std::size_t n = 1; n <= k; ++n) {
            std::vector<std::string> top;
            for (std::size_t i = 0; i < n; ++i) top.push_back(list.entries[i].text);
            SftRecord record;
            record.prompt = render_generator_prompt(item.question, item.answer, static_cast<int>(n));
            record.completion = format_generator_completion(type, top);
            record.tags.role = "generator";
            record.tags.item_id = item.id;
            record.tags.params["n"] = std::to_string(n);
            records.push_back(std::move(record));
        }
    }
    return records;
}

std::vector<PreferenceRecord> emit_generator_dpo(const std::vector<RankedDistractorList>& scd,
                                                 const ItemIndex& items, DpoScheme scheme,
                                                 std::optional<int> window_n,
                                                 WarningLog* warnings) {
    if (scheme == DpoScheme::SlidingWindow && (!window_n || *window_n < 1)) {
        throw ConfigError("sliding-window scheme requires window_n >= 1");
    }
    std::vector<PreferenceRecord> records;
    for (const auto& list : scd) {
        if (list.excluded) continue;
        const auto it = items.find(list.item_id);
        if (it == items.end()) throw ConfigError("SCD references unknown item: " + list.item_id);
        const McqItem& item = it->second;
        const std::size_t k = list.entries.size();
        if (k < 2) {
            if (warnings) {
                warnings->warn("ranked list for item " + list.item_id +
                               " has fewer than 2 entries; skipped");
            }
            continue;
        }
        const DistractorType type = type_for_polarity(item.polarity);
        const std::string prompt = render_generator_prompt(item.question, item.answer, 1);
        auto emit = [&](std::size_t chosen_rank, std::size_t rejected_rank) {
            PreferenceRecord record;
            record.prompt = prompt;
            record.chosen = format_generator_completion(type, {list.entries[chosen_rank].text});
            record.rejected = format_generator_completion(type, {list.entries[rejected_rank].text});
            record.tags.role = "generator";
            record.tags.item_id = item.id;
            record.tags.params["chosen_rank"] = std::to_string(chosen_rank + 1);
            record.tags.params["rejected_rank"] = std::to_string(rejected_rank + 1);
            records.push_back(std::move(record));
        };
        if (scheme == DpoScheme::TopBottom) {
            const std::size_t n = k / 2; // disjoint halves; middle entry unused when k is odd
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = k - n; j < k; ++j) {
                    emit(i, j);
                }
            }
        } else {
            const std::size_t w = static_cast<std::size_t>(*window_n);
            const std::size_t num_windows = (k + w - 1) / w;
            auto window_range = [&](std::size_t wi) {
                const std::size_t begin = wi * w;
                return std::make_pair(begin, std::min(begin + w, k));
            };
            for (std::size_t wi = 0; wi < num_windows; ++wi) {
                for (std::size_t wj = wi + 1; wj < num_windows; ++wj) {
                    const auto [ib, ie] = window_range(wi);
                    const auto [jb, je] = window_range(wj);
                    for (std::size_t i = ib; i < ie; ++i) {
                        for (std::size_t j = jb; j < je; ++j) {
                            emit(i, j);
                        }
                    }
                }
            }
        }
    }
    return records;
}

std::string sft_to_json_line(const SftRecord& record) {
    ordered_json obj;
    obj["prompt"] = record.prompt;
    obj["completion"] = record.completion;
    obj["tags"] = tags_to_json(record.tags);
    return obj.dump();
}

std::string preference_to_json_line(const PreferenceRecord& record) {
    ordered_json obj;
    obj["prompt"] = record.prompt;
    obj["chosen"] = record.chosen;
    obj["rejected"] = record.rejected;
    obj["tags"] = tags_to_json(record.tags);
    return obj.dump();
}

void write_sft_file(const std::string& path, const std::vector<SftRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) out << sft_to_json_line(r) << "\n";
    write_file(path, out.str());
}

void write_preference_file(const std::string& path, const std::vector<PreferenceRecord>& records) {
    std::ostringstream out;
    for (const auto& r : records) out << preference_to_json_line(r) << "\n";
    write_file(path, out.str());
}

std::vector<SftRecord> read_sft_file(const std::string& path) {
    std::vector<SftRecord> records;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad SFT line: ") + e.what());
        }
        SftRecord record;
        record.prompt = obj.at("prompt").get<std::string>();
        record.completion = obj.at("completion").get<std::string>();
        if (obj.contains("tags")) record.tags = tags_from_json(obj.at("tags"));
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace forge
