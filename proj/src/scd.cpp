#include "forge/scd.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/errors.hpp"

namespace forge {

using ordered_json = nlohmann::ordered_json;

std::string reject_reason_to_string(RejectReason r) {
    switch (r) {
        case RejectReason::DuplicateOfOriginal: return "duplicate-of-original";
        case RejectReason::DuplicateWithinBatch: return "duplicate-within-batch";
        case RejectReason::EqualsAnswer: return "equals-answer";
        case RejectReason::FailedValidity: return "failed-validity";
        case RejectReason::ParseFailure: return "parse-failure";
    }
    return "failed-validity";
}

ValidityCheck check_distractor_validity_detail(const McqItem& item, const std::string& candidate,
                                               ChatClient& client, const ProtocolConfig& cfg,
                                               WarningLog* warnings) {
    if (trim(candidate).empty()) throw ConfigError("validity check requires a non-empty candidate");
    const std::string prompt = render_validity_prompt(item.question, candidate);
    ValidityCheck check;
    for (int attempt = 1; attempt <= cfg.attempt_cap; ++attempt) {
        check.attempts = attempt;
        const std::string response = client.chat_complete(prompt);
        try {
            const ParsedValidityOutput parsed = parse_validity_output(response);
            check.usable = parsed.verdict == ValidityVerdict::Invalid;
            return check;
        } catch (const ParseError&) {
        }
    }
    check.usable = false;
    check.parse_failed = true;
    if (warnings) {
        warnings->warn("validity check unparseable after " + std::to_string(cfg.attempt_cap) +
                       " attempts for item " + item.id + "; candidate treated as invalid");
    }
    return check;
}

bool check_distractor_validity(const McqItem& item, const std::string& candidate,
                               ChatClient& client, const ProtocolConfig& cfg,
                               WarningLog* warnings) {
    return check_distractor_validity_detail(item, candidate, client, cfg, warnings).usable;
}

AugmentationResult augment_distractors(const McqItem& item, ChatClient& teacher,
                                       ChatClient& validity_judge, const ProtocolConfig& cfg,
                                       WarningLog* warnings) {
    if (item.distractors.empty()) throw ConfigError("augmentation requires at least one distractor");
    std::vector<std::string> originals;
    for (const auto& d : item.distractors) originals.push_back(d.text);
    const std::string prompt = render_augment_prompt(item.question, item.answer, originals);

    AugmentationResult result;
    result.item_id = item.id;

    std::vector<std::string> candidates;
    bool parsed_ok = false;
    for (int round = 0; round < 2 && !parsed_ok; ++round) { // one regeneration on parse failure
        const std::string response = teacher.chat_complete(prompt);
        try {
            candidates = parse_augment_output(response);
            parsed_ok = true;
        } catch (const ParseError& e) {
            if (warnings) {
                warnings->warn("augmentation response unparseable for item " + item.id + ": " +
                               e.what());
            }
        }
    }
    if (!parsed_ok) {
        result.excluded = true;
        result.exclusion_reason = "augmentation-parse-failure";
        return result;
    }

    std::vector<std::string> trimmed_originals;
    for (const auto& o : originals) trimmed_originals.push_back(trim(o));
    const std::string trimmed_answer = trim(item.answer);

    std::vector<std::string> earlier;
    for (const auto& raw : candidates) {
        const std::string text = trim(raw);
        if (text.empty()) {
            result.rejected.push_back({raw, RejectReason::ParseFailure});
            continue;
        }
        if (std::find(trimmed_originals.begin(), trimmed_originals.end(), text) !=
            trimmed_originals.end()) {
            result.rejected.push_back({text, RejectReason::DuplicateOfOriginal});
            earlier.push_back(text);
            continue;
        }
        if (text == trimmed_answer) {
            result.rejected.push_back({text, RejectReason::EqualsAnswer});
            earlier.push_back(text);
            continue;
        }
        if (std::find(earlier.begin(), earlier.end(), text) != earlier.end()) {
            result.rejected.push_back({text, RejectReason::DuplicateWithinBatch});
            continue;
        }
        earlier.push_back(text);
        const ValidityCheck check =
            check_distractor_validity_detail(item, text, validity_judge, cfg, warnings);
        if (check.usable) {
            result.accepted.push_back(Distractor{text, Origin::synthetic(), std::nullopt});
        } else {
            result.rejected.push_back(
                {text, check.parse_failed ? RejectReason::ParseFailure : RejectReason::FailedValidity});
        }
    }
    if (result.accepted.empty()) {
        result.excluded = true;
        result.exclusion_reason = "no-valid-synthetics";
    }
    return result;
}

RankedDistractorList build_ranked_list(const McqItem& item,
                                       const std::vector<Distractor>& accepted,
                                       RankerPromptVariant variant, ChatClient& client,
                                       const ProtocolConfig& cfg,
                                       std::vector<PairJudgment>* judgments_out,
                                       WarningLog* warnings) {
    RankedDistractorList list;
    list.item_id = item.id;

    // Rate order over the human distractors; ties keep original list position.
    std::vector<std::size_t> human_indices;
    for (std::size_t i = 0; i < item.distractors.size(); ++i) {
        const auto& d = item.distractors[i];
        if (d.origin.kind == Origin::Kind::Human && d.selection_rate) human_indices.push_back(i);
    }
    if (human_indices.empty()) {
        throw ConfigError("build_ranked_list requires at least one rated human distractor: " +
                          item.id);
    }
    std::stable_sort(human_indices.begin(), human_indices.end(), [&](std::size_t a, std::size_t b) {
        return *item.distractors[a].selection_rate > *item.distractors[b].selection_rate;
    });
    for (std::size_t idx : human_indices) {
        list.entries.push_back(item.distractors[idx]);
        list.provenance.push_back(EntryProvenance::RateOrdered);
    }

    // Binary insertion: only the incoming synthetic is ever compared, so
    // human-human comparisons never reach the backend.
    for (const auto& synthetic : accepted) {
        std::size_t lo = 0;
        std::size_t hi = list.entries.size();
        bool abandoned = false;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            PairJudgment j = judge_pair(item, synthetic, list.entries[mid], variant, client, cfg);
            const bool synthetic_wins = j.winner_index == 0;
            const bool blind = j.resolved_by == Resolution::RandomFallback && !j.any_parsed;
            if (judgments_out) judgments_out->push_back(std::move(j));
            if (blind) {
                abandoned = true;
                break;
            }
            if (synthetic_wins) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        const std::size_t pos = abandoned ? list.entries.size() : lo;
        if (abandoned && warnings) {
            warnings->warn("ranker unparseable while inserting synthetic for item " + item.id +
                           "; appended at the bottom");
        }
        list.entries.insert(list.entries.begin() + static_cast<std::ptrdiff_t>(pos), synthetic);
        list.provenance.insert(list.provenance.begin() + static_cast<std::ptrdiff_t>(pos),
                               EntryProvenance::ComparisonInserted);
    }
    return list;
}

std::string scd_to_json_line(const RankedDistractorList& list) {
    ordered_json obj;
    obj["item_id"] = list.item_id;
    ordered_json entries = ordered_json::array();
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
        ordered_json e;
        e["text"] = list.entries[i].text;
        e["origin"] = origin_to_string(list.entries[i].origin);
        e["rank"] = i + 1;
        entries.push_back(std::move(e));
    }
    obj["entries"] = std::move(entries);
    obj["excluded"] = list.excluded;
    if (list.excluded) obj["exclusion_reason"] = list.exclusion_reason;
    return obj.dump();
}

void write_scd_file(const std::string& path, const std::vector<RankedDistractorList>& lists) {
    std::ostringstream out;
    for (const auto& list : lists) out << scd_to_json_line(list) << "\n";
    write_file(path, out.str());
}

std::vector<RankedDistractorList> read_scd_file(const std::string& path) {
    std::vector<RankedDistractorList> lists;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad SCD line: ") + e.what());
        }
        RankedDistractorList list;
        list.item_id = obj.at("item_id").get<std::string>();
        for (const auto& e : obj.at("entries")) {
            Distractor d;
            d.text = e.at("text").get<std::string>();
            d.origin = origin_from_string(e.at("origin").get<std::string>());
            list.entries.push_back(std::move(d));
            list.provenance.push_back(list.entries.back().origin.kind == Origin::Kind::Human
                                          ? EntryProvenance::RateOrdered
                                          : EntryProvenance::ComparisonInserted);
        }
        list.excluded = obj.value("excluded", false);
        list.exclusion_reason = obj.value("exclusion_reason", std::string{});
        lists.push_back(std::move(list));
    }
    return lists;
}

std::string augmentation_to_json_line(const AugmentationResult& result) {
    ordered_json obj;
    obj["item_id"] = result.item_id;
    ordered_json accepted = ordered_json::array();
    for (const auto& d : result.accepted) {
        accepted.push_back(ordered_json{{"text", d.text}, {"origin", origin_to_string(d.origin)}});
    }
    obj["accepted"] = std::move(accepted);
    ordered_json rejected = ordered_json::array();
    for (const auto& r : result.rejected) {
        rejected.push_back(
            ordered_json{{"text", r.text}, {"reason", reject_reason_to_string(r.reason)}});
    }
    obj["rejected"] = std::move(rejected);
    obj["excluded"] = result.excluded;
    if (result.excluded) obj["exclusion_reason"] = result.exclusion_reason;
    return obj.dump();
}

void write_augmentation_file(const std::string& path,
                             const std::vector<AugmentationResult>& results) {
    std::ostringstream out;
    for (const auto& r : results) out << augmentation_to_json_line(r) << "\n";
    write_file(path, out.str());
}

std::vector<AugmentationResult> read_augmentation_file(const std::string& path) {
    std::vector<AugmentationResult> results;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad augmentation line: ") + e.what());
        }
        AugmentationResult r;
        r.item_id = obj.at("item_id").get<std::string>();
        for (const auto& a : obj.at("accepted")) {
            r.accepted.push_back(Distractor{a.at("text").get<std::string>(),
                                            origin_from_string(a.at("origin").get<std::string>()),
                                            std::nullopt});
        }
        if (obj.contains("rejected")) {
            for (const auto& rj : obj.at("rejected")) {
                RejectedCandidate cand;
                cand.text = rj.at("text").get<std::string>();
                const std::string reason = rj.at("reason").get<std::string>();
                if (reason == "duplicate-of-original") {
                    cand.reason = RejectReason::DuplicateOfOriginal;
                } else if (reason == "duplicate-within-batch") {
                    cand.reason = RejectReason::DuplicateWithinBatch;
                } else if (reason == "equals-answer") {
                    cand.reason = RejectReason::EqualsAnswer;
                } else if (reason == "parse-failure") {
                    cand.reason = RejectReason::ParseFailure;
                } else {
                    cand.reason = RejectReason::FailedValidity;
                }
                r.rejected.push_back(std::move(cand));
            }
        }
        r.excluded = obj.value("excluded", false);
        r.exclusion_reason = obj.value("exclusion_reason", std::string{});
        results.push_back(std::move(r));
    }
    return results;
}

double mean_synthetics_in_top3(const std::vector<RankedDistractorList>& lists) {
    std::int64_t total = 0;
    std::int64_t included = 0;
    for (const auto& list : lists) {
        if (list.excluded) continue;
        ++included;
        const std::size_t top = std::min<std::size_t>(3, list.entries.size());
        for (std::size_t i = 0; i < top; ++i) {
            if (list.entries[i].origin.kind != Origin::Kind::Human) ++total;
        }
    }
    return included == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(included);
}

} // namespace forge
