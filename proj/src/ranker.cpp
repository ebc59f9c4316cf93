#include "forge/ranker.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/errors.hpp"
#include "forge/util.hpp"

namespace forge {

using ordered_json = nlohmann::ordered_json;

std::string resolution_to_string(Resolution r) {
    return r == Resolution::Agreement ? "agreement" : "random-fallback";
}

PairJudgment judge_pair(const McqItem& item, const Distractor& d1, const Distractor& d2,
                        RankerPromptVariant variant, ChatClient& client,
                        const ProtocolConfig& cfg) {
    if (trim(d1.text) == trim(d2.text)) {
        throw ConfigError("judge_pair requires two distinct distractor texts");
    }
    if (cfg.attempt_cap < 1) throw ConfigError("attempt_cap must be >= 1");

    const std::string prompt_ab =
        render_ranker_prompt(variant, item.question, item.answer, d1.text, d2.text);
    const std::string prompt_ba =
        render_ranker_prompt(variant, item.question, item.answer, d2.text, d1.text);

    PairJudgment result;
    result.item_id = item.id;
    result.first = d1;
    result.second = d2;

    std::string last_first_reasoning;
    bool last_first_parsed = false;
    for (int attempt = 1; attempt <= cfg.attempt_cap; ++attempt) {
        const std::string r_ab = client.chat_complete(prompt_ab, cfg.temperature);
        result.exchanges.push_back({attempt, true});
        const std::string r_ba = client.chat_complete(prompt_ba, cfg.temperature);
        result.exchanges.push_back({attempt, false});

        // Token -> underlying distractor. In the BA call the slots are swapped.
        std::optional<int> pick_ab;
        std::optional<int> pick_ba;
        last_first_parsed = false;
        try {
            const ParsedRankerOutput p = parse_ranker_output(r_ab);
            pick_ab = p.choice == ChoiceToken::A ? 0 : 1;
            last_first_reasoning = p.reasoning;
            last_first_parsed = true;
            result.any_parsed = true;
        } catch (const ParseError&) {
        }
        try {
            const ParsedRankerOutput p = parse_ranker_output(r_ba);
            pick_ba = p.choice == ChoiceToken::A ? 1 : 0;
            result.any_parsed = true;
        } catch (const ParseError&) {
        }

        if (pick_ab && pick_ba && *pick_ab == *pick_ba) {
            result.winner_index = *pick_ab;
            result.attempts = attempt;
            result.resolved_by = Resolution::Agreement;
            result.reasoning = last_first_reasoning;
            return result;
        }
    }

    // Uniform draw from a stream keyed by (seed, item, unordered pair), so the
    // outcome is independent of both scheduling and argument order.
    const auto [lo, hi] = std::minmax(d1.text, d2.text);
    SeededStream stream(derive_seed(cfg.rng_seed, {item.id, lo, hi}));
    const std::string& winner_text = stream.next_bit() ? hi : lo;
    result.winner_index = winner_text == d1.text ? 0 : 1;
    result.attempts = cfg.attempt_cap;
    result.resolved_by = Resolution::RandomFallback;
    result.reasoning = last_first_parsed ? last_first_reasoning : std::string{};
    return result;
}

RankAccuracyReport rank_accuracy(const std::vector<GroundTruthPair>& pairs,
                                 const ItemIndex& items, RankerPromptVariant variant,
                                 ChatClient& client, const ProtocolConfig& cfg,
                                 int repetitions) {
    if (pairs.empty()) throw ConfigError("rank_accuracy requires at least one ground-truth pair");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");

    RankAccuracyReport report;
    report.repetitions = repetitions;

    std::map<std::string, std::pair<std::int64_t, std::int64_t>> by_subject; // correct, total
    std::int64_t correct_total = 0;

    for (int rep = 0; rep < repetitions; ++rep) {
        std::vector<PairJudgment> judgments(pairs.size());
        parallel_for(pairs.size(), cfg.fan_out, [&](std::size_t i) {
            const auto& pair = pairs[i];
            const auto it = items.find(pair.item_id);
            if (it == items.end()) throw ConfigError("unknown item id in pair: " + pair.item_id);
            judgments[i] = judge_pair(it->second, pair.d_high, pair.d_low, variant, client, cfg);
        });
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto& item = items.at(pairs[i].item_id);
            const bool correct = judgments[i].winner().text == pairs[i].d_high.text;
            auto& cell = by_subject[item.subject];
            cell.first += correct ? 1 : 0;
            cell.second += 1;
            correct_total += correct ? 1 : 0;
            report.judgments.push_back(std::move(judgments[i]));
        }
    }

    double macro_sum = 0.0;
    for (const auto& [subject, cell] : by_subject) {
        const double acc = static_cast<double>(cell.first) / static_cast<double>(cell.second);
        report.per_subject[subject] = acc;
        macro_sum += acc;
    }
    report.overall_macro = macro_sum / static_cast<double>(by_subject.size());
    report.overall_micro =
        static_cast<double>(correct_total) / static_cast<double>(pairs.size() * repetitions);
    return report;
}

ConsistencyReport consistency_metric(const std::vector<PairJudgment>& judgments,
                                     const ItemIndex& items) {
    if (judgments.empty()) throw ConfigError("consistency_metric requires judgments");
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> per_question; // sum, count
    for (const auto& j : judgments) {
        auto& cell = per_question[j.item_id];
        cell.first += j.attempts;
        cell.second += 1;
    }
    ConsistencyReport report;
    std::map<std::string, std::pair<double, int>> subject_acc; // sum of question means, count
    for (const auto& [item_id, cell] : per_question) {
        const double mean = static_cast<double>(cell.first) / static_cast<double>(cell.second);
        report.per_question[item_id] = mean;
        const auto it = items.find(item_id);
        const std::string subject = it != items.end() ? it->second.subject : std::string("unknown");
        auto& acc = subject_acc[subject];
        acc.first += mean;
        acc.second += 1;
    }
    double macro_sum = 0.0;
    for (const auto& [subject, acc] : subject_acc) {
        const double mean = acc.first / acc.second;
        report.per_subject[subject] = mean;
        macro_sum += mean;
    }
    report.overall_macro = macro_sum / static_cast<double>(subject_acc.size());
    return report;
}

std::vector<Distractor> round_robin_rank(const McqItem& item, const std::vector<Distractor>& ds,
                                         RankerPromptVariant variant, ChatClient& client,
                                         const ProtocolConfig& cfg,
                                         std::vector<PairJudgment>* judgments_out) {
    if (ds.size() < 2) throw ConfigError("round_robin_rank requires at least two distractors");
    std::vector<std::pair<std::size_t, std::size_t>> matches;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = i + 1; j < ds.size(); ++j) {
            matches.emplace_back(i, j);
        }
    }
    std::vector<PairJudgment> judgments(matches.size());
    parallel_for(matches.size(), cfg.fan_out, [&](std::size_t m) {
        const auto [i, j] = matches[m];
        judgments[m] = judge_pair(item, ds[i], ds[j], variant, client, cfg);
    });

    std::vector<int> wins(ds.size(), 0);
    for (std::size_t m = 0; m < matches.size(); ++m) {
        const auto [i, j] = matches[m];
        wins[judgments[m].winner_index == 0 ? i : j] += 1;
    }
    if (judgments_out) {
        judgments_out->insert(judgments_out->end(), judgments.begin(), judgments.end());
    }

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return wins[a] > wins[b]; });
    std::vector<Distractor> ranked;
    ranked.reserve(ds.size());
    for (std::size_t idx : order) ranked.push_back(ds[idx]);
    return ranked;
}

std::string judgment_to_json_line(const PairJudgment& j) {
    ordered_json obj;
    obj["item_id"] = j.item_id;
    obj["a_text"] = j.first.text;
    obj["b_text"] = j.second.text;
    obj["a_sha256"] = sha256_hex(j.first.text);
    obj["b_sha256"] = sha256_hex(j.second.text);
    obj["winner"] = j.winner_index == 0 ? "a" : "b";
    obj["winner_text"] = j.winner().text;
    obj["attempts"] = j.attempts;
    obj["resolved_by"] = resolution_to_string(j.resolved_by);
    ordered_json exchanges = ordered_json::array();
    for (const auto& ex : j.exchanges) {
        exchanges.push_back(ordered_json{{"attempt", ex.attempt},
                                         {"orientation", ex.first_orientation ? "ab" : "ba"}});
    }
    obj["exchanges"] = std::move(exchanges);
    return obj.dump();
}

void write_judgment_log(const std::string& path, const std::vector<PairJudgment>& judgments) {
    std::ostringstream out;
    for (const auto& j : judgments) out << judgment_to_json_line(j) << "\n";
    write_file(path, out.str());
}

std::vector<PairJudgment> read_judgment_log(const std::string& path) {
    std::vector<PairJudgment> out;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad judgment log line: ") + e.what());
        }
        PairJudgment j;
        j.item_id = obj.at("item_id").get<std::string>();
        j.first.text = obj.at("a_text").get<std::string>();
        j.second.text = obj.at("b_text").get<std::string>();
        j.winner_index = obj.at("winner").get<std::string>() == "a" ? 0 : 1;
        j.attempts = obj.at("attempts").get<int>();
        j.resolved_by = obj.at("resolved_by").get<std::string>() == "agreement"
                            ? Resolution::Agreement
                            : Resolution::RandomFallback;
        out.push_back(std::move(j));
    }
    return out;
}

} // namespace forge
