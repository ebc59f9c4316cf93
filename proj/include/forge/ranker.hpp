#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/client.hpp"
#include "forge/mcq.hpp"
#include "forge/prompts.hpp"

namespace forge {

struct ProtocolConfig {
    double temperature = 0.5;
    int attempt_cap = 10;
    std::uint64_t rng_seed = 0;
    int fan_out = 8; // bounded parallel width for independent pairs/items
};

enum class Resolution { Agreement, RandomFallback };

std::string resolution_to_string(Resolution r);

/// Stable per-judgment exchange reference: (attempt, orientation) identifies a
/// call regardless of how parallel pairs interleave in the audit log.
struct ExchangeRef {
    int attempt = 0;
    bool first_orientation = true; // true: (A=d1, B=d2); false: (A=d2, B=d1)
};

/// Outcome of one order-swap comparison. One attempt is a pair of calls, AB
/// and BA; agreement on the underlying distractor ends the loop, and after
/// attempt_cap disagreements the winner comes from the pair's derived random
/// stream.
struct PairJudgment {
    std::string item_id;
    Distractor first;
    Distractor second;
    int winner_index = 0; // 0 = first argument, 1 = second
    std::string reasoning;
    int attempts = 0;
    Resolution resolved_by = Resolution::Agreement;
    std::vector<ExchangeRef> exchanges;
    bool any_parsed = false; // false when every call of every attempt was unparseable

    const Distractor& winner() const { return winner_index == 0 ? first : second; }
};

/// Judges which of two distractors students are more likely to choose, with
/// both presentation orders per attempt at cfg.temperature. The BA call's
/// token is remapped to the underlying distractor before comparison; an
/// unparseable response counts as disagreement for that attempt. Transport
/// errors propagate.
PairJudgment judge_pair(const McqItem& item, const Distractor& d1, const Distractor& d2,
                        RankerPromptVariant variant, ChatClient& client,
                        const ProtocolConfig& cfg);

struct RankAccuracyReport {
    std::map<std::string, double> per_subject; // mean accuracy over repetitions
    double overall_macro = 0.0;                // equal-weight mean across subjects
    double overall_micro = 0.0;                // pooled across all judgments
    int repetitions = 1;
    std::vector<PairJudgment> judgments;       // ordered by (repetition, pair index)
};

/// Fraction of pairs where the protocol winner is the distractor with the
/// higher student selection rate; judged once per pair per repetition.
/// Fallback-resolved judgments count like any other. Throws on an empty list.
RankAccuracyReport rank_accuracy(const std::vector<GroundTruthPair>& pairs,
                                 const ItemIndex& items, RankerPromptVariant variant,
                                 ChatClient& client, const ProtocolConfig& cfg,
                                 int repetitions);

struct ConsistencyReport {
    std::map<std::string, double> per_question; // item id -> mean attempts
    std::map<std::string, double> per_subject;  // mean over that subject's questions
    double overall_macro = 0.0;
};

/// Mean attempts needed for order-consistent prediction, grouped by question,
/// averaged per subject. Subjects come from the item index.
ConsistencyReport consistency_metric(const std::vector<PairJudgment>& judgments,
                                     const ItemIndex& items);

/// Judges every unordered pair once and orders by descending win count; ties
/// keep the original list position.
std::vector<Distractor> round_robin_rank(const McqItem& item, const std::vector<Distractor>& ds,
                                         RankerPromptVariant variant, ChatClient& client,
                                         const ProtocolConfig& cfg,
                                         std::vector<PairJudgment>* judgments_out = nullptr);

/// One line-delimited record per judgment: item id, both texts hashed and
/// verbatim, winner, attempts, resolution, and stable exchange refs.
std::string judgment_to_json_line(const PairJudgment& j);
void write_judgment_log(const std::string& path, const std::vector<PairJudgment>& judgments);
std::vector<PairJudgment> read_judgment_log(const std::string& path);

} // namespace forge
