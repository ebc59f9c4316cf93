#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/client.hpp"
#include "forge/mcq.hpp"
#include "forge/ranker.hpp"
#include "forge/scd.hpp"
#include "forge/util.hpp"

namespace forge {

struct RecordTags {
    std::string role; // "ranker" | "generator"
    std::string item_id;
    std::map<std::string, std::string> params;
};

struct SftRecord {
    std::string prompt;
    std::string completion;
    RecordTags tags;
};

struct PreferenceRecord {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    RecordTags tags;
};

struct EmitOptions {
    /// Cap on ground-truth pairs drawn per item (unset = all unordered pairs).
    std::optional<int> max_pairs_per_item;
};

/// Teacher-labeled reasoning data for the ranker. For each ground-truth pair
/// the A/B slot assignment comes from the seeded stream, the teacher prompt
/// carries the true winner, and two completions are requested at temperature
/// 0 and 1. Completions whose parsed choice contradicts the ground truth are
/// dropped with a warning. The stored prompt is the inference-time Reasoning
/// prompt, not the teacher prompt; tags.params["truth"] records the winning slot.
std::vector<SftRecord> emit_ranker_sft(const std::vector<McqItem>& train, ChatClient& teacher,
                                       const ProtocolConfig& cfg, const EmitOptions& opts = {},
                                       WarningLog* warnings = nullptr);

/// Runs the SFT model once per record prompt (no order-swap protocol) and
/// emits a preference record wherever the parsed choice diverges from the
/// ground truth: chosen = the original teacher completion, rejected = the SFT
/// model's full output. Unparseable outputs count as divergence.
std::vector<PreferenceRecord> emit_ranker_dpo(const std::vector<SftRecord>& sft_records,
                                              ChatClient& sft_model, const ProtocolConfig& cfg,
                                              WarningLog* warnings = nullptr);

/// One record per (item, n) for n = 1..k: the generator prompt asking for n
/// distractors, completed with the type line (from stored polarity) and the
/// top-n entries in rank order. Excluded lists are skipped.
std::vector<SftRecord> emit_generator_sft(const std::vector<RankedDistractorList>& scd,
                                          const ItemIndex& items, WarningLog* warnings = nullptr);

enum class DpoScheme { TopBottom, SlidingWindow };

/// top-bottom: n = floor(k/2); every (top-n, bottom-n) pair yields one record
/// with the n=1 prompt, the higher-ranked entry as chosen. sliding-window:
/// non-overlapping windows of window_n over the descending list (last window
/// may be short); every ordered window pair emits its cross product.
std::vector<PreferenceRecord> emit_generator_dpo(const std::vector<RankedDistractorList>& scd,
                                                 const ItemIndex& items, DpoScheme scheme,
                                                 std::optional<int> window_n = std::nullopt,
                                                 WarningLog* warnings = nullptr);

std::string sft_to_json_line(const SftRecord& record);
std::string preference_to_json_line(const PreferenceRecord& record);
void write_sft_file(const std::string& path, const std::vector<SftRecord>& records);
void write_preference_file(const std::string& path, const std::vector<PreferenceRecord>& records);
std::vector<SftRecord> read_sft_file(const std::string& path);

} // namespace forge
