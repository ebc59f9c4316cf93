#pragma once

#include <optional>
#include <string>
#include <vector>

#include "forge/client.hpp"
#include "forge/mcq.hpp"
#include "forge/ranker.hpp"
#include "forge/util.hpp"

namespace forge {

enum class EntryProvenance { RateOrdered, ComparisonInserted };

/// Total plausibility order over one question's distractors, rank 1 first.
/// The human entries always appear in strictly descending selection-rate
/// order; synthetic entries are placed by comparison.
struct RankedDistractorList {
    std::string item_id;
    std::vector<Distractor> entries;
    std::vector<EntryProvenance> provenance; // parallel to entries
    bool excluded = false;
    std::string exclusion_reason;
};

enum class RejectReason {
    DuplicateOfOriginal,
    DuplicateWithinBatch,
    EqualsAnswer,
    FailedValidity,
    ParseFailure,
};

std::string reject_reason_to_string(RejectReason r);

struct RejectedCandidate {
    std::string text;
    RejectReason reason = RejectReason::FailedValidity;
};

struct AugmentationResult {
    std::string item_id;
    std::vector<Distractor> accepted; // origin = synthetic
    std::vector<RejectedCandidate> rejected;
    bool excluded = false; // no valid synthetic distractor; item leaves the SCD
    std::string exclusion_reason;
};

struct ValidityCheck {
    bool usable = false;      // true iff the verdict was "invalid" (a real distractor)
    bool parse_failed = false; // every attempt was unparseable
    int attempts = 0;
};

/// Renders the validity prompt and applies the decision rule: an option judged
/// "invalid" (not a correct answer) is usable as a distractor. Unparseable
/// responses retried up to cfg.attempt_cap, then treated as unusable with a
/// recorded warning.
bool check_distractor_validity(const McqItem& item, const std::string& candidate,
                               ChatClient& client, const ProtocolConfig& cfg,
                               WarningLog* warnings = nullptr);
ValidityCheck check_distractor_validity_detail(const McqItem& item, const std::string& candidate,
                                               ChatClient& client, const ProtocolConfig& cfg,
                                               WarningLog* warnings = nullptr);

/// Asks the teacher backend for 3 new distractors, drops exact duplicates of
/// the originals / the answer / earlier candidates, then validity-gates the
/// survivors. A whole-response parse failure earns one regeneration attempt.
AugmentationResult augment_distractors(const McqItem& item, ChatClient& teacher,
                                       ChatClient& validity_judge, const ProtocolConfig& cfg,
                                       WarningLog* warnings = nullptr);

/// Seeds the list with human distractors in descending selection-rate order
/// (never compared against each other), then binary-inserts each accepted
/// synthetic in acceptance order using judge_pair as the comparator. A probe
/// that never parsed anything sends the synthetic to the bottom with a warning.
RankedDistractorList build_ranked_list(const McqItem& item,
                                       const std::vector<Distractor>& accepted,
                                       RankerPromptVariant variant, ChatClient& client,
                                       const ProtocolConfig& cfg,
                                       std::vector<PairJudgment>* judgments_out = nullptr,
                                       WarningLog* warnings = nullptr);

std::string scd_to_json_line(const RankedDistractorList& list);
void write_scd_file(const std::string& path, const std::vector<RankedDistractorList>& lists);
std::vector<RankedDistractorList> read_scd_file(const std::string& path);

std::string augmentation_to_json_line(const AugmentationResult& result);
void write_augmentation_file(const std::string& path, const std::vector<AugmentationResult>& results);
std::vector<AugmentationResult> read_augmentation_file(const std::string& path);

/// Share of synthetic entries among the top 3 ranks, averaged over included
/// lists; the headline statistic of the student choice dataset.
double mean_synthetics_in_top3(const std::vector<RankedDistractorList>& lists);

} // namespace forge
