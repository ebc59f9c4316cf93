#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace forge {

/// Where a distractor came from: authored by a human (carries a student
/// selection rate), synthesized during augmentation, or produced by a named
/// generator under evaluation.
struct Origin {
    enum class Kind { Human, Synthetic, Model };
    Kind kind = Kind::Human;
    std::string source_id; // set only for Kind::Model

    static Origin human() { return {Kind::Human, {}}; }
    static Origin synthetic() { return {Kind::Synthetic, {}}; }
    static Origin model(std::string source) { return {Kind::Model, std::move(source)}; }

    bool operator==(const Origin&) const = default;
};

std::string origin_to_string(const Origin& o);
Origin origin_from_string(const std::string& s);

struct Distractor {
    std::string text;                      // non-empty after trimming
    Origin origin;
    std::optional<double> selection_rate;  // fraction of students who chose it
};

enum class QuestionKind { Code, Statement };
enum class Polarity { AskingCorrect, AskingIncorrect };

std::string kind_to_string(QuestionKind k);
QuestionKind kind_from_string(const std::string& s);
std::string polarity_to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct McqItem {
    std::string id;
    std::string subject;
    QuestionKind kind = QuestionKind::Statement;
    Polarity polarity = Polarity::AskingCorrect;
    std::string question;
    std::string answer;
    std::vector<Distractor> distractors;
    std::optional<double> correctness_rate;
    std::optional<int> num_students;
};

/// One ground-truth comparison: d_high was selected strictly more often than d_low.
struct GroundTruthPair {
    std::string item_id;
    Distractor d_high;
    Distractor d_low;
};

struct DatasetSplit {
    std::vector<McqItem> train;
    std::vector<McqItem> test;
};

using ItemIndex = std::unordered_map<std::string, McqItem>;

ItemIndex build_item_index(const DatasetSplit& split);

struct LoadOptions {
    /// When true, a record may omit `polarity`; it is then pre-filled by
    /// tag_polarity_heuristic. A stored value always wins over the heuristic.
    bool heuristic_polarity = false;
};

/// Loads a line-delimited JSON dataset, enforcing every type invariant.
/// Errors name the offending line number and field.
DatasetSplit load_dataset(const std::string& path, const LoadOptions& opts = {});

/// Serializes with the canonical field order; load then save round-trips
/// canonical files byte-identically.
std::string serialize_dataset(const DatasetSplit& split);
void save_dataset(const std::string& path, const DatasetSplit& split);

/// Substring scan for negation cues in the question text. Brittle by nature;
/// only used to pre-fill a missing polarity field on request.
Polarity tag_polarity_heuristic(const std::string& question);

/// All unordered pairs of rated human distractors with strictly unequal
/// selection rates, oriented so d_high has the larger rate. Ties are omitted.
/// Ordered by (index of d_high, index of d_low) in the item's distractor list.
std::vector<GroundTruthPair> derive_ground_truth_pairs(const McqItem& item);

} // namespace forge
