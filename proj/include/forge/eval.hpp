#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/client.hpp"
#include "forge/mcq.hpp"
#include "forge/prompts.hpp"
#include "forge/ranker.hpp"
#include "forge/scd.hpp"

namespace forge {

struct KnnContext {
    const std::vector<McqItem>* pool = nullptr; // in-context example pool (training split)
    EmbeddingClient* embedder = nullptr;
    int k = 3;
};

struct GeneratorSource {
    std::string name; // unique within a tournament
    ChatClient* client = nullptr;
    enum class PromptKind { Standard, KnnBaseline } prompt_kind = PromptKind::Standard;
    KnnContext knn; // used only for KnnBaseline
};

struct GeneratedDistractors {
    std::vector<Distractor> distractors; // origin = model(source name)
    bool shortfall = false;              // fewer than requested after max_rounds
};

/// Calls the source until n validity-checked, deduplicated distractors are
/// collected or max_rounds is exhausted. kNN sources retrieve 3 neighbours
/// and fill the kNN prompt; standard sources ask for the remaining count.
GeneratedDistractors generate_distractors(const GeneratorSource& source, const McqItem& item,
                                          int n, double temperature, int max_rounds,
                                          ChatClient& validity_judge, const ProtocolConfig& cfg,
                                          WarningLog* warnings = nullptr);

enum class TournamentSetting { A, B };

struct TournamentCounts {
    // Per-distractor points: wins_x == loses_y and wins_y == loses_x.
    int wins_x = 0, loses_x = 0, wins_y = 0, loses_y = 0;
    // Per-question outcomes over scored questions.
    int win_x = 0, tie = 0, win_y = 0;
    int skipped = 0;

    void add(const TournamentCounts& other);
};

struct SkippedQuestion {
    std::string item_id;
    std::string reason;
};

/// One source's generated distractors for one question.
struct SourceOutput {
    std::string source;
    std::string item_id;
    std::vector<std::string> distractors;
    bool shortfall = false;
};

struct TournamentReport {
    TournamentSetting setting = TournamentSetting::A;
    std::string source_x;
    std::string source_y;
    TournamentCounts overall;
    std::map<std::string, TournamentCounts> per_subject;
    std::vector<SkippedQuestion> skipped;
    std::vector<PairJudgment> judgments;
    std::vector<SourceOutput> outputs; // generated sets per question, before exclusion
};

struct TournamentOptions {
    double setting_b_temperature = 1.0; // raised sampling temperature for Setting B
    int max_rounds = 3;                 // regeneration rounds per source per question
};

/// Head-to-head plausibility tournament between two generator sources.
/// Setting A: up to 3 valid distractors each at the source's own temperature.
/// Setting B: up to 5 valid at the raised temperature, then (after exclusion)
/// each side keeps its top 3 by a within-source round robin. Texts identical
/// across sources are excluded from both sides; every remaining cross pair is
/// judged; a question with an empty side is skipped and counted.
TournamentReport plausibility_tournament(const GeneratorSource& source_x,
                                         const GeneratorSource& source_y,
                                         const std::vector<McqItem>& items,
                                         TournamentSetting setting, RankerPromptVariant variant,
                                         ChatClient& ranker, ChatClient& validity_judge,
                                         const ProtocolConfig& cfg,
                                         const TournamentOptions& options = {},
                                         WarningLog* warnings = nullptr);

struct MatrixItem {
    std::string question_id;
    std::string distractor_id;
    std::string source;
};

/// Restructured test results: each model-generated distractor is its own
/// true/false item, and a student is correct on it iff they did not select it.
struct StudentResponseMatrix {
    std::vector<std::string> students;
    std::vector<MatrixItem> items;
    std::vector<std::vector<bool>> selected; // [student][item]
    std::vector<double> scores;              // per-student mean correctness

    void compute_scores();
};

StudentResponseMatrix read_matrix_file(const std::string& path);
void write_matrix_file(const std::string& path, const StudentResponseMatrix& matrix);

struct DiscriminationReport {
    std::vector<double> per_item;              // aligned with matrix.items
    std::map<std::string, double> per_source;  // mean DI over the source's items
    int group_size = 0;
};

/// DI = (U - L) / N with the upper/lower groups the top and bottom
/// floor(cutoff * S) students by score (ties broken by student id).
DiscriminationReport discrimination_index(const StudentResponseMatrix& matrix,
                                          double cutoff = 0.27);

struct SelectionCountReport {
    std::map<std::string, int> upper_half; // source -> selections by top students
    std::map<std::string, int> lower_half;
    std::map<std::string, int> total;
};

/// Selection counting over a score split (default halves), the companion
/// analysis to the discrimination index.
SelectionCountReport selection_counts(const StudentResponseMatrix& matrix, double cutoff = 0.5);

std::string source_output_to_json_line(const SourceOutput& output);
void write_source_outputs(const std::string& path, const std::vector<SourceOutput>& outputs);
std::vector<SourceOutput> read_source_outputs(const std::string& path);

struct MeanVariance {
    double mean = 0.0;
    double variance = 0.0; // population variance
    int count = 0;
};

/// Cosine similarity between each answer and each generated distractor,
/// aggregated per source and subject.
std::map<std::string, std::map<std::string, MeanVariance>> embedding_similarity_report(
    const std::vector<SourceOutput>& outputs, const ItemIndex& items, EmbeddingClient& embedder);

/// Smoothed sentence BLEU of each generated distractor against its question's
/// human-authored distractors (best match), aggregated per source and subject.
std::map<std::string, std::map<std::string, MeanVariance>> bleu_similarity_report(
    const std::vector<SourceOutput>& outputs, const ItemIndex& items);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Top-k pool items by cosine similarity of the embedded "question\nanswer"
/// text, ties broken by pool order; the target itself is excluded by id.
std::vector<McqItem> knn_retrieve(const McqItem& target, const std::vector<McqItem>& pool,
                                  EmbeddingClient& embedder, int k = 3);

struct ValidityCell {
    int valid = 0;
    int total = 0;
    double rate() const { return total == 0 ? 0.0 : static_cast<double>(valid) / total; }
};

/// Share of usable distractors per source, split by question polarity and
/// kind. Cells with no observations are absent from the map.
std::map<std::string, std::map<std::string, ValidityCell>> validity_rate(
    const std::vector<SourceOutput>& outputs, const ItemIndex& items, ChatClient& validity_judge,
    const ProtocolConfig& cfg, WarningLog* warnings = nullptr);

} // namespace forge
