#include "forge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/bleu.hpp"
#include "forge/errors.hpp"
#include "forge/util.hpp"

namespace forge {

using ordered_json = nlohmann::ordered_json;

void TournamentCounts::add(const TournamentCounts& other) {
    wins_x += other.wins_x;
    loses_x += other.loses_x;
    wins_y += other.wins_y;
    loses_y += other.loses_y;
    win_x += other.win_x;
    tie += other.tie;
    win_y += other.win_y;
    skipped += other.skipped;
}

GeneratedDistractors generate_distractors(const GeneratorSource& source, const McqItem& item,
                                          int n, double temperature, int max_rounds,
                                          ChatClient& validity_judge, const ProtocolConfig& cfg,
                                          WarningLog* warnings) {
    if (n < 1) throw ConfigError("generate_distractors requires n >= 1");
    if (!source.client) throw ConfigError("generator source has no chat client");

    GeneratedDistractors result;
    const std::string trimmed_answer = trim(item.answer);
    auto already_kept = [&](const std::string& text) {
        return std::any_of(result.distractors.begin(), result.distractors.end(),
                           [&](const Distractor& d) { return d.text == text; });
    };

    for (int round = 0; round < max_rounds; ++round) {
        const int remaining = n - static_cast<int>(result.distractors.size());
        if (remaining <= 0) break;

        std::string prompt;
        if (source.prompt_kind == GeneratorSource::PromptKind::KnnBaseline) {
            if (!source.knn.pool || !source.knn.embedder) {
                throw ConfigError("kNN source requires a pool and an embedding client");
            }
            // Neighbours need 3 distractors each to fill the example blocks.
            std::vector<McqItem> eligible;
            for (const auto& candidate : *source.knn.pool) {
                if (candidate.distractors.size() >= 3) eligible.push_back(candidate);
            }
            const std::vector<McqItem> neighbours =
                knn_retrieve(item, eligible, *source.knn.embedder, source.knn.k);
            std::vector<KnnExample> examples;
            for (const auto& neighbour : neighbours) {
                KnnExample ex;
                ex.question = neighbour.question;
                ex.answer = neighbour.answer;
                for (std::size_t i = 0; i < 3; ++i) ex.distractors.push_back(neighbour.distractors[i].text);
                examples.push_back(std::move(ex));
            }
            prompt = render_knn_prompt(examples, item.question, item.answer);
        } else {
            prompt = render_generator_prompt(item.question, item.answer, remaining);
        }

        const std::string response = source.client->chat_complete(prompt, temperature);
        std::vector<std::string> candidates;
        try {
            if (source.prompt_kind == GeneratorSource::PromptKind::KnnBaseline) {
                candidates = parse_knn_output(response);
            } else {
                candidates = parse_generator_output(response, remaining).distractors;
            }
        } catch (const ParseError& e) {
            if (warnings) {
                warnings->warn("generator response unparseable (" + source.name + ", item " +
                               item.id + "): " + e.what());
            }
            continue;
        }
        for (const auto& raw : candidates) {
            if (static_cast<int>(result.distractors.size()) >= n) break;
            const std::string text = trim(raw);
            if (text.empty() || text == trimmed_answer || already_kept(text)) continue;
            if (check_distractor_validity(item, text, validity_judge, cfg, warnings)) {
                result.distractors.push_back(
                    Distractor{text, Origin::model(source.name), std::nullopt});
            }
        }
    }
    result.shortfall = static_cast<int>(result.distractors.size()) < n;
    return result;
}

namespace {

/// Removes texts present on both sides from both sides (trimmed exact match).
void exclude_identical(std::vector<Distractor>& xs, std::vector<Distractor>& ys) {
    std::set<std::string> x_texts;
    std::set<std::string> y_texts;
    for (const auto& d : xs) x_texts.insert(trim(d.text));
    for (const auto& d : ys) y_texts.insert(trim(d.text));
    std::set<std::string> shared;
    for (const auto& t : x_texts) {
        if (y_texts.count(t)) shared.insert(t);
    }
    auto drop = [&](std::vector<Distractor>& v) {
        v.erase(std::remove_if(v.begin(), v.end(),
                               [&](const Distractor& d) { return shared.count(trim(d.text)) > 0; }),
                v.end());
    };
    drop(xs);
    drop(ys);
}

} // namespace

TournamentReport plausibility_tournament(const GeneratorSource& source_x,
                                         const GeneratorSource& source_y,
                                         const std::vector<McqItem>& items,
                                         TournamentSetting setting, RankerPromptVariant variant,
                                         ChatClient& ranker, ChatClient& validity_judge,
                                         const ProtocolConfig& cfg,
                                         const TournamentOptions& options,
                                         WarningLog* warnings) {
    if (items.empty()) throw ConfigError("tournament requires at least one item");
    if (source_x.name == source_y.name) throw ConfigError("tournament sources must have distinct names");

    TournamentReport report;
    report.setting = setting;
    report.source_x = source_x.name;
    report.source_y = source_y.name;

    const int want = setting == TournamentSetting::A ? 3 : 5;

    for (const auto& item : items) {
        const double temp_x = setting == TournamentSetting::A ? source_x.client->config().temperature
                                                              : options.setting_b_temperature;
        const double temp_y = setting == TournamentSetting::A ? source_y.client->config().temperature
                                                              : options.setting_b_temperature;
        auto gen_x = generate_distractors(source_x, item, want, temp_x, options.max_rounds,
                                          validity_judge, cfg, warnings);
        auto gen_y = generate_distractors(source_y, item, want, temp_y, options.max_rounds,
                                          validity_judge, cfg, warnings);
        auto record_output = [&report, &item](const GeneratorSource& src,
                                              const GeneratedDistractors& gen) {
            SourceOutput out;
            out.source = src.name;
            out.item_id = item.id;
            for (const auto& d : gen.distractors) out.distractors.push_back(d.text);
            out.shortfall = gen.shortfall;
            report.outputs.push_back(std::move(out));
        };
        record_output(source_x, gen_x);
        record_output(source_y, gen_y);

        std::vector<Distractor> side_x = std::move(gen_x.distractors);
        std::vector<Distractor> side_y = std::move(gen_y.distractors);
        exclude_identical(side_x, side_y);

        if (setting == TournamentSetting::B) {
            // Keep each side's top 3 by a round robin within its own set.
            auto top3 = [&](std::vector<Distractor>& side) {
                if (side.size() <= 3) return;
                side = round_robin_rank(item, side, variant, ranker, cfg, &report.judgments);
                side.resize(3);
            };
            top3(side_x);
            top3(side_y);
        }

        TournamentCounts counts;
        if (side_x.empty() || side_y.empty()) {
            counts.skipped = 1;
            const std::string reason = side_x.empty() && side_y.empty()
                                           ? "both sides empty after validity and exclusion"
                                       : side_x.empty()
                                           ? source_x.name + " side empty after validity and exclusion"
                                           : source_y.name + " side empty after validity and exclusion";
            report.skipped.push_back({item.id, reason});
        } else {
            int points_x = 0;
            int points_y = 0;
            for (const auto& x : side_x) {
                for (const auto& y : side_y) {
                    PairJudgment j = judge_pair(item, x, y, variant, ranker, cfg);
                    if (j.winner_index == 0) {
                        ++points_x;
                    } else {
                        ++points_y;
                    }
                    report.judgments.push_back(std::move(j));
                }
            }
            counts.wins_x = points_x;
            counts.loses_y = points_x;
            counts.wins_y = points_y;
            counts.loses_x = points_y;
            if (points_x > points_y) {
                counts.win_x = 1;
            } else if (points_y > points_x) {
                counts.win_y = 1;
            } else {
                counts.tie = 1;
            }
        }
        report.per_subject[item.subject].add(counts);
        report.overall.add(counts);
    }
    return report;
}

void StudentResponseMatrix::compute_scores() {
    scores.assign(students.size(), 0.0);
    if (items.empty()) return;
    for (std::size_t s = 0; s < students.size(); ++s) {
        int correct = 0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (!selected[s][i]) ++correct;
        }
        scores[s] = static_cast<double>(correct) / static_cast<double>(items.size());
    }
}

StudentResponseMatrix read_matrix_file(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad matrix file: ") + e.what());
    }
    StudentResponseMatrix m;
    m.students = doc.at("students").get<std::vector<std::string>>();
    for (const auto& item : doc.at("items")) {
        m.items.push_back({item.at("question_id").get<std::string>(),
                           item.at("distractor_id").get<std::string>(),
                           item.at("source").get<std::string>()});
    }
    for (const auto& row : doc.at("selected")) {
        std::vector<bool> r;
        for (const auto& v : row) r.push_back(v.get<int>() != 0);
        m.selected.push_back(std::move(r));
    }
    if (m.selected.size() != m.students.size()) {
        throw ConfigError("matrix rows do not match student count");
    }
    for (const auto& row : m.selected) {
        if (row.size() != m.items.size()) throw ConfigError("matrix columns do not match item count");
    }
    m.compute_scores();
    return m;
}

void write_matrix_file(const std::string& path, const StudentResponseMatrix& matrix) {
    ordered_json doc;
    doc["students"] = matrix.students;
    ordered_json items = ordered_json::array();
    for (const auto& item : matrix.items) {
        items.push_back(ordered_json{{"question_id", item.question_id},
                                     {"distractor_id", item.distractor_id},
                                     {"source", item.source}});
    }
    doc["items"] = std::move(items);
    ordered_json rows = ordered_json::array();
    for (const auto& row : matrix.selected) {
        ordered_json r = ordered_json::array();
        for (bool v : row) r.push_back(v ? 1 : 0);
        rows.push_back(std::move(r));
    }
    doc["selected"] = std::move(rows);
    write_file(path, doc.dump(2) + "\n");
}

namespace {

/// Students ordered by score descending, ties by id ascending.
std::vector<std::size_t> score_order(const StudentResponseMatrix& matrix) {
    std::vector<std::size_t> order(matrix.students.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (matrix.scores[a] != matrix.scores[b]) return matrix.scores[a] > matrix.scores[b];
        return matrix.students[a] < matrix.students[b];
    });
    return order;
}

} // namespace

DiscriminationReport discrimination_index(const StudentResponseMatrix& matrix, double cutoff) {
    if (matrix.students.size() < 2) throw ConfigError("discrimination index requires >= 2 students");
    if (matrix.scores.size() != matrix.students.size()) {
        throw ConfigError("matrix scores not computed");
    }
    const auto order = score_order(matrix);
    const std::size_t group =
        static_cast<std::size_t>(cutoff * static_cast<double>(matrix.students.size()));
    if (group == 0) throw ConfigError("too few students for cutoff group");

    DiscriminationReport report;
    report.group_size = static_cast<int>(group);
    std::map<std::string, std::pair<double, int>> source_acc;
    for (std::size_t i = 0; i < matrix.items.size(); ++i) {
        int upper_correct = 0;
        int lower_correct = 0;
        for (std::size_t g = 0; g < group; ++g) {
            if (!matrix.selected[order[g]][i]) ++upper_correct;
            if (!matrix.selected[order[order.size() - group + g]][i]) ++lower_correct;
        }
        const double di =
            static_cast<double>(upper_correct - lower_correct) / static_cast<double>(group);
        report.per_item.push_back(di);
        auto& acc = source_acc[matrix.items[i].source];
        acc.first += di;
        acc.second += 1;
    }
    for (const auto& [source, acc] : source_acc) {
        report.per_source[source] = acc.first / acc.second;
    }
    return report;
}

SelectionCountReport selection_counts(const StudentResponseMatrix& matrix, double cutoff) {
    if (matrix.students.size() < 2) throw ConfigError("selection counting requires >= 2 students");
    const auto order = score_order(matrix);
    const std::size_t group =
        static_cast<std::size_t>(cutoff * static_cast<double>(matrix.students.size()));
    if (group == 0) throw ConfigError("too few students for cutoff group");

    SelectionCountReport report;
    for (std::size_t i = 0; i < matrix.items.size(); ++i) {
        const std::string& source = matrix.items[i].source;
        for (std::size_t g = 0; g < group; ++g) {
            if (matrix.selected[order[g]][i]) report.upper_half[source] += 1;
            if (matrix.selected[order[order.size() - group + g]][i]) report.lower_half[source] += 1;
        }
        for (std::size_t s = 0; s < matrix.students.size(); ++s) {
            if (matrix.selected[s][i]) report.total[source] += 1;
        }
    }
    return report;
}

std::string source_output_to_json_line(const SourceOutput& output) {
    ordered_json obj;
    obj["source"] = output.source;
    obj["item_id"] = output.item_id;
    obj["distractors"] = output.distractors;
    obj["shortfall"] = output.shortfall;
    return obj.dump();
}

void write_source_outputs(const std::string& path, const std::vector<SourceOutput>& outputs) {
    std::ostringstream out;
    for (const auto& o : outputs) out << source_output_to_json_line(o) << "\n";
    write_file(path, out.str());
}

std::vector<SourceOutput> read_source_outputs(const std::string& path) {
    std::vector<SourceOutput> outputs;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad source output line: ") + e.what());
        }
        SourceOutput o;
        o.source = obj.at("source").get<std::string>();
        o.item_id = obj.at("item_id").get<std::string>();
        o.distractors = obj.at("distractors").get<std::vector<std::string>>();
        o.shortfall = obj.value("shortfall", false);
        outputs.push_back(std::move(o));
    }
    return outputs;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension != b.dimension) throw ProtocolError("cosine over mismatched dimensions");
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (int i = 0; i < a.dimension; ++i) {
        dot += a.values[i] * b.values[i];
        norm_a += a.values[i] * a.values[i];
        norm_b += b.values[i] * b.values[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) throw ConfigError("cosine undefined for zero-norm vector");
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

namespace {

struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    int count = 0;
    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    MeanVariance finish() const {
        MeanVariance mv;
        mv.count = count;
        if (count == 0) return mv;
        mv.mean = sum / count;
        mv.variance = sum_sq / count - mv.mean * mv.mean; // population variance
        if (mv.variance < 0.0) mv.variance = 0.0;
        return mv;
    }
};

const McqItem& require_item(const ItemIndex& items, const std::string& id) {
    const auto it = items.find(id);
    if (it == items.end()) throw ConfigError("output references unknown item: " + id);
    return it->second;
}

} // namespace

std::map<std::string, std::map<std::string, MeanVariance>> embedding_similarity_report(
    const std::vector<SourceOutput>& outputs, const ItemIndex& items, EmbeddingClient& embedder) {
    std::map<std::string, std::map<std::string, Accumulator>> acc;
    for (const auto& output : outputs) {
        const McqItem& item = require_item(items, output.item_id);
        const EmbeddingVector answer_vec = embedder.embed_text(item.answer);
        for (const auto& text : output.distractors) {
            const EmbeddingVector d_vec = embedder.embed_text(text);
            acc[output.source][item.subject].add(cosine_similarity(answer_vec, d_vec));
        }
    }
    std::map<std::string, std::map<std::string, MeanVariance>> report;
    for (const auto& [source, by_subject] : acc) {
        for (const auto& [subject, a] : by_subject) {
            report[source][subject] = a.finish();
        }
    }
    return report;
}

std::map<std::string, std::map<std::string, MeanVariance>> bleu_similarity_report(
    const std::vector<SourceOutput>& outputs, const ItemIndex& items) {
    std::map<std::string, std::map<std::string, Accumulator>> acc;
    for (const auto& output : outputs) {
        const McqItem& item = require_item(items, output.item_id);
        std::vector<std::string> references;
        for (const auto& d : item.distractors) {
            if (d.origin.kind == Origin::Kind::Human) references.push_back(d.text);
        }
        if (references.empty()) continue;
        for (const auto& text : output.distractors) {
            double best = 0.0;
            for (const auto& ref : references) {
                best = std::max(best, sentence_bleu_smoothed(text, ref));
            }
            acc[output.source][item.subject].add(best);
        }
    }
    std::map<std::string, std::map<std::string, MeanVariance>> report;
    for (const auto& [source, by_subject] : acc) {
        for (const auto& [subject, a] : by_subject) {
            report[source][subject] = a.finish();
        }
    }
    return report;
}

std::vector<McqItem> knn_retrieve(const McqItem& target, const std::vector<McqItem>& pool,
                                  EmbeddingClient& embedder, int k) {
    if (k < 1) throw ConfigError("knn_retrieve requires k >= 1");
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].id != target.id) eligible.push_back(i);
    }
    if (eligible.size() < static_cast<std::size_t>(k)) {
        throw ConfigError("kNN pool smaller than k");
    }
    const EmbeddingVector target_vec = embedder.embed_text(target.question + "\n" + target.answer);
    std::vector<std::pair<double, std::size_t>> scored; // (cosine, pool index)
    scored.reserve(eligible.size());
    for (std::size_t idx : eligible) {
        const EmbeddingVector v = embedder.embed_text(pool[idx].question + "\n" + pool[idx].answer);
        scored.emplace_back(cosine_similarity(target_vec, v), idx);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<McqItem> out;
    for (int i = 0; i < k; ++i) out.push_back(pool[scored[static_cast<std::size_t>(i)].second]);
    return out;
}

std::map<std::string, std::map<std::string, ValidityCell>> validity_rate(
    const std::vector<SourceOutput>& outputs, const ItemIndex& items, ChatClient& validity_judge,
    const ProtocolConfig& cfg, WarningLog* warnings) {
    std::map<std::string, std::map<std::string, ValidityCell>> report;
    for (const auto& output : outputs) {
        const McqItem& item = require_item(items, output.item_id);
        const std::string cell =
            polarity_to_string(item.polarity) + "/" + kind_to_string(item.kind);
        for (const auto& text : output.distractors) {
            auto& c = report[output.source][cell];
            c.total += 1;
            if (check_distractor_validity(item, text, validity_judge, cfg, warnings)) {
                c.valid += 1;
            }
        }
    }
    return report;
}

} // namespace forge
