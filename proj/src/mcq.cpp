#include "forge/mcq.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forge/errors.hpp"
#include "forge/util.hpp"

namespace forge {

using ordered_json = nlohmann::ordered_json;

std::string origin_to_string(const Origin& o) {
    switch (o.kind) {
        case Origin::Kind::Human: return "human";
        case Origin::Kind::Synthetic: return "synthetic";
        case Origin::Kind::Model: return "model:" + o.source_id;
    }
    return "human";
}

Origin origin_from_string(const std::string& s) {
    if (s == "human") return Origin::human();
    if (s == "synthetic") return Origin::synthetic();
    if (s.rfind("model:", 0) == 0) return Origin::model(s.substr(6));
    throw ConfigError("unknown distractor origin: " + s);
}

std::string kind_to_string(QuestionKind k) {
    return k == QuestionKind::Code ? "code" : "statement";
}

QuestionKind kind_from_string(const std::string& s) {
    if (s == "code") return QuestionKind::Code;
    if (s == "statement") return QuestionKind::Statement;
    throw ConfigError("unknown question kind: " + s);
}

std::string polarity_to_string(Polarity p) {
    return p == Polarity::AskingCorrect ? "asking-correct" : "asking-incorrect";
}

Polarity polarity_from_string(const std::string& s) {
    if (s == "asking-correct") return Polarity::AskingCorrect;
    if (s == "asking-incorrect") return Polarity::AskingIncorrect;
    throw ConfigError("unknown polarity: " + s);
}

ItemIndex build_item_index(const DatasetSplit& split) {
    ItemIndex index;
    for (const auto& item : split.train) index.emplace(item.id, item);
    for (const auto& item : split.test) index.emplace(item.id, item);
    return index;
}

namespace {

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
    throw ConfigError("dataset line " + std::to_string(line_no) + ": " + what);
}

double require_fraction(const nlohmann::json& v, std::size_t line_no, const char* field) {
    if (!v.is_number()) line_error(line_no, std::string("field `") + field + "` must be a number");
    const double x = v.get<double>();
    if (!(x >= 0.0 && x <= 1.0)) {
        line_error(line_no, std::string("field `") + field + "` out of [0,1]");
    }
    return x;
}

std::string require_string(const nlohmann::json& obj, std::size_t line_no, const char* field) {
    if (!obj.contains(field)) line_error(line_no, std::string("missing field `") + field + "`");
    const auto& v = obj.at(field);
    if (!v.is_string()) line_error(line_no, std::string("field `") + field + "` must be a string");
    return v.get<std::string>();
}

McqItem parse_item(const nlohmann::json& obj, std::size_t line_no, const LoadOptions& opts,
                   std::string* split_out) {
    McqItem item;
    item.id = require_string(obj, line_no, "id");
    if (trim(item.id).empty()) line_error(line_no, "field `id` is empty");
    item.subject = require_string(obj, line_no, "subject");
    item.question = require_string(obj, line_no, "question");
    item.answer = require_string(obj, line_no, "answer");
    if (trim(item.question).empty()) line_error(line_no, "field `question` is empty");
    if (trim(item.answer).empty()) line_error(line_no, "field `answer` is empty");

    try {
        item.kind = kind_from_string(require_string(obj, line_no, "kind"));
    } catch (const ConfigError&) {
        line_error(line_no, "field `kind` must be code|statement");
    }

    if (obj.contains("polarity")) {
        try {
            item.polarity = polarity_from_string(obj.at("polarity").get<std::string>());
        } catch (const std::exception&) {
            line_error(line_no, "field `polarity` must be asking-correct|asking-incorrect");
        }
    } else if (opts.heuristic_polarity) {
        item.polarity = tag_polarity_heuristic(item.question);
    } else {
        line_error(line_no, "missing field `polarity`");
    }

    if (!obj.contains("distractors") || !obj.at("distractors").is_array()) {
        line_error(line_no, "missing field `distractors`");
    }
    const std::string trimmed_answer = trim(item.answer);
    std::set<std::string> seen_texts;
    for (const auto& dj : obj.at("distractors")) {
        Distractor d;
        d.text = require_string(dj, line_no, "text");
        const std::string t = trim(d.text);
        if (t.empty()) line_error(line_no, "distractor `text` is empty");
        try {
            d.origin = origin_from_string(require_string(dj, line_no, "origin"));
        } catch (const ConfigError&) {
            line_error(line_no, "field `origin` must be human|synthetic|model:<id>");
        }
        if (dj.contains("selection_rate")) {
            d.selection_rate = require_fraction(dj.at("selection_rate"), line_no, "selection_rate");
        } else if (d.origin.kind == Origin::Kind::Human) {
            line_error(line_no, "human distractor missing `selection_rate`");
        }
        if (t == trimmed_answer) {
            line_error(line_no, "distractor text equals the answer");
        }
        if (!seen_texts.insert(t).second) {
            line_error(line_no, "duplicate distractor text: " + t);
        }
        item.distractors.push_back(std::move(d));
    }
    if (item.distractors.empty()) line_error(line_no, "item has no distractors");

    if (obj.contains("correctness_rate")) {
        item.correctness_rate = require_fraction(obj.at("correctness_rate"), line_no, "correctness_rate");
    }
    if (obj.contains("num_students")) {
        if (!obj.at("num_students").is_number_integer() || obj.at("num_students").get<int>() < 0) {
            line_error(line_no, "field `num_students` must be a non-negative integer");
        }
        item.num_students = obj.at("num_students").get<int>();
    }

    *split_out = require_string(obj, line_no, "split");
    if (*split_out != "train" && *split_out != "test") {
        line_error(line_no, "field `split` must be train|test");
    }
    return item;
}

ordered_json item_to_json(const McqItem& item, const std::string& split) {
    ordered_json obj;
    obj["id"] = item.id;
    obj["subject"] = item.subject;
    obj["kind"] = kind_to_string(item.kind);
    obj["polarity"] = polarity_to_string(item.polarity);
    obj["question"] = item.question;
    obj["answer"] = item.answer;
    ordered_json ds = ordered_json::array();
    for (const auto& d : item.distractors) {
        ordered_json dj;
        dj["text"] = d.text;
        dj["origin"] = origin_to_string(d.origin);
        if (d.selection_rate) dj["selection_rate"] = *d.selection_rate;
        ds.push_back(std::move(dj));
    }
    obj["distractors"] = std::move(ds);
    if (item.correctness_rate) obj["correctness_rate"] = *item.correctness_rate;
    if (item.num_students) obj["num_students"] = *item.num_students;
    obj["split"] = split;
    return obj;
}

} // namespace

DatasetSplit load_dataset(const std::string& path, const LoadOptions& opts) {
    const auto lines = read_lines(path);
    DatasetSplit split;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        if (trim(lines[i]).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            line_error(line_no, std::string("invalid JSON: ") + e.what());
        }
        std::string which;
        McqItem item = parse_item(obj, line_no, opts, &which);
        if (!ids.insert(item.id).second) {
            line_error(line_no, "duplicate item id: " + item.id);
        }
        (which == "train" ? split.train : split.test).push_back(std::move(item));
    }
    return split;
}

std::string serialize_dataset(const DatasetSplit& split) {
    std::ostringstream out;
    for (const auto& item : split.train) out << item_to_json(item, "train").dump() << "\n";
    for (const auto& item : split.test) out << item_to_json(item, "test").dump() << "\n";
    return out.str();
}

void save_dataset(const std::string& path, const DatasetSplit& split) {
    write_file(path, serialize_dataset(split));
}

Polarity tag_polarity_heuristic(const std::string& question) {
    std::string lower;
    lower.reserve(question.size());
    for (char c : question) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    static const char* cues[] = {"incorrect", "not correct", "not true", "false", "wrong", "except"};
    for (const char* cue : cues) {
        if (lower.find(cue) != std::string::npos) return Polarity::AskingIncorrect;
    }
    return Polarity::AskingCorrect;
}

std::vector<GroundTruthPair> derive_ground_truth_pairs(const McqItem& item) {
    struct Rated {
        std::size_t index;
        const Distractor* d;
    };
    std::vector<Rated> rated;
    for (std::size_t i = 0; i < item.distractors.size(); ++i) {
        const auto& d = item.distractors[i];
        if (d.origin.kind == Origin::Kind::Human && d.selection_rate) {
            rated.push_back({i, &d});
        }
    }
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, GroundTruthPair>> keyed;
    for (std::size_t a = 0; a < rated.size(); ++a) {
        for (std::size_t b = a + 1; b < rated.size(); ++b) {
            const double ra = *rated[a].d->selection_rate;
            const double rb = *rated[b].d->selection_rate;
            if (ra == rb) continue; // ties carry no strict winner
            const auto& high = ra > rb ? rated[a] : rated[b];
            const auto& low = ra > rb ? rated[b] : rated[a];
            keyed.push_back({{high.index, low.index},
                             GroundTruthPair{item.id, *high.d, *low.d}});
        }
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<GroundTruthPair> pairs;
    pairs.reserve(keyed.size());
    for (auto& kv : keyed) pairs.push_back(std::move(kv.second));
    return pairs;
}

} // namespace forge
