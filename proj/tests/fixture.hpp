#pragma once

// Shared 3-question fixture for end-to-end pipeline runs against fully
// scripted backends. The scripts enumerate every prompt the pipeline can
// issue: ranker prompts for all ordered text pairs per question (responses
// follow a hidden plausibility order), teacher prompts for both possible slot
// assignments, validity verdicts per candidate, generator responses per
// source, and embedding vectors for the similarity report.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/mcq.hpp"
#include "forge/prompts.hpp"
#include "forge/util.hpp"
#include "helpers.hpp"

namespace forge::testing {

struct PipelineFixture {
    std::string dataset_path;
    std::string main_script_path;      // ranker + teacher + validity + embeddings
    std::string sft_model_script_path; // deliberately wrong on q1's pair
    std::string gen_x_script_path;
    std::string gen_y_script_path;
    std::string matrix_path;
    std::string config_path;
};

namespace fixture_detail {

inline nlohmann::json& chat_entry(nlohmann::json& script, const std::string& prompt) {
    return script["chat"][sha256_hex(prompt)];
}

inline void add_choice(nlohmann::json& script, const std::string& prompt, char token) {
    chat_entry(script, prompt) = {std::string("### Review: traced the likely confusion.\n### "
                                               "Choice: ") +
                                  token};
}

/// Ranker responses for every ordered pair of `texts`, following `order`
/// (earlier = more plausible). Pairs listed in `disagree` answer a literal A in
/// both orientations, which the order-swap protocol can never reconcile.
inline void add_ranker_entries(nlohmann::json& script, const McqItem& item,
                               const std::vector<std::string>& order,
                               const std::vector<std::pair<std::string, std::string>>& disagree = {}) {
    auto rank = [&](const std::string& t) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i] == t) return i;
        }
        return order.size();
    };
    auto disagrees = [&](const std::string& a, const std::string& b) {
        for (const auto& [x, y] : disagree) {
            if ((a == x && b == y) || (a == y && b == x)) return true;
        }
        return false;
    };
    for (const auto& a : order) {
        for (const auto& b : order) {
            if (a == b) continue;
            const std::string prompt =
                render_ranker_prompt(RankerPromptVariant::Reasoning, item.question, item.answer,
                                     a, b);
            if (disagrees(a, b)) {
                add_choice(script, prompt, 'A');
            } else {
                add_choice(script, prompt, rank(a) < rank(b) ? 'A' : 'B');
            }
        }
    }
}

/// Teacher responses for both possible slot assignments of one ground-truth pair.
inline void add_teacher_entries(nlohmann::json& script, const McqItem& item,
                                const std::string& high, const std::string& low) {
    add_choice(script, render_teacher_prompt(item.question, item.answer, high, low, ChoiceToken::A),
               'A');
    add_choice(script, render_teacher_prompt(item.question, item.answer, low, high, ChoiceToken::B),
               'B');
}

inline void add_validity_entry(nlohmann::json& script, const McqItem& item,
                               const std::string& option, bool usable) {
    chat_entry(script, render_validity_prompt(item.question, option)) = {
        std::string(R"({"type": "asking correct option", "analysis": "checked", "validity": ")") +
        (usable ? "invalid" : "valid") + R"("})"};
}

inline void add_generator_entry(nlohmann::json& script, const McqItem& item, int n,
                                const std::vector<std::string>& candidates) {
    std::string response = "### Type: Incorrect knowledge";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        response += "\n### Distractor " + std::to_string(i + 1) + ": " + candidates[i];
    }
    chat_entry(script, render_generator_prompt(item.question, item.answer, n)) = {response};
}

inline void add_augment_entry(nlohmann::json& script, const McqItem& item,
                              const std::vector<std::string>& candidates) {
    std::vector<std::string> originals;
    for (const auto& d : item.distractors) originals.push_back(d.text);
    nlohmann::json response;
    response["type"] = "Incorrect knowledge";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        response["distractor_" + std::to_string(i + 1)] = candidates[i];
    }
    chat_entry(script, render_augment_prompt(item.question, item.answer, originals)) = {
        response.dump()};
}

inline McqItem fixture_item(const std::string& id, const std::string& subject,
                            const std::string& question, const std::string& answer,
                            std::vector<std::pair<std::string, double>> rated) {
    McqItem item;
    item.id = id;
    item.subject = subject;
    item.kind = QuestionKind::Statement;
    item.polarity = Polarity::AskingCorrect;
    item.question = question;
    item.answer = answer;
    for (auto& [text, rate] : rated) {
        item.distractors.push_back(Distractor{text, Origin::human(), rate});
    }
    return item;
}

} // namespace fixture_detail

/// Writes the dataset, scripts, matrix, and config into `dir` and returns the
/// paths. The fixture exercises: clean augmentation (q1), rejection paths
/// (q2: duplicate-of-original and failed-validity), rank accuracy with one
/// permanently disagreeing pair (q3: h3b vs h3c), a tournament with one
/// cross-source identical text, and a DI matrix.
inline PipelineFixture build_pipeline_fixture(const TempDir& dir) {
    namespace fd = fixture_detail;
    using nlohmann::json;

    PipelineFixture fixture;

    const McqItem q1 = fd::fixture_item("q1", "Python", "Which statement about lists is correct?",
                                        "lists are mutable", {{"h1a", 0.5}, {"h1b", 0.2}});
    const McqItem q2 = fd::fixture_item("q2", "DB", "Which JOIN keeps unmatched left rows?",
                                        "LEFT JOIN", {{"h2a", 0.4}, {"h2b", 0.3}});
    const McqItem q3 = fd::fixture_item("q3", "Python", "What does len('abc') return?", "3",
                                        {{"h3a", 0.6}, {"h3b", 0.3}, {"h3c", 0.1}});

    DatasetSplit split;
    split.train = {q1, q2};
    split.test = {q3};
    fixture.dataset_path = dir.str("dataset.jsonl");
    save_dataset(fixture.dataset_path, split);

    // hidden plausibility orders
    const std::vector<std::string> order_q1{"s1a", "h1a", "s1b", "h1b", "s1c"};
    const std::vector<std::string> order_q2{"h2a", "s2c", "h2b", "s2bad"};
    const std::vector<std::string> order_q3{"h3a",  "h3b",  "h3c", "gx2",
                                            "gx3",  "shared", "gy2", "gy3"};

    json main_script;
    fd::add_ranker_entries(main_script, q1, order_q1);
    fd::add_ranker_entries(main_script, q2, order_q2);
    // h3b vs h3c never reconciles: resolved by the seeded fallback
    fd::add_ranker_entries(main_script, q3, order_q3, {{"h3b", "h3c"}});

    fd::add_augment_entry(main_script, q1, {"s1a", "s1b", "s1c"});
    fd::add_augment_entry(main_script, q2, {"h2a", "s2bad", "s2c"});
    for (const auto& s : {"s1a", "s1b", "s1c"}) fd::add_validity_entry(main_script, q1, s, true);
    fd::add_validity_entry(main_script, q2, "s2bad", false);
    fd::add_validity_entry(main_script, q2, "s2c", true);
    // teacher data for the train pairs, both slot assignments
    fd::add_teacher_entries(main_script, q1, "h1a", "h1b");
    fd::add_teacher_entries(main_script, q2, "h2a", "h2b");
    // validity of generated candidates in the tournament
    for (const auto& g : {"shared", "gx2", "gx3", "gy2", "gy3"}) {
        fd::add_validity_entry(main_script, q3, g, true);
    }
    // embeddings for the similarity report over q3's generated distractors
    main_script["embeddings"]["3"] = {1.0, 0.0};
    main_script["embeddings"]["shared"] = {0.9, 0.43588989435};
    main_script["embeddings"]["gx2"] = {0.8, 0.6};
    main_script["embeddings"]["gx3"] = {0.7, 0.71414284285};
    main_script["embeddings"]["gy2"] = {0.0, 1.0};
    main_script["embeddings"]["gy3"] = {-0.6, 0.8};
    fixture.main_script_path = dir.str("script_main.json");
    write_file(fixture.main_script_path, main_script.dump(2));

    // SFT model: wrong on q1's pair in either slot assignment, right on q2's
    json sft_script;
    fd::add_choice(sft_script,
                   render_ranker_prompt(RankerPromptVariant::Reasoning, q1.question, q1.answer,
                                        "h1a", "h1b"),
                   'B');
    fd::add_choice(sft_script,
                   render_ranker_prompt(RankerPromptVariant::Reasoning, q1.question, q1.answer,
                                        "h1b", "h1a"),
                   'A');
    fd::add_choice(sft_script,
                   render_ranker_prompt(RankerPromptVariant::Reasoning, q2.question, q2.answer,
                                        "h2a", "h2b"),
                   'A');
    fd::add_choice(sft_script,
                   render_ranker_prompt(RankerPromptVariant::Reasoning, q2.question, q2.answer,
                                        "h2b", "h2a"),
                   'B');
    fixture.sft_model_script_path = dir.str("script_sft_model.json");
    write_file(fixture.sft_model_script_path, sft_script.dump(2));

    // generator sources; "shared" appears on both sides and is excluded
    json gen_x_script;
    fd::add_generator_entry(gen_x_script, q3, 3, {"shared", "gx2", "gx3"});
    fixture.gen_x_script_path = dir.str("script_gen_x.json");
    write_file(fixture.gen_x_script_path, gen_x_script.dump(2));

    json gen_y_script;
    fd::add_generator_entry(gen_y_script, q3, 3, {"shared", "gy2", "gy3"});
    fixture.gen_y_script_path = dir.str("script_gen_y.json");
    write_file(fixture.gen_y_script_path, gen_y_script.dump(2));

    // student response matrix for the DI command
    json matrix;
    matrix["students"] = {"s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"};
    matrix["items"] = json::array({
        json{{"question_id", "q3"}, {"distractor_id", "gx2"}, {"source", "X"}},
        json{{"question_id", "q3"}, {"distractor_id", "gy2"}, {"source", "Y"}},
    });
    matrix["selected"] = json::array({
        json::array({0, 0}), json::array({0, 1}), json::array({0, 0}), json::array({0, 1}),
        json::array({1, 0}), json::array({1, 1}), json::array({1, 0}), json::array({1, 1}),
    });
    fixture.matrix_path = dir.str("matrix.json");
    write_file(fixture.matrix_path, matrix.dump(2));

    auto backend = [](const std::string& script_path, const std::string& model) {
        return json{{"base_url", "scripted://" + script_path}, {"model", model},
                    {"temperature", 0.5}, {"max_attempts", 3}, {"backoff_ms", 0}};
    };
    json config;
    config["seed"] = 42;
    config["dataset"] = fixture.dataset_path;
    config["protocol"] = json{{"temperature", 0.5}, {"attempt_cap", 4}, {"fan_out", 4}};
    config["ranker_variant"] = "reasoning";
    config["backends"] = json{
        {"ranker", backend(fixture.main_script_path, "ranker-model")},
        {"teacher", backend(fixture.main_script_path, "teacher-model")},
        {"sft_model", backend(fixture.sft_model_script_path, "sft-model")},
        {"validity", backend(fixture.main_script_path, "validity-model")},
        {"embeddings", backend(fixture.main_script_path, "embed-model")},
    };
    config["emit"] = json{{"scheme", "top-bottom"}};
    config["eval"] = json{
        {"setting", "A"},
        {"repetitions", 1},
        {"di_cutoff", 0.25},
        {"matrix", fixture.matrix_path},
        {"sources", json::array({
            json{{"name", "X"}, {"prompt_kind", "standard"},
                 {"backend", backend(fixture.gen_x_script_path, "gen-x")}},
            json{{"name", "Y"}, {"prompt_kind", "standard"},
                 {"backend", backend(fixture.gen_y_script_path, "gen-y")}},
        })},
    };
    fixture.config_path = dir.str("config.json");
    write_file(fixture.config_path, config.dump(2));
    return fixture;
}

} // namespace forge::testing
