#include "forge/prompts.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "forge/errors.hpp"
#include "forge/util.hpp"

namespace forge {

const char* const kTemplateVersion = "1";

namespace {

// Templates are fixed text assets; edits invalidate recorded manifest hashes.

constexpr const char* kRankerReasoning =
    "[INST] You are a teacher analyzing which distractor in a given Multiple Choice Question is "
    "more confusing for students and why. Your review should include the following content in one "
    "paragraph:\n"
    "- Describe a realistic process of solving the problem from a student's perspective as you "
    "look at each distractor.\n"
    "- Consider why it might be plausible as the correct/incorrect statement, based on students' "
    "misconceptions, mistakes, intuition, etc., from various angles.\n"
    "Output your choice as a single token, either A or B, that students are more likely to "
    "choose.\n"
    "\n"
    "[Question] {question}\n"
    "[Answer] {answer}\n"
    "[Distractor A] {distractor_a}\n"
    "[Distractor B] {distractor_b}\n"
    "\n"
    "Generate in the following format:\n"
    "### Review:\n"
    "### Choice: [/INST]";

constexpr const char* kRankerRubric =
    "Analyze which side of the given Multiple Choice Question distractor pair is more confusing "
    "and plausible to students based on the given rubric.\n"
    "\n"
    "[Question] {question}\n"
    "[Answer] {answer}\n"
    "[Distractor A] {distractor_a}\n"
    "[Distractor B] {distractor_b}\n"
    "\n"
    "Evaluation Rubric:\n"
    "[1]. Conceptual Misunderstandings: Evaluate if the distractor addresses into specific "
    "misconceptions or partial understandings related to the question.\n"
    "[2]. Similarity to Correct Answer: Assess how closely the distractor resembles the correct "
    "answer, either in structure, terminology, or context.\n"
    "[3]. Intuitive Appeal: Analyze if the distractor seems logical or intuitively correct based "
    "on common language use or student intuition.\n"
    "\n"
    "Generation Guide:\n"
    "- [n]: For each evaluation criterion, review in one sentence how each distractor may or may "
    "not confuse students.\n"
    "- [Summary]: Summarize the review, and choose more confusing and plausible distractor.\n"
    "- [Choice]: Output your choice as a single token, either A or B.\n"
    "\n"
    "Generate in the following format:\n"
    "[1]:\n"
    "[2]:\n"
    "[3]:\n"
    "[Summary]:\n"
    "[Choice]:";

constexpr const char* kRankerGEval =
    "You will be given one multiple-choice question (MCQ) and two distractors. Your task is to "
    "choose one distractor based on the metric.\n"
    "Please make sure you read and understand these instructions carefully. Please keep this "
    "document open while reviewing, and refer to it as needed.\n"
    "\n"
    "Evaluation Criteria:\n"
    "Plausibility: This metric indicates how likely students are to feel that the distractor is "
    "the correct answer and choose it. A distractor with high plausibility is similar in form to "
    "the correct answer or contains common misconceptions and mistakes, making students more "
    "likely to select it.\n"
    "\n"
    "Evaluation Steps:\n"
    "1. Read the MCQ carefully and think about the relevant misconceptions or mistakes related to "
    "the question from your perspective as a teacher.\n"
    "2. Judge how plausible and confusing the distractor would be from a student's perspective.\n"
    "3. Choose one distractor based on Evaluation Criteria. Output your choice as a single token, "
    "either A or B.\n"
    "\n"
    "[Question] {question}\n"
    "[Answer] {answer}\n"
    "[Distractor A] {distractor_a}\n"
    "[Distractor B] {distractor_b}\n"
    "\n"
    "Evaluation Form (A or B ONLY):\n"
    "- Choice:";

constexpr const char* kTeacher =
    "You are a teacher analyzing which distractor in a given Multiple Choice Question is more "
    "confusing for students and why.\n"
    "Your review should include the following content in one paragraph:\n"
    "- Describe a realistic process of solving the problem from a student's perspective as you "
    "look at each distractor. Consider why it might be plausible as the correct/incorrect "
    "statement, based on students' misconceptions, mistakes, intuition, etc., from various "
    "angles.\n"
    "- Output your choice as a single token, either A or B, that students are more likely to "
    "choose.\n"
    "\n"
    "[Question] {question}\n"
    "[Answer] {answer}\n"
    "[Distractor A] {distractor_a}\n"
    "[Distractor B] {distractor_b}\n"
    "Distractor chosen more frequently by actual students:{winner}\n"
    "\n"
    "Make sure your choice matches the distractor most frequently chosen by actual students. "
    "However, you must not mention this information as if you originally knew it.\n"
    "Generate in the following format:\n"
    "### Review:\n"
    "### Choice:";

constexpr const char* kGenerator =
    "[INST] You are a teacher tasked with creating distractors (plausible wrong options) for a "
    "given Multiple Choice Question.\n"
    "Generate distractors according to the guide below:\n"
    "1) Distractor type:\n"
    "- Analyze whether the question asks for a `correct' or `incorrect' option.\n"
    "- If the question asks for a correct option, the distractor type should be \"Incorrect "
    "knowledge\"; if it asks for an incorrect option, the distractor type should be \"Correct "
    "knowledge\".\n"
    "2) Distractors:\n"
    "- The distractor should be well-formatted so that it fits naturally when presented together "
    "with the question and answer.\n"
    "- If the distractor type is \"Incorrect knowledge\", the distractor must be an actually "
    "incorrect statement; if the distractor type is \"Correct knowledge\", the distractor must be "
    "an actually correct statement.\n"
    "\n"
    "[Question] {question}\n"
    "[Answer] {answer}\n"
    "\n"
    "Generate {n} distractor(s) in the following format:\n"
    "### Type:\n"
    "### Distractor n: [/INST]";

constexpr const char* kValidity =
    "Check if the given option is the correct choice in a multiple-choice question (MCQ).\n"
    "1. Check whether the question asks for a `correct' or `incorrect' option. If the question "
    "asks for a correct option, label \"type\" as \"asking correct option.\" If the question asks "
    "for an incorrect option, label \"type\" as \"asking incorrect option.\"\n"
    "2. Insert the given option into the question and analyze whether it is the correct choice.\n"
    "3. Based on the analysis, if the option is the correct answer to the question, label it as "
    "\"valid.\" If it is not the correct answer, label it as \"invalid.\"\n"
    "\n"
    "[Question] {question}\n"
    "[Option] {option}\n"
    "\n"
    "Output according to the following JSON format:\n"
    "{\n"
    "    \"type\": \"asking correct option\" or \"asking incorrect option\",\n"
    "    \"analysis\": \"your analysis in one sentence\",\n"
    "    \"validity\": \"valid\" or \"invalid\"\n"
    "}";

constexpr const char* kAugment =
    "You are a teacher tasked with creating distractors (plausible wrong options) for a given "
    "Multiple Choice Question.\n"
    "Generate distractors according to the guide below:\n"
    "1) Distractor type:\n"
    "- Analyze whether the question asks for a `correct' or `incorrect' option.\n"
    "- If the question asks for a correct option, the distractor type should be \"Incorrect "
    "knowledge\"; if it asks for an incorrect option, the distractor type should be \"Correct "
    "knowledge\".\n"
    "2) Distractors:\n"
    "- The distractor should be well-formatted so that it fits naturally when presented together "
    "with the question and answer.\n"
    "- If the distractor type is \"Incorrect knowledge\", the distractor must be an actually "
    "incorrect statement; if the distractor type is \"Correct knowledge\", the distractor must be "
    "an actually correct statement.\n"
    "- Refer to the original distractors provided.\n"
    "\n"
    "[Question] {question}\n"
    "[Answer] {answer}\n"
    "[Original Distractors] {original_distractors}\n"
    "\n"
    "Generate 3 new distractor(s) in the following JSON format:\n"
    "{\n"
    "    \"type\": \"Incorrect knowledge\" or \"Correct knowledge\",\n"
    "    \"distractor_n\": \"n-th distractor in string type\",\n"
    "    ...\n"
    "}";

constexpr const char* kKnnExampleBlock =
    "Question: {question}\n"
    "Answer: {answer}\n"
    "Distractor1: {d1}\n"
    "Distractor2: {d2}\n"
    "Distractor3: {d3}\n";

constexpr const char* kKnnTarget =
    "Referencing the above samples, generate 3 distractors.\n"
    "Question: {question}\n"
    "Answer: {answer}\n"
    "Distractor1:\n"
    "Distractor2:\n"
    "Distractor3:";

/// Single pass over the template; placeholder values are inserted verbatim and
/// never rescanned, so substituted text cannot trigger further substitution.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& slots) {
    std::string out;
    out.reserve(tmpl.size() + 64);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            bool replaced = false;
            for (const auto& [name, value] : slots) {
                if (tmpl.compare(i + 1, name.size(), name) == 0 &&
                    i + 1 + name.size() < tmpl.size() && tmpl[i + 1 + name.size()] == '}') {
                    out.append(value);
                    i += name.size() + 2;
                    replaced = true;
                    break;
                }
            }
            if (replaced) continue;
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

void require_nonempty(const std::string& value, const char* what) {
    if (trim(value).empty()) throw ConfigError(std::string(what) + " must be non-empty");
}

/// Strips ASCII punctuation and whitespace off both ends of a token.
std::string strip_punct(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    auto is_noise = [](unsigned char c) {
        return std::isspace(c) || std::ispunct(c);
    };
    while (b < e && is_noise(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_noise(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

/// Extracts the first top-level JSON object embedded in free-form text.
nlohmann::json extract_json_object(const std::string& text) {
    const auto start = text.find('{');
    if (start == std::string::npos) throw ParseError("no JSON object in response");
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) {
                try {
                    return nlohmann::json::parse(text.substr(start, i - start + 1));
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError(std::string("malformed JSON object: ") + e.what());
                }
            }
        }
    }
    throw ParseError("unterminated JSON object in response");
}

} // namespace

std::string variant_to_string(RankerPromptVariant v) {
    switch (v) {
        case RankerPromptVariant::Reasoning: return "reasoning";
        case RankerPromptVariant::Rubric: return "rubric";
        case RankerPromptVariant::GEval: return "geval";
    }
    return "reasoning";
}

RankerPromptVariant variant_from_string(const std::string& s) {
    if (s == "reasoning") return RankerPromptVariant::Reasoning;
    if (s == "rubric") return RankerPromptVariant::Rubric;
    if (s == "geval" || s == "g-eval") return RankerPromptVariant::GEval;
    throw ConfigError("unknown ranker prompt variant: " + s);
}

std::string distractor_type_to_string(DistractorType t) {
    return t == DistractorType::CorrectKnowledge ? "Correct knowledge" : "Incorrect knowledge";
}

std::string render_ranker_prompt(RankerPromptVariant variant, const std::string& question,
                                 const std::string& answer, const std::string& distractor_a,
                                 const std::string& distractor_b) {
    require_nonempty(question, "question");
    require_nonempty(answer, "answer");
    require_nonempty(distractor_a, "distractor A");
    require_nonempty(distractor_b, "distractor B");
    const char* tmpl = nullptr;
    switch (variant) {
        case RankerPromptVariant::Reasoning: tmpl = kRankerReasoning; break;
        case RankerPromptVariant::Rubric: tmpl = kRankerRubric; break;
        case RankerPromptVariant::GEval: tmpl = kRankerGEval; break;
    }
    return render(tmpl, {{"question", question},
                         {"answer", answer},
                         {"distractor_a", distractor_a},
                         {"distractor_b", distractor_b}});
}

ParsedRankerOutput parse_ranker_output(const std::string& text) {
    // The choice marker is "Choice:" in the Reasoning/G-Eval formats and
    // "[Choice]:" in the Rubric format; the final occurrence decides.
    constexpr std::string_view kWord = "Choice";
    std::size_t pos = std::string::npos;
    std::size_t value_start = 0;
    for (std::size_t at = text.find(kWord); at != std::string::npos;
         at = text.find(kWord, at + 1)) {
        std::size_t after = at + kWord.size();
        if (after < text.size() && text[after] == ']') ++after;
        if (after < text.size() && text[after] == ':') {
            pos = at;
            value_start = after + 1;
        }
    }
    if (pos == std::string::npos) throw ParseError("no choice marker in response");
    auto line_end = text.find('\n', value_start);
    if (line_end == std::string::npos) line_end = text.size();
    const std::string token = strip_punct(
        std::string_view(text).substr(value_start, line_end - value_start));
    ParsedRankerOutput out;
    if (token == "A") {
        out.choice = ChoiceToken::A;
    } else if (token == "B") {
        out.choice = ChoiceToken::B;
    } else {
        throw ParseError("choice token is not A or B: `" + token + "`");
    }

    // Reasoning: between the review marker (when present) and the choice line.
    constexpr std::string_view kReview = "### Review:";
    std::size_t reasoning_begin = 0;
    const auto review_pos = text.find(kReview);
    if (review_pos != std::string::npos && review_pos < pos) {
        reasoning_begin = review_pos + kReview.size();
    }
    auto marker_line_start = text.rfind('\n', pos);
    marker_line_start = marker_line_start == std::string::npos ? pos : marker_line_start;
    if (marker_line_start > reasoning_begin) {
        out.reasoning = trim(text.substr(reasoning_begin, marker_line_start - reasoning_begin));
    }
    return out;
}

std::string render_generator_prompt(const std::string& question, const std::string& answer, int n) {
    if (n < 1) throw ConfigError("generator prompt requires n >= 1");
    require_nonempty(question, "question");
    require_nonempty(answer, "answer");
    return render(kGenerator,
                  {{"question", question}, {"answer", answer}, {"n", std::to_string(n)}});
}

ParsedGeneratorOutput parse_generator_output(const std::string& text, int n_expected) {
    constexpr std::string_view kTypeMarker = "### Type:";
    const auto type_pos = text.find(kTypeMarker);
    if (type_pos == std::string::npos) throw ParseError("missing `### Type:` line");
    auto type_end = text.find('\n', type_pos);
    if (type_end == std::string::npos) type_end = text.size();
    const std::string type_token =
        lower(strip_punct(std::string_view(text).substr(type_pos + kTypeMarker.size(),
                                                        type_end - type_pos - kTypeMarker.size())));
    ParsedGeneratorOutput out;
    if (type_token == "correct knowledge") {
        out.distractor_type = DistractorType::CorrectKnowledge;
    } else if (type_token == "incorrect knowledge") {
        out.distractor_type = DistractorType::IncorrectKnowledge;
    } else {
        throw ParseError("unrecognized distractor type: `" + type_token + "`");
    }

    constexpr std::string_view kDistractorMarker = "### Distractor";
    std::size_t pos = type_end;
    while ((pos = text.find(kDistractorMarker, pos)) != std::string::npos) {
        std::size_t i = pos + kDistractorMarker.size();
        while (i < text.size() && text[i] == ' ') ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size() || text[i] != ':') {
            pos += kDistractorMarker.size();
            continue;
        }
        ++i;
        auto end = text.find('\n', i);
        if (end == std::string::npos) end = text.size();
        const std::string value = trim(text.substr(i, end - i));
        pos = end;
        if (value.empty()) continue;
        if (std::find(out.distractors.begin(), out.distractors.end(), value) !=
            out.distractors.end()) {
            ++out.duplicates_removed;
            continue;
        }
        out.distractors.push_back(value);
    }
    if (out.distractors.empty()) throw ParseError("no distractor lines in response");
    out.shortfall = static_cast<int>(out.distractors.size()) < n_expected;
    return out;
}

std::string render_teacher_prompt(const std::string& question, const std::string& answer,
                                  const std::string& distractor_a, const std::string& distractor_b,
                                  ChoiceToken winner) {
    require_nonempty(question, "question");
    require_nonempty(answer, "answer");
    require_nonempty(distractor_a, "distractor A");
    require_nonempty(distractor_b, "distractor B");
    return render(kTeacher, {{"question", question},
                             {"answer", answer},
                             {"distractor_a", distractor_a},
                             {"distractor_b", distractor_b},
                             {"winner", winner == ChoiceToken::A ? "A" : "B"}});
}

std::string render_validity_prompt(const std::string& question, const std::string& option) {
    require_nonempty(question, "question");
    require_nonempty(option, "option");
    return render(kValidity, {{"question", question}, {"option", option}});
}

ParsedValidityOutput parse_validity_output(const std::string& text) {
    const nlohmann::json obj = extract_json_object(text);
    if (!obj.contains("validity") || !obj.at("validity").is_string()) {
        throw ParseError("validity response missing `validity` field");
    }
    ParsedValidityOutput out;
    const std::string verdict = lower(strip_punct(obj.at("validity").get<std::string>()));
    if (verdict == "valid") {
        out.verdict = ValidityVerdict::Valid;
    } else if (verdict == "invalid") {
        out.verdict = ValidityVerdict::Invalid;
    } else {
        throw ParseError("unrecognized validity verdict: `" + verdict + "`");
    }
    if (obj.contains("type") && obj.at("type").is_string()) {
        const std::string type = lower(strip_punct(obj.at("type").get<std::string>()));
        out.judged_asking_correct = type.find("incorrect") == std::string::npos;
    }
    if (obj.contains("analysis") && obj.at("analysis").is_string()) {
        out.analysis = obj.at("analysis").get<std::string>();
    }
    return out;
}

std::string render_augment_prompt(const std::string& question, const std::string& answer,
                                  const std::vector<std::string>& originals) {
    require_nonempty(question, "question");
    require_nonempty(answer, "answer");
    if (originals.empty()) throw ConfigError("augment prompt requires at least one original distractor");
    std::string joined;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (i) joined += "; ";
        joined += originals[i];
    }
    return render(kAugment,
                  {{"question", question}, {"answer", answer}, {"original_distractors", joined}});
}

std::vector<std::string> parse_augment_output(const std::string& text) {
    const nlohmann::json obj = extract_json_object(text);
    std::vector<std::pair<int, std::string>> keyed;
    for (const auto& [key, value] : obj.items()) {
        if (key.rfind("distractor_", 0) != 0 || !value.is_string()) continue;
        try {
            keyed.emplace_back(std::stoi(key.substr(11)), value.get<std::string>());
        } catch (const std::exception&) {
            continue;
        }
    }
    if (keyed.empty()) throw ParseError("augmentation response has no distractor_n fields");
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> out;
    out.reserve(keyed.size());
    for (auto& [_, v] : keyed) out.push_back(std::move(v));
    return out;
}

std::string render_knn_prompt(const std::vector<KnnExample>& examples, const std::string& question,
                              const std::string& answer) {
    if (examples.size() != 3) throw ConfigError("kNN prompt requires exactly 3 in-context examples");
    require_nonempty(question, "question");
    require_nonempty(answer, "answer");
    std::string out;
    for (const auto& ex : examples) {
        if (ex.distractors.size() != 3) {
            throw ConfigError("each kNN example requires exactly 3 distractors");
        }
        out += render(kKnnExampleBlock, {{"question", ex.question},
                                         {"answer", ex.answer},
                                         {"d1", ex.distractors[0]},
                                         {"d2", ex.distractors[1]},
                                         {"d3", ex.distractors[2]}});
        out += "\n";
    }
    out += render(kKnnTarget, {{"question", question}, {"answer", answer}});
    return out;
}

std::vector<std::string> parse_knn_output(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    constexpr std::string_view kMarker = "Distractor";
    while ((pos = text.find(kMarker, pos)) != std::string::npos) {
        std::size_t i = pos + kMarker.size();
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size() || text[i] != ':') {
            pos += kMarker.size();
            continue;
        }
        ++i;
        auto end = text.find('\n', i);
        if (end == std::string::npos) end = text.size();
        const std::string value = trim(text.substr(i, end - i));
        pos = end;
        if (value.empty()) continue;
        if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
    }
    if (out.empty()) throw ParseError("no DistractorN lines in response");
    return out;
}

std::string format_generator_completion(DistractorType type,
                                        const std::vector<std::string>& distractors) {
    std::string out = "### Type: " + distractor_type_to_string(type);
    for (std::size_t i = 0; i < distractors.size(); ++i) {
        out += "\n### Distractor " + std::to_string(i + 1) + ": " + distractors[i];
    }
    return out;
}

std::map<std::string, std::string> template_hashes() {
    return {
        {"ranker.reasoning", sha256_hex(kRankerReasoning)},
        {"ranker.rubric", sha256_hex(kRankerRubric)},
        {"ranker.geval", sha256_hex(kRankerGEval)},
        {"teacher", sha256_hex(kTeacher)},
        {"generator", sha256_hex(kGenerator)},
        {"validity", sha256_hex(kValidity)},
        {"augment", sha256_hex(kAugment)},
        {"knn.example", sha256_hex(kKnnExampleBlock)},
        {"knn.target", sha256_hex(kKnnTarget)},
    };
}

} // namespace forge
