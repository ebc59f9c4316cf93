#pragma once

#include <map>
#include <string>
#include <vector>

namespace forge {

enum class RankerPromptVariant { Reasoning, Rubric, GEval };

std::string variant_to_string(RankerPromptVariant v);
RankerPromptVariant variant_from_string(const std::string& s);

enum class ChoiceToken { A, B };

struct ParsedRankerOutput {
    std::string reasoning; // may be empty (G-Eval emits only the choice line)
    ChoiceToken choice = ChoiceToken::A;
};

enum class DistractorType { CorrectKnowledge, IncorrectKnowledge };

std::string distractor_type_to_string(DistractorType t); // "Correct knowledge" / "Incorrect knowledge"

struct ParsedGeneratorOutput {
    DistractorType distractor_type = DistractorType::IncorrectKnowledge;
    std::vector<std::string> distractors; // trimmed, deduplicated, order kept
    int duplicates_removed = 0;
    bool shortfall = false; // fewer entries than requested after dedup
};

enum class ValidityVerdict { Valid, Invalid };

struct ParsedValidityOutput {
    // Model's own reading of the question, "asking correct option" vs "asking incorrect option".
    bool judged_asking_correct = true;
    std::string analysis;
    ValidityVerdict verdict = ValidityVerdict::Valid;
};

/// Fills the question/answer/distractor slots of the requested ranker prompt.
/// Slot order is exactly A-then-B as given; swapping for the order-swap
/// protocol is the caller's responsibility.
std::string render_ranker_prompt(RankerPromptVariant variant, const std::string& question,
                                 const std::string& answer, const std::string& distractor_a,
                                 const std::string& distractor_b);

/// Extracts the A/B token after the final choice marker ("Choice:"), tolerant
/// of surrounding whitespace and trailing punctuation. Reasoning is the text
/// between the review marker (when present) and the choice line.
/// Throws ParseError when no valid token is found.
ParsedRankerOutput parse_ranker_output(const std::string& text);

std::string render_generator_prompt(const std::string& question, const std::string& answer, int n);

/// Type line first, then "### Distractor k:" lines. Duplicates within one
/// response are dropped (count reported), not rejected wholesale. Fewer than
/// n_expected entries is a shortfall the caller may fill by regenerating;
/// missing type line or zero distractors is a ParseError.
ParsedGeneratorOutput parse_generator_output(const std::string& text, int n_expected);

/// The teacher prompt for generating ranker training data; `winner` names the
/// slot (A or B) holding the distractor students chose more often.
std::string render_teacher_prompt(const std::string& question, const std::string& answer,
                                  const std::string& distractor_a, const std::string& distractor_b,
                                  ChoiceToken winner);

std::string render_validity_prompt(const std::string& question, const std::string& option);
ParsedValidityOutput parse_validity_output(const std::string& text);

/// Augmentation prompt: asks for exactly 3 new distractors in JSON form,
/// with the originals substituted into the [Original Distractors] slot.
std::string render_augment_prompt(const std::string& question, const std::string& answer,
                                  const std::vector<std::string>& originals);

/// Candidates from the augmentation response's JSON object, in key order
/// distractor_1, distractor_2, ... Raw list; deduplication happens downstream.
std::vector<std::string> parse_augment_output(const std::string& text);

struct KnnExample {
    std::string question;
    std::string answer;
    std::vector<std::string> distractors; // exactly 3
};

/// Three in-context example blocks followed by the target block with empty
/// Distractor1..3 slots. Throws ConfigError on wrong arity.
std::string render_knn_prompt(const std::vector<KnnExample>& examples, const std::string& question,
                              const std::string& answer);

/// "DistractorN: text" lines from a kNN-style response, in order, deduplicated.
std::vector<std::string> parse_knn_output(const std::string& text);

/// Serializes a generator completion in the response format the generator
/// prompt requests; parse_generator_output inverts it.
std::string format_generator_completion(DistractorType type,
                                        const std::vector<std::string>& distractors);

/// sha256 of each template's raw text, keyed by a stable name; recorded into
/// run manifests for provenance.
std::map<std::string, std::string> template_hashes();

extern const char* const kTemplateVersion;

} // namespace forge
