#pragma once

#include <string>
#include <vector>

namespace forge {

/// mteval-13a-compatible tokenization: <skipped> removal, HTML entity
/// unescaping, spacing around the standard punctuation classes, digit-aware
/// period/comma/dash splitting, whitespace collapse. Behaviour is pinned
/// byte-exactly by golden cases in the test suite.
std::vector<std::string> tokenize_13a(const std::string& line);

/// Sentence-level BLEU on the 0-100 scale against one reference: modified
/// n-gram precisions up to order 4 (orders beyond the hypothesis length are
/// excluded), exponential smoothing where the r-th zero-match precision
/// becomes 1/(2^r * total_ngrams), geometric mean, and brevity penalty
/// min(1, e^(1 - ref_len/hyp_len)). Scores exactly 100 iff the tokenized
/// sides are equal. Throws ConfigError when either side tokenizes to nothing.
double sentence_bleu_smoothed(const std::string& hypothesis, const std::string& reference);

} // namespace forge
