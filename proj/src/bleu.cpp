#include "forge/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "forge/errors.hpp"

namespace forge {

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

// The mteval punctuation class: {-~, [-`, space-&, (-+, :-@, and '/'.
bool is_split_punct(unsigned char c) {
    return (c >= 0x7b && c <= 0x7e) || (c >= 0x5b && c <= 0x60) || (c >= 0x20 && c <= 0x26) ||
           (c >= 0x28 && c <= 0x2b) || (c >= 0x3a && c <= 0x40) || c == 0x2f;
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_period_comma(unsigned char c) { return c == '.' || c == ','; }

// Each rule replicates one substitution regex applied left to right without
// rescanning replacement text.

std::string rule_split_punct(const std::string& s) {
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char c : s) {
        if (is_split_punct(c)) {
            out.push_back(' ');
            out.push_back(static_cast<char>(c));
            out.push_back(' ');
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

// ([^0-9])([.,]) -> "\1 \2 "
std::string rule_period_comma_before(const std::string& s) {
    std::string out;
    out.reserve(s.size() * 2);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && !is_digit(s[i]) && is_period_comma(s[i + 1])) {
            out.push_back(s[i]);
            out.push_back(' ');
            out.push_back(s[i + 1]);
            out.push_back(' ');
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

// ([.,])([^0-9]) -> " \1 \2"
std::string rule_period_comma_after(const std::string& s) {
    std::string out;
    out.reserve(s.size() * 2);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && is_period_comma(s[i]) && !is_digit(s[i + 1])) {
            out.push_back(' ');
            out.push_back(s[i]);
            out.push_back(' ');
            out.push_back(s[i + 1]);
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

// ([0-9])(-) -> "\1 \2 "
std::string rule_digit_dash(const std::string& s) {
    std::string out;
    out.reserve(s.size() * 2);
    std::size_t i = 0;
    while (i < s.size()) {
        if (i + 1 < s.size() && is_digit(s[i]) && s[i + 1] == '-') {
            out.push_back(s[i]);
            out.push_back(' ');
            out.push_back('-');
            out.push_back(' ');
            i += 2;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

} // namespace

std::vector<std::string> tokenize_13a(const std::string& line) {
    std::string s = line;
    replace_all(s, "<skipped>", "");
    replace_all(s, "-\n", "");
    replace_all(s, "\n", " ");
    if (s.find('&') != std::string::npos) {
        replace_all(s, "&quot;", "\"");
        replace_all(s, "&amp;", "&");
        replace_all(s, "&lt;", "<");
        replace_all(s, "&gt;", ">");
    }
    s = " " + s + " ";
    s = rule_split_punct(s);
    s = rule_period_comma_before(s);
    s = rule_period_comma_after(s);
    s = rule_digit_dash(s);

    std::vector<std::string> tokens;
    std::istringstream stream(s);
    std::string token;
    while (stream >> token) tokens.push_back(token);
    return tokens;
}

double sentence_bleu_smoothed(const std::string& hypothesis, const std::string& reference) {
    constexpr int kMaxOrder = 4;
    const std::vector<std::string> hyp = tokenize_13a(hypothesis);
    const std::vector<std::string> ref = tokenize_13a(reference);
    if (hyp.empty()) throw ConfigError("hypothesis is empty after tokenization");
    if (ref.empty()) throw ConfigError("reference is empty after tokenization");

    auto ngram_counts = [](const std::vector<std::string>& tokens, int n) {
        std::map<std::vector<std::string>, int> counts;
        if (static_cast<int>(tokens.size()) >= n) {
            for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
                counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
            }
        }
        return counts;
    };

    double smooth = 1.0;
    double log_sum = 0.0;
    int effective_order = 0;
    bool perfect = true;
    for (int n = 1; n <= kMaxOrder; ++n) {
        const std::int64_t total = static_cast<std::int64_t>(hyp.size()) - n + 1;
        if (total <= 0) break; // orders longer than the hypothesis are excluded
        effective_order = n;
        const auto hyp_counts = ngram_counts(hyp, n);
        const auto ref_counts = ngram_counts(ref, n);
        std::int64_t correct = 0;
        for (const auto& [gram, count] : hyp_counts) {
            const auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) correct += std::min(count, it->second);
        }
        double precision;
        if (correct == 0) {
            smooth *= 2.0;
            precision = 100.0 / (smooth * static_cast<double>(total));
        } else {
            precision = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
        }
        if (correct != total) perfect = false;
        log_sum += std::log(precision);
    }

    double brevity_penalty = 1.0;
    if (hyp.size() < ref.size()) {
        brevity_penalty =
            std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
        perfect = false;
    }
    if (perfect && hyp.size() >= ref.size()) {
        // All clipped counts maxed out with no length deficit: token-identical.
        return 100.0;
    }
    return brevity_penalty * std::exp(log_sum / static_cast<double>(effective_order));
}

} // namespace forge
