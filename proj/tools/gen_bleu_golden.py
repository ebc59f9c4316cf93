#!/usr/bin/env python3
"""Reference implementation of smoothed sentence BLEU and golden-case generator.

Implements the mteval-13a tokenizer and sentence BLEU with exponential
smoothing and effective order, following the published algorithm (the same one
sacrebleu's `sentence_bleu` with smooth_method='exp' implements). Used to
freeze golden values for the C++ implementation; kept independent of it.

Usage: python3 tools/gen_bleu_golden.py > tests/data/bleu_golden.jsonl
"""

import json
import math
import random
import re
from collections import Counter

_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]


def tokenize_13a(line: str) -> list[str]:
    line = line.replace("<skipped>", "")
    line = line.replace("-\n", "")
    line = line.replace("\n", " ")
    if "&" in line:
        line = line.replace("&quot;", '"')
        line = line.replace("&amp;", "&")
        line = line.replace("&lt;", "<")
        line = line.replace("&gt;", ">")
    line = f" {line} "
    for pattern, repl in _RULES:
        line = pattern.sub(repl, line)
    return line.split()


def ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu_exp(hypothesis: str, reference: str, max_order: int = 4) -> float:
    hyp = tokenize_13a(hypothesis)
    ref = tokenize_13a(reference)
    if not hyp or not ref:
        raise ValueError("empty after tokenization")
    smooth = 1.0
    log_sum = 0.0
    eff_order = 0
    for n in range(1, max_order + 1):
        total = len(hyp) - n + 1
        if total <= 0:
            break
        eff_order = n
        hyp_counts = ngrams(hyp, n)
        ref_counts = ngrams(ref, n)
        correct = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        if correct == 0:
            smooth *= 2.0
            precision = 100.0 / (smooth * total)
        else:
            precision = 100.0 * correct / total
        log_sum += math.log(precision)
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum / eff_order)


WORDS = [
    "the", "loop", "index", "returns", "tuple", "list", "None", "table",
    "join", "select", "rows", "gradient", "tensor", "layer", "bias", "3",
    "0.5", "x[i]", "len(x)", "df.head()", "O(n)", "it's", "semi-colon",
    "naive", "cafe",
]
PUNCT_TAILS = ["", ".", ",", "!", "?", ");", ""]


def random_sentence(rng: random.Random) -> str:
    k = rng.randint(1, 14)
    parts = []
    for _ in range(k):
        word = rng.choice(WORDS)
        parts.append(word + rng.choice(PUNCT_TAILS) if rng.random() < 0.3 else word)
    return " ".join(parts)


def main() -> None:
    rng = random.Random(20240117)
    cases = []
    # fixed edge cases
    cases.append(("the loop returns None", "the loop returns None"))  # identity
    cases.append(("alpha beta gamma", "delta epsilon zeta eta"))  # zero overlap
    cases.append(("the loop returns", "the loop returns None"))  # 3 vs 4, full overlap
    cases.append(("a", "a"))
    cases.append(("a", "b"))
    cases.append(("x y", "x y z w v u"))
    cases.append(("3.14 is pi, roughly.", "3.14 is pi , roughly ."))
    cases.append(("semi-colon 3-4 a-b", "semi-colon 3 - 4 a-b"))
    cases.append(("&quot;quoted&quot; &amp; more", '"quoted" & more'))
    while len(cases) < 109:
        hyp = random_sentence(rng)
        ref = random_sentence(rng)
        cases.append((hyp, ref))
    for hyp, ref in cases:
        score = sentence_bleu_exp(hyp, ref)
        print(json.dumps({
            "hypothesis": hyp,
            "reference": ref,
            "hyp_tokens": tokenize_13a(hyp),
            "score": repr(score),
        }))


if __name__ == "__main__":
    main()
