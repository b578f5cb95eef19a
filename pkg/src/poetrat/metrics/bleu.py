"""Corpus-level BLEU without smoothing."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass

from ..errors import EmptyInput, LengthMismatch

MAX_ORDER = 4
TOKENIZERS = ("whitespace", "character")


def tokenize(text: str, tokenizer: str = "whitespace") -> list[str]:
    if tokenizer == "whitespace":
        return text.split()
    if tokenizer == "character":
        return [ch for ch in text if not ch.isspace()]
    raise ValueError(f"unknown tokenizer {tokenizer!r}; expected one of {TOKENIZERS}")


def ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class BleuReport:
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    brevity_penalty: float
    precisions: tuple[float, float, float, float]  # fractions in [0, 1]
    candidate_len: int
    reference_len: int

    def bleu(self, n: int) -> float:
        return (self.bleu_1, self.bleu_2, self.bleu_3, self.bleu_4)[n - 1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precisions"] = list(self.precisions)
        return d


def corpus_bleu(candidates: list[str], references: list[str], tokenizer: str = "whitespace") -> BleuReport:
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyInput("no sentence pairs")

    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    c_len = r_len = 0
    for cand, ref in zip(candidates, references):
        c_toks, r_toks = tokenize(cand, tokenizer), tokenize(ref, tokenizer)
        c_len += len(c_toks)
        r_len += len(r_toks)
        for n in range(1, MAX_ORDER + 1):
            c_grams = ngram_counts(c_toks, n)
            r_grams = ngram_counts(r_toks, n)
            matches[n - 1] += sum((c_grams & r_grams).values())
            totals[n - 1] += max(len(c_toks) - n + 1, 0)

    precisions = tuple(m / t if t else 0.0 for m, t in zip(matches, totals))
    # an empty candidate side scores zero everywhere; report bp = 0 then
    if c_len == 0:
        bp = 0.0
    elif c_len < r_len:
        bp = math.exp(1.0 - r_len / c_len)
    else:
        bp = 1.0

    scores = []
    for n in range(1, MAX_ORDER + 1):
        head = precisions[:n]
        if bp == 0.0 or min(head) == 0.0:
            scores.append(0.0)
        else:
            scores.append(100.0 * bp * math.exp(sum(math.log(p) for p in head) / n))
    return BleuReport(*scores, brevity_penalty=bp, precisions=precisions,
                      candidate_len=c_len, reference_len=r_len)
