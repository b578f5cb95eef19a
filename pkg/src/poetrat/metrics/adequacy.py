"""Automated adequacy check against (source, correct, erroneous) triplets.

The model sees the two contrast readings under labels A/B in a seeded
random order and names the one the candidate agrees with. Verdicts are
model-derived and reported as "ACC (auto)".
"""

from __future__ import annotations

import random
import re

from .. import templates
from ..corpus import AdequacyTriplet
from ..errors import EmptyInput, UnparseableChoice
from ..text import round1

PARSE_RETRIES = 2
LABELS = ("A", "B")
_LABEL = re.compile(r"\b([AB])\b")


def parse_label(reply: str) -> str | None:
    m = _LABEL.search(reply)
    return m.group(1) if m else None


def presented_order(triplet: AdequacyTriplet, seed: int) -> tuple[str, str]:
    """(text under A, text under B); depends only on seed and triplet id."""
    rng = random.Random(f"{seed}:{triplet.id}")
    pair = [triplet.correct, triplet.erroneous]
    rng.shuffle(pair)
    return pair[0], pair[1]


def adequacy_prompt(triplet: AdequacyTriplet, candidate: str, seed: int = 0) -> str:
    option_a, option_b = presented_order(triplet, seed)
    return templates.render("adequacy", source=triplet.source, candidate=candidate,
                            option_a=option_a, option_b=option_b)


def adequacy_judge(triplet: AdequacyTriplet, candidate: str, gateway, seed: int = 0) -> int:
    if not candidate.strip():
        raise ValueError("candidate translation is empty")
    option_a, _ = presented_order(triplet, seed)
    correct_label = "A" if option_a == triplet.correct else "B"
    prompt = adequacy_prompt(triplet, candidate, seed)
    reply = ""
    for _ in range(PARSE_RETRIES + 1):
        reply = gateway.ask(prompt, accept=lambda text: parse_label(text) is not None)
        label = parse_label(reply)
        if label is not None:
            return int(label == correct_label)
    raise UnparseableChoice(reply)


def accuracy(verdicts) -> float:
    verdicts = list(verdicts)
    if not verdicts:
        raise EmptyInput("no verdicts")
    return round1(100 * sum(verdicts) / len(verdicts))
