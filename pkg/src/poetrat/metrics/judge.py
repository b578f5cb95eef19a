"""LLM-judge rubric scoring: Beauty of Meaning, Sound and Form on a 1-5 scale."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .. import templates
from ..errors import UnparseableScore
from ..text import round1

PARSE_RETRIES = 2
_INT = re.compile(r"\d+")


class Criterion(str, Enum):
    BM = "BM"
    BS = "BS"
    BF = "BF"

    @property
    def template(self) -> str:
        return f"judge_{self.value.lower()}"


CARD_ORDER = (Criterion.BM, Criterion.BS, Criterion.BF)


def first_int_in_range(reply: str, low: int, high: int) -> int | None:
    for m in _INT.finditer(reply):
        value = int(m.group())
        if low <= value <= high:
            return value
    return None


def parse_score(reply: str) -> int | None:
    return first_int_in_range(reply, 1, 5)


@dataclass(frozen=True)
class JudgeScore:
    criterion: Criterion
    value: int
    raw_reply: str

    def __post_init__(self):
        if self.value not in (1, 2, 3, 4, 5):
            raise ValueError(f"judge score out of range: {self.value}")


def judge_prompt(source: str, translation: str, criterion: Criterion) -> str:
    return templates.render(criterion.template, source=source, translation=translation)


def judge(source: str, translation: str, criterion: Criterion, gateway) -> JudgeScore:
    if not source.strip() or not translation.strip():
        raise ValueError("source and translation must be non-empty")
    criterion = Criterion(criterion)
    prompt = judge_prompt(source, translation, criterion)
    reply = ""
    for _ in range(PARSE_RETRIES + 1):
        reply = gateway.ask(prompt, accept=lambda text: parse_score(text) is not None)
        value = parse_score(reply)
        if value is not None:
            return JudgeScore(criterion, value, reply)
    raise UnparseableScore(reply)


def llm_avg(*values) -> float:
    """Mean of the given scores, rounded to one decimal (halves away from zero)."""
    return round1(sum(Fraction(str(v)) for v in values) / len(values))


@dataclass(frozen=True)
class ScoreCard:
    bm: JudgeScore
    bs: JudgeScore
    bf: JudgeScore

    @property
    def avg(self) -> float:
        return llm_avg(self.bm.value, self.bs.value, self.bf.value)

    def to_dict(self) -> dict:
        return {
            "bm": self.bm.value, "bs": self.bs.value, "bf": self.bf.value, "avg": self.avg,
            "raw": {"bm": self.bm.raw_reply, "bs": self.bs.raw_reply, "bf": self.bf.raw_reply},
        }


def score_card(source: str, translation: str, gateway) -> ScoreCard:
    # criteria run in a fixed order so traces read the same every time
    scores = {c: judge(source, translation, c, gateway) for c in CARD_ORDER}
    return ScoreCard(bm=scores[Criterion.BM], bs=scores[Criterion.BS], bf=scores[Criterion.BF])
