"""Knowledge-base index and poem-to-entry text matching.

Lookup is exact on normalized text first, then falls back to Dice similarity
over character-bigram multisets so that variant characters or small
transcription differences still resolve to the right entry.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .corpus import KnowledgeEntry
from .errors import DuplicatePoemText, NotFound
from .text import is_punct

DEFAULT_THRESHOLD = 0.2


def normalize(text: str) -> str:
    return "".join(ch for ch in text if not ch.isspace() and not is_punct(ch))


def bigrams(text: str) -> Counter:
    """Character bigrams of the normalized text; a 1-char text yields itself."""
    norm = normalize(text)
    if len(norm) == 1:
        return Counter([norm])
    return Counter(norm[i:i + 2] for i in range(len(norm) - 1))


def dice(a: Counter, b: Counter) -> float:
    size = sum(a.values()) + sum(b.values())
    if size == 0:
        return 0.0
    overlap = sum((a & b).values())
    return 2.0 * overlap / size


class ViewKind(str, Enum):
    HISTORICAL_BACKGROUND = "historical_background"
    DYNASTY_NAME = "dynasty_name"
    MODERN_CHINESE_TRANSLATION = "modern_chinese_translation"
    AUTHOR_INTRODUCTION = "author_introduction"
    MODERN_CHINESE_ANALYSIS = "modern_chinese_analysis"
    POETRY_TYPE = "poetry_type"

    @property
    def discourse_level(self) -> bool:
        return self in DISCOURSE_KINDS


DISCOURSE_KINDS = frozenset({
    ViewKind.HISTORICAL_BACKGROUND,
    ViewKind.AUTHOR_INTRODUCTION,
    ViewKind.MODERN_CHINESE_ANALYSIS,
})


@dataclass(frozen=True)
class KnowledgeView:
    kind: ViewKind
    text: str

    @property
    def discourse_level(self) -> bool:
        return self.kind.discourse_level

    @property
    def available(self) -> bool:
        return bool(self.text.strip())


def views_of(entry: KnowledgeEntry) -> list[KnowledgeView]:
    return [KnowledgeView(kind, getattr(entry, kind.value)) for kind in ViewKind]


@dataclass(frozen=True)
class RetrievalResult:
    entry: KnowledgeEntry
    score: float
    exact: bool
    ordinal: int

    def to_dict(self) -> dict:
        return {
            "poem_id": self.entry.poem_id,
            "ordinal": self.ordinal,
            "score": self.score,
            "exact": self.exact,
        }


class KnowledgeBase:
    """Immutable after construction; safe to query from many threads."""

    def __init__(self, entries, exact_index, bigram_index, entry_bigrams):
        self.entries = tuple(entries)
        self.exact_index = exact_index
        self.bigram_index = bigram_index
        self._entry_bigrams = entry_bigrams

    def __len__(self) -> int:
        return len(self.entries)


def build_index(entries: list[KnowledgeEntry]) -> KnowledgeBase:
    exact_index: dict[str, int] = {}
    bigram_index: dict[str, list[int]] = {}
    entry_bigrams = []
    for ordinal, entry in enumerate(entries):
        key = normalize(entry.poem_text)
        if key in exact_index:
            raise DuplicatePoemText(key)
        exact_index[key] = ordinal
        grams = bigrams(entry.poem_text)
        entry_bigrams.append(grams)
        # ordinals arrive in increasing order, so posting lists stay sorted
        for gram in grams:
            bigram_index.setdefault(gram, []).append(ordinal)
    return KnowledgeBase(entries, exact_index, bigram_index, entry_bigrams)


def retrieve(kb: KnowledgeBase, poem_text: str, threshold: float = DEFAULT_THRESHOLD) -> RetrievalResult:
    if not poem_text.strip():
        raise ValueError("poem_text is empty")
    if not kb.entries:
        raise NotFound("knowledge base is empty")
    hit = kb.exact_index.get(normalize(poem_text))
    if hit is not None:
        return RetrievalResult(kb.entries[hit], 1.0, True, hit)

    query = bigrams(poem_text)
    candidates = sorted({o for gram in query for o in kb.bigram_index.get(gram, ())})
    best, best_score = -1, -1.0
    for ordinal in candidates:
        score = dice(query, kb._entry_bigrams[ordinal])
        if score > best_score:
            best, best_score = ordinal, score
    if best < 0 or best_score < threshold:
        raise NotFound(f"no knowledge entry scores above {threshold} (best {max(best_score, 0.0):.3f})")
    return RetrievalResult(kb.entries[best], best_score, False, best)
