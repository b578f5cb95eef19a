"""Poem, adequacy-triplet and knowledge-base records: loading, saving, statistics."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CorpusIOError, DuplicateId, MalformedRecord
from .text import round1, source_tokens, target_tokens

log = logging.getLogger(__name__)


class Dynasty(str, Enum):
    TANG = "Tang"
    SONG = "Song"
    YUAN = "Yuan"
    OTHER = "Other"


@dataclass(frozen=True)
class Poem:
    id: str
    title: str
    author: str
    dynasty: Dynasty
    source_lines: tuple[str, ...]
    reference_lines: tuple[str, ...] = ()
    poem_type: str = ""

    @property
    def source_text(self) -> str:
        return "\n".join(self.source_lines)

    @property
    def reference_text(self) -> str:
        return "\n".join(self.reference_lines)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "author": self.author,
            "dynasty": self.dynasty.value,
            "source_lines": list(self.source_lines),
            "reference_lines": list(self.reference_lines),
            "poem_type": self.poem_type,
        }


@dataclass(frozen=True)
class AdequacyTriplet:
    id: str
    source: str
    correct: str
    erroneous: str
    ambiguous_span: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


KNOWLEDGE_FIELDS = (
    "historical_background",
    "dynasty_name",
    "modern_chinese_translation",
    "author_introduction",
    "modern_chinese_analysis",
    "poetry_type",
)


@dataclass(frozen=True)
class KnowledgeEntry:
    poem_text: str
    historical_background: str = ""
    dynasty_name: str = ""
    modern_chinese_translation: str = ""
    author_introduction: str = ""
    modern_chinese_analysis: str = ""
    poetry_type: str = ""
    poem_id: str | None = None

    def to_dict(self) -> dict:
        d = {"poem_id": self.poem_id, "poem_text": self.poem_text}
        d.update({name: getattr(self, name) for name in KNOWLEDGE_FIELDS})
        return d


class KnowledgeEntries(list):
    """List of entries plus the number of knowledge fields that had to be defaulted."""

    def __init__(self, entries: Iterable[KnowledgeEntry] = (), missing_fields: int = 0):
        super().__init__(entries)
        self.missing_fields = missing_fields


# --- reading -----------------------------------------------------------------

def _iter_records(path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}", str(path)) from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not an object", str(path))
            yield line_no, obj


def _str_field(obj: dict, name: str, line_no: int, path, required: bool = True) -> str:
    if name not in obj or obj[name] is None:
        if required:
            raise MalformedRecord(line_no, f"missing field {name!r}", str(path))
        return ""
    value = obj[name]
    if not isinstance(value, str):
        raise MalformedRecord(line_no, f"field {name!r} must be a string", str(path))
    return value


def _lines_field(obj: dict, name: str, line_no: int, path, required: bool) -> tuple[str, ...]:
    if name not in obj or obj[name] is None:
        if required:
            raise MalformedRecord(line_no, f"missing field {name!r}", str(path))
        return ()
    value = obj[name]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise MalformedRecord(line_no, f"field {name!r} must be a list of strings", str(path))
    if any(not v.strip() for v in value):
        raise MalformedRecord(line_no, f"field {name!r} contains an empty line", str(path))
    return tuple(value)


def _check_unique(seen: set, record_id: str, line_no: int) -> None:
    if record_id in seen:
        raise DuplicateId(record_id, line_no)
    seen.add(record_id)


def load_poems(path) -> list[Poem]:
    poems, seen = [], set()
    for line_no, obj in _iter_records(path):
        poem_id = _str_field(obj, "id", line_no, path)
        if not poem_id:
            raise MalformedRecord(line_no, "empty id", str(path))
        source_lines = _lines_field(obj, "source_lines", line_no, path, required=True)
        if not source_lines:
            raise MalformedRecord(line_no, "source_lines is empty", str(path))
        dynasty_raw = _str_field(obj, "dynasty", line_no, path, required=False) or "Other"
        try:
            dynasty = Dynasty(dynasty_raw)
        except ValueError:
            raise MalformedRecord(line_no, f"unknown dynasty {dynasty_raw!r}", str(path)) from None
        _check_unique(seen, poem_id, line_no)
        poems.append(Poem(
            id=poem_id,
            title=_str_field(obj, "title", line_no, path, required=False),
            author=_str_field(obj, "author", line_no, path, required=False),
            dynasty=dynasty,
            source_lines=source_lines,
            reference_lines=_lines_field(obj, "reference_lines", line_no, path, required=False),
            poem_type=_str_field(obj, "poem_type", line_no, path, required=False),
        ))
    return poems


def load_triplets(path) -> list[AdequacyTriplet]:
    triplets, seen = [], set()
    for line_no, obj in _iter_records(path):
        fields = {name: _str_field(obj, name, line_no, path)
                  for name in ("id", "source", "correct", "erroneous")}
        span = _str_field(obj, "ambiguous_span", line_no, path, required=False)
        if not fields["id"]:
            raise MalformedRecord(line_no, "empty id", str(path))
        if not fields["source"].strip():
            raise MalformedRecord(line_no, "empty source", str(path))
        if fields["correct"] == fields["erroneous"]:
            raise MalformedRecord(line_no, "correct and erroneous contrasts are identical", str(path))
        if span and span not in fields["source"]:
            raise MalformedRecord(line_no, f"ambiguous_span {span!r} does not occur in source", str(path))
        _check_unique(seen, fields["id"], line_no)
        triplets.append(AdequacyTriplet(ambiguous_span=span, **fields))
    return triplets


def load_knowledge_entries(path) -> KnowledgeEntries:
    entries = KnowledgeEntries()
    for line_no, obj in _iter_records(path):
        poem_text = _str_field(obj, "poem_text", line_no, path)
        if not poem_text.strip():
            raise MalformedRecord(line_no, "empty poem_text", str(path))
        poem_id = obj.get("poem_id")
        if poem_id is not None and not isinstance(poem_id, str):
            raise MalformedRecord(line_no, "poem_id must be a string", str(path))
        values = {}
        for name in KNOWLEDGE_FIELDS:
            if name not in obj:
                entries.missing_fields += 1
                log.warning("%s:%d: missing knowledge field %r, using empty string", path, line_no, name)
            values[name] = _str_field(obj, name, line_no, path, required=False)
        entries.append(KnowledgeEntry(poem_text=poem_text, poem_id=poem_id, **values))
    return entries


# --- writing -----------------------------------------------------------------

def save_jsonl(path, records: Iterable) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            data = rec.to_dict() if hasattr(rec, "to_dict") else rec
            fh.write(json.dumps(data, ensure_ascii=False) + "\n")


# --- statistics --------------------------------------------------------------

@dataclass(frozen=True)
class StatsRow:
    label: str
    poem_count: int = 0
    unique_tokens_src: int = 0
    unique_tokens_tgt: int = 0
    avg_tokens_per_sentence_src: float = 0.0
    avg_tokens_per_sentence_tgt: float = 0.0
    total_tokens_src: int = 0
    total_tokens_tgt: int = 0


@dataclass(frozen=True)
class CorpusStats:
    by_dynasty: dict = field(default_factory=dict)  # Dynasty -> StatsRow
    total: StatsRow = StatsRow("Total")

    def rows(self) -> list[StatsRow]:
        return [self.by_dynasty[d] for d in Dynasty if d in self.by_dynasty] + [self.total]


def _stats_row(label: str, poems: list[Poem]) -> StatsRow:
    src_vocab, tgt_vocab = set(), set()
    src_total = tgt_total = src_sents = tgt_sents = 0
    for poem in poems:
        for line in poem.source_lines:
            toks = source_tokens(line)
            src_vocab.update(toks)
            src_total += len(toks)
            src_sents += 1
        for line in poem.reference_lines:
            toks = target_tokens(line)
            tgt_vocab.update(t.lower() for t in toks)
            tgt_total += len(toks)
            tgt_sents += 1
    return StatsRow(
        label=label,
        poem_count=len(poems),
        unique_tokens_src=len(src_vocab),
        unique_tokens_tgt=len(tgt_vocab),
        avg_tokens_per_sentence_src=round1(src_total / src_sents) if src_sents else 0.0,
        avg_tokens_per_sentence_tgt=round1(tgt_total / tgt_sents) if tgt_sents else 0.0,
        total_tokens_src=src_total,
        total_tokens_tgt=tgt_total,
    )


def compute_stats(poems: list[Poem]) -> CorpusStats:
    groups: dict[Dynasty, list[Poem]] = {}
    for poem in poems:
        groups.setdefault(poem.dynasty, []).append(poem)
    by_dynasty = {d: _stats_row(d.value, groups[d]) for d in Dynasty if d in groups}
    return CorpusStats(by_dynasty=by_dynasty, total=_stats_row("Total", list(poems)))
