"""Retrieval-augmented translation (RAT) and the baseline translation methods.

RAT runs two workflows. The first retrieves the poem's knowledge-base entry
and fans it out into six knowledge views. The second trims the three long
(discourse-level) views with the Selector, translates once per available
view, lets the Voter merge the candidates and has the Extractor strip
whatever is not translation.

Every function takes the gateway explicitly and never mutates its inputs.
"""

from __future__ import annotations

import json
import logging
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import templates
from .corpus import Poem
from .errors import EmptyCompletion, ExemplarCount, NotFound, UnparseableChoice, ViewUnavailable
from .metrics.bleu import BleuReport, corpus_bleu
from .metrics.judge import first_int_in_range
from .retrieval import (
    DEFAULT_THRESHOLD,
    KnowledgeBase,
    KnowledgeView,
    RetrievalResult,
    ViewKind,
    retrieve,
    views_of,
)

log = logging.getLogger(__name__)

MISSING_SLOT = "N/A"
RERANK_TEMPERATURE = 0.3
RERANK_SAMPLES = 3
PARSE_RETRIES = 2


@dataclass(frozen=True)
class CandidateTranslation:
    view_kind: ViewKind
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("candidate translation is empty")


@dataclass
class RatTrace:
    retrieval: RetrievalResult | None = None
    selector_outputs: dict = field(default_factory=dict)  # ViewKind -> str
    candidates: list = field(default_factory=list)
    voter_raw: str = ""
    final: str = ""
    call_count: int = 0
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "retrieval": self.retrieval.to_dict() if self.retrieval else None,
            "selector_outputs": {k.value: v for k, v in self.selector_outputs.items()},
            "candidates": [{"view_kind": c.view_kind.value, "text": c.text} for c in self.candidates],
            "voter_raw": self.voter_raw,
            "final": self.final,
            "call_count": self.call_count,
            "warnings": list(self.warnings),
        }


class _CallCounter:
    """Counts gateway calls issued by one pipeline run, failed ones included."""

    def __init__(self, gateway):
        self.gateway = gateway
        self.calls = 0
        self._lock = threading.Lock()

    def __getattr__(self, name):
        return getattr(self.gateway, name)

    def ask(self, prompt, **kw):
        with self._lock:
            self.calls += 1
        return self.gateway.ask(prompt, **kw)

    def map(self, fn, items):
        return self.gateway.map(fn, items)


# --- RAT stages ----------------------------------------------------------------

def selector_prompt(source_poem: str, view: KnowledgeView) -> str:
    return templates.render("selector", text=source_poem, rag_context=view.text)


def translator_prompt(poem: Poem, view: KnowledgeView) -> str:
    return templates.render("translator", translate_type=poem.poem_type,
                            rag_context=view.text, text=poem.source_text)


def voter_prompt(source_poem: str, candidates: list[CandidateTranslation]) -> str:
    by_kind = {c.view_kind: c.text for c in candidates}
    slots = {f"s{i}": by_kind.get(kind, MISSING_SLOT) for i, kind in enumerate(ViewKind, start=1)}
    return templates.render("voter", src_text=source_poem, **slots)


def extractor_prompt(source_poem: str, voter_output: str) -> str:
    return templates.render("extractor", target_text=voter_output, text=source_poem)


def select_knowledge(source_poem: str, view: KnowledgeView, gateway) -> str:
    if not view.discourse_level:
        raise ValueError(f"selector only applies to discourse-level views, not {view.kind.value}")
    if not view.available:
        raise ValueError(f"view {view.kind.value} is empty; skip the selector")
    return gateway.ask(selector_prompt(source_poem, view))


def translate_with_view(poem: Poem, view: KnowledgeView, gateway) -> CandidateTranslation:
    if not view.available:
        raise ValueError(f"view {view.kind.value} is empty")
    return CandidateTranslation(view.kind, gateway.ask(translator_prompt(poem, view)))


def vote(source_poem: str, candidates: list[CandidateTranslation], gateway) -> str:
    if not candidates:
        raise ValueError("no candidates to vote on")
    if len(candidates) < 2:
        return candidates[0].text
    order = list(ViewKind)
    ranked = sorted(candidates, key=lambda c: order.index(c.view_kind))
    return gateway.ask(voter_prompt(source_poem, ranked))


def extract_final(source_poem: str, voter_output: str, gateway, warnings: list | None = None) -> str:
    if not voter_output.strip():
        raise ValueError("voter output is empty")
    try:
        return gateway.ask(extractor_prompt(source_poem, voter_output)).strip()
    except EmptyCompletion:
        msg = "extractor returned nothing; using voter output verbatim"
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)
        return voter_output


def _retrieve(poem: Poem, kb: KnowledgeBase, threshold: float) -> RetrievalResult:
    try:
        return retrieve(kb, poem.source_text, threshold=threshold)
    except NotFound as exc:
        raise NotFound(f"poem {poem.id}: {exc}") from exc


def _refine_views(poem: Poem, views: list[KnowledgeView], gw, trace: RatTrace) -> list[KnowledgeView]:
    """Run the selector over discourse-level views; other views pass through."""
    to_select = [v for v in views if v.discourse_level]
    outputs = gw.map(lambda v: select_knowledge(poem.source_text, v, gw), to_select)
    refined = dict(zip((v.kind for v in to_select), outputs))
    trace.selector_outputs.update(refined)
    return [KnowledgeView(v.kind, refined[v.kind]) if v.kind in refined else v for v in views]


def run_rat(poem: Poem, kb: KnowledgeBase, gateway, threshold: float = DEFAULT_THRESHOLD):
    """Full RAT: returns ``(final_translation, trace)``."""
    gw = _CallCounter(gateway)
    trace = RatTrace(retrieval=_retrieve(poem, kb, threshold))
    views = [v for v in views_of(trace.retrieval.entry) if v.available]
    if not views:
        raise ViewUnavailable(f"poem {poem.id}: knowledge entry has no usable views")
    try:
        views = _refine_views(poem, views, gw, trace)

        def translate(view):
            try:
                return translate_with_view(poem, view, gw)
            except EmptyCompletion:
                msg = f"translator returned nothing for {view.kind.value}; candidate dropped"
                log.warning(msg)
                trace.warnings.append(msg)
                return None

        trace.candidates = [c for c in gw.map(translate, views) if c is not None]
        if not trace.candidates:
            raise EmptyCompletion(f"poem {poem.id}: every translator call came back empty")

        try:
            trace.voter_raw = vote(poem.source_text, trace.candidates, gw)
        except EmptyCompletion:
            fallback = next((c for c in trace.candidates
                             if c.view_kind is ViewKind.MODERN_CHINESE_TRANSLATION), trace.candidates[0])
            msg = f"voter returned nothing; falling back to the {fallback.view_kind.value} candidate"
            log.warning(msg)
            trace.warnings.append(msg)
            trace.voter_raw = fallback.text

        trace.final = extract_final(poem.source_text, trace.voter_raw, gw, trace.warnings)
    finally:
        trace.call_count = gw.calls
    return trace.final, trace


def run_single_view(poem: Poem, kb: KnowledgeBase, kind, gateway, threshold: float = DEFAULT_THRESHOLD):
    """One knowledge view, no Voter. Returns ``(final_translation, trace)``."""
    kind = ViewKind(kind)
    gw = _CallCounter(gateway)
    trace = RatTrace(retrieval=_retrieve(poem, kb, threshold))
    view = next(v for v in views_of(trace.retrieval.entry) if v.kind is kind)
    if not view.available:
        raise ViewUnavailable(f"poem {poem.id}: {kind.value} is empty in the knowledge base")
    try:
        (view,) = _refine_views(poem, [view], gw, trace)
        candidate = translate_with_view(poem, view, gw)
        trace.candidates = [candidate]
        trace.voter_raw = candidate.text
        trace.final = extract_final(poem.source_text, candidate.text, gw, trace.warnings)
    finally:
        trace.call_count = gw.calls
    return trace.final, trace


# --- baselines -----------------------------------------------------------------

def zero_shot_prompt(poem: Poem) -> str:
    return templates.render("zero_shot", text=poem.source_text)


def run_zero_shot(poem: Poem, gateway) -> str:
    return gateway.ask(zero_shot_prompt(poem), temperature=0.0)


def load_exemplars(path) -> list[tuple[str, str]]:
    pairs = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                pairs.append((rec["source"], rec["target"]))
    return pairs


def five_shot_prompt(poem: Poem, exemplars) -> str:
    if len(exemplars) != 5:
        raise ExemplarCount(f"five-shot needs exactly 5 exemplars, got {len(exemplars)}")
    blocks = [f"Example {i}:\nChinese poem:\n{src}\nEnglish poem:\n{tgt}"
              for i, (src, tgt) in enumerate(exemplars, start=1)]
    return templates.render("five_shot", examples="\n\n".join(blocks), text=poem.source_text)


def run_five_shot(poem: Poem, exemplars, gateway) -> str:
    return gateway.ask(five_shot_prompt(poem, exemplars), temperature=0.0)


def rerank_select_prompt(poem: Poem, candidates: list[str]) -> str:
    return templates.render("rerank_select", text=poem.source_text,
                            **{f"c{i}": c for i, c in enumerate(candidates, start=1)})


def run_rerank(poem: Poem, gateway, judge_model: str, seed: int = 0) -> str:
    """Baseline at temperature 0 plus three samples at 0.3; the judge model picks one."""
    prompt = zero_shot_prompt(poem)
    rng = random.Random(seed)
    sample_seeds = [rng.randrange(2**31) for _ in range(RERANK_SAMPLES)]
    candidates = [gateway.ask(prompt, temperature=0.0)]
    candidates += gateway.map(
        lambda s: gateway.ask(prompt, temperature=RERANK_TEMPERATURE, seed=s), sample_seeds)

    select = rerank_select_prompt(poem, candidates)
    valid = lambda text: first_int_in_range(text, 1, len(candidates)) is not None  # noqa: E731
    reply = ""
    for _ in range(PARSE_RETRIES + 1):
        reply = gateway.ask(select, model=judge_model, temperature=0.0, accept=valid)
        choice = first_int_in_range(reply, 1, len(candidates))
        if choice is not None:
            return candidates[choice - 1]
    raise UnparseableChoice(reply)


# --- contamination probe -------------------------------------------------------

def probe_prompt(title: str, author: str, language: str) -> str:
    if language not in ("source", "target"):
        raise ValueError(f"language must be 'source' or 'target', not {language!r}")
    return templates.render(f"probe_{language}", title=title, author=author)


def contamination_probe(title: str, author: str, language: str, reference: str,
                        gateway) -> tuple[str, BleuReport]:
    """Ask for a poem from its title and author alone and BLEU it against the reference."""
    if not reference.strip():
        raise ValueError("reference is empty")
    generated = gateway.ask(probe_prompt(title, author, language), temperature=0.0)
    tokenizer = "character" if language == "source" else "whitespace"
    return generated, corpus_bleu([generated], [reference], tokenizer=tokenizer)
