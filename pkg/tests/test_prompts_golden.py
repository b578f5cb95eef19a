from pathlib import Path

import pytest

from poetrat import templates
from poetrat.metrics.judge import Criterion, judge_prompt
from poetrat.pipeline import CandidateTranslation, extractor_prompt, selector_prompt, translator_prompt, voter_prompt
from poetrat.retrieval import KnowledgeView, ViewKind

from conftest import GOLDEN, sample_poem

SOURCE = "床前明月光，\n疑是地上霜。"
TRANSLATION = "Moonlight before my bed, like frost upon the ground."


def golden(name: str) -> str:
    return (GOLDEN / f"{name}.txt").read_text(encoding="utf-8")


def rendered_prompts() -> dict[str, str]:
    poem = sample_poem(source_lines=("床前明月光，", "疑是地上霜。"))
    candidates = [CandidateTranslation(kind, f"T-{label}") for kind, label in [
        (ViewKind.HISTORICAL_BACKGROUND, "background"), (ViewKind.DYNASTY_NAME, "dynasty"),
        (ViewKind.MODERN_CHINESE_TRANSLATION, "modern"), (ViewKind.MODERN_CHINESE_ANALYSIS, "analysis"),
        (ViewKind.POETRY_TYPE, "type")]]
    out = {
        "selector": selector_prompt(SOURCE, KnowledgeView(ViewKind.HISTORICAL_BACKGROUND, "客居扬州旅舍，秋夜望月思乡。")),
        "translator": translator_prompt(poem, KnowledgeView(ViewKind.DYNASTY_NAME, "唐代")),
        "voter": voter_prompt(SOURCE, candidates),
        "extractor": extractor_prompt(SOURCE, "The best one is: Moonlight before my bed."),
    }
    for c in Criterion:
        out[c.template] = judge_prompt(SOURCE, TRANSLATION, c)
    return out


@pytest.mark.parametrize("name", ["selector", "translator", "voter", "extractor", "judge_bs", "judge_bf", "judge_bm"])
def test_filled_prompt_matches_golden(name):
    assert rendered_prompts()[name] == golden(name)


def test_asset_slots():
    assert templates.slots(templates.load("selector")) == {"text", "rag context"}
    assert templates.slots(templates.load("translator")) == {"translate type", "rag context", "text"}
    assert templates.slots(templates.load("voter")) == {"src_text", "s1", "s2", "s3", "s4", "s5", "s6"}
    assert templates.slots(templates.load("extractor")) == {"target text", "text"}
    for c in Criterion:
        assert templates.slots(templates.load(c.template)) == {"source", "translation"}


def test_original_typos_kept():
    # the translator wording is kept verbatim, typos included
    assert "this classial a Chinese poem" in templates.load("translator")
    assert "into a English poem" in templates.load("translator")
    assert "given  Chinese translation" in templates.load("judge_bs")


def test_missing_slot_rejected():
    with pytest.raises(KeyError):
        templates.render("selector", text="x")


def test_braces_in_values_left_alone():
    out = templates.render("extractor", target_text="{text}", text="床")
    assert out == "Extract only translation-relevant content from {text} based on 床."


def test_assets_have_no_trailing_newline():
    for name in ["selector", "translator", "voter", "extractor", "judge_bs", "judge_bf", "judge_bm"]:
        assert not templates.load(name).endswith("\n")
