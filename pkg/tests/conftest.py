import random
from pathlib import Path

import pytest

from poetrat.corpus import Dynasty, KnowledgeEntry, Poem
from poetrat.gateway import Gateway, MockTransport

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

# CJK Unified Ideographs, first 400 code points
CJK_POOL = [chr(0x4E00 + i) for i in range(400)]

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def synthetic_entries(n=100, seed=1234, length=(20, 28)):
    rng = random.Random(seed)
    entries, seen = [], set()
    while len(entries) < n:
        text = "".join(rng.choice(CJK_POOL) for _ in range(rng.randint(*length)))
        if text in seen:
            continue
        seen.add(text)
        entries.append(KnowledgeEntry(
            poem_id=f"kb-{len(entries):03d}",
            poem_text=text,
            historical_background=f"背景{len(entries)}",
            dynasty_name="唐代",
            modern_chinese_translation=f"今译{len(entries)}",
            author_introduction=f"作者{len(entries)}",
            modern_chinese_analysis=f"赏析{len(entries)}",
            poetry_type="绝句",
        ))
    return entries


def full_entry(**overrides) -> KnowledgeEntry:
    values = dict(
        poem_id="p1",
        poem_text="床前明月光，疑是地上霜。举头望明月，低头思故乡。",
        historical_background="客居扬州旅舍，秋夜望月思乡。",
        dynasty_name="唐代",
        modern_chinese_translation="明亮的月光洒在床前，好像地上泛起了一层霜。",
        author_introduction="李白，字太白，唐代诗人。",
        modern_chinese_analysis="以月光为线索，由疑霜到望月再到思乡。",
        poetry_type="五言绝句",
    )
    values.update(overrides)
    return KnowledgeEntry(**values)


def sample_poem(**overrides) -> Poem:
    values = dict(
        id="p1", title="静夜思", author="李白", dynasty=Dynasty.TANG,
        source_lines=("床前明月光，", "疑是地上霜。", "举头望明月，", "低头思故乡。"),
        reference_lines=("Before my bed the moonlight glows,", "I take it for the frost below."),
        poem_type="五言绝句",
    )
    values.update(overrides)
    return Poem(**values)


RAT_SCRIPT = [
    ("Please identify the knowledge", "Selected knowledge."),
    ("Explanation:", lambda req: "Candidate for: " + req.last_user_message.split("Explanation:")[1][:12]),
    ("compare six translation candidates", "Voted translation."),
    ("Extract only translation-relevant content", "Final translation."),
]


def make_gateway(script=None, **kw) -> tuple[Gateway, MockTransport]:
    transport = MockTransport(script or RAT_SCRIPT)
    kw.setdefault("sleep", lambda s: None)
    return Gateway(transport, **kw), transport
