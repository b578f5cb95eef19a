import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poetrat.corpus import (
    Dynasty,
    Poem,
    compute_stats,
    load_knowledge_entries,
    load_poems,
    load_triplets,
    save_jsonl,
)
from poetrat.errors import CorpusIOError, DuplicateId, MalformedRecord

from conftest import FIXTURES


def write_lines(path, records):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")
    return path


def poem_record(pid="a", **kw):
    rec = {"id": pid, "title": "t", "author": "a", "dynasty": "Tang",
           "source_lines": ["春眠不觉晓"], "reference_lines": ["Spring dawn arrives unnoticed"],
           "poem_type": "绝句"}
    rec.update(kw)
    return rec


class TestLoadPoems:
    def test_two_records_in_file_order(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [poem_record("b"), poem_record("a")])
        poems = load_poems(path)
        assert [p.id for p in poems] == ["b", "a"]
        assert poems[0].dynasty is Dynasty.TANG
        assert poems[0].source_lines == ("春眠不觉晓",)

    def test_empty_file(self, tmp_path):
        (tmp_path / "p.jsonl").write_text("", encoding="utf-8")
        assert load_poems(tmp_path / "p.jsonl") == []

    def test_missing_source_lines(self, tmp_path):
        rec = poem_record()
        del rec["source_lines"]
        path = write_lines(tmp_path / "p.jsonl", [poem_record("ok"), rec])
        with pytest.raises(MalformedRecord) as err:
            load_poems(path)
        assert err.value.line_no == 2

    @pytest.mark.parametrize("bad", [
        {"source_lines": []},
        {"source_lines": ["好", "  "]},
        {"reference_lines": ["fine", ""]},
        {"dynasty": "Ming"},
        {"id": ""},
        {"source_lines": "床前明月光"},
    ])
    def test_invariant_violations(self, tmp_path, bad):
        path = write_lines(tmp_path / "p.jsonl", [poem_record(**bad)])
        with pytest.raises(MalformedRecord):
            load_poems(path)

    def test_unannotated_poem_allowed(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [poem_record(reference_lines=[])])
        assert load_poems(path)[0].reference_lines == ()

    def test_duplicate_id(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [poem_record("x"), poem_record("x")])
        with pytest.raises(DuplicateId):
            load_poems(path)

    def test_bad_json_and_missing_file(self, tmp_path):
        (tmp_path / "p.jsonl").write_text('{"id": \n', encoding="utf-8")
        with pytest.raises(MalformedRecord):
            load_poems(tmp_path / "p.jsonl")
        with pytest.raises(CorpusIOError):
            load_poems(tmp_path / "missing.jsonl")

    def test_fixture_corpus(self):
        poems = load_poems(FIXTURES / "poems.jsonl")
        assert [p.dynasty for p in poems] == [Dynasty.TANG, Dynasty.SONG, Dynasty.YUAN]


class TestLoadTriplets:
    def test_fixture(self):
        assert len(load_triplets(FIXTURES / "triplets.jsonl")) == 3

    def test_identical_contrasts(self, tmp_path):
        path = write_lines(tmp_path / "t.jsonl", [
            {"id": "1", "source": "举头望明月", "correct": "moon", "erroneous": "moon", "ambiguous_span": ""}])
        with pytest.raises(MalformedRecord):
            load_triplets(path)

    def test_span_not_in_source(self, tmp_path):
        path = write_lines(tmp_path / "t.jsonl", [
            {"id": "1", "source": "举头望明月", "correct": "moon", "erroneous": "sun", "ambiguous_span": "故乡"}])
        with pytest.raises(MalformedRecord):
            load_triplets(path)


class TestLoadKnowledge:
    def test_fixture(self):
        entries = load_knowledge_entries(FIXTURES / "knowledge.jsonl")
        assert len(entries) == 4
        assert entries.missing_fields == 0

    def test_empty_poem_text(self, tmp_path):
        path = write_lines(tmp_path / "k.jsonl", [{"poem_text": " ", "dynasty_name": "唐代"}])
        with pytest.raises(MalformedRecord):
            load_knowledge_entries(path)

    def test_missing_field_defaults(self, tmp_path):
        rec = json.loads((FIXTURES / "knowledge.jsonl").read_text(encoding="utf-8").splitlines()[0])
        del rec["author_introduction"]
        entries = load_knowledge_entries(write_lines(tmp_path / "k.jsonl", [rec]))
        assert entries[0].author_introduction == ""
        assert entries.missing_fields == 1


class TestStats:
    def test_empty(self):
        stats = compute_stats([])
        assert stats.by_dynasty == {}
        t = stats.total
        assert (t.poem_count, t.total_tokens_src, t.total_tokens_tgt) == (0, 0, 0)
        assert t.avg_tokens_per_sentence_src == 0.0 and t.avg_tokens_per_sentence_tgt == 0.0

    def test_single_line_hand_count(self):
        poem = Poem("a", "春晓", "孟浩然", Dynasty.TANG, ("春眠不觉晓",), ("Spring dawn arrives unnoticed",))
        t = compute_stats([poem]).total
        assert t.total_tokens_src == 5 and t.total_tokens_tgt == 4
        assert t.avg_tokens_per_sentence_src == 5.0 and t.avg_tokens_per_sentence_tgt == 4.0
        assert t.unique_tokens_src == 5 and t.unique_tokens_tgt == 4

    def test_fixture_hand_counts(self):
        # 静夜思: 4 lines x 5 ideographs; reference lines have 6, 7, 8, 7 words
        stats = compute_stats(load_poems(FIXTURES / "poems.jsonl"))
        tang = stats.by_dynasty[Dynasty.TANG]
        assert (tang.total_tokens_src, tang.total_tokens_tgt) == (20, 28)
        assert tang.avg_tokens_per_sentence_tgt == 7.0
        # 床前明月光疑是地上霜举头望明月低头思故乡: 明, 月 and 头 repeat
        assert tang.unique_tokens_src == 17
        assert [r.label for r in stats.rows()] == ["Tang", "Song", "Yuan", "Total"]

    def test_punctuation_and_case(self):
        poem = Poem("a", "", "", Dynasty.SONG, ("春，眠！",), ("The moon, the MOON!",))
        t = compute_stats([poem]).total
        assert t.total_tokens_src == 2
        assert t.total_tokens_tgt == 4
        assert t.unique_tokens_tgt == 2


lines = st.lists(st.text(alphabet="春眠不觉晓处闻啼鸟，。", min_size=1, max_size=8)
                 .filter(lambda s: s.strip("，。")), min_size=1, max_size=4)
ref_lines = st.lists(st.text(alphabet="abc XYZ,.", min_size=1, max_size=12).filter(str.strip), max_size=4)


@st.composite
def corpora(draw, prefix="p"):
    n = draw(st.integers(0, 5))
    return [Poem(f"{prefix}{i}", draw(st.text(max_size=4)), draw(st.text(max_size=4)),
                 draw(st.sampled_from(list(Dynasty))), tuple(draw(lines)), tuple(draw(ref_lines)),
                 draw(st.text(max_size=5)))
            for i in range(n)]


@settings(max_examples=50, deadline=None)
@given(corpora())
def test_save_load_round_trip(tmp_path_factory, poems):
    path = tmp_path_factory.mktemp("rt") / "poems.jsonl"
    save_jsonl(path, poems)
    assert load_poems(path) == poems


@settings(max_examples=50, deadline=None)
@given(corpora(), st.randoms())
def test_stats_permutation_invariant(poems, rnd):
    shuffled = list(poems)
    rnd.shuffle(shuffled)
    assert compute_stats(shuffled) == compute_stats(poems)


@settings(max_examples=50, deadline=None)
@given(corpora("a"), corpora("b"))
def test_stats_totals_additive(a, b):
    sa, sb, sab = compute_stats(a).total, compute_stats(b).total, compute_stats(a + b).total
    assert sab.poem_count == sa.poem_count + sb.poem_count
    assert sab.total_tokens_src == sa.total_tokens_src + sb.total_tokens_src
    assert sab.total_tokens_tgt == sa.total_tokens_tgt + sb.total_tokens_tgt
    by = compute_stats(a + b).by_dynasty.values()
    assert sum(r.poem_count for r in by) == sab.poem_count
    assert sum(r.total_tokens_src for r in by) == sab.total_tokens_src
