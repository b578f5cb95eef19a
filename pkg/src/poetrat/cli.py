"""poetrat command line.

Subcommands: stats, translate, judge, bleu, correlate, probe, adequacy.
Exit status is 0 on success, 1 when some items failed, 2 on config or I/O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from scipy import stats as sp_stats

from .corpus import Dynasty, compute_stats, load_knowledge_entries, load_poems, load_triplets
from .errors import (
    ConfigError,
    CorpusIOError,
    DegenerateInput,
    DuplicateId,
    DuplicatePoemText,
    MalformedRecord,
    PoetratError,
    UnparseableChoice,
    UnparseableScore,
)
from .gateway import API_KEY_ENV, Gateway, HttpTransport, MockTransport, ResponseCache
from .metrics.adequacy import accuracy, adequacy_judge
from .metrics.bleu import TOKENIZERS, corpus_bleu
from .metrics.correlation import correlate
from .metrics.judge import llm_avg, score_card
from .pipeline import (
    contamination_probe,
    load_exemplars,
    run_five_shot,
    run_rat,
    run_rerank,
    run_single_view,
    run_zero_shot,
)
from .reports import Table, fmt
from .retrieval import DEFAULT_THRESHOLD, ViewKind, build_index

log = logging.getLogger("poetrat")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2
ENV_PREFIX = "POETRAT_"
BASE_METHODS = ("rat", "zero_shot", "five_shot", "rerank")


# --- configuration -------------------------------------------------------------

@dataclass
class Config:
    endpoint_url: str = ""
    model: str = "gpt-3.5-turbo"
    judge_model: str = ""
    temperature: float = 0.0
    max_parallel: int = 4
    cache_dir: str = ""
    retry_max: int = 3
    retry_base_ms: int = 1000
    retrieval_threshold: float = DEFAULT_THRESHOLD
    seed: int = 0

    def snapshot(self) -> dict:
        return asdict(self)


def _coerce(name: str, value):
    kind = {f.name: f.type for f in fields(Config)}[name]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {name!r}: cannot use {value!r}") from None


def load_config(path: str | None, env: dict, overrides: dict) -> Config:
    """File, then ``POETRAT_*`` environment variables, then command-line flags."""
    values: dict = {}
    known = {f.name for f in fields(Config)}
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from exc
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    for name in known:
        env_value = env.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            values[name] = env_value
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = Config(**{k: _coerce(k, v) for k, v in values.items()})
    if cfg.max_parallel < 1:
        raise ConfigError("max_parallel must be >= 1")
    if cfg.temperature < 0:
        raise ConfigError("temperature must be >= 0")
    return cfg


def make_gateway(cfg: Config, mock_path: str | None, transport=None) -> Gateway:
    if transport is None:
        if mock_path:
            try:
                transport = MockTransport.from_file(mock_path)
            except (OSError, ValueError, KeyError) as exc:
                raise ConfigError(f"cannot load mock script {mock_path}: {exc}") from exc
        elif cfg.endpoint_url:
            transport = HttpTransport(cfg.endpoint_url, os.environ.get(API_KEY_ENV))
        else:
            raise ConfigError("no endpoint_url configured and no --mock script given")
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    return Gateway(transport, model=cfg.model, temperature=cfg.temperature, cache=cache,
                   max_parallel=cfg.max_parallel, retry_max=cfg.retry_max,
                   retry_base_ms=cfg.retry_base_ms)


# --- run records ---------------------------------------------------------------

def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class RunRecord:
    run_id: str
    method: str
    poem_id: str
    source: str
    output: str = ""
    trace: dict | None = None
    scorecard: dict | None = None
    model: str = ""
    seed: int = 0
    calls: int = 0
    cache_hits: int = 0
    error: str | None = None
    config: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


def make_run_id(method: str, poem_id: str, config: dict) -> str:
    # deterministic so that a cached rerun reproduces the same file
    blob = json.dumps([method, poem_id, config], ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def read_runs(path) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"{path}: {exc.strerror or exc}") from exc
    runs = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            runs.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}", str(path)) from exc
    return runs


def write_jsonl(path, records, mode: str = "w") -> None:
    with Path(path).open(mode, encoding="utf-8") as fh:
        for rec in records:
            fh.write((rec if isinstance(rec, str) else json.dumps(rec, ensure_ascii=False)) + "\n")


def _emit(table: Table, report: str | None) -> None:
    print(table.to_text())
    if report:
        Path(report).write_text(table.to_csv(), encoding="utf-8")


def _select_runs(runs: list[dict], method: str | None) -> dict[str, dict]:
    """Successful runs keyed by poem id; ambiguity across methods is an error."""
    by_id: dict[str, dict] = {}
    for run in runs:
        if method and run.get("method") != method:
            continue
        if run.get("error") or not run.get("output"):
            continue
        pid = run["poem_id"]
        if pid in by_id and by_id[pid].get("method") != run.get("method"):
            raise ConfigError(f"poem {pid} has runs from several methods; pass --method")
        by_id[pid] = run
    return by_id


# --- subcommands ---------------------------------------------------------------

def cmd_stats(args, cfg) -> int:
    corpus = compute_stats(load_poems(args.poems))
    table = Table(["poem_type", "poems", "unique_tokens_src", "unique_tokens_tgt",
                   "avg_tokens_src", "avg_tokens_tgt", "total_tokens_src", "total_tokens_tgt"])
    for row in corpus.rows():
        table.add(row.label, row.poem_count, row.unique_tokens_src, row.unique_tokens_tgt,
                  fmt(row.avg_tokens_per_sentence_src), fmt(row.avg_tokens_per_sentence_tgt),
                  row.total_tokens_src, row.total_tokens_tgt)
    _emit(table, args.report)
    return EXIT_OK


def _parse_method(method: str) -> tuple[str, ViewKind | None]:
    if method in BASE_METHODS:
        return method, None
    if method.startswith("single_view:"):
        try:
            return "single_view", ViewKind(method.split(":", 1)[1])
        except ValueError:
            pass
    kinds = ", ".join(k.value for k in ViewKind)
    raise ConfigError(f"unknown method {method!r}; use {', '.join(BASE_METHODS)} or single_view:<{kinds}>")


def cmd_translate(args, cfg, transport=None) -> int:
    base, kind = _parse_method(args.method)
    kb = exemplars = None
    if base in ("rat", "single_view"):
        if not args.kb:
            raise ConfigError(f"method {args.method} needs --kb")
        kb = build_index(load_knowledge_entries(args.kb))
    if base == "five_shot":
        if not args.exemplars:
            raise ConfigError("method five_shot needs --exemplars")
        try:
            exemplars = load_exemplars(args.exemplars)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load exemplars {args.exemplars}: {exc}") from exc
    poems = load_poems(args.poems)
    gateway = make_gateway(cfg, args.mock, transport)
    judge_model = cfg.judge_model or cfg.model

    done: set[str] = set()
    out = Path(args.out)
    if args.resume and out.exists():
        done = {r["poem_id"] for r in read_runs(out) if r.get("method") == args.method and not r.get("error")}
    todo = [p for p in poems if p.id not in done]
    if done:
        log.info("resume: skipping %d poems already in %s", len(poems) - len(todo), out)
    snapshot = cfg.snapshot()

    def work(poem) -> RunRecord:
        session = gateway.session()
        rec = RunRecord(run_id=make_run_id(args.method, poem.id, snapshot), method=args.method,
                        poem_id=poem.id, source=poem.source_text, model=cfg.model,
                        seed=cfg.seed, config=snapshot, timestamps={"started": _now()})
        try:
            if base == "rat":
                rec.output, trace = run_rat(poem, kb, session, cfg.retrieval_threshold)
                rec.trace = trace.to_dict()
            elif base == "single_view":
                rec.output, trace = run_single_view(poem, kb, kind, session, cfg.retrieval_threshold)
                rec.trace = trace.to_dict()
            elif base == "zero_shot":
                rec.output = run_zero_shot(poem, session)
            elif base == "five_shot":
                rec.output = run_five_shot(poem, exemplars, session)
            else:
                rec.output = run_rerank(poem, session, judge_model, seed=cfg.seed)
        except PoetratError as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
            log.error("poem %s failed: %s", poem.id, rec.error)
        rec.calls, rec.cache_hits = session.calls, session.cache_hits
        rec.timestamps["finished"] = _now()
        return rec

    failures = 0
    with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool, out.open("a", encoding="utf-8") as fh:
        # single writer, input order
        for rec in pool.map(work, todo):
            fh.write(rec.to_json() + "\n")
            fh.flush()
            failures += rec.error is not None
    print(f"translated {len(todo) - failures}/{len(todo)} poems with {args.method} "
          f"(live calls {gateway.live_calls}, cache hits {gateway.cache_hits}) -> {out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _mean1(values) -> float | None:
    values = list(values)
    return llm_avg(*values) if values else None


def cmd_judge(args, cfg, transport=None) -> int:
    runs = read_runs(args.runs)
    gateway = make_gateway(cfg, args.mock, transport)
    if cfg.judge_model:
        gateway.model = cfg.judge_model

    def work(run):
        if run.get("error") or not run.get("output"):
            return run, "skipped"
        try:
            card = score_card(run["source"], run["output"], gateway)
        except UnparseableScore as exc:
            log.error("item %s: %s", run.get("poem_id"), exc)
            return dict(run, scorecard=None, judge_error=str(exc)), "unparseable"
        except PoetratError as exc:
            log.error("item %s: %s", run.get("poem_id"), exc)
            return dict(run, scorecard=None, judge_error=f"{type(exc).__name__}: {exc}"), "failed"
        return dict(run, scorecard=card.to_dict()), "ok"

    results = gateway.map(work, runs)
    write_jsonl(args.out, [r for r, _ in results])
    cards = [r["scorecard"] for r, status in results if status == "ok"]
    excluded = [r.get("poem_id") for r, status in results if status in ("unparseable", "failed")]
    skipped = sum(status == "skipped" for _, status in results)

    table = Table(["items", "LLM-BM", "LLM-BS", "LLM-BF", "LLM-Avg", "excluded", "skipped"])
    table.add(len(cards),
              fmt(_mean1(c["bm"] for c in cards)), fmt(_mean1(c["bs"] for c in cards)),
              fmt(_mean1(c["bf"] for c in cards)), fmt(_mean1(c["avg"] for c in cards)),
              len(excluded), skipped)
    _emit(table, args.report)
    if excluded:
        print("excluded items: " + ", ".join(str(e) for e in excluded))
    return EXIT_PARTIAL if excluded else EXIT_OK


def cmd_bleu(args, cfg, transport=None) -> int:
    runs = read_runs(args.runs)
    refs = {p.id: p.reference_text for p in load_poems(args.poems)}
    methods: dict[str, tuple[list, list]] = {}
    excluded: dict[str, int] = {}
    for run in runs:
        method = run.get("method", "?")
        methods.setdefault(method, ([], []))
        excluded.setdefault(method, 0)
        ref = refs.get(run.get("poem_id"), "")
        if run.get("error") or not run.get("output") or not ref:
            excluded[method] += 1
            continue
        methods[method][0].append(run["output"])
        methods[method][1].append(ref)

    table = Table(["method", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "BP", "n", "excluded"])
    for method, (cands, references) in methods.items():
        if not cands:
            table.add(method, "-", "-", "-", "-", "-", 0, excluded[method])
            continue
        rep = corpus_bleu(cands, references, tokenizer=args.tokenizer)
        table.add(method, fmt(rep.bleu_1), fmt(rep.bleu_2), fmt(rep.bleu_3), fmt(rep.bleu_4),
                  fmt(rep.brevity_penalty, 3), len(cands), excluded[method])
    _emit(table, args.report)
    return EXIT_OK


def _read_annotations(path) -> dict[str, dict]:
    out = {}
    for line_no, rec in enumerate(read_runs(path), start=1):
        try:
            item = str(rec["item_id"])
            values = {k: int(rec[k]) for k in ("human_bm", "human_bs", "human_bf")}
        except (KeyError, TypeError, ValueError):
            raise MalformedRecord(line_no, "annotation needs item_id and integer human_bm/bs/bf", str(path)) from None
        if any(not 1 <= v <= 5 for v in values.values()):
            raise MalformedRecord(line_no, "human scores must be integers 1-5", str(path))
        if item in out:
            raise DuplicateId(item, line_no)
        out[item] = values
    return out


def _ttest_p(model, human) -> float | None:
    res = sp_stats.ttest_rel(model, human)
    p = float(res.pvalue)
    return None if p != p else p  # nan when differences are constant


def cmd_correlate(args, cfg, transport=None) -> int:
    runs = _select_runs(read_runs(args.scored_runs), args.method)
    annotations = _read_annotations(args.annotations)
    scored = {pid: r for pid, r in runs.items() if r.get("scorecard")}
    matched = [pid for pid in annotations if pid in scored]
    unmatched = sorted(set(annotations) ^ set(scored))
    if unmatched:
        print(f"unmatched item ids ({len(unmatched)}): " + ", ".join(unmatched))
    if len(matched) < 2:
        raise DegenerateInput(f"only {len(matched)} annotated items match scored runs")

    human = {
        "bm": [annotations[i]["human_bm"] for i in matched],
        "bs": [annotations[i]["human_bs"] for i in matched],
        "bf": [annotations[i]["human_bf"] for i in matched],
    }
    human["avg"] = [llm_avg(b, s, f) for b, s, f in zip(human["bm"], human["bs"], human["bf"])]
    columns = [(f"LLM-{k.upper() if k != 'avg' else 'AVG'}", [scored[i]["scorecard"][k] for i in matched],
                human[k], True) for k in ("bm", "bs", "bf", "avg")]
    if args.poems:
        refs = {p.id: p.reference_text for p in load_poems(args.poems)}
        bleu_items = [i for i in matched if refs.get(i)]
        if len(bleu_items) != len(matched):
            print(f"BLEU columns skip {len(matched) - len(bleu_items)} items without references")
        reports = [corpus_bleu([scored[i]["output"]], [refs[i]], tokenizer=args.tokenizer) for i in bleu_items]
        human_avg = [human["avg"][matched.index(i)] for i in bleu_items]
        columns.append(("BLEU", [r.bleu_4 for r in reports], human_avg, False))
        columns.append(("BLEU-1", [r.bleu_1 for r in reports], human_avg, False))

    table = Table(["metric", "pearson", "spearman", "kendall", "n", "paired_t_p"])
    for name, model_col, human_col, same_scale in columns:
        if len(model_col) < 2:
            table.add(name, "undefined", "undefined", "undefined", len(model_col), "-")
            continue
        rep = correlate(model_col, human_col)
        p = fmt(_ttest_p(model_col, human_col), 4) if same_scale else "-"
        table.add(name, fmt(rep.pearson_r, 3), fmt(rep.spearman_rho, 3), fmt(rep.kendall_tau, 3), rep.n, p)
    _emit(table, args.report)
    return EXIT_OK


PROBE_DYNASTIES = (Dynasty.TANG, Dynasty.SONG, Dynasty.YUAN)
PROBE_LANGUAGES = (("source", "Chinese"), ("target", "English"))


def cmd_probe(args, cfg, transport=None) -> int:
    poems = load_poems(args.poems)
    gateway = make_gateway(cfg, args.mock, transport)
    models = [m.strip() for m in args.models.split(",")] if args.models else [cfg.model]
    groups = {d: [p for p in poems if p.dynasty is d] for d in PROBE_DYNASTIES}
    if args.per_dynasty:
        groups = {d: ps[:args.per_dynasty] for d, ps in groups.items()}

    jobs = []
    for model in models:
        for d, ps in groups.items():
            for poem in ps:
                for lang, _ in PROBE_LANGUAGES:
                    reference = poem.source_text if lang == "source" else poem.reference_text
                    if reference.strip():
                        jobs.append((model, d, lang, poem, reference))

    def work(job):
        model, d, lang, poem, reference = job
        session = gateway.session()
        session.model = model
        try:
            _, rep = contamination_probe(poem.title, poem.author, lang, reference, session)
            return rep.bleu_4
        except PoetratError as exc:
            log.error("probe %s/%s/%s failed: %s", model, poem.id, lang, exc)
            return None

    scores = gateway.map(work, jobs)
    cells: dict[tuple, list] = {}
    failures = 0
    for (model, d, lang, _, _), score in zip(jobs, scores):
        if score is None:
            failures += 1
            continue
        cells.setdefault((model, d, lang), []).append(score)

    headers = ["Type of Poetry"] + [f"{d.value} {name}" for d in PROBE_DYNASTIES for _, name in PROBE_LANGUAGES]
    table = Table(headers)
    for model in models:
        row = [model]
        for d in PROBE_DYNASTIES:
            for lang, _ in PROBE_LANGUAGES:
                vals = cells.get((model, d, lang))
                row.append(fmt(sum(vals) / len(vals)) if vals else "-")
        table.add(*row)
    _emit(table, args.report)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_adequacy(args, cfg, transport=None) -> int:
    triplets = load_triplets(args.triplets)
    runs = _select_runs(read_runs(args.runs), args.method)
    gateway = make_gateway(cfg, args.mock, transport)
    if cfg.judge_model:
        gateway.model = cfg.judge_model
    matched = [t for t in triplets if t.id in runs]
    unmatched = len(triplets) - len(matched)

    def work(triplet):
        try:
            return adequacy_judge(triplet, runs[triplet.id]["output"], gateway, seed=cfg.seed)
        except UnparseableChoice as exc:
            log.error("triplet %s: %s", triplet.id, exc)
            return None

    verdicts = gateway.map(work, matched)
    valid = [v for v in verdicts if v is not None]
    table = Table(["items", "ACC (auto)", "unparseable", "unmatched"])
    table.add(len(valid), fmt(accuracy(valid)) if valid else "undefined",
              len(verdicts) - len(valid), unmatched)
    _emit(table, args.report)
    return EXIT_PARTIAL if len(valid) != len(verdicts) else EXIT_OK


# --- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--model")
    common.add_argument("--judge-model", dest="judge_model")
    common.add_argument("--endpoint-url", dest="endpoint_url")
    common.add_argument("--seed", type=int)
    common.add_argument("--cache-dir", dest="cache_dir")
    common.add_argument("--max-parallel", dest="max_parallel", type=int)
    common.add_argument("--retrieval-threshold", dest="retrieval_threshold", type=float)
    common.add_argument("--mock", help="JSON mock script; replaces the live endpoint")
    common.add_argument("--report", help="also write the report table as CSV here")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="poetrat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="corpus statistics per dynasty")
    p.add_argument("poems")

    p = sub.add_parser("translate", parents=[common], help="translate a poem corpus")
    p.add_argument("poems")
    p.add_argument("--kb", help="knowledge.jsonl (rat and single_view)")
    p.add_argument("--method", default="rat")
    p.add_argument("--exemplars", help="fiveshot.jsonl (five_shot)")
    p.add_argument("--out", default="runs.jsonl")
    p.add_argument("--resume", action="store_true", help="skip poems already recorded in --out")

    p = sub.add_parser("judge", parents=[common], help="attach LLM-judge score cards")
    p.add_argument("runs")
    p.add_argument("--out", default="scored_runs.jsonl")

    p = sub.add_parser("bleu", parents=[common], help="corpus BLEU of run outputs")
    p.add_argument("runs")
    p.add_argument("poems")
    p.add_argument("--tokenizer", choices=TOKENIZERS, default="whitespace")

    p = sub.add_parser("correlate", parents=[common], help="judge vs human correlations")
    p.add_argument("scored_runs")
    p.add_argument("annotations")
    p.add_argument("--method")
    p.add_argument("--poems", help="poems.jsonl; adds BLEU rows")
    p.add_argument("--tokenizer", choices=TOKENIZERS, default="whitespace")

    p = sub.add_parser("probe", parents=[common], help="training-data contamination probe")
    p.add_argument("poems")
    p.add_argument("--models", help="comma-separated models, one table row each")
    p.add_argument("--per-dynasty", dest="per_dynasty", type=int)

    p = sub.add_parser("adequacy", parents=[common], help="automated adequacy accuracy")
    p.add_argument("triplets")
    p.add_argument("runs")
    p.add_argument("--method")
    return parser


COMMANDS = {
    "stats": cmd_stats, "translate": cmd_translate, "judge": cmd_judge, "bleu": cmd_bleu,
    "correlate": cmd_correlate, "probe": cmd_probe, "adequacy": cmd_adequacy,
}


def main(argv=None, transport=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {k: getattr(args, k) for k in
                 ("model", "judge_model", "endpoint_url", "seed", "cache_dir",
                  "max_parallel", "retrieval_threshold")}
    try:
        cfg = load_config(args.config, os.environ, overrides)
        if args.command == "stats":
            return cmd_stats(args, cfg)
        return COMMANDS[args.command](args, cfg, transport)
    except (ConfigError, CorpusIOError, MalformedRecord, DuplicateId, DuplicatePoemText, OSError) as exc:
        print(f"poetrat: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateInput as exc:
        print(f"poetrat: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
