"""Pipeline orchestration: plan -> run (cached, resumable) -> parse -> compare -> report."""

from __future__ import annotations

import concurrent.futures as cf
import hashlib
import json
import logging
import os
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping

import numpy as np

from pollsim.demographics import CrosstabKey, DemographicSchema, SamplingPlan, Task, build_plan
from pollsim.human_data import RecodeSpec, human_cell_table, ingest_csv
from pollsim.llm_backend import (
    BackendConfig,
    CompletionResult,
    LiveBackend,
    MockBackend,
    MockOpinionModel,
    PriceTable,
    RetriesExhaustedError,
    estimate_cost,
    load_mock_model,
    prompt_token_count,
)
from pollsim.parsing import ParseReport, ResponseRecord, classify_batch, parse_response
from pollsim.prompting import DEFAULT_SYSTEM_PROMPT, PromptContext, render_prompt
from pollsim.questionnaire import Questionnaire, default_questionnaire_path, load_questionnaire
from pollsim.report import RunManifest, emit_tables, format_summary, load_tables, render_charts
from pollsim.stats import (
    ALL_GROUPINGS,
    DEFAULT_BOOTSTRAP_REPS,
    ComparisonResult,
    Grouping,
    compare,
    gender_histograms,
    marginalize,
    response_cell_table,
    summarize_table,
)

logger = logging.getLogger(__name__)

RAW_RESPONSES = "raw_responses.jsonl"
FAILED_TASKS = "failed_tasks.jsonl"
PLAN_FILE = "plan.json"
PARSE_REPORT = "parse_report.json"


class RunError(RuntimeError):
    pass


def data_path(name: str) -> Path:
    return Path(str(resources.files("pollsim") / "data" / name))


def default_config_path() -> Path:
    return data_path("default_config.json")


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


@dataclass
class RunConfig:
    questionnaire_path: Path
    schema: DemographicSchema = field(default_factory=DemographicSchema)
    n: int = 20
    seed: int = 0
    backend: str = "mock"
    backend_config: BackendConfig = field(default_factory=BackendConfig)
    mock_model_path: Path | None = None
    mock_model: MockOpinionModel | None = None
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    human_csv: Path | None = None
    recode: RecodeSpec | None = None
    bootstrap_reps: int = DEFAULT_BOOTSTRAP_REPS
    output_dir: Path = Path("runs")
    run_id: str | None = None
    pricing: PriceTable = field(default_factory=PriceTable)
    expected_completion_tokens: int = 180
    groupings: tuple[Grouping, ...] = ALL_GROUPINGS

    def __post_init__(self) -> None:
        if self.backend not in ("mock", "live"):
            raise ValueError(f"backend must be 'mock' or 'live', got {self.backend!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.backend == "mock" and self.mock_model is None and self.mock_model_path is None:
            raise ValueError("mock backend needs a mock opinion model")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base_dir: Path | None = None) -> "RunConfig":
        base = base_dir or Path.cwd()

        def resolve(p: str | None) -> Path | None:
            if p is None:
                return None
            path = Path(p)
            return path if path.is_absolute() else base / path

        b = dict(doc.get("backend", {}))
        backend_config = BackendConfig(
            endpoint_url=b.get("endpoint_url", BackendConfig.endpoint_url),
            model_name=b.get("model", BackendConfig.model_name),
            temperature=float(b.get("temperature", 1.0)),
            max_in_flight=int(b.get("max_in_flight", 4)),
            max_retries=int(b.get("max_retries", 5)),
            request_timeout=float(b.get("request_timeout", 60.0)),
            api_key_env=b.get("api_key_env", BackendConfig.api_key_env),
        )
        human = doc.get("human") or {}
        mock_inline = b.get("mock_model") if isinstance(b.get("mock_model"), Mapping) else None
        mock_path = b.get("mock_model") if isinstance(b.get("mock_model"), str) else None
        pricing = doc.get("pricing", {})
        return cls(
            questionnaire_path=resolve(doc.get("questionnaire")) or default_questionnaire_path(),
            schema=DemographicSchema.from_dict(doc.get("schema")),
            n=int(doc.get("n", 20)),
            seed=int(doc.get("seed", 0)),
            backend=b.get("kind", "mock"),
            backend_config=backend_config,
            mock_model_path=resolve(mock_path),
            mock_model=MockOpinionModel.from_dict(mock_inline) if mock_inline else None,
            system_prompt=doc.get("system_prompt", DEFAULT_SYSTEM_PROMPT),
            human_csv=resolve(human.get("csv")),
            recode=RecodeSpec.from_dict(human["recode"]) if human.get("recode") else None,
            bootstrap_reps=int(doc.get("bootstrap_reps", DEFAULT_BOOTSTRAP_REPS)),
            output_dir=resolve(doc.get("output_dir", "runs")),
            run_id=doc.get("run_id"),
            pricing=PriceTable(
                float(pricing.get("prompt", PriceTable.prompt)),
                float(pricing.get("completion", PriceTable.completion)),
            ),
            expected_completion_tokens=int(doc.get("expected_completion_tokens", 180)),
            groupings=tuple(Grouping(g) for g in doc.get("groupings", [g.value for g in ALL_GROUPINGS])),
        )

    def questionnaire(self) -> Questionnaire:
        return load_questionnaire(self.questionnaire_path)

    def opinion_model(self) -> MockOpinionModel:
        model = self.mock_model or load_mock_model(self.mock_model_path)
        return model.with_seed(self.seed)

    def model_id(self) -> str:
        """Identity of the responder, part of every cache key."""
        if self.backend == "live":
            return self.backend_config.model_name
        blob = json.dumps(self.opinion_model().to_dict(), sort_keys=True)
        return f"mock-{hashlib.sha256(blob.encode()).hexdigest()[:12]}"

    def snapshot(self) -> dict[str, Any]:
        """Everything needed to repeat the run; paths are recorded by content digest."""
        bc = self.backend_config
        snap: dict[str, Any] = {
            "questionnaire": self.questionnaire().to_dict(),
            "questionnaire_hash": self.questionnaire().content_hash(),
            "schema": self.schema.to_dict(),
            "n": self.n,
            "seed": self.seed,
            "system_prompt": self.system_prompt,
            "backend": {
                "kind": self.backend,
                "model": bc.model_name,
                "temperature": bc.temperature,
                "endpoint_url": bc.endpoint_url,
                "max_in_flight": bc.max_in_flight,
                "max_retries": bc.max_retries,
                "request_timeout": bc.request_timeout,
                "api_key_env": bc.api_key_env,
            },
            "bootstrap_reps": self.bootstrap_reps,
            "pricing": {"prompt": self.pricing.prompt, "completion": self.pricing.completion},
            "groupings": [g.value for g in self.groupings],
        }
        if self.backend == "mock":
            snap["backend"]["mock_model"] = self.opinion_model().to_dict()
        if self.human_csv is not None:
            snap["human"] = {
                "csv": self.human_csv.name,
                "csv_sha256": _file_digest(self.human_csv) if self.human_csv.exists() else None,
                "recode": self.recode.to_dict() if self.recode else None,
            }
        return snap

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        blob = json.dumps(self.snapshot(), sort_keys=True)
        return f"run-{hashlib.sha256(blob.encode()).hexdigest()[:10]}"

    def run_dir(self) -> Path:
        return self.output_dir / self.resolved_run_id()


def load_config(path: str | Path | None = None, **overrides: Any) -> RunConfig:
    """Read a JSON run config (the packaged default when ``path`` is None).

    Relative paths inside the file resolve against the file's directory,
    except ``output_dir`` in the packaged default, which is relative to the
    working directory.
    """
    cfg_path = Path(path) if path is not None else default_config_path()
    doc = json.loads(cfg_path.read_text(encoding="utf-8"))
    config = RunConfig.from_dict(doc, base_dir=cfg_path.parent)
    if path is None:
        config.output_dir = Path(doc.get("output_dir", "runs"))
    return apply_overrides(config, **overrides)


def apply_overrides(
    config: RunConfig,
    *,
    backend: str | None = None,
    n: int | None = None,
    seed: int | None = None,
    out: str | Path | None = None,
) -> RunConfig:
    changes: dict[str, Any] = {}
    if backend is not None:
        changes["backend"] = backend
    if n is not None:
        changes["n"] = n
    if seed is not None:
        changes["seed"] = seed
    if out is not None:
        changes["output_dir"] = Path(out)
    return replace(config, **changes) if changes else config


# --------------------------------------------------------------------------- cache


def cache_key(
    questionnaire_hash: str, model: str, temperature: float, question_id: str, cell: str, replicate: int
) -> str:
    parts = [questionnaire_hash, model, repr(float(temperature)), question_id, cell, str(replicate)]
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()[:32]


class ResponseCache:
    """Append-only JSONL store of completions, one line per key.

    A torn final line (from an interrupted write) is dropped on open so the
    file always ends on a complete record.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._fh = None
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        good = 0
        pos = 0
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl < 0:
                break
            line = data[pos:nl]
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                break
            if entry["key"] in self._entries:
                logger.warning("duplicate cache key %s ignored", entry["key"])
            else:
                self._entries[entry["key"]] = entry
            pos = nl + 1
            good = pos
        if good < len(data):
            logger.warning("dropping %d bytes of torn data at end of %s", len(data) - good, self.path)
            with open(self.path, "r+b") as fh:
                fh.truncate(good)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> dict[str, Any] | None:
        return self._entries.get(key)

    def entries(self) -> list[dict[str, Any]]:
        return list(self._entries.values())

    def append(self, entry: Mapping[str, Any]) -> bool:
        """Store ``entry``; returns False (and writes nothing) if its key is present."""
        line = json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock:
            if entry["key"] in self._entries:
                return False
            if self._fh is None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = open(self.path, "a", encoding="utf-8", newline="\n")
            self._fh.write(line)
            self._fh.flush()
            self._entries[entry["key"]] = dict(entry)
            return True

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.flush()
                os.fsync(self._fh.fileno())
                self._fh.close()
                self._fh = None

    def __enter__(self) -> "ResponseCache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# --------------------------------------------------------------------------- helpers


def _timestamp(backend_id: str) -> str:
    # Mock runs are stamped from SOURCE_DATE_EPOCH (default 0) so output trees are reproducible.
    if backend_id == "live":
        when = datetime.now(timezone.utc)
    else:
        when = datetime.fromtimestamp(int(os.environ.get("SOURCE_DATE_EPOCH", "0")), timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def ordered_map(
    fn: Callable[[Any], Any], items: Iterable[Any], workers: int
) -> Iterator[tuple[Any, cf.Future]]:
    """Run ``fn`` over ``items`` with at most ``workers`` in flight, yielding in input order.

    Submission runs a bounded window ahead of consumption, so an interrupt
    leaves at most ``2 * workers`` tasks in flight and completed results are
    persisted in plan order. ``workers=0`` runs everything in the calling thread.
    """
    if workers == 0:
        yield from _inline_map(fn, items)
        return
    window = 2 * workers
    pending: deque[tuple[Any, cf.Future]] = deque()
    it = iter(items)
    with cf.ThreadPoolExecutor(max_workers=workers) as pool:
        try:
            for item in it:
                pending.append((item, pool.submit(fn, item)))
                if len(pending) >= window:
                    yield pending.popleft()
            while pending:
                yield pending.popleft()
        finally:
            for _, fut in pending:
                fut.cancel()


def _inline_map(fn: Callable[[Any], Any], items: Iterable[Any]) -> Iterator[tuple[Any, cf.Future]]:
    for item in items:
        fut: cf.Future = cf.Future()
        try:
            fut.set_result(fn(item))
        except Exception as exc:
            fut.set_exception(exc)
        yield item, fut


@dataclass
class RunOutcome:
    plan_size: int
    new_queries: int
    cached: int
    failed: list[dict[str, Any]]
    parse_report: ParseReport
    cost_usd: float
    run_dir: Path
    dry_run: bool = False


def _make_backend(config: RunConfig):
    if config.backend == "live":
        return LiveBackend(config.backend_config)
    return MockBackend(config.opinion_model())


def _entry_result(entry: Mapping[str, Any]) -> CompletionResult:
    tokens = entry.get("tokens", {})
    return CompletionResult(
        text=entry["text"],
        prompt_tokens=int(tokens.get("prompt", 0)),
        completion_tokens=int(tokens.get("completion", 0)),
        backend_id=entry.get("backend", ""),
        latency=float(entry.get("latency", 0.0)),
    )


def _plan_keys(config: RunConfig, questionnaire: Questionnaire, plan: SamplingPlan) -> list[str]:
    qhash = questionnaire.content_hash()
    model = config.model_id()
    temp = config.backend_config.temperature
    return [cache_key(qhash, model, temp, t.question_id, t.cell.label(), t.replicate) for t in plan.tasks]


def load_records(
    config: RunConfig, questionnaire: Questionnaire | None = None
) -> tuple[list[ResponseRecord], list[CompletionResult]]:
    """Re-parse every cached completion belonging to this config's plan, in plan order."""
    questionnaire = questionnaire or config.questionnaire()
    path = config.run_dir() / RAW_RESPONSES
    if not path.exists():
        raise RunError(f"no raw responses at {path}; run `pollsim run` first")
    cache = ResponseCache(path)
    plan = build_plan(questionnaire, config.schema, config.n)
    records, results = [], []
    for task, key in zip(plan.tasks, _plan_keys(config, questionnaire, plan)):
        entry = cache.get(key)
        if entry is None:
            continue
        scale = questionnaire.get(task.question_id).scale
        records.append(parse_response(task.question_id, task.cell, task.replicate, entry["text"], scale))
        results.append(_entry_result(entry))
    return records, results


# --------------------------------------------------------------------------- commands


def cmd_plan(config: RunConfig, echo: Callable[[str], None] = print) -> SamplingPlan:
    questionnaire = config.questionnaire()
    plan = build_plan(questionnaire, config.schema, config.n)
    run_dir = config.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / PLAN_FILE).write_text(json.dumps(plan.to_dict()) + "\n", encoding="utf-8")
    prompt_tokens = _prompt_tokens(config, questionnaire, plan.tasks)
    preview = (
        prompt_tokens * config.pricing.prompt
        + len(plan) * config.expected_completion_tokens * config.pricing.completion
    )
    echo(plan.summary())
    echo(f"estimated cost: ${preview:,.2f} (~{prompt_tokens:,} prompt tokens, "
         f"{config.expected_completion_tokens} completion tokens per task)")
    echo(f"plan written to {run_dir / PLAN_FILE}")
    return plan


def _prompt_tokens(config: RunConfig, questionnaire: Questionnaire, tasks: Iterable[Task]) -> int:
    per_question_cell: dict[tuple[str, str], int] = {}
    total = 0
    for t in tasks:
        key = (t.question_id, t.cell.label())
        if key not in per_question_cell:
            ctx = render_prompt(questionnaire.get(t.question_id), t.cell, config.system_prompt)
            per_question_cell[key] = prompt_token_count(ctx)
        total += per_question_cell[key]
    return total


def cmd_run(
    config: RunConfig,
    *,
    dry_run: bool = False,
    backend: Any = None,
    echo: Callable[[str], None] = print,
) -> RunOutcome:
    """Elicit every uncached task; safe to re-invoke after an interruption.

    Tasks that exhaust their retries are listed in failed_tasks.jsonl and
    retried on the next invocation. Fatal backend errors (and interrupts)
    propagate after everything completed so far has been flushed.
    """
    questionnaire = config.questionnaire()
    plan = build_plan(questionnaire, config.schema, config.n)
    run_dir = config.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / PLAN_FILE).write_text(json.dumps(plan.to_dict()) + "\n", encoding="utf-8")

    if dry_run:
        tokens = _prompt_tokens(config, questionnaire, plan.tasks)
        preview = tokens * config.pricing.prompt + len(plan) * config.expected_completion_tokens * config.pricing.completion
        echo(f"dry run: rendered {len(plan):,} prompts, nothing sent")
        echo(f"estimated cost: ${preview:,.2f}")
        return RunOutcome(len(plan), 0, 0, [], ParseReport(), preview, run_dir, dry_run=True)

    keys = _plan_keys(config, questionnaire, plan)
    qhash = questionnaire.content_hash()
    model_id = config.model_id()
    temp = config.backend_config.temperature
    cache = ResponseCache(run_dir / RAW_RESPONSES)
    todo = [(t, k) for t, k in zip(plan.tasks, keys) if k not in cache]
    cached = len(plan) - len(todo)
    echo(f"{len(plan):,} tasks: {cached:,} cached, {len(todo):,} to query ({config.backend} backend)")
    owns_backend = backend is None
    backend = backend or _make_backend(config)
    contexts: dict[tuple[str, CrosstabKey], PromptContext] = {}

    def context(task: Task) -> PromptContext:
        ctx = contexts.get((task.question_id, task.cell))
        if ctx is None:
            ctx = render_prompt(questionnaire.get(task.question_id), task.cell, config.system_prompt)
            contexts[(task.question_id, task.cell)] = ctx
        return ctx

    def work(item: tuple[Task, str]) -> CompletionResult:
        task = item[0]
        return backend.complete(context(task), task.replicate)

    fixed_stamp = None if config.backend == "live" else _timestamp("mock")
    failed: list[dict[str, Any]] = []
    new = 0
    try:
        # the mock is CPU-bound, so threads would only contend for the GIL
        workers = config.backend_config.max_in_flight if config.backend == "live" else 0
        for (task, key), fut in ordered_map(work, todo, workers):
            try:
                result = fut.result()
            except RetriesExhaustedError as exc:
                failed.append({
                    "question_id": task.question_id,
                    "cell": task.cell.label(),
                    "replicate": task.replicate,
                    "error": str(exc),
                })
                continue
            q = questionnaire.get(task.question_id)
            ctx = context(task)
            rec = parse_response(task.question_id, task.cell, task.replicate, result.text, q.scale)
            cache.append({
                "key": key,
                "questionnaire_hash": qhash,
                "model": model_id,
                "temperature": temp,
                "question_id": task.question_id,
                "cell": task.cell.label(),
                "replicate": task.replicate,
                "system": ctx.rendered_system,
                "prompt": ctx.rendered_user,
                "text": result.text,
                "tokens": {"prompt": result.prompt_tokens, "completion": result.completion_tokens},
                "latency": round(result.latency, 4),
                "backend": result.backend_id,
                "timestamp": fixed_stamp or _timestamp(result.backend_id),
                "status": rec.status.value,
                "score": rec.score,
            })
            new += 1
    finally:
        cache.close()
        if owns_backend:
            backend.close()
        fail_path = run_dir / FAILED_TASKS
        if failed:
            fail_path.write_text("".join(json.dumps(f, sort_keys=True) + "\n" for f in failed), encoding="utf-8")
        elif fail_path.exists():
            fail_path.unlink()

    records, results = load_records(config, questionnaire)
    report = classify_batch(records)
    cost = estimate_cost(results, config.pricing)
    (run_dir / PARSE_REPORT).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(config, questionnaire, report, cost)
    echo(f"queried {new:,}, failed {len(failed):,}; parse failure rate {report.failure_rate:.2%}; "
         f"estimated cost ${cost:,.2f}")
    return RunOutcome(len(plan), new, cached, failed, report, cost, run_dir)


def _write_manifest(
    config: RunConfig,
    questionnaire: Questionnaire,
    report: ParseReport,
    cost: float,
    extra: dict[str, Any] | None = None,
) -> RunManifest:
    manifest = RunManifest(
        run_id=config.resolved_run_id(),
        timestamp=_timestamp(config.backend),
        config=config.snapshot(),
        backend_id=config.backend,
        questionnaire_hash=questionnaire.content_hash(),
        cost_estimate_usd=cost,
        parse_report=report.to_dict(),
        extra=extra or {},
    )
    manifest.write(config.run_dir())
    return manifest


def cmd_parse(config: RunConfig, echo: Callable[[str], None] = print) -> ParseReport:
    records, _ = load_records(config)
    report = classify_batch(records)
    path = config.run_dir() / PARSE_REPORT
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    counts = ", ".join(f"{k}={v}" for k, v in report.counts.items())
    echo(f"{report.total:,} responses: {counts}; failure rate {report.failure_rate:.2%}")
    return report


@dataclass
class CompareOutcome:
    comparisons: list[ComparisonResult]
    missing_questions: tuple[str, ...]
    summary_text: str


def cmd_compare(config: RunConfig, echo: Callable[[str], None] = print) -> CompareOutcome:
    questionnaire = config.questionnaire()
    if config.human_csv is None or config.recode is None:
        raise RunError("config has no human data section (human.csv and human.recode)")
    if not config.human_csv.exists():
        raise RunError(f"human data file not found: {config.human_csv}")
    records, results = load_records(config, questionnaire)
    report = classify_batch(records)
    sample = ingest_csv(
        config.human_csv, config.recode, config.schema, questionnaire, allow_missing_questions=True
    )
    synth = response_cell_table(records, questionnaire, config.schema)
    human_all = human_cell_table(sample.records, questionnaire, config.schema)
    covered = set(config.recode.questions) - set(sample.missing_questions)
    human = {qid: t for qid, t in human_all.items() if qid in covered}

    reps, seed = config.bootstrap_reps, config.seed
    summaries = [("synthetic", s) for s in summarize_table(synth, source="synthetic", bootstrap_reps=reps, seed=seed)]
    summaries += [("human", s) for s in summarize_table(human, source="human", bootstrap_reps=reps, seed=seed)]
    comparisons: list[ComparisonResult] = []
    for grouping in config.groupings:
        comparisons += compare(
            synth, human, grouping, questionnaire, config.schema, bootstrap_reps=reps, seed=seed
        )
    if not any(c.pairs for c in comparisons):
        raise RunError("no subgroup has both synthetic and human data")
    histograms = [("synthetic", h) for h in gender_histograms(synth, questionnaire, config.schema)]
    histograms += [("human", h) for h in gender_histograms(human, questionnaire, config.schema)]

    run_dir = config.run_dir()
    cost = estimate_cost(results, config.pricing)
    manifest = RunManifest(
        run_id=config.resolved_run_id(),
        timestamp=_timestamp(config.backend),
        config=config.snapshot(),
        backend_id=config.backend,
        questionnaire_hash=questionnaire.content_hash(),
        cost_estimate_usd=cost,
        parse_report=report.to_dict(),
        extra={
            "human_rows_used": len(sample.records),
            "human_rows_skipped": dict(sorted(sample.skipped.items())),
            "questions_without_human_data": list(sample.missing_questions),
            "survey_weights": "ignored (unweighted subgroup means)",
        },
    )
    emit_tables(summaries, comparisons, histograms, run_dir, manifest)
    text = format_summary(comparisons)
    echo(text)
    return CompareOutcome(comparisons, sample.missing_questions, text)


def cmd_report(config: RunConfig, echo: Callable[[str], None] = print) -> list[Path]:
    run_dir = config.run_dir()
    if not (run_dir / "comparisons.csv").exists():
        raise RunError(f"no tables in {run_dir}; run `pollsim compare` first")
    paths = render_charts(load_tables(run_dir), run_dir)
    echo(f"wrote {len(paths)} charts to {run_dir / 'charts'}")
    return paths


def cmd_all(config: RunConfig, echo: Callable[[str], None] = print, dry_run: bool = False) -> Path:
    cmd_plan(config, echo)
    outcome = cmd_run(config, dry_run=dry_run, echo=echo)
    if not dry_run:
        cmd_compare(config, echo)
        cmd_report(config, echo)
    return outcome.run_dir


def fit_mock_to_human(
    human: Mapping[str, Mapping[CrosstabKey, list[int]]],
    questionnaire: Questionnaire,
    schema: DemographicSchema,
    seed: int = 0,
) -> MockOpinionModel:
    """Mock model whose ideology means and spreads equal the human sample's."""
    means: dict[str, dict[str, float]] = {}
    dispersion: dict[str, float] = {}
    for q in questionnaire:
        if q.id not in human:
            continue
        pools = marginalize(human[q.id], Grouping.IDEOLOGY, schema)
        means[q.id] = {label: float(np.mean(s)) for label, s in pools.items() if s}
        within = [np.std(s, ddof=1) for s in pools.values() if len(s) > 1]
        dispersion[q.id] = float(np.mean(within)) if within else 0.0
    return MockOpinionModel(means=means, dispersion=0.0, dispersion_by_question=dispersion, seed=seed)
