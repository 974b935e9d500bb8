import json
import threading
import time
from dataclasses import replace

import pytest

from pollsim.llm_backend import BackendConfig, FatalBackendError, MockBackend, RetriesExhaustedError
from pollsim.runner import (
    FAILED_TASKS,
    RAW_RESPONSES,
    ResponseCache,
    RunConfig,
    RunError,
    cache_key,
    cmd_compare,
    cmd_parse,
    cmd_plan,
    cmd_run,
    load_config,
    load_records,
    ordered_map,
)
from pollsim.stats import Grouping

quiet = lambda *_: None  # noqa: E731


@pytest.fixture
def config(tmp_path):
    cfg = load_config(out=tmp_path / "runs", n=1)
    return replace(cfg, bootstrap_reps=20, groupings=(Grouping.IDEOLOGY, Grouping.GENDER))


def _keys(path):
    return [json.loads(line)["key"] for line in path.read_text().splitlines()]


def test_default_config_loads():
    cfg = load_config()
    assert cfg.n == 20 and cfg.backend == "mock" and cfg.seed == 0
    assert cfg.backend_config.model_name == "gpt-3.5-turbo-0301"
    assert cfg.human_csv.exists() and cfg.recode is not None


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        RunConfig(questionnaire_path=tmp_path, backend="other", mock_model_path=tmp_path)
    with pytest.raises(ValueError):
        RunConfig(questionnaire_path=tmp_path, backend="mock")
    with pytest.raises(ValueError):
        load_config(n=0)


def test_run_id_tracks_config(config):
    assert config.resolved_run_id() == replace(config).resolved_run_id()
    assert config.resolved_run_id() != replace(config, seed=1).resolved_run_id()
    assert config.resolved_run_id() != replace(config, n=2).resolved_run_id()


def test_cache_key_depends_on_every_part():
    base = ("h", "m", 1.0, "q", "c", 0)
    keys = {cache_key(*base)}
    for i, alt in enumerate(["h2", "m2", 0.7, "q2", "c2", 1]):
        parts = list(base)
        parts[i] = alt
        keys.add(cache_key(*parts))
    assert len(keys) == 7


def test_cache_truncates_torn_tail_and_skips_duplicates(tmp_path):
    path = tmp_path / "c.jsonl"
    with ResponseCache(path) as cache:
        assert cache.append({"key": "a", "text": "1"})
        assert cache.append({"key": "b", "text": "2"})
        assert not cache.append({"key": "a", "text": "other"})
    with open(path, "ab") as fh:
        fh.write(b'{"key": "c", "te')
    cache = ResponseCache(path)
    assert len(cache) == 2 and "c" not in cache
    assert path.read_bytes().endswith(b"\n")
    cache.append({"key": "c", "text": "3"})
    cache.close()
    assert _keys(path) == ["a", "b", "c"]


def test_ordered_map_preserves_order_and_bounds_concurrency():
    active = 0
    peak = 0
    lock = threading.Lock()

    def slow(x):
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        time.sleep(0.005 * (x % 3))
        with lock:
            active -= 1
        return x * x

    out = [(item, fut.result()) for item, fut in ordered_map(slow, range(40), workers=3)]
    assert out == [(i, i * i) for i in range(40)]
    assert peak <= 3


def test_plan_command(config):
    lines = []
    plan = cmd_plan(config, echo=lines.append)
    assert len(plan) == 560
    assert lines[0] == "80 cells × 1 replicates × 7 questions = 560 tasks"
    assert lines[1].startswith("estimated cost: $")
    doc = json.loads((config.run_dir() / "plan.json").read_text())
    assert len(doc["tasks"]) == 560


def test_dry_run_sends_nothing(config):
    class Exploding:
        def complete(self, ctx, replicate):
            raise AssertionError("dry run must not call the backend")

    out = cmd_run(config, dry_run=True, backend=Exploding(), echo=quiet)
    assert out.dry_run and out.new_queries == 0 and out.cost_usd > 0
    assert not (config.run_dir() / RAW_RESPONSES).exists()


def test_run_writes_schema_complete_jsonl(config):
    out = cmd_run(config, echo=quiet)
    assert (out.plan_size, out.new_queries, out.cached) == (560, 560, 0)
    assert out.parse_report.failure_rate == 0.0
    lines = (config.run_dir() / RAW_RESPONSES).read_text().splitlines()
    entry = json.loads(lines[0])
    for f in ("key", "prompt", "text", "tokens", "timestamp", "status", "model", "temperature",
              "question_id", "cell", "replicate", "system"):
        assert f in entry
    assert entry["timestamp"] == "1970-01-01T00:00:00Z"
    again = cmd_run(config, echo=quiet)
    assert (again.new_queries, again.cached) == (0, 560)


class Flaky:
    """Mock backend that fails some tasks, or interrupts after a budget of calls."""

    def __init__(self, config, fail_every=0, stop_after=None, fatal=False):
        self.inner = MockBackend(config.opinion_model())
        self.fail_every = fail_every
        self.stop_after = stop_after
        self.fatal = fatal
        self.calls = 0
        self.lock = threading.Lock()

    def complete(self, ctx, replicate):
        with self.lock:
            self.calls += 1
            n = self.calls
        if self.stop_after is not None and n > self.stop_after:
            if self.fatal:
                raise FatalBackendError("HTTP 401", 401)
            raise KeyboardInterrupt
        if self.fail_every and n % self.fail_every == 0:
            raise RetriesExhaustedError(6, "HTTP 503")
        return self.inner.complete(ctx, replicate)


def test_exhausted_tasks_are_listed_then_retried(config):
    out = cmd_run(config, backend=Flaky(config, fail_every=7), echo=quiet)
    assert len(out.failed) == 80
    fail_file = config.run_dir() / FAILED_TASKS
    assert len(fail_file.read_text().splitlines()) == 80
    resumed = cmd_run(config, echo=quiet)
    assert resumed.new_queries == 80 and not resumed.failed
    assert not fail_file.exists()
    keys = _keys(config.run_dir() / RAW_RESPONSES)
    assert len(keys) == len(set(keys)) == 560


@pytest.mark.parametrize("fatal", [False, True])
def test_interrupted_run_resumes_without_duplicates(config, fatal):
    with pytest.raises(FatalBackendError if fatal else KeyboardInterrupt):
        cmd_run(config, backend=Flaky(config, stop_after=137, fatal=fatal), echo=quiet)
    path = config.run_dir() / RAW_RESPONSES
    partial = _keys(path)
    assert 0 < len(partial) <= 137
    resumed = cmd_run(config, echo=quiet)
    assert resumed.cached == len(partial)
    keys = _keys(path)
    assert len(keys) == len(set(keys)) == 560


def test_resume_after_torn_write_matches_clean_run(config, tmp_path):
    cmd_run(config, echo=quiet)
    path = config.run_dir() / RAW_RESPONSES
    clean = path.read_bytes()
    lines = clean.splitlines(keepends=True)
    path.write_bytes(b"".join(lines[:300]) + lines[300][:40])
    cmd_run(config, echo=quiet)
    assert path.read_bytes() == clean


def test_parse_and_compare(config):
    with pytest.raises(RunError):
        load_records(config)
    cmd_run(config, echo=quiet)
    report = cmd_parse(config, echo=quiet)
    assert report.total == 560
    outcome = cmd_compare(config, echo=quiet)
    assert len(outcome.comparisons) == 14
    assert "abortion_ban" in outcome.summary_text
    run_dir = config.run_dir()
    for name in ("cell_summaries.csv", "comparisons.csv", "histograms.csv", "manifest.json"):
        assert (run_dir / name).exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["questionnaire_hash"] == config.questionnaire().content_hash()
    assert manifest["config"]["seed"] == 0


def test_compare_without_human_section(config):
    cmd_run(config, echo=quiet)
    with pytest.raises(RunError, match="human"):
        cmd_compare(replace(config, human_csv=None), echo=quiet)


def test_live_backend_without_key_fails_before_work(config, monkeypatch):
    from pollsim.llm_backend import MissingCredentialError

    monkeypatch.delenv("POLLSIM_API_KEY", raising=False)
    live = replace(config, backend="live", backend_config=BackendConfig())
    with pytest.raises(MissingCredentialError):
        cmd_run(live, echo=quiet)
    assert not (live.run_dir() / RAW_RESPONSES).exists()


def test_ordered_map_inline_mode_captures_errors():
    def fn(x):
        if x == 2:
            raise RetriesExhaustedError(1, "boom")
        return x

    out = list(ordered_map(fn, range(4), workers=0))
    assert [item for item, _ in out] == [0, 1, 2, 3]
    assert isinstance(out[2][1].exception(), RetriesExhaustedError)
    assert out[3][1].result() == 3


def test_second_run_with_same_seed_is_all_cache_hits(config):
    cfg = replace(config, seed=7)
    cmd_run(cfg, echo=quiet)
    assert cmd_run(cfg, echo=quiet).new_queries == 0


def test_missing_question_column_reported_as_no_human_data(config, tmp_path):
    import csv

    with open(config.human_csv, newline="") as src, open(tmp_path / "h.csv", "w", newline="") as dst:
        reader = csv.DictReader(src)
        cols = [c for c in reader.fieldnames if c != "CC22_332f"]
        writer = csv.DictWriter(dst, cols, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(reader)
    cfg = replace(config, human_csv=tmp_path / "h.csv")
    cmd_run(cfg, echo=quiet)
    outcome = cmd_compare(cfg, echo=quiet)
    assert outcome.missing_questions == ("abortion_ban",)
    by_q = {(c.question_id, c.grouping): c for c in outcome.comparisons}
    assert not by_q[("abortion_ban", Grouping.IDEOLOGY)].has_human_data
    assert by_q[("police_safety", Grouping.IDEOLOGY)].rho is not None
    line = next(l for l in outcome.summary_text.splitlines() if l.startswith("abortion_ban"))
    assert "no human data" in line


def test_monotone_gradient_is_recovered(config):
    from pollsim.llm_backend import MockOpinionModel

    # fixture liberals mostly oppose the ban (score 2), conservatives mostly support it
    gradient = {"Very liberal": 1.9, "Liberal": 1.7, "Moderate": 1.5, "Conservative": 1.3, "Very conservative": 1.1}
    model = MockOpinionModel(means={q: gradient for q in config.questionnaire().ids}, dispersion=0.3)
    cfg = replace(config, mock_model=model, mock_model_path=None, n=5)
    cmd_run(cfg, echo=quiet)
    outcome = cmd_compare(cfg, echo=quiet)
    by_q = {(c.question_id, c.grouping): c for c in outcome.comparisons}
    assert by_q[("abortion_ban", Grouping.IDEOLOGY)].rho > 0.9
