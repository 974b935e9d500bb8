"""Cell summaries, bootstrap intervals, correlation, MAPE, and histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from pollsim.demographics import CrosstabKey, DemographicSchema, enumerate_cells
from pollsim.parsing import ResponseRecord
from pollsim.questionnaire import Questionnaire
from pollsim.seeding import derive_seed

DEFAULT_BOOTSTRAP_REPS = 2000

ScoreTable = Mapping[CrosstabKey, Sequence[int]]


class UndefinedCorrelation(ValueError):
    """Correlation has no value: a side is constant or there are too few pairs."""


class Grouping(str, Enum):
    ALL_CROSSTABS = "all_crosstabs"
    IDEOLOGY = "ideology"
    AGE = "age"
    GENDER = "gender"
    RACE = "race"


ALL_GROUPINGS = tuple(Grouping)


@dataclass(frozen=True)
class CellSummary:
    question_id: str
    cell: str  # crosstab label, or a single factor level after marginalizing
    n: int
    mean: float | None
    sd: float | None
    sem: float | None
    ci_low: float | None
    ci_high: float | None


def bootstrap_means(scores: Sequence[float], reps: int, rng: np.random.Generator) -> np.ndarray:
    """Means of ``reps`` with-replacement resamples of size ``len(scores)``.

    Resampling n items from the empirical distribution is a multinomial draw
    over the distinct values, so each resample costs O(distinct values)
    rather than O(n).
    """
    arr = np.asarray(scores, dtype=float)
    n = arr.size
    values, counts = np.unique(arr, return_counts=True)
    draws = rng.multinomial(n, counts / n, size=reps)
    return draws @ values / n


def bootstrap_ci(
    scores: Sequence[float], reps: int = DEFAULT_BOOTSTRAP_REPS, seed: int = 0, level: float = 0.95
) -> tuple[float, float]:
    if reps < 1:
        raise ValueError("bootstrap_reps must be >= 1")
    if len(scores) == 0:
        raise ValueError("cannot bootstrap an empty sample")
    means = bootstrap_means(scores, reps, np.random.default_rng(seed))
    tail = (1.0 - level) / 2 * 100
    lo, hi = np.percentile(means, [tail, 100 - tail])
    return float(lo), float(hi)


def cell_summary(
    scores: Sequence[int],
    bootstrap_reps: int = DEFAULT_BOOTSTRAP_REPS,
    seed: int = 0,
    *,
    question_id: str = "",
    cell: str = "",
) -> CellSummary:
    """n, mean, sample SD (n-1), SEM and a percentile-bootstrap 95% CI.

    An empty sample gives ``n=0`` with every statistic ``None``; a single
    observation has no SD/SEM.
    """
    if bootstrap_reps < 1:
        raise ValueError("bootstrap_reps must be >= 1")
    n = len(scores)
    if n == 0:
        return CellSummary(question_id, cell, 0, None, None, None, None, None)
    arr = np.asarray(scores, dtype=float)
    mean = float(arr.mean())
    sd = sem = None
    if n > 1:
        sd = float(arr.std(ddof=1))
        sem = sd / math.sqrt(n)
    lo, hi = bootstrap_ci(arr, bootstrap_reps, seed)
    return CellSummary(question_id, cell, n, mean, sd, sem, lo, hi)


def subgroup_label(cell: CrosstabKey, grouping: Grouping | str) -> str:
    grouping = Grouping(grouping)
    if grouping is Grouping.ALL_CROSSTABS:
        return cell.label()
    return cell.factor(grouping.value)


def marginalize(
    table: ScoreTable, by: Grouping | str, schema: DemographicSchema | None = None
) -> dict[str, list[int]]:
    """Pool raw scores over the factors not in ``by``.

    With a schema, every subgroup appears in schema order (possibly empty);
    otherwise subgroups appear in first-seen order.
    """
    by = Grouping(by)
    pools: dict[str, list[int]] = {}
    if schema is not None:
        if by is Grouping.ALL_CROSSTABS:
            pools = {c.label(): [] for c in enumerate_cells(schema)}
        else:
            pools = {label: [] for label in schema.levels(by.value)}
    for cell, scores in table.items():
        pools.setdefault(subgroup_label(cell, by), []).extend(scores)
    return pools


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise UndefinedCorrelation("need at least 2 pairs")
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if np.ptp(xa) == 0 or np.ptp(ya) == 0:
        raise UndefinedCorrelation("constant input")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    r = float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return min(1.0, max(-1.0, r))


def mape(synthetic: Sequence[float], human: Sequence[float]) -> float:
    """Mean of |s - h| / |h|, as a fraction."""
    if len(synthetic) != len(human):
        raise ValueError(f"length mismatch: {len(synthetic)} vs {len(human)}")
    if len(human) == 0:
        raise ValueError("need at least one pair")
    s = np.asarray(synthetic, dtype=float)
    h = np.asarray(human, dtype=float)
    if np.any(h == 0):
        raise ValueError("human value of zero makes percentage error undefined")
    return float(np.mean(np.abs(s - h) / np.abs(h)))


@dataclass(frozen=True)
class HistogramTable:
    question_id: str
    split: str
    counts: tuple[int, ...]
    frequencies: tuple[float, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


def histogram(
    scores: Sequence[int], cardinality: int, split: str = "all", question_id: str = ""
) -> HistogramTable:
    arr = np.asarray(scores, dtype=int)
    assert arr.size == 0 or (arr.min() >= 1 and arr.max() <= cardinality), "score outside scale"
    counts = np.bincount(arr - 1, minlength=cardinality) if arr.size else np.zeros(cardinality, int)
    total = int(counts.sum())
    freqs = counts / total if total else np.zeros(cardinality)
    return HistogramTable(
        question_id, split, tuple(int(c) for c in counts), tuple(float(f) for f in freqs)
    )


def response_cell_table(
    records: Iterable[ResponseRecord], questionnaire: Questionnaire, schema: DemographicSchema
) -> dict[str, dict[CrosstabKey, list[int]]]:
    """Parsed synthetic scores by question and cell; failed parses are left out."""
    cells = enumerate_cells(schema)
    table = {q.id: {c: [] for c in cells} for q in questionnaire}
    for rec in records:
        if rec.parsed and rec.question_id in table and rec.cell in table[rec.question_id]:
            table[rec.question_id][rec.cell].append(rec.score)
    return table


def summarize_table(
    table: Mapping[str, ScoreTable],
    *,
    source: str,
    bootstrap_reps: int = DEFAULT_BOOTSTRAP_REPS,
    seed: int = 0,
) -> list[CellSummary]:
    """One summary per (question, cell), in table order."""
    out = []
    for qid, cells in table.items():
        for cell, scores in cells.items():
            label = cell.label()
            out.append(
                cell_summary(
                    scores,
                    bootstrap_reps,
                    derive_seed(seed, "cell", source, qid, label),
                    question_id=qid,
                    cell=label,
                )
            )
    return out


@dataclass(frozen=True)
class SubgroupPair:
    subgroup: str
    synthetic: CellSummary
    human: CellSummary

    @property
    def delta(self) -> float:
        return self.synthetic.mean - self.human.mean


@dataclass(frozen=True)
class ComparisonResult:
    question_id: str
    grouping: Grouping
    pairs: tuple[SubgroupPair, ...]
    rho: float | None
    mape: float | None
    rho_note: str = ""
    excluded: tuple[str, ...] = ()
    has_human_data: bool = True
    unpaired: tuple[SubgroupPair, ...] = field(default=(), repr=False)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


def compare_question(
    question_id: str,
    synthetic: ScoreTable,
    human: ScoreTable | None,
    grouping: Grouping | str,
    schema: DemographicSchema,
    *,
    bootstrap_reps: int = DEFAULT_BOOTSTRAP_REPS,
    seed: int = 0,
) -> ComparisonResult:
    grouping = Grouping(grouping)
    s_pools = marginalize(synthetic, grouping, schema)
    h_pools = marginalize(human or {}, grouping, schema)
    pairs, unpaired, excluded = [], [], []
    for label in s_pools:
        summaries = []
        for side, pools in (("synthetic", s_pools), ("human", h_pools)):
            summaries.append(
                cell_summary(
                    pools.get(label, []),
                    bootstrap_reps,
                    derive_seed(seed, "subgroup", side, question_id, grouping.value, label),
                    question_id=question_id,
                    cell=label,
                )
            )
        pair = SubgroupPair(label, summaries[0], summaries[1])
        if pair.synthetic.n and pair.human.n:
            pairs.append(pair)
        else:
            excluded.append(label)
            unpaired.append(pair)
    s_means = [p.synthetic.mean for p in pairs]
    h_means = [p.human.mean for p in pairs]
    rho, note = None, ""
    if human is None:
        note = "no human data"
    else:
        try:
            rho = pearson_r(s_means, h_means)
        except UndefinedCorrelation as exc:
            note = f"undefined: {exc}"
    err = mape(s_means, h_means) if pairs else None
    return ComparisonResult(
        question_id,
        grouping,
        tuple(pairs),
        rho,
        err,
        note,
        tuple(excluded),
        human is not None,
        tuple(unpaired),
    )


def compare(
    synthetic: Mapping[str, ScoreTable],
    human: Mapping[str, ScoreTable],
    grouping: Grouping | str,
    questionnaire: Questionnaire,
    schema: DemographicSchema,
    *,
    bootstrap_reps: int = DEFAULT_BOOTSTRAP_REPS,
    seed: int = 0,
) -> list[ComparisonResult]:
    """Pair synthetic and human subgroup means for every question."""
    return [
        compare_question(
            q.id,
            synthetic.get(q.id, {}),
            human.get(q.id),
            grouping,
            schema,
            bootstrap_reps=bootstrap_reps,
            seed=seed,
        )
        for q in questionnaire
    ]


def gender_histograms(
    table: Mapping[str, ScoreTable], questionnaire: Questionnaire, schema: DemographicSchema
) -> list[HistogramTable]:
    out = []
    for q in questionnaire:
        if q.id not in table:
            continue
        pools = marginalize(table[q.id], Grouping.GENDER, schema)
        for gender, scores in pools.items():
            out.append(histogram(scores, q.scale.cardinality, split=gender, question_id=q.id))
    return out

