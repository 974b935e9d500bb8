"""Demographic schema, crosstab cells, and the balanced sampling plan."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple

from pollsim.questionnaire import Questionnaire

AgeBin = tuple[int, int]

DEFAULT_IDEOLOGY = ("Very liberal", "Liberal", "Moderate", "Conservative", "Very conservative")
DEFAULT_AGE_BINS: tuple[AgeBin, ...] = ((16, 30), (30, 45), (45, 60), (60, 100))
DEFAULT_GENDERS = ("Man", "Woman")
DEFAULT_RACES = ("white", "non-white")

FACTORS = ("ideology", "age", "gender", "race")


class SchemaError(ValueError):
    pass


def age_interval_label(age_bin: AgeBin) -> str:
    """Half-open interval notation, upper bound inclusive: ``(16, 30]``."""
    lo, hi = age_bin
    return f"({lo}, {hi}]"


def parse_age_label(label: str) -> AgeBin:
    text = label.strip()
    if not (text.startswith("(") and text.endswith("]")):
        raise SchemaError(f"not an age interval label: {label!r}")
    lo, hi = (part.strip() for part in text[1:-1].split(","))
    return int(lo), int(hi)


@dataclass(frozen=True)
class CrosstabKey:
    """One respondent persona; doubles as the aggregation cell identity."""

    ideology: str
    age_bin: AgeBin
    gender: str
    race: str

    @property
    def age_label(self) -> str:
        return age_interval_label(self.age_bin)

    def factor(self, name: str) -> str:
        if name == "age":
            return self.age_label
        if name in ("ideology", "gender", "race"):
            return getattr(self, name)
        raise KeyError(name)

    def label(self) -> str:
        return "|".join((self.ideology, self.age_label, self.gender, self.race))

    @classmethod
    def from_label(cls, text: str) -> "CrosstabKey":
        ideology, age, gender, race = text.split("|")
        return cls(ideology, parse_age_label(age), gender, race)


# A profile carries exactly the fields of a cell key.
DemographicProfile = CrosstabKey


def _distinct(name: str, values: tuple) -> None:
    if not values:
        raise SchemaError(f"{name} must be nonempty")
    if len(set(values)) != len(values):
        raise SchemaError(f"{name} has duplicate entries")


@dataclass(frozen=True)
class DemographicSchema:
    ideology_bins: tuple[str, ...] = DEFAULT_IDEOLOGY
    age_bins: tuple[AgeBin, ...] = DEFAULT_AGE_BINS
    gender_labels: tuple[str, ...] = DEFAULT_GENDERS
    race_labels: tuple[str, ...] = DEFAULT_RACES
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ideology_bins", tuple(self.ideology_bins))
        object.__setattr__(self, "age_bins", tuple((int(lo), int(hi)) for lo, hi in self.age_bins))
        object.__setattr__(self, "gender_labels", tuple(self.gender_labels))
        object.__setattr__(self, "race_labels", tuple(self.race_labels))
        _distinct("ideology_bins", self.ideology_bins)
        _distinct("age_bins", self.age_bins)
        _distinct("gender_labels", self.gender_labels)
        _distinct("race_labels", self.race_labels)
        prev_hi = None
        for lo, hi in self.age_bins:
            if lo >= hi:
                raise SchemaError(f"age bin {age_interval_label((lo, hi))} is empty")
            if prev_hi is not None and lo < prev_hi:
                raise SchemaError("age bins must be strictly increasing and non-overlapping")
            prev_hi = hi
        index = {
            "ideology": {v: i for i, v in enumerate(self.ideology_bins)},
            "age": {v: i for i, v in enumerate(self.age_bins)},
            "gender": {v: i for i, v in enumerate(self.gender_labels)},
            "race": {v: i for i, v in enumerate(self.race_labels)},
        }
        object.__setattr__(self, "_index", index)

    def levels(self, factor: str) -> list[str]:
        """Subgroup labels of one factor, in schema order."""
        if factor == "ideology":
            return list(self.ideology_bins)
        if factor == "age":
            return [age_interval_label(b) for b in self.age_bins]
        if factor == "gender":
            return list(self.gender_labels)
        if factor == "race":
            return list(self.race_labels)
        raise KeyError(factor)

    def sort_key(self, key: CrosstabKey) -> tuple[int, int, int, int]:
        idx = self._index
        return (
            idx["ideology"][key.ideology],
            idx["age"][key.age_bin],
            idx["gender"][key.gender],
            idx["race"][key.race],
        )

    def contains(self, key: CrosstabKey) -> bool:
        try:
            self.sort_key(key)
        except KeyError:
            return False
        return True

    def sorted_cells(self, keys: Iterable[CrosstabKey]) -> list[CrosstabKey]:
        return sorted(keys, key=self.sort_key)

    def bin_for_age(self, age: int) -> AgeBin | None:
        for lo, hi in self.age_bins:
            if lo < age <= hi:
                return (lo, hi)
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "ideology_bins": list(self.ideology_bins),
            "age_bins": [list(b) for b in self.age_bins],
            "gender_labels": list(self.gender_labels),
            "race_labels": list(self.race_labels),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any] | None) -> "DemographicSchema":
        doc = doc or {}
        kwargs: dict[str, Any] = {}
        for name in ("ideology_bins", "gender_labels", "race_labels"):
            if name in doc:
                kwargs[name] = tuple(doc[name])
        if "age_bins" in doc:
            bins = []
            for b in doc["age_bins"]:
                bins.append(parse_age_label(b) if isinstance(b, str) else (int(b[0]), int(b[1])))
            kwargs["age_bins"] = tuple(bins)
        return cls(**kwargs)


def enumerate_cells(schema: DemographicSchema) -> list[CrosstabKey]:
    """All crosstab cells in lexicographic schema order."""
    return [
        CrosstabKey(ideology, age_bin, gender, race)
        for ideology, age_bin, gender, race in itertools.product(
            schema.ideology_bins, schema.age_bins, schema.gender_labels, schema.race_labels
        )
    ]


class Task(NamedTuple):
    question_id: str
    cell: CrosstabKey
    replicate: int


@dataclass(frozen=True)
class SamplingPlan:
    replicates_per_cell: int
    tasks: tuple[Task, ...]
    n_questions: int
    n_cells: int

    def __len__(self) -> int:
        return len(self.tasks)

    def summary(self) -> str:
        return (
            f"{self.n_cells} cells × {self.replicates_per_cell} replicates × "
            f"{self.n_questions} questions = {len(self.tasks):,} tasks"
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "replicates_per_cell": self.replicates_per_cell,
            "n_questions": self.n_questions,
            "n_cells": self.n_cells,
            "tasks": [[t.question_id, t.cell.label(), t.replicate] for t in self.tasks],
        }


def build_plan(questionnaire: Questionnaire, schema: DemographicSchema, n: int) -> SamplingPlan:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"replicates per cell must be an integer >= 1, got {n!r}")
    cells = enumerate_cells(schema)
    tasks = tuple(
        Task(q.id, cell, r) for q in questionnaire.questions for cell in cells for r in range(n)
    )
    return SamplingPlan(
        replicates_per_cell=n, tasks=tasks, n_questions=len(questionnaire), n_cells=len(cells)
    )
