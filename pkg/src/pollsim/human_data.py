"""Ingest CES-style survey CSVs and recode them onto the questionnaire scales.

Survey weights are ignored: comparisons are between unweighted subgroup
means of the human sample and a balanced synthetic panel.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from pollsim.demographics import AgeBin, CrosstabKey, DemographicSchema, enumerate_cells
from pollsim.questionnaire import Questionnaire

logger = logging.getLogger(__name__)

DROP = "DROP"


class RecodeError(ValueError):
    """Input data does not conform to the recode spec. Never silently coerced."""


class AgeCoverageError(ValueError):
    pass


@dataclass(frozen=True)
class FactorRecode:
    column: str
    mapping: Mapping[str, str]  # raw value -> schema label, or DROP


@dataclass(frozen=True)
class QuestionRecode:
    column: str
    mapping: Mapping[str, int | str]  # raw value -> ordinal score, or DROP


@dataclass(frozen=True)
class RecodeSpec:
    ideology: FactorRecode
    gender: FactorRecode
    race: FactorRecode
    questions: Mapping[str, QuestionRecode]
    birth_year_column: str = "birthyr"
    respondent_id_column: str | None = "caseid"
    fielding_year: int = 2022

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RecodeSpec":
        def factor(name: str) -> FactorRecode:
            part = doc[name]
            return FactorRecode(part["column"], {str(k): str(v) for k, v in part["map"].items()})

        questions = {}
        for qid, part in doc.get("questions", {}).items():
            mapping: dict[str, int | str] = {}
            for raw, value in part["map"].items():
                if value == DROP:
                    mapping[str(raw)] = DROP
                elif isinstance(value, int) and not isinstance(value, bool):
                    mapping[str(raw)] = value
                else:
                    raise RecodeError(f"question {qid!r}: value for {raw!r} must be an int or DROP")
            questions[qid] = QuestionRecode(part["column"], mapping)
        return cls(
            ideology=factor("ideology"),
            gender=factor("gender"),
            race=factor("race"),
            questions=questions,
            birth_year_column=doc.get("birth_year_column", "birthyr"),
            respondent_id_column=doc.get("respondent_id_column", "caseid"),
            fielding_year=int(doc.get("fielding_year", 2022)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "ideology": {"column": self.ideology.column, "map": dict(self.ideology.mapping)},
            "gender": {"column": self.gender.column, "map": dict(self.gender.mapping)},
            "race": {"column": self.race.column, "map": dict(self.race.mapping)},
            "questions": {
                qid: {"column": q.column, "map": dict(q.mapping)} for qid, q in self.questions.items()
            },
            "birth_year_column": self.birth_year_column,
            "respondent_id_column": self.respondent_id_column,
            "fielding_year": self.fielding_year,
        }

    def validate(self, schema: DemographicSchema, questionnaire: Questionnaire) -> None:
        for name, labels in (
            ("ideology", schema.ideology_bins),
            ("gender", schema.gender_labels),
            ("race", schema.race_labels),
        ):
            recode: FactorRecode = getattr(self, name)
            for raw, label in recode.mapping.items():
                if label != DROP and label not in labels:
                    raise RecodeError(f"{name}: {raw!r} maps to {label!r}, not in schema {labels}")
        for qid, recode in self.questions.items():
            try:
                k = questionnaire.get(qid).scale.cardinality
            except KeyError:
                raise RecodeError(f"recode spec names unknown question {qid!r}") from None
            for raw, score in recode.mapping.items():
                if score != DROP and not 1 <= score <= k:
                    raise RecodeError(f"question {qid!r}: {raw!r} -> {score} outside 1..{k}")


@dataclass(frozen=True)
class HumanResponseRecord:
    respondent_id: str
    cell: CrosstabKey
    scores: Mapping[str, int | None]


@dataclass
class HumanSample:
    records: list[HumanResponseRecord]
    skipped: Counter = field(default_factory=Counter)
    missing_questions: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.records)


def bin_age(birth_year: int, fielding_year: int, schema: DemographicSchema) -> AgeBin:
    age = fielding_year - birth_year
    if not 0 < age < 130:
        raise AgeCoverageError(f"implausible age {age} (born {birth_year}, fielded {fielding_year})")
    found = schema.bin_for_age(age)
    if found is None:
        raise AgeCoverageError(f"age {age} is outside every schema age bin")
    return found


def _lookup(mapping: Mapping[str, Any], raw: str, what: str, line: int) -> Any:
    try:
        return mapping[raw]
    except KeyError:
        raise RecodeError(f"row {line}: unmapped {what} value {raw!r}") from None


def ingest_csv(
    path: str | Path,
    spec: RecodeSpec,
    schema: DemographicSchema,
    questionnaire: Questionnaire,
    *,
    allow_missing_questions: bool = False,
) -> HumanSample:
    """Read a survey CSV and recode every row.

    Rows whose demographics map to DROP or fall outside the age bins are
    skipped and counted in ``HumanSample.skipped``. A question value mapped
    to DROP leaves that question's score absent. Any raw value absent from
    the recode spec is a :class:`RecodeError` naming the CSV line.
    """
    spec.validate(schema, questionnaire)
    qids = [q.id for q in questionnaire if q.id in spec.questions]
    records: list[HumanResponseRecord] = []
    skipped: Counter = Counter()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or [])
        required = [spec.ideology.column, spec.gender.column, spec.race.column, spec.birth_year_column]
        if spec.respondent_id_column:
            required.append(spec.respondent_id_column)
        missing = [c for c in required if c not in header]
        if missing:
            raise RecodeError(f"{path}: missing column(s) {missing}")
        absent_q = [qid for qid in qids if spec.questions[qid].column not in header]
        if absent_q and not allow_missing_questions:
            cols = [spec.questions[q].column for q in absent_q]
            raise RecodeError(f"{path}: missing column(s) {cols}")
        present_q = [q for q in qids if q not in absent_q]

        for row in reader:
            line = reader.line_num
            ideology = _lookup(spec.ideology.mapping, row[spec.ideology.column], "ideology", line)
            gender = _lookup(spec.gender.mapping, row[spec.gender.column], "gender", line)
            race = _lookup(spec.race.mapping, row[spec.race.column], "race", line)
            raw_year = row[spec.birth_year_column].strip()
            try:
                birth_year = int(raw_year)
            except ValueError:
                raise RecodeError(f"row {line}: unparseable birth year {raw_year!r}") from None
            scores: dict[str, int | None] = {}
            for qid in present_q:
                recode = spec.questions[qid]
                value = _lookup(recode.mapping, row[recode.column], f"{recode.column}", line)
                scores[qid] = None if value == DROP else int(value)
            if DROP in (ideology, gender, race):
                skipped["demographic_dropped"] += 1
                continue
            try:
                age_bin = bin_age(birth_year, spec.fielding_year, schema)
            except AgeCoverageError as exc:
                logger.warning("row %d skipped: %s", line, exc)
                skipped["age_out_of_coverage"] += 1
                continue
            rid = row[spec.respondent_id_column] if spec.respondent_id_column else str(line)
            records.append(
                HumanResponseRecord(rid, CrosstabKey(ideology, age_bin, gender, race), scores)
            )
    if absent_q:
        logger.warning("no human data column for: %s", ", ".join(absent_q))
    return HumanSample(records=records, skipped=skipped, missing_questions=tuple(absent_q))


def human_cell_table(
    records: Iterable[HumanResponseRecord],
    questionnaire: Questionnaire,
    schema: DemographicSchema,
) -> dict[str, dict[CrosstabKey, list[int]]]:
    """Scores grouped by question and cell; every schema cell is present, possibly empty."""
    cells = enumerate_cells(schema)
    table = {q.id: {c: [] for c in cells} for q in questionnaire}
    for rec in records:
        for qid, score in rec.scores.items():
            if score is not None and qid in table:
                table[qid][rec.cell].append(score)
    return table
