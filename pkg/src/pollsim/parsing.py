"""Extract the ordinal "Position score" from completion text."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple

from pollsim.demographics import CrosstabKey
from pollsim.questionnaire import ResponseScale


class ParseStatus(str, Enum):
    PARSED = "parsed"
    OUT_OF_RANGE = "out_of_range"
    MISSING_SCORE = "missing_score"
    AMBIGUOUS = "ambiguous"


# A score line starts (after optional whitespace) with "position score", any
# whitespace around the colon, then a signed integer that is not the integer
# part of a decimal ("1.5", "2,5").
SCORE_LINE = re.compile(
    r"^[ \t]*position[ \t]+score[ \t]*:[ \t]*([+-]?\d+)(?![\d]|[.,]\d)",
    re.IGNORECASE | re.MULTILINE,
)


class ScoreParse(NamedTuple):
    score: int | None
    status: ParseStatus


def extract_position_score(text: str, scale: ResponseScale) -> ScoreParse:
    """Find the score line and range-check it against ``scale``.

    Several score lines carrying the same value count as one; differing
    values are ``ambiguous``. The value is never remapped.
    """
    values = {int(m.group(1)) for m in SCORE_LINE.finditer(text)}
    if not values:
        return ScoreParse(None, ParseStatus.MISSING_SCORE)
    if len(values) > 1:
        return ScoreParse(None, ParseStatus.AMBIGUOUS)
    (k,) = values
    if 1 <= k <= scale.cardinality:
        return ScoreParse(k, ParseStatus.PARSED)
    return ScoreParse(k, ParseStatus.OUT_OF_RANGE)


@dataclass(frozen=True)
class ResponseRecord:
    question_id: str
    cell: CrosstabKey
    replicate: int
    raw_text: str
    score: int | None
    status: ParseStatus

    @property
    def parsed(self) -> bool:
        return self.status is ParseStatus.PARSED


def parse_response(
    question_id: str, cell: CrosstabKey, replicate: int, text: str, scale: ResponseScale
) -> ResponseRecord:
    score, status = extract_position_score(text, scale)
    return ResponseRecord(question_id, cell, replicate, text, score, status)


@dataclass(frozen=True)
class ParseReport:
    counts: dict[str, int] = field(default_factory=dict)
    total: int = 0

    @property
    def failure_rate(self) -> float:
        if self.total == 0:
            return 0.0
        return 1.0 - self.counts.get(ParseStatus.PARSED.value, 0) / self.total

    def to_dict(self) -> dict:
        return {"total": self.total, "counts": dict(self.counts), "failure_rate": self.failure_rate}


def classify_batch(records: Iterable[ResponseRecord]) -> ParseReport:
    tally = Counter(r.status.value for r in records)
    counts = {s.value: tally.get(s.value, 0) for s in ParseStatus}
    return ParseReport(counts=counts, total=sum(counts.values()))
