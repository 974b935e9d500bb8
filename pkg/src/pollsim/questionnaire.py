"""Survey items, their ordinal response scales, and questionnaire files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping


class QuestionnaireError(ValueError):
    """A questionnaire document failed validation."""

    def __init__(self, message: str, question_id: str | None = None, field_name: str | None = None):
        self.detail = message
        self.question_id = question_id
        self.field_name = field_name
        where = []
        if question_id is not None:
            where.append(f"question {question_id!r}")
        if field_name is not None:
            where.append(f"field {field_name!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class ResponseScale:
    """Ordinal scale 1..cardinality with labelled poles."""

    cardinality: int
    low_label: str
    high_label: str
    level_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if isinstance(self.cardinality, bool) or not isinstance(self.cardinality, int):
            raise QuestionnaireError("must be an integer", field_name="scale.cardinality")
        if self.cardinality < 2:
            raise QuestionnaireError(
                f"must be >= 2, got {self.cardinality}", field_name="scale.cardinality"
            )
        for name in ("low_label", "high_label"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise QuestionnaireError("must be a nonempty string", field_name=f"scale.{name}")
        if self.level_labels is not None:
            labels = tuple(self.level_labels)
            object.__setattr__(self, "level_labels", labels)
            if len(labels) != self.cardinality:
                raise QuestionnaireError(
                    f"has {len(labels)} entries, expected {self.cardinality}",
                    field_name="scale.level_labels",
                )
            if labels[0] != self.low_label or labels[-1] != self.high_label:
                raise QuestionnaireError(
                    "first/last entries must equal low_label/high_label",
                    field_name="scale.level_labels",
                )

    def label_for(self, score: int) -> str | None:
        if self.level_labels is not None:
            return self.level_labels[score - 1]
        if score == 1:
            return self.low_label
        if score == self.cardinality:
            return self.high_label
        return None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "cardinality": self.cardinality,
            "low_label": self.low_label,
            "high_label": self.high_label,
        }
        if self.level_labels is not None:
            out["level_labels"] = list(self.level_labels)
        return out


@dataclass(frozen=True)
class Question:
    id: str
    source_code: str
    prompt_text: str
    scale: ResponseScale

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise QuestionnaireError("must be a nonempty string", field_name="id")
        if not isinstance(self.prompt_text, str) or not self.prompt_text:
            raise QuestionnaireError("must be a nonempty string", self.id, "prompt_text")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "source_code": self.source_code,
            "prompt_text": self.prompt_text,
            "scale": self.scale.to_dict(),
        }


@dataclass(frozen=True)
class Questionnaire:
    questions: tuple[Question, ...]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "questions", tuple(self.questions))
        seen: set[str] = set()
        for q in self.questions:
            if q.id in seen:
                raise QuestionnaireError("duplicate question id", q.id, "id")
            seen.add(q.id)

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)

    @property
    def ids(self) -> list[str]:
        return [q.id for q in self.questions]

    def get(self, question_id: str) -> Question:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise KeyError(question_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "metadata": dict(self.metadata),
            "questions": [q.to_dict() for q in self.questions],
        }

    def content_hash(self) -> str:
        """Stable digest of the canonical JSON form; used in cache keys."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def scale_for(q: Question) -> ResponseScale:
    return q.scale


def _question_from_dict(raw: Any, index: int) -> Question:
    if not isinstance(raw, Mapping):
        raise QuestionnaireError(f"questions[{index}] must be an object")
    qid = raw.get("id")
    label = qid if isinstance(qid, str) and qid else f"#{index}"
    for key in ("id", "prompt_text", "scale"):
        if key not in raw:
            raise QuestionnaireError("missing", label, key)
    scale_raw = raw["scale"]
    if not isinstance(scale_raw, Mapping):
        raise QuestionnaireError("must be an object", label, "scale")
    for key in ("cardinality", "low_label", "high_label"):
        if key not in scale_raw:
            raise QuestionnaireError("missing", label, f"scale.{key}")
    try:
        levels = scale_raw.get("level_labels")
        scale = ResponseScale(
            cardinality=scale_raw["cardinality"],
            low_label=scale_raw["low_label"],
            high_label=scale_raw["high_label"],
            level_labels=tuple(levels) if levels is not None else None,
        )
        return Question(
            id=qid,
            source_code=str(raw.get("source_code", "")),
            prompt_text=raw["prompt_text"],
            scale=scale,
        )
    except QuestionnaireError as exc:
        raise QuestionnaireError(exc.detail, label, exc.field_name) from None


def questionnaire_from_dict(doc: Any) -> Questionnaire:
    if not isinstance(doc, Mapping):
        raise QuestionnaireError("document must be a JSON object")
    questions_raw = doc.get("questions")
    if not isinstance(questions_raw, list):
        raise QuestionnaireError("'questions' must be a list", field_name="questions")
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, Mapping):
        raise QuestionnaireError("'metadata' must be an object", field_name="metadata")
    questions = [_question_from_dict(raw, i) for i, raw in enumerate(questions_raw)]
    return Questionnaire(questions=tuple(questions), metadata=dict(metadata))


def load_questionnaire(path: str | Path) -> Questionnaire:
    """Read and validate a questionnaire JSON file.

    Raises ``OSError`` if the file cannot be read and ``QuestionnaireError``
    for malformed documents, duplicate ids, or invalid scales.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise QuestionnaireError(f"not valid JSON: {exc}") from exc
    return questionnaire_from_dict(doc)


def dump_questionnaire(questionnaire: Questionnaire, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(questionnaire.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def default_questionnaire_path() -> Path:
    return Path(str(resources.files("pollsim") / "data" / "questionnaire.json"))


def default_questionnaire() -> Questionnaire:
    return load_questionnaire(default_questionnaire_path())
