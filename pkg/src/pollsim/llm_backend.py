"""Chat-completion backends: a live HTTP client and a seeded mock respondent."""

from __future__ import annotations

import email.utils
import json
import logging
import math
import os
import re
import threading
import time
from contextlib import nullcontext
from dataclasses import dataclass, field
from functools import lru_cache
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import httpx
import numpy as np

from pollsim.demographics import CrosstabKey
from pollsim.prompting import PromptContext
from pollsim.seeding import task_rng

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "POLLSIM_API_KEY"
RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


class BackendError(RuntimeError):
    pass


class MissingCredentialError(BackendError):
    pass


class FatalBackendError(BackendError):
    """Non-retryable HTTP failure (4xx other than 429) or an unusable response body."""

    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class RetriesExhaustedError(BackendError):
    def __init__(self, attempts: int, last_error: BaseException | str):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


class UnknownQuestionError(KeyError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-3.5-turbo-0301"
    temperature: float = 1.0
    max_in_flight: int = 4
    max_retries: int = 5
    request_timeout: float = 60.0
    api_key_env: str = DEFAULT_API_KEY_ENV
    backoff_initial: float = 1.0
    backoff_max: float = 60.0

    def __post_init__(self) -> None:
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def credential(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise MissingCredentialError(
                f"environment variable {self.api_key_env} is not set; the live backend needs it"
            )
        return key


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend_id: str
    latency: float = 0.0


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    """Rough token count (words plus punctuation marks); close to BPE counts for English."""
    return len(_TOKEN_RE.findall(text))


@lru_cache(maxsize=4096)
def _message_tokens(content: str) -> int:
    return count_tokens(content) + 4  # 4 framing tokens per chat message


def prompt_token_count(ctx: PromptContext) -> int:
    return sum(_message_tokens(m["content"]) for m in ctx.messages())


# --------------------------------------------------------------------------- live


def _retry_after(response: httpx.Response) -> float | None:
    value = response.headers.get("retry-after")
    if value is None:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        pass
    try:
        when = email.utils.parsedate_to_datetime(value)
    except (TypeError, ValueError):
        return None
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return max(0.0, (when - datetime.now(timezone.utc)).total_seconds())


def _parse_completion(response: httpx.Response, latency: float, ctx: PromptContext) -> CompletionResult:
    try:
        data = response.json()
        text = data["choices"][0]["message"]["content"]
        if not isinstance(text, str):
            raise TypeError("content is not a string")
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise FatalBackendError(
            f"unexpected response body: {exc}", response.status_code, response.text[:2000]
        ) from exc
    usage = data.get("usage") or {}
    return CompletionResult(
        text=text,
        prompt_tokens=int(usage.get("prompt_tokens", prompt_token_count(ctx))),
        completion_tokens=int(usage.get("completion_tokens", count_tokens(text))),
        backend_id="live",
        latency=latency,
    )


def complete(
    config: BackendConfig,
    ctx: PromptContext,
    *,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
    limiter: threading.Semaphore | None = None,
) -> CompletionResult:
    """Send one stateless [system, user] chat request, retrying transient failures.

    Transport errors, timeouts, 429 and 5xx responses are retried with
    exponential backoff (429 honours ``Retry-After``) up to
    ``config.max_retries`` times; other 4xx responses raise
    :class:`FatalBackendError` immediately.
    """
    headers = {"Authorization": f"Bearer {config.credential()}"}
    payload = {
        "model": config.model_name,
        "messages": ctx.messages(),
        "temperature": config.temperature,
    }
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=config.request_timeout)
    gate = limiter if limiter is not None else nullcontext()
    last_error: BaseException | str = "no attempt made"
    try:
        for attempt in range(config.max_retries + 1):
            delay = min(config.backoff_max, config.backoff_initial * 2**attempt)
            try:
                with gate:
                    t0 = time.perf_counter()
                    response = client.post(
                        config.endpoint_url,
                        json=payload,
                        headers=headers,
                        timeout=config.request_timeout,
                    )
                    latency = time.perf_counter() - t0
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("transport error (%s), attempt %d", exc, attempt + 1)
            else:
                status = response.status_code
                if status == 200:
                    return _parse_completion(response, latency, ctx)
                if status not in RETRYABLE_STATUS:
                    raise FatalBackendError(
                        f"HTTP {status} from {config.endpoint_url}: {response.text[:500]}",
                        status,
                        response.text,
                    )
                last_error = f"HTTP {status}"
                hint = _retry_after(response)
                if hint is not None:
                    delay = min(config.backoff_max, hint)
                logger.warning("HTTP %d, attempt %d", status, attempt + 1)
            if attempt < config.max_retries:
                sleep(delay)
        raise RetriesExhaustedError(config.max_retries + 1, last_error)
    finally:
        if own_client:
            client.close()


class LiveBackend:
    backend_id = "live"

    def __init__(
        self,
        config: BackendConfig,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        config.credential()  # fail fast before any work is scheduled
        self.config = config
        self._client = client or httpx.Client(timeout=config.request_timeout)
        self._sleep = sleep
        self._limiter = threading.BoundedSemaphore(config.max_in_flight)

    def complete(self, ctx: PromptContext, replicate: int) -> CompletionResult:
        return complete(self.config, ctx, client=self._client, sleep=self._sleep, limiter=self._limiter)

    def close(self) -> None:
        self._client.close()


# --------------------------------------------------------------------------- mock


@dataclass(frozen=True)
class MockOpinionModel:
    """Seeded stand-in respondent population.

    ``means`` maps question id -> ideology label -> base mean score;
    ``offsets`` maps question id -> factor ("age", "gender", "race") ->
    subgroup label -> additive shift. ``dispersion`` is the target standard
    deviation of each cell's score distribution.
    """

    means: Mapping[str, Mapping[str, float]]
    offsets: Mapping[str, Mapping[str, Mapping[str, float]]] = field(default_factory=dict)
    dispersion: float = 0.5
    dispersion_by_question: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dispersion < 0 or any(d < 0 for d in self.dispersion_by_question.values()):
            raise ValueError("dispersion must be >= 0")

    def cell_mean(self, question_id: str, cell: CrosstabKey, cardinality: int) -> float:
        try:
            by_ideology = self.means[question_id]
        except KeyError:
            raise UnknownQuestionError(question_id) from None
        if cell.ideology not in by_ideology:
            raise UnknownQuestionError(f"{question_id}: no mean for ideology {cell.ideology!r}")
        mean = float(by_ideology[cell.ideology])
        for factor, table in self.offsets.get(question_id, {}).items():
            mean += float(table.get(cell.factor(factor), 0.0))
        return min(max(mean, 1.0), float(cardinality))

    def dispersion_for(self, question_id: str) -> float:
        return float(self.dispersion_by_question.get(question_id, self.dispersion))

    def with_seed(self, seed: int) -> "MockOpinionModel":
        return MockOpinionModel(
            self.means, self.offsets, self.dispersion, self.dispersion_by_question, seed
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "means": {q: dict(m) for q, m in self.means.items()},
            "offsets": {
                q: {f: dict(t) for f, t in by_f.items()} for q, by_f in self.offsets.items()
            },
            "dispersion": self.dispersion,
            "dispersion_by_question": dict(self.dispersion_by_question),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "MockOpinionModel":
        return cls(
            means={q: {k: float(v) for k, v in m.items()} for q, m in doc["means"].items()},
            offsets={
                q: {f: {k: float(v) for k, v in t.items()} for f, t in by_f.items()}
                for q, by_f in doc.get("offsets", {}).items()
            },
            dispersion=float(doc.get("dispersion", 0.5)),
            dispersion_by_question={
                q: float(v) for q, v in doc.get("dispersion_by_question", {}).items()
            },
            seed=int(doc.get("seed", 0)),
        )


def load_mock_model(path: str | Path) -> MockOpinionModel:
    return MockOpinionModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def score_distribution(mean: float, cardinality: int, dispersion: float) -> np.ndarray:
    """Probabilities of scores 1..cardinality with expectation exactly ``mean``.

    Mixes the tightest distribution with that mean (mass on the two
    neighbouring integers) and the widest one (mass on the two poles) so the
    standard deviation equals ``dispersion`` whenever that is attainable, and
    the nearest attainable value otherwise.
    """
    k = cardinality
    mu = min(max(float(mean), 1.0), float(k))
    lo = min(int(math.floor(mu)), k - 1)
    frac = mu - lo
    tight = np.zeros(k)
    tight[lo - 1] = 1.0 - frac
    tight[lo] += frac
    wide = np.zeros(k)
    wide[0] = (k - mu) / (k - 1)
    wide[k - 1] += (mu - 1) / (k - 1)
    var_tight = frac * (1.0 - frac)
    var_wide = (mu - 1.0) * (k - mu)
    span = var_wide - var_tight
    w = 0.0 if span <= 1e-15 else min(max((dispersion**2 - var_tight) / span, 0.0), 1.0)
    return (1.0 - w) * tight + w * wide


def draw_score(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    u = rng.random()
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1)) + 1


_FILLER = (
    "This is an issue that affects people in my community every single day.",
    "I have thought about this question for a long time, and my view has only grown firmer.",
    "Too often the debate is dominated by slogans instead of the experiences of ordinary people.",
    "Our representatives should listen carefully to the people they serve before acting.",
    "The consequences of this decision will be felt for years, long after the headlines fade.",
    "I talk with friends and neighbors about it, and many of them share my concerns.",
    "We owe it to the next generation to get this right.",
    "Good policy should rest on evidence, fairness, and common sense.",
)


def _stance_phrase(score: int, ctx: PromptContext) -> str:
    scale = ctx.question.scale
    label = scale.label_for(score)
    if label is None:
        nearer = scale.low_label if score <= (scale.cardinality + 1) / 2 else scale.high_label
        return f'lean toward "{nearer}" on'
    return f'take the position "{label}" on'


def mock_text(score: int, ctx: PromptContext, rng: np.random.Generator) -> str:
    p = ctx.profile
    picks = rng.choice(len(_FILLER), size=4, replace=False)
    body = " ".join(_FILLER[i] for i in picks)
    paragraph = (
        f"As a politically {p.ideology.lower()} {p.gender.lower()} in the age range of "
        f"{p.age_label} years who identifies as {p.race}, I {_stance_phrase(score, ctx)} "
        f'the proposal: "{ctx.question.prompt_text}" {body} '
        f"That is why I hold the view I have stated, and I urge readers to consider it."
    )
    return f"Position score: {score}\n\n{paragraph}"


def mock_complete(model: MockOpinionModel, ctx: PromptContext, replicate: int) -> CompletionResult:
    """Deterministic completion for (model.seed, question, cell, replicate)."""
    q = ctx.question
    cell = ctx.profile
    mean = model.cell_mean(q.id, cell, q.scale.cardinality)
    probs = score_distribution(mean, q.scale.cardinality, model.dispersion_for(q.id))
    rng = task_rng(model.seed, "mock", q.id, cell.label(), replicate)
    score = draw_score(probs, rng)
    text = mock_text(score, ctx, rng)
    return CompletionResult(
        text=text,
        prompt_tokens=prompt_token_count(ctx),
        completion_tokens=count_tokens(text),
        backend_id="mock",
        latency=0.0,
    )


class MockBackend:
    backend_id = "mock"

    def __init__(self, model: MockOpinionModel):
        self.model = model

    def complete(self, ctx: PromptContext, replicate: int) -> CompletionResult:
        return mock_complete(self.model, ctx, replicate)

    def close(self) -> None:
        pass


# --------------------------------------------------------------------------- cost


@dataclass(frozen=True)
class PriceTable:
    """USD per token."""

    prompt: float = 0.0000015
    completion: float = 0.000002

    def __post_init__(self) -> None:
        if self.prompt < 0 or self.completion < 0:
            raise ValueError("token rates must be >= 0")


def estimate_cost(results: Iterable[CompletionResult], price_table: PriceTable) -> float:
    total = 0.0
    for r in results:
        total += r.prompt_tokens * price_table.prompt + r.completion_tokens * price_table.completion
    return total
