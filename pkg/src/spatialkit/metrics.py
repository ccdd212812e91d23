"""Scoring: the symmetric ratio metric for distances and LLM-judge verdicts."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .prompts import load_template
from .units import Quantity

__all__ = [
    "DEFAULT_THRESHOLDS",
    "JudgeVerdict",
    "QuantVerdict",
    "delta_ratio",
    "judge_qualitative",
    "parse_judge_score",
    "score_quantitative",
]

# Acceptance thresholds for the ratio metric; both are inclusive.
DEFAULT_THRESHOLDS = (1.25, 2.0)

JUDGE_ACCEPT_ABOVE = 0.5


def delta_ratio(d_hat: float, d_star: float) -> float:
    """Symmetric ratio error ``max(d_hat/d_star, d_star/d_hat)``.

    Always >= 1, with equality iff the estimate matches the ground truth.
    """
    if d_hat <= 0:
        raise ValueError(f"d_hat={d_hat} must be > 0")
    if d_star <= 0:
        raise ValueError(f"d_star={d_star} must be > 0")
    return max(d_hat / d_star, d_star / d_hat)


@dataclass(frozen=True)
class JudgeVerdict:
    """Graded answer: score in [0, 1], accepted iff strictly above 0.5."""

    score: float
    accepted: bool
    judge_raw: str
    failed: bool = False

    @classmethod
    def from_score(cls, score: float, judge_raw: str) -> "JudgeVerdict":
        return cls(score=score, accepted=score > JUDGE_ACCEPT_ABOVE, judge_raw=judge_raw)


@dataclass(frozen=True)
class QuantVerdict:
    """Distance estimate scored against ground truth at fixed thresholds."""

    d_hat: float
    d_star: float
    delta: float
    accepted_at: dict[float, bool] = field(default_factory=dict)
    extraction_failed: bool = False

    @classmethod
    def rejected(cls, d_star: float, thresholds=DEFAULT_THRESHOLDS) -> "QuantVerdict":
        """Verdict for an answer with no extractable quantity."""
        return cls(
            d_hat=float("nan"),
            d_star=d_star,
            delta=float("inf"),
            accepted_at={t: False for t in thresholds},
            extraction_failed=True,
        )


def score_quantitative(
    d_hat: float, d_star: float, thresholds=DEFAULT_THRESHOLDS
) -> QuantVerdict:
    delta = delta_ratio(d_hat, d_star)
    return QuantVerdict(
        d_hat=d_hat,
        d_star=d_star,
        delta=delta,
        accepted_at={t: delta <= t for t in thresholds},
    )


def score_quantity_answer(
    answer: Quantity | None, gold: Quantity, thresholds=DEFAULT_THRESHOLDS
) -> QuantVerdict:
    if answer is None:
        return QuantVerdict.rejected(gold.meters, thresholds)
    return score_quantitative(answer.meters, gold.meters, thresholds)


_NUMBER_RE = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?|\.\d+)(?![\w.])")


def parse_judge_score(reply: str) -> float | None:
    """Recover the score from a judge reply.

    The pinned judge prompt asks for a single number between 0 and 1 on the
    last line; that line is tried first, then the whole reply (last in-range
    number wins). Returns None when nothing parses.
    """
    lines = [ln.strip() for ln in reply.splitlines() if ln.strip()]
    if lines:
        for m in _NUMBER_RE.finditer(lines[-1]):
            value = float(m.group(1))
            if 0.0 <= value <= 1.0:
                return value
    in_range = [
        float(m.group(1))
        for m in _NUMBER_RE.finditer(reply)
        if 0.0 <= float(m.group(1)) <= 1.0
    ]
    return in_range[-1] if in_range else None


def judge_qualitative(question: str, gold: str, predicted_answer: str, judge_client) -> JudgeVerdict:
    """Grade a free-text answer against gold with a judge endpoint.

    The judge runs at temperature 0 and is re-asked once on an unparsable
    reply; a second failure yields a failed verdict scored 0 (conservative).
    """
    from .client import ChatMessage  # local import to keep metrics usable offline

    template, _ = load_template("judge")
    prompt = template.format(question=question, gold=gold, prediction=predicted_answer)
    messages = [ChatMessage.user_text(prompt)]

    config = replace(judge_client.config, temperature=0.0)
    raw = ""
    for _ in range(2):  # one ask plus one re-ask
        raw = judge_client.chat_complete(messages, config=config)
        score = parse_judge_score(raw)
        if score is not None:
            return JudgeVerdict.from_score(score, raw)
        messages = [ChatMessage.user_text(
            prompt + "\n\nReply with only a single number between 0 and 1."
        )]
    return JudgeVerdict(score=0.0, accepted=False, judge_raw=raw, failed=True)
