"""Domain records for the dataset reconstruction pipeline.

Record-per-line JSON is the interchange format throughout: raw source
records in, curated samples out, with a quarantine side channel for records
that fail mechanical validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .codec import RegionBox, RegionTokenQuad

__all__ = [
    "SourceRecord",
    "RegionEntry",
    "CuratedSample",
    "QuarantinedRecord",
    "REVIEW_STATUSES",
    "REJECTION_REASONS",
    "read_ndjson",
    "write_ndjson",
]

REVIEW_STATUSES = ("pending", "accepted", "edited", "rejected")
REJECTION_REASONS = (
    "unreasonable_question",
    "wrong_answer",
    "unrelated_to_image",
    "other",
)


def read_ndjson(path: Path | str) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad JSON ({exc})") from exc


def write_ndjson(path: Path | str, records: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")
            count += 1
    return count


@dataclass
class SourceRecord:
    """A normalized input record, either spatialrgpt- or vpt-style."""

    source: str  # spatialrgpt | vpt
    source_id: str
    image_ref: str
    turns: list[tuple[str, str]]  # (question, answer) pairs in order
    regions: list[RegionBox]
    qa_category: str = ""
    image_width: int = 0
    image_height: int = 0

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "source_id": self.source_id,
            "image": self.image_ref,
            "turns": [[q, a] for q, a in self.turns],
            "regions": [[b.x_min, b.y_min, b.x_max, b.y_max] for b in self.regions],
            "qa_category": self.qa_category,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SourceRecord":
        return cls(
            source=payload["source"],
            source_id=payload["source_id"],
            image_ref=payload["image"],
            turns=[(q, a) for q, a in payload["turns"]],
            regions=[RegionBox(*b) for b in payload["regions"]],
            qa_category=payload.get("qa_category", ""),
            image_width=payload.get("image_width", 0),
            image_height=payload.get("image_height", 0),
        )


@dataclass
class QuarantinedRecord:
    source_id: str
    reason: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"source_id": self.source_id, "reason": self.reason, "detail": self.detail}


@dataclass
class RegionEntry:
    """One indexed region on a curated sample."""

    index: int
    box: RegionBox
    quad: RegionTokenQuad
    label: str = ""
    evidence: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "box": [self.box.x_min, self.box.y_min, self.box.x_max, self.box.y_max],
            "quad": [self.quad.x0, self.quad.y0, self.quad.x1, self.quad.y1],
            "label": self.label,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RegionEntry":
        return cls(
            index=payload["index"],
            box=RegionBox(*payload["box"]),
            quad=RegionTokenQuad(*payload["quad"]),
            label=payload.get("label", ""),
            evidence=payload.get("evidence", ""),
        )


@dataclass
class CuratedSample:
    """One reconstructed training sample awaiting or past human review."""

    sample_id: str
    image_ref: str
    overlay_image_ref: str
    image_width: int
    image_height: int
    grid_k: int
    question: str
    answer: str
    regions: list[RegionEntry] = field(default_factory=list)
    rationale: Optional[str] = None
    review_status: str = "pending"
    rejection_reason: Optional[str] = None
    qa_category: str = ""
    flags: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.review_status not in REVIEW_STATUSES:
            raise ValueError(f"bad review_status {self.review_status!r}")
        if self.rejection_reason is not None and self.rejection_reason not in REJECTION_REASONS:
            raise ValueError(f"bad rejection_reason {self.rejection_reason!r}")

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "image": self.image_ref,
            "overlay_image": self.overlay_image_ref,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "grid_k": self.grid_k,
            "question": self.question,
            "answer": self.answer,
            "regions": [r.to_dict() for r in self.regions],
            "rationale": self.rationale,
            "review_status": self.review_status,
            "rejection_reason": self.rejection_reason,
            "qa_category": self.qa_category,
            "flags": list(self.flags),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CuratedSample":
        return cls(
            sample_id=payload["sample_id"],
            image_ref=payload["image"],
            overlay_image_ref=payload["overlay_image"],
            image_width=payload["image_width"],
            image_height=payload["image_height"],
            grid_k=payload["grid_k"],
            question=payload["question"],
            answer=payload["answer"],
            regions=[RegionEntry.from_dict(r) for r in payload["regions"]],
            rationale=payload.get("rationale"),
            review_status=payload.get("review_status", "pending"),
            rejection_reason=payload.get("rejection_reason"),
            qa_category=payload.get("qa_category", ""),
            flags=list(payload.get("flags", [])),
            provenance=payload.get("provenance", {}),
        )
