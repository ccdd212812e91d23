"""Dataset reconstruction: source records to curated image+text samples.

Two source flavors are consumed, both record-per-line JSON:

spatialrgpt-style::

    {"id": "...", "image": "path.png", "category": "...",
     "conversations": [{"from": "human", "value": "... <mask> <depth> ..."},
                       {"from": "gpt", "value": "..."}],
     "regions": [{"bbox": [x0, y0, x1, y1]} |
                 {"mask_points": [[x, y], ...]} |
                 {"mask": [[0/1, ...], ...]}]}

vpt-style::

    {"id": "...", "image": "path.png", "category": "...",
     "question": "...", "answer": "...", "boxes": [[x0, y0, x1, y1], ...]}

Masks collapse to tight bounding boxes at ingestion and depth references are
dropped: the produced samples are plain images plus text. Placeholders are
rewritten to ``Region [i]`` tags, boxes are drawn onto an overlay image, and
each region's grid-cell token quad is precomputed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from PIL import Image

from .codec import GridSpec, RegionBox, encode_region, format_quad
from .records import CuratedSample, QuarantinedRecord, RegionEntry, SourceRecord, write_ndjson
from .units import extract_quantity, is_bare_number

__all__ = [
    "IngestError",
    "PlaceholderError",
    "RationaleRequest",
    "Finding",
    "ingest_spatialrgpt",
    "ingest_vpt",
    "rewrite_placeholders",
    "build_sample",
    "reconstruct_records",
    "generate_rationale",
    "attach_rationale",
    "rationale_leaks",
    "validate_sample",
    "export_training_records",
]

# A "<mask> <depth>" pair references one region, as do standalone tokens.
_PLACEHOLDER_RE = re.compile(r"<mask>\s*<depth>|<mask>|<depth>")
_REGION_TAG_RE = re.compile(r"Region \[(\d+)\]")

FLAG_NEEDS_RATIONALE = "needs_rationale"
FLAG_RATIONALE_LEAKAGE = "rationale_leakage"


class IngestError(ValueError):
    """Raised for records that belong in quarantine; carries the reason."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class PlaceholderError(ValueError):
    """A placeholder has no region to name; message carries the position."""


def _image_dims(image_ref: str, images_root: Optional[Path]) -> tuple[int, int]:
    path = Path(image_ref)
    if images_root is not None and not path.is_absolute():
        path = Path(images_root) / path
    try:
        with Image.open(path) as im:
            return im.size
    except (FileNotFoundError, OSError) as exc:
        raise IngestError("unresolvable_image", f"{image_ref}: {exc}") from exc


def _placeholder_count(turns: list[tuple[str, str]]) -> int:
    return sum(
        len(_PLACEHOLDER_RE.findall(text)) for q, a in turns for text in (q, a)
    )


def _tight_box_from_points(points: list) -> RegionBox:
    if not points:
        raise IngestError("empty_mask", "mask has zero pixels")
    xs = [int(p[0]) for p in points]
    ys = [int(p[1]) for p in points]
    return RegionBox(min(xs), min(ys), max(xs), max(ys))


def _region_to_box(region: dict, width: int, height: int) -> RegionBox:
    if "bbox" in region:
        coords = region["bbox"]
        if len(coords) != 4:
            raise IngestError("malformed_box", f"bbox {coords!r} is not 4 coordinates")
        box = RegionBox(*(int(c) for c in coords))
    elif "mask_points" in region:
        box = _tight_box_from_points(region["mask_points"])
    elif "mask" in region:
        points = [
            (x, y)
            for y, row in enumerate(region["mask"])
            for x, v in enumerate(row)
            if v
        ]
        box = _tight_box_from_points(points)
    else:
        raise IngestError("bad_schema", f"region keys {sorted(region)} unrecognized")
    try:
        box.validate(GridSpec(width, height))
    except ValueError as exc:
        raise IngestError("malformed_box", str(exc)) from exc
    return box


def ingest_spatialrgpt(raw: dict, images_root: Optional[Path] = None) -> SourceRecord:
    """Normalize a spatialrgpt-style record; raises IngestError to quarantine."""
    try:
        source_id = str(raw["id"])
        image_ref = raw["image"]
        conversations = raw["conversations"]
        regions_raw = raw.get("regions", [])
    except KeyError as exc:
        raise IngestError("bad_schema", f"missing key {exc}") from exc

    width, height = _image_dims(image_ref, images_root)

    turns: list[tuple[str, str]] = []
    pending_q: Optional[str] = None
    for message in conversations:
        role, value = message.get("from"), message.get("value", "")
        if role == "human":
            if pending_q is not None:
                raise IngestError("bad_schema", "two human turns in a row")
            pending_q = value
        elif role == "gpt":
            if pending_q is None:
                raise IngestError("bad_schema", "answer with no question")
            turns.append((pending_q, value))
            pending_q = None
        else:
            raise IngestError("bad_schema", f"unknown speaker {role!r}")
    if pending_q is not None:
        raise IngestError("bad_schema", "question with no answer")
    if not turns:
        raise IngestError("bad_schema", "record has no turns")

    regions = [_region_to_box(r, width, height) for r in regions_raw]
    n_placeholders = _placeholder_count(turns)
    if n_placeholders > len(regions):
        raise IngestError(
            "placeholder_region_mismatch",
            f"{n_placeholders} placeholders but {len(regions)} regions",
        )

    return SourceRecord(
        source="spatialrgpt",
        source_id=source_id,
        image_ref=image_ref,
        turns=turns,
        regions=regions,
        qa_category=raw.get("category", ""),
        image_width=width,
        image_height=height,
    )


def ingest_vpt(raw: dict, images_root: Optional[Path] = None) -> SourceRecord:
    """Normalize a vpt-style record; general-QA records carry zero regions."""
    try:
        source_id = str(raw["id"])
        image_ref = raw["image"]
        question = raw["question"]
        answer = raw["answer"]
    except KeyError as exc:
        raise IngestError("bad_schema", f"missing key {exc}") from exc

    width, height = _image_dims(image_ref, images_root)

    regions = []
    for coords in raw.get("boxes", []):
        regions.append(_region_to_box({"bbox": coords}, width, height))

    turns = [(question, answer)]
    n_placeholders = _placeholder_count(turns)
    if n_placeholders > len(regions):
        raise IngestError(
            "placeholder_region_mismatch",
            f"{n_placeholders} placeholders but {len(regions)} regions",
        )

    return SourceRecord(
        source="vpt",
        source_id=source_id,
        image_ref=image_ref,
        turns=turns,
        regions=regions,
        qa_category=raw.get("category", ""),
        image_width=width,
        image_height=height,
    )


def rewrite_placeholders(record: SourceRecord) -> tuple[str, str]:
    """Replace placeholder occurrences with ``Region [i]`` tags.

    The i-th occurrence in reading order across turns becomes ``Region [i]``.
    Text already free of placeholders passes through unchanged, so the
    rewrite is idempotent. A placeholder beyond the region count raises
    :class:`PlaceholderError` naming its position.
    """
    counter = {"i": 0}
    n_regions = len(record.regions)

    def rewrite(text: str, where: str) -> str:
        def substitute(m: re.Match) -> str:
            i = counter["i"]
            if i >= n_regions:
                raise PlaceholderError(
                    f"placeholder at {where} char {m.start()} has no region "
                    f"(only {n_regions} available)"
                )
            counter["i"] += 1
            return f"Region [{i}]"

        return _PLACEHOLDER_RE.sub(substitute, text)

    questions = []
    answers = []
    for turn_no, (q, a) in enumerate(record.turns):
        questions.append(rewrite(q, f"turn {turn_no} question"))
        answers.append(rewrite(a, f"turn {turn_no} answer"))
    return "\n".join(questions), "\n".join(answers)


def build_sample(
    record: SourceRecord,
    k: int = 8,
    overlay_dir: Optional[Path] = None,
    overlay_ref_prefix: str = "overlays",
    images_root: Optional[Path] = None,
) -> CuratedSample:
    """Reconstruct one source record into a pending CuratedSample.

    Only regions actually named by a placeholder are kept (indices are dense
    by first mention); extra annotated regions would carry no tag and are
    dropped. The overlay is rendered when overlay_dir is given.
    """
    from .overlay import render_region_overlay

    question, answer = rewrite_placeholders(record)
    n_mentioned = _placeholder_count(record.turns)
    kept = record.regions[:n_mentioned]

    grid = GridSpec(record.image_width, record.image_height, k)
    entries = [
        RegionEntry(index=i, box=box, quad=encode_region(box, grid))
        for i, box in enumerate(kept)
    ]

    sample_id = f"{record.source}-{record.source_id}"
    overlay_ref = f"{overlay_ref_prefix}/{sample_id}.png"
    if overlay_dir is not None:
        overlay_dir = Path(overlay_dir)
        overlay_dir.mkdir(parents=True, exist_ok=True)
        image_path = Path(record.image_ref)
        if images_root is not None and not image_path.is_absolute():
            image_path = Path(images_root) / image_path
        png = render_region_overlay(image_path, [e.box for e in entries])
        (overlay_dir / f"{sample_id}.png").write_bytes(png)

    transforms = ["placeholders_rewritten"]
    if len(record.regions) != len(kept):
        transforms.append(f"dropped_{len(record.regions) - len(kept)}_untagged_regions")

    return CuratedSample(
        sample_id=sample_id,
        image_ref=record.image_ref,
        overlay_image_ref=overlay_ref,
        image_width=record.image_width,
        image_height=record.image_height,
        grid_k=k,
        question=question,
        answer=answer,
        regions=entries,
        qa_category=record.qa_category,
        provenance={
            "source": record.source,
            "source_id": record.source_id,
            "transforms": transforms,
        },
    )


def reconstruct_records(
    raw_records: Iterable[dict],
    source: str,
    images_root: Optional[Path] = None,
    k: int = 8,
    overlay_dir: Optional[Path] = None,
    overlay_ref_prefix: str = "overlays",
) -> tuple[list[CuratedSample], list[QuarantinedRecord]]:
    """Ingest and rebuild a whole file, splitting off quarantined records."""
    ingest = {"spatialrgpt": ingest_spatialrgpt, "vpt": ingest_vpt}[source]
    samples: list[CuratedSample] = []
    quarantined: list[QuarantinedRecord] = []
    for raw in raw_records:
        source_id = str(raw.get("id", "<missing>"))
        try:
            record = ingest(raw, images_root)
            samples.append(build_sample(
                record, k=k, overlay_dir=overlay_dir,
                overlay_ref_prefix=overlay_ref_prefix, images_root=images_root,
            ))
        except IngestError as exc:
            quarantined.append(QuarantinedRecord(source_id, exc.reason, exc.detail))
        except PlaceholderError as exc:
            quarantined.append(QuarantinedRecord(source_id, "placeholder_region_mismatch", str(exc)))
    return samples, quarantined


@dataclass
class RationaleRequest:
    """Inputs the CoT teacher sees: question, gold answer, and the images."""

    question: str
    gold_answer: str
    overlay_png: bytes
    crops: list[bytes] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.overlay_png and not self.crops:
            raise ValueError("rationale request needs at least one image")


def rationale_leaks(rationale: str, answer: str) -> bool:
    """Prefix-only leakage guard: the trace must not open with the answer."""
    answer = answer.strip()
    return bool(answer) and rationale.lstrip().startswith(answer)


def generate_rationale(req: RationaleRequest, client) -> str:
    """Ask the teacher for a reasoning path that ends at the gold answer."""
    from .client import ChatMessage, ImagePart, TextPart
    from .prompts import load_template

    template, _ = load_template("rationale")
    prompt = template.format(question=req.question, answer=req.gold_answer)
    parts: list = [TextPart(prompt)]
    if req.overlay_png:
        parts.append(ImagePart(req.overlay_png, "image/png"))
    for crop in req.crops:
        parts.append(ImagePart(crop, "image/png"))
    return client.chat_complete([ChatMessage.user_parts(*parts)])


def attach_rationale(sample: CuratedSample, rationale: str) -> CuratedSample:
    """Store teacher output on the sample, applying the guards.

    Empty output flags needs_rationale; a trace that opens with the verbatim
    answer is kept for the reviewer but flagged as leakage. Status stays
    pending either way.
    """
    text = rationale.strip()
    flags = [f for f in sample.flags if f not in (FLAG_NEEDS_RATIONALE, FLAG_RATIONALE_LEAKAGE)]
    if not text:
        sample.rationale = None
        flags.append(FLAG_NEEDS_RATIONALE)
    else:
        sample.rationale = text
        if rationale_leaks(text, sample.answer):
            flags.append(FLAG_RATIONALE_LEAKAGE)
    sample.flags = flags
    return sample


@dataclass(frozen=True)
class Finding:
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail}


def validate_sample(sample: CuratedSample) -> list[Finding]:
    """Machine-checkable violations only; judgment calls go to human review."""
    findings: list[Finding] = []
    n = len(sample.regions)
    text = f"{sample.question}\n{sample.answer}"
    tags = sorted({int(m.group(1)) for m in _REGION_TAG_RE.finditer(text)})

    for tag in tags:
        if tag >= n:
            findings.append(Finding(
                "tag_out_of_range", f"Region [{tag}] but only {n} regions"
            ))
    in_range = [t for t in tags if t < n]
    if in_range and in_range != list(range(len(in_range))):
        findings.append(Finding(
            "tag_gap", f"tags {in_range} are not dense from 0"
        ))

    if sample.rationale is not None and rationale_leaks(sample.rationale, sample.answer):
        findings.append(Finding("rationale_leakage", "rationale begins with the answer"))

    if is_bare_number(sample.answer):
        try:
            extract_quantity(sample.answer)
        except ValueError:
            findings.append(Finding("missing_unit", f"answer {sample.answer!r} has no unit"))

    grid = GridSpec(sample.image_width, sample.image_height, sample.grid_k)
    for entry in sample.regions:
        try:
            entry.box.validate(grid)
        except ValueError as exc:
            findings.append(Finding("region_outside_image", f"region {entry.index}: {exc}"))

    return findings


def training_target(sample: CuratedSample, include_rationale: bool) -> str:
    """Target text: region token quads, optional rationale, then the answer."""
    parts = []
    if sample.regions:
        parts.append("".join(format_quad(e.quad) for e in sample.regions))
    if (
        include_rationale
        and sample.rationale
        and not rationale_leaks(sample.rationale, sample.answer)
    ):
        parts.append(sample.rationale)
    parts.append(sample.answer)
    return "\n".join(parts)


def export_training_records(
    samples: Iterable[CuratedSample],
    path: Path | str,
    accepted_only: bool = True,
    include_rationale: bool = True,
) -> int:
    """Write the record-per-line training file; returns the record count.

    Rejected samples never export. accepted_only keeps accepted and edited
    samples; otherwise pending samples are included too. Output order is
    deterministic (by sample_id).
    """
    eligible_statuses = ("accepted", "edited") if accepted_only else (
        "accepted", "edited", "pending"
    )
    chosen = sorted(
        (s for s in samples if s.review_status in eligible_statuses),
        key=lambda s: s.sample_id,
    )
    return write_ndjson(path, (
        {
            "sample_id": s.sample_id,
            "image": s.overlay_image_ref,
            "question": s.question,
            "target": training_target(s, include_rationale),
        }
        for s in chosen
    ))
