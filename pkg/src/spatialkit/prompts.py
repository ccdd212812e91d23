"""Pinned prompt templates, shipped as text assets and hashed for reports."""

from __future__ import annotations

import hashlib
from importlib import resources

__all__ = ["load_template", "template_hash", "TEMPLATE_NAMES"]

TEMPLATE_NAMES = (
    "stage1",
    "stage2_vision",
    "stage2_vision_text",
    "judge",
    "rationale",
)


def load_template(name: str) -> tuple[str, str]:
    """Return (template text, sha256 hex) for a bundled template."""
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}; known: {TEMPLATE_NAMES}")
    text = (
        resources.files("spatialkit").joinpath(f"prompts/{name}.txt").read_text("utf-8")
    )
    return text, hashlib.sha256(text.encode("utf-8")).hexdigest()


def template_hash(name: str) -> str:
    return load_template(name)[1]
