"""Grid-cell region codec.

An image is tiled by a ``k x k`` grid of equal rectangular cells. A pixel
rectangle is encoded as the four tokens ``<x_a><y_b><x_c><y_d>`` naming the
cells that contain its top-left and bottom-right pixels; decoding returns the
pixel hull of the named cell block. Tokens use (column, row) order: ``x`` is
the column index, ``y`` the row index, both starting at 0 in the top-left
corner.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = [
    "GridSpec",
    "RegionBox",
    "RegionTokenQuad",
    "RegionValidationError",
    "ParseDiagnostic",
    "encode_region",
    "decode_quad",
    "parse_region_tokens",
    "format_quad",
]

DEFAULT_GRID_K = 8


class RegionValidationError(ValueError):
    """A box or quad coordinate is outside its valid range."""


@dataclass(frozen=True)
class GridSpec:
    """Image dimensions plus the grid resolution ``k`` (cells per axis)."""

    width: int
    height: int
    k: int = DEFAULT_GRID_K

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise RegionValidationError(f"width={self.width} must be > 0")
        if self.height <= 0:
            raise RegionValidationError(f"height={self.height} must be > 0")
        if self.k < 2:
            raise RegionValidationError(f"k={self.k} must be >= 2")

    @property
    def cell_width(self) -> float:
        return self.width / self.k

    @property
    def cell_height(self) -> float:
        return self.height / self.k


@dataclass(frozen=True)
class RegionBox:
    """Pixel rectangle with inclusive corners, origin at the top-left."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def validate(self, grid: GridSpec) -> None:
        """Raise :class:`RegionValidationError` naming the first bad coordinate."""
        if not 0 <= self.x_min <= grid.width - 1:
            raise RegionValidationError(
                f"x_min={self.x_min} outside [0, {grid.width - 1}]"
            )
        if not 0 <= self.y_min <= grid.height - 1:
            raise RegionValidationError(
                f"y_min={self.y_min} outside [0, {grid.height - 1}]"
            )
        if not self.x_min <= self.x_max <= grid.width - 1:
            raise RegionValidationError(
                f"x_max={self.x_max} outside [{self.x_min}, {grid.width - 1}]"
            )
        if not self.y_min <= self.y_max <= grid.height - 1:
            raise RegionValidationError(
                f"y_max={self.y_max} outside [{self.y_min}, {grid.height - 1}]"
            )

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True)
class RegionTokenQuad:
    """Cell indices of a region's top-left and bottom-right pixels."""

    x0: int
    y0: int
    x1: int
    y1: int

    def validate(self, grid: GridSpec) -> None:
        top = grid.k - 1
        for name, value in (("x0", self.x0), ("y0", self.y0),
                            ("x1", self.x1), ("y1", self.y1)):
            if not 0 <= value <= top:
                raise RegionValidationError(f"{name}={value} outside [0, {top}]")
        if self.x0 > self.x1:
            raise RegionValidationError(f"x0={self.x0} > x1={self.x1}")
        if self.y0 > self.y1:
            raise RegionValidationError(f"y0={self.y0} > y1={self.y1}")


@dataclass(frozen=True)
class ParseDiagnostic:
    """A parse finding: what was wrong, where, and the offending text."""

    kind: str  # out_of_range | inverted | incomplete
    position: int
    message: str
    fragment: str = ""


def cell_index(p: int, k: int, extent: int) -> int:
    """Index of the grid cell containing pixel coordinate ``p``.

    ``floor(p * k / extent)`` clamped to ``k - 1`` so the last pixel row and
    column always belong to the last cell, even when ``extent`` is not a
    multiple of ``k``.
    """
    return min(p * k // extent, k - 1)


def encode_region(box: RegionBox, grid: GridSpec) -> RegionTokenQuad:
    """Encode a pixel box as the cell indices of its two corners."""
    box.validate(grid)
    return RegionTokenQuad(
        x0=cell_index(box.x_min, grid.k, grid.width),
        y0=cell_index(box.y_min, grid.k, grid.height),
        x1=cell_index(box.x_max, grid.k, grid.width),
        y1=cell_index(box.y_max, grid.k, grid.height),
    )


def _cell_block_span(c0: int, c1: int, k: int, extent: int) -> tuple[int, int]:
    # First and last pixel whose cell index falls in [c0, c1]. The cell block
    # covers the real interval [c0*extent/k, (c1+1)*extent/k); its pixel hull
    # is [ceil(c0*extent/k), ceil((c1+1)*extent/k) - 1], computed exactly in
    # integers. Clamped so the result is a valid pixel range even when cells
    # are narrower than one pixel.
    lo = -(-c0 * extent // k)
    hi = -(-(c1 + 1) * extent // k) - 1
    lo = min(max(lo, 0), extent - 1)
    hi = min(max(hi, lo), extent - 1)
    return lo, hi


def decode_quad(quad: RegionTokenQuad, grid: GridSpec) -> RegionBox:
    """Pixel bounding box of the union of cells named by ``quad``.

    The result contains every pixel box that encodes to ``quad``.
    """
    quad.validate(grid)
    x_lo, x_hi = _cell_block_span(quad.x0, quad.x1, grid.k, grid.width)
    y_lo, y_hi = _cell_block_span(quad.y0, quad.y1, grid.k, grid.height)
    return RegionBox(x_min=x_lo, y_min=y_lo, x_max=x_hi, y_max=y_hi)


def format_quad(quad: RegionTokenQuad) -> str:
    """Canonical token text: ``<x_A><y_B><x_C><y_D>``, no whitespace."""
    return f"<x_{quad.x0}><y_{quad.y0}><x_{quad.x1}><y_{quad.y1}>"


_QUAD_RE = re.compile(
    r"<x_(\d+)>\s*<y_(\d+)>\s*<x_(\d+)>\s*<y_(\d+)>"
)
_TOKEN_RE = re.compile(r"<[xy]_\d+>")


def parse_region_tokens(
    text: str, k: int = DEFAULT_GRID_K
) -> tuple[list[RegionTokenQuad], list[ParseDiagnostic]]:
    """Recover region token quads from free-form model text.

    Scans left to right for ``<x_A><y_B><x_C><y_D>`` groups (whitespace
    between tokens is tolerated). Groups with indices outside ``[0, k-1]`` or
    with inverted corners are excluded and reported as diagnostics, as are
    leftover partial token runs. Order of appearance is preserved and
    duplicates are kept. Never raises.
    """
    quads: list[RegionTokenQuad] = []
    diagnostics: list[ParseDiagnostic] = []
    matched_spans: list[tuple[int, int]] = []

    for m in _QUAD_RE.finditer(text):
        matched_spans.append(m.span())
        x0, y0, x1, y1 = (int(g) for g in m.groups())
        top = k - 1
        bad = [v for v in (x0, y0, x1, y1) if v > top]
        if bad:
            diagnostics.append(ParseDiagnostic(
                kind="out_of_range",
                position=m.start(),
                message=f"index {bad[0]} out of range for k={k}",
                fragment=m.group(0),
            ))
            continue
        if x0 > x1 or y0 > y1:
            diagnostics.append(ParseDiagnostic(
                kind="inverted",
                position=m.start(),
                message=f"corner order violated: ({x0},{y0}) vs ({x1},{y1})",
                fragment=m.group(0),
            ))
            continue
        quads.append(RegionTokenQuad(x0, y0, x1, y1))

    # Lone <x_/<y_ tokens outside any full group are reported once per run of
    # adjacent tokens.
    leftovers: list[re.Match[str]] = []
    for m in _TOKEN_RE.finditer(text):
        if any(lo <= m.start() < hi for lo, hi in matched_spans):
            continue
        leftovers.append(m)
    run_start: re.Match[str] | None = None
    prev_end = -1
    for m in leftovers + [None]:  # type: ignore[list-item]
        adjacent = (
            m is not None
            and run_start is not None
            and text[prev_end:m.start()].strip() == ""
        )
        if m is not None and adjacent:
            prev_end = m.end()
            continue
        if run_start is not None:
            diagnostics.append(ParseDiagnostic(
                kind="incomplete",
                position=run_start.start(),
                message="token run does not form a full quad",
                fragment=text[run_start.start():prev_end],
            ))
        if m is not None:
            run_start = m
            prev_end = m.end()
        else:
            run_start = None

    diagnostics.sort(key=lambda d: d.position)
    return quads, diagnostics
