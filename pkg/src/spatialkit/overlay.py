"""Deterministic region-box overlay rendering.

Overlays replace mask/depth side channels: numbered boxes drawn straight on
the image are the generalized input format consumed by plain image+text
models. Rendering must be byte-identical across runs so overlays can be
golden-tested and cached.
"""

from __future__ import annotations

import io
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from .codec import RegionBox

__all__ = ["PALETTE", "STROKE_WIDTH", "render_region_overlay", "reencode_image"]

# Fixed 8-color palette, indexed by region index mod 8.
PALETTE = (
    (230, 57, 70),    # red
    (42, 157, 143),   # teal
    (38, 84, 185),    # blue
    (244, 162, 97),   # orange
    (142, 68, 173),   # purple
    (0, 168, 232),    # cyan
    (214, 40, 140),   # magenta
    (233, 196, 106),  # yellow
)

STROKE_WIDTH = 3
_LABEL_PAD = 2


def _load_image(image: Image.Image | bytes | str | Path) -> Image.Image:
    if isinstance(image, Image.Image):
        return image.convert("RGB")
    if isinstance(image, (str, Path)):
        with Image.open(image) as im:
            return im.convert("RGB")
    with Image.open(io.BytesIO(image)) as im:
        return im.convert("RGB")


def reencode_image(image: Image.Image | bytes | str | Path) -> bytes:
    """PNG re-encode through the same path the overlay renderer uses."""
    im = _load_image(image)
    out = io.BytesIO()
    im.save(out, format="PNG")
    return out.getvalue()


def render_region_overlay(
    image: Image.Image | bytes | str | Path,
    regions: list[RegionBox],
    labels: list[str] | None = None,
) -> bytes:
    """Draw numbered region boxes and return PNG bytes.

    3 px strokes, palette color by index mod 8, and a "Region [i]" label on a
    filled background at the box's top-left corner, clamped to stay inside
    the canvas. Identical inputs render to identical bytes. Zero regions
    yields a plain re-encode of the original.
    """
    im = _load_image(image)
    if not regions:
        out = io.BytesIO()
        im.save(out, format="PNG")
        return out.getvalue()

    draw = ImageDraw.Draw(im)
    # The default bitmap font renders identically everywhere, unlike system
    # truetype fonts.
    font = ImageFont.load_default()
    width, height = im.size

    for i, box in enumerate(regions):
        color = PALETTE[i % len(PALETTE)]
        draw.rectangle(
            (box.x_min, box.y_min, box.x_max, box.y_max),
            outline=color,
            width=STROKE_WIDTH,
        )
        text = labels[i] if labels and labels[i] else f"Region [{i}]"
        left, top, right, bottom = draw.textbbox((0, 0), text, font=font)
        text_w = right - left
        text_h = bottom - top
        label_w = text_w + 2 * _LABEL_PAD
        label_h = text_h + 2 * _LABEL_PAD
        # Anchor at the box's top-left, clamped so the label stays on canvas.
        lx = min(max(box.x_min, 0), max(width - label_w, 0))
        ly = min(max(box.y_min, 0), max(height - label_h, 0))
        draw.rectangle((lx, ly, lx + label_w - 1, ly + label_h - 1), fill=color)
        draw.text((lx + _LABEL_PAD - left, ly + _LABEL_PAD - top), text,
                  fill=(255, 255, 255), font=font)

    out = io.BytesIO()
    im.save(out, format="PNG")
    return out.getvalue()
