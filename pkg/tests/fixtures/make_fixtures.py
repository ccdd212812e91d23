"""Regenerate the committed test fixtures (images + raw source records).

Run from the repository root:

    python3 tests/fixtures/make_fixtures.py

Outputs are deterministic; goldens derived from them live in tests/golden and
are refreshed by tests/golden/make_goldens.py after a reviewed run.
"""

import json
import random
from pathlib import Path

from PIL import Image, ImageDraw

HERE = Path(__file__).parent
IMAGES = HERE / "images"

QUESTION_STYLES = [
    ("How far is {a} from {b}?", "{d} meters", "horizontal-distance"),
    ("What is the vertical distance between {a} and {b}?", "{d} meters", "vertical-distance"),
    ("Is {a} to the left of {b}?", "yes, it is on the left", "left-right"),
    ("Is {a} behind {b}?", "no, it is in front", "front-behind"),
    ("Which is wider, {a} or {b}?", "the first one is wider", "width-compare"),
]


def draw_scene(index: int) -> tuple[Image.Image, list[list[int]]]:
    rng = random.Random(1000 + index)
    w, h = 320, 240
    im = Image.new("RGB", (w, h), (200 + index % 40, 210, 225 - index % 30))
    draw = ImageDraw.Draw(im)
    draw.rectangle((0, 170, w - 1, h - 1), fill=(120, 140, 90))
    boxes = []
    for slot in range(2):
        bw = rng.randint(40, 90)
        bh = rng.randint(40, 80)
        x0 = rng.randint(10 + slot * 160, 60 + slot * 160)
        y0 = rng.randint(60, 150)
        box = [x0, y0, min(x0 + bw, w - 1), min(y0 + bh, h - 1)]
        color = (rng.randint(30, 220), rng.randint(30, 220), rng.randint(30, 220))
        if slot == 0:
            draw.rectangle(tuple(box), fill=color)
        else:
            draw.ellipse(tuple(box), fill=color)
        boxes.append(box)
    return im, boxes


def box_to_mask_points(box):
    x0, y0, x1, y1 = box
    return [[x0, y0], [x1, y0], [x0, y1], [x1, y1], [(x0 + x1) // 2, (y0 + y1) // 2]]


def main() -> None:
    IMAGES.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(20):
        im, boxes = draw_scene(i)
        image_name = f"images/img_{i:02d}.png"
        im.save(IMAGES / f"img_{i:02d}.png")

        template, answer, category = QUESTION_STYLES[i % len(QUESTION_STYLES)]
        rng = random.Random(2000 + i)
        question = template.format(a="<mask> <depth>", b="<mask> <depth>")
        gold = answer.format(d=round(rng.uniform(0.5, 9.5), 1))

        # Alternate region encodings to cover bbox and mask ingestion.
        if i % 3 == 0:
            regions = [{"mask_points": box_to_mask_points(b)} for b in boxes]
        else:
            regions = [{"bbox": b} for b in boxes]

        records.append({
            "id": f"src-{i:02d}",
            "image": image_name,
            "category": category,
            "conversations": [
                {"from": "human", "value": question},
                {"from": "gpt", "value": gold},
            ],
            "regions": regions,
        })

    with open(HERE / "raw_spatialrgpt.ndjson", "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"wrote {len(records)} records and {len(records)} images under {HERE}")


if __name__ == "__main__":
    main()
