"""Synthetic corpora: small procedurally drawn scene datasets and cover
collections, written in the same on-disk layout the ingestion code reads.

Used by the desk-scale training profiles and the test suite; everything is
deterministic in the seed.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

SCENE_CATEGORIES = ("disc", "panel", "wedge")


def _polygon_area(points: list[tuple[float, float]]) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:] + points[:1]):
        total += x0 * y1 - x1 * y0
    return abs(total) / 2


def _shape_polygon(kind: str, cx, cy, rx, ry, rng) -> list[tuple[float, float]]:
    if kind == "disc":
        return [
            (cx + rx * math.cos(2 * math.pi * k / 20), cy + ry * math.sin(2 * math.pi * k / 20))
            for k in range(20)
        ]
    if kind == "panel":
        return [(cx - rx, cy - ry), (cx + rx, cy - ry), (cx + rx, cy + ry), (cx - rx, cy + ry)]
    # wedge: triangle with a randomly flipped apex
    apex = (cx + rng.uniform(-0.5, 0.5) * rx, cy - ry)
    return [apex, (cx + rx, cy + ry), (cx - rx, cy + ry)]


def make_scene_dataset(root: str | Path, num_images: int = 10, seed: int = 0, size: int = 128) -> Path:
    """Write a COCO-format dataset of flat-color scenes with 1-3 shapes."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    images, annotations = [], []
    ann_id = 1
    for img_id in range(1, num_images + 1):
        bg = tuple(int(v) for v in rng.integers(140, 256, 3))
        canvas = Image.new("RGB", (size, size), bg)
        draw = ImageDraw.Draw(canvas)
        for _ in range(int(rng.integers(1, 4))):
            kind = SCENE_CATEGORIES[int(rng.integers(len(SCENE_CATEGORIES)))]
            rx = rng.uniform(0.12, 0.28) * size
            ry = rng.uniform(0.12, 0.28) * size
            cx = rng.uniform(rx, size - rx)
            cy = rng.uniform(ry, size - ry)
            poly = _shape_polygon(kind, cx, cy, rx, ry, rng)
            color = tuple(int(v) for v in rng.integers(0, 160, 3))
            draw.polygon(poly, fill=color)
            xs, ys = [p[0] for p in poly], [p[1] for p in poly]
            x0, y0, x1, y1 = min(xs), min(ys), max(xs), max(ys)
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": img_id,
                    "category_id": SCENE_CATEGORIES.index(kind) + 1,
                    "bbox": [x0, y0, x1 - x0, y1 - y0],
                    "area": _polygon_area(poly),
                    "iscrowd": 0,
                    "segmentation": [[coord for point in poly for coord in point]],
                }
            )
            ann_id += 1
        name = f"scene_{img_id:04d}.png"
        canvas.save(root / "images" / name)
        images.append({"id": img_id, "file_name": name, "width": size, "height": size})

    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [
            {"id": i + 1, "name": name} for i, name in enumerate(SCENE_CATEGORIES)
        ],
    }
    (root / "annotations.json").write_text(json.dumps(doc))
    return root


def make_cover_corpus(root: str | Path, num_covers: int = 8, seed: int = 0, size: int = 128) -> Path:
    """Write flat-color covers with a few horizontal bands; these double as a
    source of simple-color solid patches."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for k in range(num_covers):
        base = tuple(int(v) for v in rng.integers(0, 256, 3))
        canvas = Image.new("RGB", (size, size), base)
        draw = ImageDraw.Draw(canvas)
        for _ in range(int(rng.integers(0, 4))):
            y0 = int(rng.integers(0, size - 8))
            y1 = y0 + int(rng.integers(8, max(9, size // 3)))
            color = tuple(int(v) for v in rng.integers(0, 256, 3))
            draw.rectangle([0, y0, size, min(size, y1)], fill=color)
        canvas.save(root / f"cover_{k:04d}.png")
    return root
