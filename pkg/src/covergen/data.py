"""Dataset ingestion and ground-truth synthesis.

Reads a COCO-format scene dataset (annotations.json plus an images/
directory) and a flat directory of book-cover images, then augments each
scene with the cover-specific ground truth the generator is trained on:
solid color regions cut from real covers and exactly one placeholder title.
Also derives the graph-side annotations (grid locations, geometric
relations) and the layout feature maps fed to the layout discriminator.

Images are torch tensors (3, S, S) in [-1, 1]; boxes are normalized
(x0, y0, x1, y1); ground-truth masks are binary 32x32.
"""

from __future__ import annotations

import colorsys
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw

from . import titles
from .config import DataConfig
from .graphs import (
    SOLID_CATEGORY,
    TITLE_CATEGORY,
    Appearance,
    CategoryVocabulary,
    LayoutGraph,
    LayoutObject,
    LocationVector,
    Relation,
)
from .objects import compose_feature_map, crop_bbox
from .utils import derive_seed, to_uint8_image, to_unit_tensor

log = logging.getLogger(__name__)

MASK_SIZE = 32
CROP_SIZE = 64


class DataError(RuntimeError):
    """Raised when a dataset is unusable (missing files, excessive skips)."""


@dataclass
class SceneSample:
    """One scene image with per-object ground truth."""

    source_id: str
    image: torch.Tensor  # (3, S, S) in [-1, 1]
    categories: tuple[str, ...]
    boxes: torch.Tensor  # (O, 4) normalized
    masks: torch.Tensor  # (O, 32, 32) binary

    @property
    def num_objects(self) -> int:
        return len(self.categories)

    @property
    def category_multiset(self) -> frozenset:
        return frozenset(Counter(self.categories).items())

    def crops(self, size: int = CROP_SIZE) -> torch.Tensor:
        return torch.stack([crop_bbox(self.image, b, size) for b in self.boxes])


@dataclass
class AugmentedSample(SceneSample):
    """SceneSample plus solid regions, the placeholder title, and the
    matching layout graph."""

    graph: LayoutGraph = None
    title_font: str = ""
    title_color: tuple[int, int, int] = (255, 255, 255)
    title_index: int = -1
    solid_indices: tuple[int, ...] = field(default_factory=tuple)


# --------------------------------------------------------------------------
# Ingestion.
# --------------------------------------------------------------------------


def _rasterize_segmentation(segmentation, bbox, width: int, height: int) -> np.ndarray:
    """Binary (height, width) mask from COCO polygons; falls back to the box
    rectangle when no polygon is given."""
    canvas = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    polys = [p for p in (segmentation or []) if isinstance(p, list) and len(p) >= 6]
    if polys:
        for poly in polys:
            draw.polygon([(poly[i], poly[i + 1]) for i in range(0, len(poly), 2)], fill=1)
    else:
        x, y, w, h = bbox
        draw.rectangle([x, y, x + w, y + h], fill=1)
    return np.asarray(canvas, dtype=np.uint8)


def _mask_to_grid(full_mask: np.ndarray, bbox) -> np.ndarray | None:
    """Crop the full-resolution mask to the box and resize to 32x32 binary."""
    x, y, w, h = bbox
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = int(math.ceil(x + w)), int(math.ceil(y + h))
    region = full_mask[max(0, y0) : y1, max(0, x0) : x1]
    if region.shape[0] < 1 or region.shape[1] < 1:
        return None
    img = Image.fromarray(region * 255)
    small = np.asarray(img.resize((MASK_SIZE, MASK_SIZE), Image.BILINEAR))
    binary = (small >= 128).astype(np.float32)
    if binary.sum() == 0:
        binary[MASK_SIZE // 2, MASK_SIZE // 2] = 1.0
    return binary


def ingest_scene_dataset(
    root: str | Path,
    limit: int | None = None,
    canvas: int = 128,
    min_area_frac: float = 0.02,
):
    """Yield SceneSamples in image-id order.

    Per-sample problems (missing file, undecodable image, no usable objects)
    are skipped with a logged reason; more than 10% skipped is a hard error.
    """
    root = Path(root)
    ann_path = root / "annotations.json"
    try:
        doc = json.loads(ann_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read annotations at {ann_path}: {exc}") from None

    cat_names = {c["id"]: c["name"] for c in doc.get("categories", [])}
    by_image: dict[int, list[dict]] = {}
    for ann in doc.get("annotations", []):
        by_image.setdefault(ann["image_id"], []).append(ann)

    records = sorted(doc.get("images", []), key=lambda r: r["id"])
    emitted = 0
    skipped = 0
    seen = 0
    for record in records:
        if limit is not None and emitted >= limit:
            break
        seen += 1

        def skip(reason: str):
            nonlocal skipped
            skipped += 1
            log.warning("skipping image %s: %s", record.get("file_name"), reason)

        path = root / "images" / record["file_name"]
        try:
            with Image.open(path) as img:
                rgb = img.convert("RGB")
                width, height = rgb.size
                resized = rgb.resize((canvas, canvas), Image.BILINEAR)
        except OSError as exc:
            skip(f"unreadable ({exc})")
            continue

        cats, boxes, masks = [], [], []
        for ann in sorted(by_image.get(record["id"], []), key=lambda a: a["id"]):
            if ann.get("iscrowd"):
                continue
            x, y, w, h = ann["bbox"]
            if w <= 0 or h <= 0:
                continue
            area = ann.get("area", w * h)
            if area / (width * height) < min_area_frac:
                continue
            full = _rasterize_segmentation(ann.get("segmentation"), ann["bbox"], width, height)
            grid = _mask_to_grid(full, ann["bbox"])
            if grid is None:
                continue
            cats.append(cat_names.get(ann["category_id"], str(ann["category_id"])))
            boxes.append(
                [
                    max(0.0, x / width),
                    max(0.0, y / height),
                    min(1.0, (x + w) / width),
                    min(1.0, (y + h) / height),
                ]
            )
            masks.append(grid)

        if not cats:
            skip("no usable objects after filtering")
            continue

        emitted += 1
        yield SceneSample(
            source_id=str(record["id"]),
            image=to_unit_tensor(np.asarray(resized)),
            categories=tuple(cats),
            boxes=torch.tensor(boxes, dtype=torch.float32),
            masks=torch.tensor(np.stack(masks), dtype=torch.float32),
        )

    if seen and skipped / seen > 0.10:
        raise DataError(f"{skipped}/{seen} scene images skipped; dataset looks broken")


def ingest_book_covers(root: str | Path, limit: int | None = None, canvas: int = 128):
    """Yield cover images as (3, S, S) tensors in [-1, 1], filename order.

    Plain resize (no cropping); unreadable files are skipped with a log line.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"cover directory {root} does not exist")
    emitted = 0
    for path in sorted(root.iterdir()):
        if limit is not None and emitted >= limit:
            break
        if not path.is_file():
            continue
        try:
            with Image.open(path) as img:
                resized = img.convert("RGB").resize((canvas, canvas), Image.BILINEAR)
        except OSError as exc:
            log.warning("skipping cover %s: %s", path.name, exc)
            continue
        emitted += 1
        yield to_unit_tensor(np.asarray(resized))


# --------------------------------------------------------------------------
# Graph-side annotation from geometry.
# --------------------------------------------------------------------------


def location_from_box(box) -> LocationVector:
    """Quantize a normalized box to (grid cell, size level): the cell holds
    the box center on the 5x5 grid, the level is the area decile."""
    x0, y0, x1, y1 = (float(v) for v in box)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    col = min(4, max(0, int(cx * 5)))
    row = min(4, max(0, int(cy * 5)))
    area = max(0.0, x1 - x0) * max(0.0, y1 - y0)
    level = min(10, max(1, math.ceil(area * 10)))
    return LocationVector(row * 5 + col, level)


def _intersection(a, b) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    return max(0.0, w) * max(0.0, h)


def relate_boxes(box_a, box_b, containment: float = 0.9) -> str:
    """One predicate for the ordered pair (A, B) from geometry alone:
    containment wins, otherwise the dominant center offset axis."""
    area_a = max(1e-12, (box_a[2] - box_a[0]) * (box_a[3] - box_a[1]))
    area_b = max(1e-12, (box_b[2] - box_b[0]) * (box_b[3] - box_b[1]))
    inter = _intersection(box_a, box_b)
    if inter / area_b >= containment:
        return "surrounding"
    if inter / area_a >= containment:
        return "inside"
    dx = (box_b[0] + box_b[2]) / 2 - (box_a[0] + box_a[2]) / 2
    dy = (box_b[1] + box_b[3]) / 2 - (box_a[1] + box_a[3]) / 2
    if abs(dx) >= abs(dy):
        return "left_of" if dx > 0 else "right_of"
    return "above" if dy > 0 else "below"


def derive_relations(ids: list[str], boxes: torch.Tensor) -> tuple[Relation, ...]:
    """One geometric relation per unordered object pair."""
    rels = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            rels.append(Relation(ids[i], relate_boxes(boxes[i].tolist(), boxes[j].tolist()), ids[j]))
    return tuple(rels)


# --------------------------------------------------------------------------
# Augmentation: solid regions and the placeholder title.
# --------------------------------------------------------------------------


def _sample_box(rng: np.random.Generator, w_range, h_range) -> tuple[float, float, float, float]:
    bw = rng.uniform(*w_range)
    bh = rng.uniform(*h_range)
    x0 = rng.uniform(0, 1 - bw)
    y0 = rng.uniform(0, 1 - bh)
    return x0, y0, x0 + bw, y0 + bh


def cut_solid_patch(
    covers: list[torch.Tensor],
    size: tuple[int, int],
    rng: np.random.Generator,
    std_threshold: float,
    tries: int = 8,
) -> np.ndarray:
    """Cut a (h, w, 3) uint8 patch of simple color from a random cover.

    Among `tries` random windows, the first whose per-channel pixel std is
    below the threshold wins; otherwise the flattest seen is used.
    """
    h, w = size
    best, best_std = None, float("inf")
    for _ in range(tries):
        cover = to_uint8_image(covers[int(rng.integers(len(covers)))])
        ch, cw = cover.shape[:2]
        y = int(rng.integers(0, max(1, ch - h + 1)))
        x = int(rng.integers(0, max(1, cw - w + 1)))
        patch = cover[y : y + h, x : x + w]
        if patch.shape[:2] != (h, w):
            patch = np.asarray(Image.fromarray(patch).resize((w, h), Image.BILINEAR))
        std = float(patch.astype(np.float64).std(axis=(0, 1)).max() / 255.0)
        if std < best_std:
            best, best_std = patch, std
        if std <= std_threshold:
            break
    return best


def augment_with_solid_and_title(
    sample: SceneSample,
    covers: list[torch.Tensor],
    rng: np.random.Generator,
    fonts: list[str] | None = None,
    config: DataConfig | None = None,
) -> AugmentedSample:
    """Paste 0-2 solid cover patches and exactly one placeholder title onto
    the scene, and derive the matching layout graph."""
    if not covers:
        raise DataError("cover corpus is empty")
    config = config or DataConfig()
    fonts = fonts or titles.default_font_set()
    canvas = sample.image.shape[-1]
    pixels = to_uint8_image(sample.image)

    ids = [f"o{i}" for i in range(sample.num_objects)]
    cats = list(sample.categories)
    boxes = [b.tolist() for b in sample.boxes]
    masks = list(sample.masks)

    def to_px(box):
        x0, y0, x1, y1 = box
        px = (
            int(round(x0 * canvas)),
            int(round(y0 * canvas)),
            int(round(x1 * canvas)),
            int(round(y1 * canvas)),
        )
        return px[0], px[1], max(px[0] + 1, px[2]), max(px[1] + 1, px[3])

    solid_indices = []
    n_solids = int(rng.integers(0, config.max_solids + 1))
    for k in range(n_solids):
        box = _sample_box(rng, (0.15, 0.5), (0.15, 0.5))
        x0, y0, x1, y1 = to_px(box)
        patch = cut_solid_patch(
            covers, (y1 - y0, x1 - x0), rng, config.solid_std_threshold, config.solid_patch_tries
        )
        pixels[y0:y1, x0:x1] = patch
        solid_indices.append(len(ids))
        ids.append(f"s{k}")
        cats.append(SOLID_CATEGORY)
        boxes.append(list(box))
        masks.append(torch.ones(MASK_SIZE, MASK_SIZE))

    title_box = _sample_box(rng, (0.4, 0.9), (0.1, 0.2))
    tx0, ty0, tx1, ty1 = to_px(title_box)
    hue, sat = rng.uniform(0, 1), rng.uniform(0.2, 1)
    val = rng.uniform(0.3, 1)  # keep titles legible
    color = tuple(int(round(255 * c)) for c in colorsys.hsv_to_rgb(hue, sat, val))
    font_id = fonts[int(rng.integers(len(fonts)))]
    patch = titles.render_placeholder(
        titles.PLACEHOLDER_TEXT, font_id, color, (tx1 - tx0, ty1 - ty0)
    )
    pixels[ty0:ty1, tx0:tx1] = titles.composite_over(pixels[ty0:ty1, tx0:tx1], patch)
    alpha = Image.fromarray(patch[..., 3]).resize((MASK_SIZE, MASK_SIZE), Image.BILINEAR)
    title_mask = (np.asarray(alpha) >= 64).astype(np.float32)
    if title_mask.sum() == 0:
        title_mask[MASK_SIZE // 2, MASK_SIZE // 2] = 1.0

    title_index = len(ids)
    ids.append("t0")
    cats.append(TITLE_CATEGORY)
    boxes.append(list(title_box))
    masks.append(torch.tensor(title_mask))

    objects = []
    for i, obj_id in enumerate(ids):
        objects.append(
            LayoutObject(
                id=obj_id,
                category=cats[i],
                location=location_from_box(boxes[i]),
                appearance=Appearance(mode="seed", seed=int(rng.integers(2**31))),
                title_text=titles.PLACEHOLDER_TEXT if i == title_index else None,
            )
        )
    box_tensor = torch.tensor(boxes, dtype=torch.float32)
    graph = LayoutGraph(tuple(objects), derive_relations(ids, box_tensor))

    return AugmentedSample(
        source_id=sample.source_id,
        image=to_unit_tensor(pixels),
        categories=tuple(cats),
        boxes=box_tensor,
        masks=torch.stack([torch.as_tensor(m, dtype=torch.float32) for m in masks]),
        graph=graph,
        title_font=font_id,
        title_color=color,
        title_index=title_index,
        solid_indices=tuple(solid_indices),
    )


def load_training_set(scene_root, covers_root, config) -> tuple[list[AugmentedSample], list[torch.Tensor], CategoryVocabulary]:
    """Ingest both corpora and build augmented samples plus the vocabulary.

    Augmentation seeds are derived per sample index from the run seed, so the
    produced set is identical run to run.
    """
    canvas = config.model.canvas
    covers = list(ingest_book_covers(covers_root, config.data.limit, canvas))
    if not covers:
        raise DataError(f"no usable covers under {covers_root}")
    scenes = list(
        ingest_scene_dataset(scene_root, config.data.limit, canvas, config.data.min_area_frac)
    )
    if not scenes:
        raise DataError(f"no usable scenes under {scene_root}")
    fonts = titles.default_font_set()
    samples = [
        augment_with_solid_and_title(
            scene,
            covers,
            np.random.default_rng(derive_seed(config.train.seed, "augment", i)),
            fonts,
            config.data,
        )
        for i, scene in enumerate(scenes)
    ]
    vocab = CategoryVocabulary(sorted({c for s in scenes for c in s.categories}))
    return samples, covers, vocab


# --------------------------------------------------------------------------
# Layout feature maps for the layout discriminator.
# --------------------------------------------------------------------------


def find_partner(samples: list[SceneSample], index: int) -> int | None:
    """Index of another sample with the same category multiset, if any."""
    target = samples[index].category_multiset
    for j, other in enumerate(samples):
        if j != index and other.category_multiset == target:
            return j
    return None


def build_layout_maps(
    sample: SceneSample,
    appearance_encoder,
    partner: SceneSample | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(Q, Q') layout maps for one sample.

    Q composes the sample's ground-truth boxes and masks with appearance
    vectors encoded from its crops.  Q' takes all attributes from a
    category-matched partner sample; without one it falls back to shuffling
    attribute bundles across the sample's own objects (a lone object gets a
    resampled appearance vector instead).
    """
    canvas = sample.image.shape[-1]
    app = appearance_encoder(sample.crops())
    q = compose_feature_map(sample.boxes, sample.masks, app, canvas=canvas)

    if partner is not None:
        app_p = appearance_encoder(partner.crops())
        q_prime = compose_feature_map(partner.boxes, partner.masks, app_p, canvas=canvas)
        return q, q_prime

    rng = rng or np.random.default_rng(0)
    n = sample.num_objects
    if n >= 2:
        perm = rng.permutation(n)
        if (perm == np.arange(n)).all():
            perm = np.roll(perm, 1)
        idx = torch.as_tensor(perm, dtype=torch.long)
        q_prime = compose_feature_map(sample.boxes[idx], sample.masks[idx], app, canvas=canvas)
    else:
        noise = torch.from_numpy(rng.standard_normal(app.shape)).to(app.dtype).abs()
        q_prime = compose_feature_map(sample.boxes, sample.masks, noise, canvas=canvas)
    return q, q_prime
