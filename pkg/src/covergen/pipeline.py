"""End-to-end cover generation from a layout graph.

Validates the graph, encodes it, predicts boxes and masks, fills the layout
feature map with appearance vectors (explicit, seeded from the checkpoint's
appearance bank, or resampled), decodes the cover image, then replaces the
generated title region with the requested text via the configured
style-transfer backend.
"""

from __future__ import annotations

import io
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import RunConfig, config_from_doc
from .encoder import graph_tensors
from .graphs import (
    SOLID_CATEGORY,
    CategoryVocabulary,
    GraphError,
    LayoutGraph,
    parse_graph,
    parse_graph_doc,
    validate_graph,
)
from .objects import compose_feature_map
from .titles import TitleRegion, paste_title, transfer_title_style
from .training import GENERATOR_NETS, build_networks, load_manifest, vocabulary_from_manifest
from .utils import derive_seed, parameter_checksum, to_uint8_image

log = logging.getLogger(__name__)

MAX_VARIATIONS = 16


class InvalidGraphError(GraphError):
    """A structurally parseable graph that fails validation; carries the
    full violation list."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class RequestError(ValueError):
    """A generation request with out-of-contract options."""


@dataclass
class GenerationResult:
    images: list[np.ndarray]  # (S, S, 3) uint8, one per variation
    boxes: dict[str, tuple[float, float, float, float]]
    seconds: float
    seed: int


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


class GenerationPipeline:
    def __init__(
        self,
        config: RunConfig,
        vocab: CategoryVocabulary,
        nets: dict[str, torch.nn.Module],
        appearance_bank: dict | None = None,
        title_backend="fallback",
    ):
        self.config = config
        self.vocab = vocab
        self.nets = {name: nets[name] for name in GENERATOR_NETS}
        for net in self.nets.values():
            net.eval()
        if appearance_bank is None:
            appearance_bank = {
                "vectors": torch.zeros(0, config.model.appearance_dim),
                "category_ids": torch.zeros(0, dtype=torch.long),
            }
        self.appearance_bank = appearance_bank
        self.title_backend = title_backend

    @classmethod
    def from_checkpoint(cls, directory: str | Path, title_backend="fallback") -> "GenerationPipeline":
        directory = Path(directory)
        manifest = load_manifest(directory)
        config = config_from_doc(manifest["config"])
        vocab = vocabulary_from_manifest(manifest)
        nets = build_networks(len(vocab), config.model, config.train.seed)
        for name in GENERATOR_NETS:
            nets[name].load_state_dict(torch.load(directory / f"{name}.pt", weights_only=True))
        bank_path = directory / "appearance_bank.pt"
        bank = torch.load(bank_path, weights_only=True) if bank_path.exists() else None
        return cls(config, vocab, nets, bank, title_backend)

    @classmethod
    def untrained(
        cls,
        config: RunConfig | None = None,
        vocab: CategoryVocabulary | None = None,
        title_backend="fallback",
    ) -> "GenerationPipeline":
        """Randomly initialized pipeline; useful for plumbing tests."""
        config = config or RunConfig()
        vocab = vocab or CategoryVocabulary()
        nets = build_networks(len(vocab), config.model, config.train.seed)
        return cls(config, vocab, nets, None, title_backend)

    # -- appearance selection ---------------------------------------------

    def _bank_vector(self, category_id: int, pick_seed: int) -> torch.Tensor | None:
        rows = (self.appearance_bank["category_ids"] == category_id).nonzero(as_tuple=True)[0]
        if len(rows) == 0:
            return None
        return self.appearance_bank["vectors"][rows[pick_seed % len(rows)]]

    def _appearance_vector(self, obj, category_id: int, seed: int, variation: int) -> torch.Tensor:
        d = self.config.model.appearance_dim
        app = obj.appearance
        if app.mode == "explicit":
            if len(app.vector) != d:
                raise InvalidGraphError(
                    [f"object {obj.id!r}: appearance vector must have {d} entries, got {len(app.vector)}"]
                )
            return torch.tensor(app.vector, dtype=torch.float32)
        if app.mode == "seed":
            pick = int(app.seed)
        else:
            pick = derive_seed(seed, "appearance", obj.id, variation)
        vec = self._bank_vector(category_id, pick)
        if vec is not None:
            return vec
        # No bank entries: half-normal sample matching the encoder's
        # nonnegative output space.
        g = torch.Generator().manual_seed(derive_seed(pick, "fallback", obj.id) % 2**63)
        return torch.randn(d, generator=g).abs()

    # -- generation --------------------------------------------------------

    def prepare_graph(self, graph) -> LayoutGraph:
        if isinstance(graph, str):
            graph = parse_graph(graph)
        elif isinstance(graph, dict):
            graph = parse_graph_doc(graph)
        report = validate_graph(graph, self.vocab)
        if not report.ok:
            raise InvalidGraphError(report.violations)
        return graph

    def generate(
        self,
        graph,
        seed: int = 0,
        variations: int = 1,
        title_text: str | None = None,
        replace_title: bool = True,
    ) -> GenerationResult:
        start = time.perf_counter()
        if not 1 <= variations <= MAX_VARIATIONS:
            raise RequestError(f"variations must be in [1, {MAX_VARIATIONS}], got {variations}")
        graph = self.prepare_graph(graph)
        canvas = self.config.model.canvas
        tensors = graph_tensors(graph, self.vocab)

        with torch.no_grad():
            emb = self.nets["encoder"](tensors)
            boxes = self.nets["boxes"](emb)
            images = []
            for v in range(variations):
                zs = []
                for obj in graph.objects:
                    g = torch.Generator().manual_seed(derive_seed(seed, "noise", obj.id, v))
                    zs.append(torch.randn(self.config.model.noise_dim, generator=g))
                masks = self.nets["masks"](emb, torch.stack(zs))
                app = torch.stack(
                    [
                        self._appearance_vector(obj, int(tensors.category_ids[i]), seed, v)
                        for i, obj in enumerate(graph.objects)
                    ]
                )
                f_map = compose_feature_map(boxes, masks, app, canvas=canvas)
                out = self.nets["cover"](f_map.unsqueeze(0))[0]
                image = to_uint8_image(out)
                if replace_title:
                    image = self._replace_title(image, graph, boxes, title_text)
                images.append(image)

        box_map = {
            obj.id: tuple(float(c) for c in boxes[i]) for i, obj in enumerate(graph.objects)
        }
        return GenerationResult(
            images=images, boxes=box_map, seconds=time.perf_counter() - start, seed=seed
        )

    def _replace_title(self, image: np.ndarray, graph: LayoutGraph, boxes, title_text) -> np.ndarray:
        title = graph.title_object
        if title is None:
            return image
        text = title_text or title.title_text
        idx = [o.id for o in graph.objects].index(title.id)
        canvas = image.shape[0]
        x0, y0, x1, y1 = (float(c) for c in boxes[idx])
        px = (
            max(0, int(math.floor(x0 * canvas))),
            max(0, int(math.floor(y0 * canvas))),
            min(canvas, int(math.ceil(x1 * canvas))),
            min(canvas, int(math.ceil(y1 * canvas))),
        )
        if px[2] - px[0] < 4 or px[3] - px[1] < 4:
            log.warning("title box %s too small for replacement; leaving as generated", px)
            return image
        self._warn_solid_overlap(graph, boxes, idx)
        crop = image[px[1] : px[3], px[0] : px[2]]
        region = TitleRegion(box=px, crop=crop, desired_text=text)
        result = transfer_title_style(region, self.title_backend)
        return paste_title(image, result, px)

    def _warn_solid_overlap(self, graph: LayoutGraph, boxes, title_idx: int) -> None:
        tx0, ty0, tx1, ty1 = (float(c) for c in boxes[title_idx])
        for i, obj in enumerate(graph.objects):
            if obj.category != SOLID_CATEGORY:
                continue
            x0, y0, x1, y1 = (float(c) for c in boxes[i])
            if min(tx1, x1) > max(tx0, x0) and min(ty1, y1) > max(ty0, y0):
                log.warning(
                    "predicted title box overlaps solid region %r; layout may need editing", obj.id
                )

    # -- introspection -----------------------------------------------------

    def categories(self) -> list[str]:
        return list(self.vocab.entries)

    def weights_checksum(self) -> str:
        return parameter_checksum(self.nets)
