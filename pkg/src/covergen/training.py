"""Alternating adversarial training of the full generator stack.

Each step runs the generator once, updates the four discriminators on
detached outputs, then updates the generator (graph encoder, box head, mask
generator, appearance encoder, cover generator) against the refreshed
discriminators.  Both phases use their own Adam optimizer, so parameters of
the idle side are untouched bit-for-bit.

Checkpoints are directories: one state-dict blob per network plus optimizer
and RNG state and a manifest (iteration, config hash, vocabulary), enough to
resume a run deterministically or to run inference.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from itertools import chain
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig, config_from_doc, config_hash, config_to_doc
from .cover import CoverGenerator
from .data import AugmentedSample, find_partner
from .discriminators import (
    BookCoverDiscriminator,
    LayoutDiscriminator,
    MaskDiscriminator,
    ObjectDiscriminator,
)
from .encoder import GraphEncoder, GraphTensors, collate_graph_tensors, graph_tensors
from .graphs import SOLID_CATEGORY, TITLE_CATEGORY, CategoryVocabulary
from .losses import (
    TERM_ORDER,
    LossBundle,
    book_adv_generator,
    book_adv_loss,
    box_loss,
    layout_adv_generator,
    layout_adv_loss,
    layout_feature_matching,
    mask_adv_generator,
    mask_adv_loss,
    mask_feature_matching,
    object_adv_generator,
    object_adv_loss,
    perceptual_content_loss,
    pixel_loss,
)
from .objects import AppearanceEncoder, BoxRegressionNet, MaskGenerator, compose_feature_map, crop_bbox
from .perception import PerceptionNetwork
from .utils import derive_seed, init_network_

log = logging.getLogger(__name__)

GENERATOR_NETS = ("encoder", "boxes", "masks", "appearance", "cover")
DISCRIMINATOR_NETS = ("d_mask", "d_obj", "d_layout", "d_book")
AUX_COLUMNS = ("g_mask", "g_obj", "g_layout", "g_book")
CSV_COLUMNS = ("step", *TERM_ORDER, "total", *AUX_COLUMNS)

MANIFEST_NAME = "manifest.json"
BANK_LIMIT = 512


class NonFiniteLossError(RuntimeError):
    """A loss term left the reals; carries the offending term's name."""

    def __init__(self, term: str, value: float):
        super().__init__(f"loss term {term!r} is non-finite ({value})")
        self.term = term
        self.value = value


def build_networks(num_categories: int, model, seed: int) -> dict[str, torch.nn.Module]:
    """All trainable networks with deterministic per-network init."""
    nets: dict[str, torch.nn.Module] = {
        "encoder": GraphEncoder(
            num_categories,
            embedding_dim=model.embedding_dim,
            hidden_dim=model.gcn_hidden,
            candidate_dim=model.candidate_dim,
        ),
        "boxes": BoxRegressionNet(model.embedding_dim, model.gcn_hidden),
        "masks": MaskGenerator(model.embedding_dim, model.noise_dim, model.mask_channels, model.mask_size),
        "appearance": AppearanceEncoder(model.appearance_dim, model.crop_size),
        "cover": CoverGenerator(model.appearance_dim + 1, model.cover_base, model.cover_blocks),
        "d_mask": MaskDiscriminator(num_categories, model.embedding_dim, model.mask_size),
        "d_obj": ObjectDiscriminator(num_categories, model.crop_size, model.disc_base),
        "d_layout": LayoutDiscriminator(model.appearance_dim + 1, model.disc_base),
        "d_book": BookCoverDiscriminator(model.disc_base),
    }
    for name, net in nets.items():
        g = torch.Generator().manual_seed(derive_seed(seed, "init", name))
        init_network_(net, g)
    # The generic pass zeroes linear biases; restore the box head's output
    # prior so untrained predictions rasterize to a usable footprint.
    nets["boxes"].reset_output_bias()
    return nets


@dataclass
class TrainingBatch:
    """Everything one optimization step consumes."""

    tensors: GraphTensors  # collated multi-graph
    obj_to_img: torch.Tensor  # (O,) long
    boxes_gt: torch.Tensor  # (O, 4)
    masks_gt: torch.Tensor  # (O, 32, 32)
    images: torch.Tensor  # (B, 3, S, S) ground-truth augmented scenes
    covers: torch.Tensor  # (B, 3, S, S) real book covers
    partners: list  # per image: batch index with equal category multiset, or None

    @property
    def size(self) -> int:
        return self.images.shape[0]


class Trainer:
    def __init__(self, config: RunConfig, vocab: CategoryVocabulary):
        self.config = config
        self.vocab = vocab
        seed = config.train.seed
        self.nets = build_networks(len(vocab), config.model, seed)
        self.perception = PerceptionNetwork(
            weights=config.model.perception, seed=derive_seed(seed, "perception")
        )
        tr = config.train
        self.opt_g = torch.optim.Adam(
            chain(*(self.nets[n].parameters() for n in GENERATOR_NETS)),
            lr=tr.lr,
            betas=(tr.beta1, tr.beta2),
        )
        self.opt_d = torch.optim.Adam(
            chain(*(self.nets[n].parameters() for n in DISCRIMINATOR_NETS)),
            lr=tr.lr,
            betas=(tr.beta1, tr.beta2),
        )
        self.noise_gen = torch.Generator().manual_seed(derive_seed(seed, "noise"))
        self.order_rng = np.random.default_rng(derive_seed(seed, "order"))
        self.mismatch_rng = np.random.default_rng(derive_seed(seed, "mismatch"))
        self.step_index = 0

    # -- batching ----------------------------------------------------------

    def make_batch(self, samples: list[AugmentedSample], covers: list[torch.Tensor],
                   sample_indices, cover_indices) -> TrainingBatch:
        chosen = [samples[int(i)] for i in sample_indices]
        merged, obj_to_img = collate_graph_tensors(
            [graph_tensors(s.graph, self.vocab) for s in chosen]
        )
        return TrainingBatch(
            tensors=merged,
            obj_to_img=obj_to_img,
            boxes_gt=torch.cat([s.boxes for s in chosen]),
            masks_gt=torch.cat([s.masks for s in chosen]),
            images=torch.stack([s.image for s in chosen]),
            covers=torch.stack([covers[int(i)] for i in cover_indices]),
            partners=[find_partner(chosen, i) for i in range(len(chosen))],
        )

    def draw_batch(self, samples, covers) -> TrainingBatch:
        n, b = len(samples), self.config.train.batch_size
        if n >= b:
            idx = self.order_rng.permutation(n)[:b]
        else:
            idx = self.order_rng.integers(0, n, b)
        cover_idx = self.order_rng.integers(0, len(covers), b)
        return self.make_batch(samples, covers, idx, cover_idx)

    # -- forward -----------------------------------------------------------

    def _compose_batch(self, boxes, masks, app, obj_to_img, batch_size, canvas):
        maps = []
        for b in range(batch_size):
            sel = obj_to_img == b
            maps.append(compose_feature_map(boxes[sel], masks[sel], app[sel], canvas=canvas))
        return torch.stack(maps)

    def generator_forward(self, batch: TrainingBatch) -> dict:
        """One pass of the full generator stack; returns live tensors."""
        canvas = self.config.model.canvas
        crop_size = self.config.model.crop_size
        emb = self.nets["encoder"](batch.tensors)
        boxes_pred = self.nets["boxes"](emb)
        z = torch.randn(
            emb.shape[0], self.config.model.noise_dim, generator=self.noise_gen
        )
        masks_pred = self.nets["masks"](emb, z)
        crops_real = torch.stack(
            [
                crop_bbox(batch.images[int(batch.obj_to_img[i])], batch.boxes_gt[i], crop_size)
                for i in range(batch.tensors.num_objects)
            ]
        )
        app = self.nets["appearance"](crops_real)

        # Box coordinates enter placement and cropping as constants.  Both
        # operators translate whole image regions per unit of coordinate
        # change, so their coordinate Jacobians dwarf every other gradient
        # path and would let the adversarial terms drown the direct box
        # supervision; the box head learns from the box loss alone.
        compose_boxes = (
            batch.boxes_gt if self.config.train.compose_with_gt_boxes else boxes_pred.detach()
        )
        f_maps = self._compose_batch(compose_boxes, masks_pred, app, batch.obj_to_img, batch.size, canvas)
        q_maps = self._compose_batch(batch.boxes_gt, batch.masks_gt, app, batch.obj_to_img, batch.size, canvas)
        q_prime = self._mismatched_maps(batch, q_maps, app)
        image = self.nets["cover"](f_maps)
        crops_fake = torch.stack(
            [
                crop_bbox(image[int(batch.obj_to_img[i])], boxes_pred[i].detach(), crop_size)
                for i in range(batch.tensors.num_objects)
            ]
        )
        return {
            "embeddings": emb,
            "boxes": boxes_pred,
            "masks": masks_pred,
            "appearance": app,
            "f": f_maps,
            "q": q_maps,
            "q_prime": q_prime,
            "image": image,
            "crops_real": crops_real,
            "crops_fake": crops_fake,
        }

    def _mismatched_maps(self, batch: TrainingBatch, q_maps, app) -> torch.Tensor:
        """Q': per image, the layout of a category-matched partner; without a
        partner, attribute bundles are shuffled across the image's own
        objects (a lone object gets a resampled appearance)."""
        canvas = self.config.model.canvas
        out = []
        for b in range(batch.size):
            partner = batch.partners[b]
            if partner is not None:
                out.append(q_maps[partner])
                continue
            sel = (batch.obj_to_img == b).nonzero(as_tuple=True)[0]
            if len(sel) >= 2:
                perm = self.mismatch_rng.permutation(len(sel))
                if (perm == np.arange(len(sel))).all():
                    perm = np.roll(perm, 1)
                idx = sel[torch.as_tensor(perm, dtype=torch.long)]
                out.append(
                    compose_feature_map(
                        batch.boxes_gt[idx], batch.masks_gt[idx], app[sel], canvas=canvas
                    )
                )
            else:
                noise = torch.from_numpy(
                    self.mismatch_rng.standard_normal((len(sel), app.shape[1]))
                ).to(app.dtype).abs()
                out.append(
                    compose_feature_map(
                        batch.boxes_gt[sel], batch.masks_gt[sel], noise, canvas=canvas
                    )
                )
        return torch.stack(out)

    # -- optimization ------------------------------------------------------

    def train_step(self, batch: TrainingBatch) -> LossBundle:
        w = self.config.weights
        tr = self.config.train
        cats = batch.tensors.category_ids
        fwd = self.generator_forward(batch)

        # Discriminator phase: fakes detached, generator untouched.
        self.opt_d.zero_grad(set_to_none=True)
        d_mask, _ = mask_adv_loss(
            self.nets["d_mask"], batch.masks_gt, fwd["masks"].detach(), cats, tr.mask_gan_form
        )
        d_obj, _ = object_adv_loss(
            self.nets["d_obj"], fwd["crops_real"].detach(), fwd["crops_fake"].detach(), cats
        )
        d_layout, _ = layout_adv_loss(
            self.nets["d_layout"],
            fwd["q"].detach(),
            fwd["q_prime"].detach(),
            fwd["f"].detach(),
            batch.images,
            fwd["image"].detach(),
            tr.layout_mismatch_as_real,
        )
        d_book, _ = book_adv_loss(self.nets["d_book"], batch.covers, fwd["image"].detach())
        d_values = {
            "mask_adv": float(d_mask.detach()),
            "obj_adv": float(d_obj.detach()),
            "layout_adv": float(d_layout.detach()),
            "book_adv": float(d_book.detach()),
        }
        self._check_finite(d_values)
        d_total = (
            w.mask_adv * d_mask + w.obj_adv * d_obj + w.layout_adv * d_layout + w.book_adv * d_book
        )
        d_total.backward()
        self.opt_d.step()

        # Generator phase against the refreshed discriminators.  Only pairs
        # containing generated content are forwarded here; the purely real
        # branches do not contribute to generator gradients.
        self.opt_g.zero_grad(set_to_none=True)
        l_pixel = pixel_loss(fwd["image"], batch.images)
        l_box = box_loss(fwd["boxes"], batch.boxes_gt)
        l_content = perceptual_content_loss(self.perception, fwd["image"], batch.images)
        g_mask = mask_adv_generator(self.nets["d_mask"], fwd["masks"], cats, tr.mask_gan_form)
        g_obj = object_adv_generator(self.nets["d_obj"], fwd["crops_fake"], cats)
        g_layout = layout_adv_generator(
            self.nets["d_layout"], fwd["q"].detach(), fwd["f"], batch.images, fwd["image"]
        )
        g_book = book_adv_generator(self.nets["d_book"], fwd["image"])
        l_mask_fm = mask_feature_matching(self.nets["d_mask"], batch.masks_gt, fwd["masks"], cats)
        l_layout_fm = layout_feature_matching(
            self.nets["d_layout"], fwd["q"].detach(), batch.images, fwd["f"], fwd["image"]
        )
        g_values = {
            "pixel": float(l_pixel.detach()),
            "box": float(l_box.detach()),
            "content": float(l_content.detach()),
            "mask_fm": float(l_mask_fm.detach()),
            "layout_fm": float(l_layout_fm.detach()),
        }
        aux = {
            "g_mask": float(g_mask.detach()),
            "g_obj": float(g_obj.detach()),
            "g_layout": float(g_layout.detach()),
            "g_book": float(g_book.detach()),
        }
        self._check_finite(g_values)
        self._check_finite(aux)
        g_total = (
            w.pixel * l_pixel
            + w.box * l_box
            + w.content * l_content
            + w.mask_adv * g_mask
            + w.obj_adv * g_obj
            + w.layout_adv * g_layout
            + w.book_adv * g_book
            + w.mask_fm * l_mask_fm
            + w.layout_fm * l_layout_fm
        )
        g_total.backward()
        self.opt_g.step()

        self.step_index += 1
        return LossBundle(terms={**g_values, **d_values}, weights=w, aux=aux)

    @staticmethod
    def _check_finite(values: dict[str, float]) -> None:
        for term, value in values.items():
            if not math.isfinite(value):
                raise NonFiniteLossError(term, value)

    # -- loop --------------------------------------------------------------

    def fit(
        self,
        samples: list[AugmentedSample],
        covers: list[torch.Tensor],
        steps: int | None = None,
        csv_path: str | Path | None = None,
        checkpoint_dir: str | Path | None = None,
    ) -> list[LossBundle]:
        steps = self.config.train.steps if steps is None else steps
        cadence = self.config.train.checkpoint_every
        bundles = []
        writer = None
        csv_file = None
        if csv_path is not None:
            fresh = not Path(csv_path).exists()
            csv_file = open(csv_path, "a", newline="")
            writer = csv.writer(csv_file)
            if fresh:
                writer.writerow(CSV_COLUMNS)
        try:
            for _ in range(steps):
                bundle = self.train_step(self.draw_batch(samples, covers))
                bundles.append(bundle)
                if writer is not None:
                    row = bundle.as_row()
                    writer.writerow(
                        [self.step_index]
                        + [repr(row[c]) for c in (*TERM_ORDER, "total")]
                        + [repr(bundle.aux[c]) for c in AUX_COLUMNS]
                    )
                    csv_file.flush()
                if checkpoint_dir is not None and (
                    self.step_index % cadence == 0 or self.step_index == steps
                ):
                    self.save_checkpoint(checkpoint_dir, samples)
                if self.step_index % 25 == 0:
                    log.info("step %d total %.4f", self.step_index, bundle.total)
        finally:
            if csv_file is not None:
                csv_file.close()
        return bundles

    # -- checkpointing -----------------------------------------------------

    def build_appearance_bank(self, samples: list[AugmentedSample]) -> dict:
        """Encode appearance vectors for training crops, grouped by category
        id; generation samples these when no explicit vector is given."""
        vectors, cat_ids = [], []
        with torch.no_grad():
            for sample in samples:
                app = self.nets["appearance"](sample.crops(self.config.model.crop_size))
                vectors.append(app)
                cat_ids.extend(self.vocab.index(c) for c in sample.categories)
                if sum(v.shape[0] for v in vectors) >= BANK_LIMIT:
                    break
        vecs = torch.cat(vectors)[:BANK_LIMIT] if vectors else torch.zeros(0, self.config.model.appearance_dim)
        ids = torch.tensor(cat_ids[: vecs.shape[0]], dtype=torch.long)
        return {"vectors": vecs, "category_ids": ids}

    def save_checkpoint(self, directory: str | Path, samples: list[AugmentedSample] | None = None):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, net in self.nets.items():
            torch.save(net.state_dict(), directory / f"{name}.pt")
        torch.save(self.opt_g.state_dict(), directory / "opt_g.pt")
        torch.save(self.opt_d.state_dict(), directory / "opt_d.pt")
        torch.save(
            {
                "noise": self.noise_gen.get_state(),
                "order": self.order_rng.bit_generator.state,
                "mismatch": self.mismatch_rng.bit_generator.state,
            },
            directory / "rng.pt",
        )
        if samples is not None:
            torch.save(self.build_appearance_bank(samples), directory / "appearance_bank.pt")
        manifest = {
            "format_version": 1,
            "iteration": self.step_index,
            "config_hash": config_hash(self.config),
            "config": config_to_doc(self.config),
            "vocabulary": list(self.vocab.entries),
            "networks": sorted(self.nets),
        }
        (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "Trainer":
        directory = Path(directory)
        manifest = load_manifest(directory)
        config = config_from_doc(manifest["config"])
        trainer = cls(config, vocabulary_from_manifest(manifest))
        for name, net in trainer.nets.items():
            net.load_state_dict(torch.load(directory / f"{name}.pt", weights_only=True))
        trainer.opt_g.load_state_dict(torch.load(directory / "opt_g.pt", weights_only=True))
        trainer.opt_d.load_state_dict(torch.load(directory / "opt_d.pt", weights_only=True))
        rng = torch.load(directory / "rng.pt", weights_only=False)
        trainer.noise_gen.set_state(rng["noise"])
        trainer.order_rng.bit_generator.state = rng["order"]
        trainer.mismatch_rng.bit_generator.state = rng["mismatch"]
        trainer.step_index = manifest["iteration"]
        return trainer


def load_manifest(directory: str | Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FileNotFoundError(f"no readable checkpoint manifest at {path}: {exc}") from None


def vocabulary_from_manifest(manifest: dict) -> CategoryVocabulary:
    scene = [c for c in manifest["vocabulary"] if c not in (SOLID_CATEGORY, TITLE_CATEGORY)]
    vocab = CategoryVocabulary(scene)
    if list(vocab.entries) != list(manifest["vocabulary"]):
        raise ValueError("checkpoint vocabulary is not in canonical order")
    return vocab
