"""Run configuration: model widths, optimizer settings, data paths, profiles.

Configs are plain dataclasses with a strict JSON round trip (unknown fields
rejected, path-qualified errors) and a stable content hash used to stamp
checkpoints.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossWeights


class ConfigError(ValueError):
    """Raised for malformed or inconsistent run configuration."""


@dataclass
class ModelConfig:
    canvas: int = 128
    embedding_dim: int = 128
    gcn_hidden: int = 512
    candidate_dim: int = 384
    appearance_dim: int = 64
    noise_dim: int = 64
    mask_size: int = 32
    mask_channels: int = 192
    crop_size: int = 64
    cover_base: int = 64
    cover_blocks: int = 10
    disc_base: int = 64
    perception: str = "random"  # "random" or "torchvision"

    def __post_init__(self):
        if self.canvas not in (64, 128):
            raise ConfigError(f"canvas must be 64 or 128, got {self.canvas}")
        if self.perception not in ("random", "torchvision"):
            raise ConfigError(f"perception must be 'random' or 'torchvision', got {self.perception!r}")
        for name in ("embedding_dim", "appearance_dim", "noise_dim", "mask_size", "crop_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class TrainConfig:
    steps: int = 100_000
    batch_size: int = 6
    lr: float = 0.001
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    mask_gan_form: str = "lsgan"  # or "log"
    layout_mismatch_as_real: bool = True
    # Teacher-forced layout composition: training composes F at ground-truth
    # boxes (predicted boxes learn from the box loss and drive inference).
    # With predicted boxes feeding composition, F is inconsistent with the
    # reconstruction target while the box head trains and the pixel loss
    # plateaus well short of overfitting.
    compose_with_gt_boxes: bool = True
    checkpoint_every: int = 1000
    log_every: int = 1

    def __post_init__(self):
        if self.steps <= 0 or self.batch_size <= 0:
            raise ConfigError("steps and batch_size must be positive")
        if self.mask_gan_form not in ("lsgan", "log"):
            raise ConfigError(f"mask_gan_form must be 'lsgan' or 'log', got {self.mask_gan_form!r}")


@dataclass
class DataConfig:
    scene_root: str = ""
    covers_root: str = ""
    limit: int | None = None
    min_area_frac: float = 0.02
    # Per-channel pixel std ceiling for accepting a cover patch as a solid
    # region; calibrated once on the synthetic corpus.
    solid_std_threshold: float = 0.08
    solid_patch_tries: int = 8
    max_solids: int = 2


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    weights: LossWeights = field(default_factory=LossWeights)


PROFILES = ("full", "overfit10", "smoke500")


def profile(name: str) -> RunConfig:
    """Named presets: the full-scale training run, a 10-image overfit run
    sized for a single desktop CPU, and a short smoke run."""
    if name == "full":
        return RunConfig()
    if name == "overfit10":
        return RunConfig(
            model=ModelConfig(canvas=64),
            train=TrainConfig(steps=200, checkpoint_every=200),
            data=DataConfig(limit=10),
        )
    if name == "smoke500":
        return RunConfig(
            model=ModelConfig(canvas=64),
            train=TrainConfig(steps=500, checkpoint_every=100),
            data=DataConfig(limit=50),
        )
    raise ConfigError(f"unknown profile {name!r}; expected one of {PROFILES}")


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "data": DataConfig, "weights": LossWeights}


def config_to_doc(config: RunConfig) -> dict:
    return {name: dataclasses.asdict(getattr(config, name)) for name in _SECTIONS}


def config_from_doc(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(f"/{key}: unknown section")
    parts = {}
    for name, cls in _SECTIONS.items():
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"/{name}: must be an object")
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, value in section.items():
            if key not in fields:
                raise ConfigError(f"/{name}/{key}: unknown field")
        try:
            parts[name] = cls(**section)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"/{name}: {exc}") from None
    return RunConfig(**parts)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_doc(doc)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_doc(config), indent=2) + "\n")


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config_to_doc(config), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
