"""Pipeline configuration: nested dataclasses, JSON round-trip, canonical hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .maskgen import MaskGenConfig
from .neural import DiscriminatorConfig, GeneratorConfig, LossWeights, SegmenterConfig
from .skeleton import MorphParams
from .training import (
    TrainConfig,
    desk_scale_discriminator,
    desk_scale_generator,
    desk_scale_segmenter,
    desk_scale_train,
)


class ConfigValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    maskgen: MaskGenConfig = field(default_factory=MaskGenConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    gan_train: TrainConfig = field(default_factory=TrainConfig)
    seg_train: TrainConfig = field(default_factory=TrainConfig)
    tolerance: int = 2
    synth_count: int = 64
    demo_frames_train: int = 3
    demo_frames_test: int = 2
    workdir: str = "."

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _build(cls, data: dict, path: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigValidationError(f"{path}.{key}: unknown field")
        sub = _NESTED.get((cls, key))
        if sub is not None and isinstance(value, dict):
            kwargs[key] = _build(sub, value, f"{path}.{key}")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigValidationError(f"{path}: {exc}") from exc


_NESTED = {
    (PipelineConfig, "maskgen"): MaskGenConfig,
    (PipelineConfig, "generator"): GeneratorConfig,
    (PipelineConfig, "discriminator"): DiscriminatorConfig,
    (PipelineConfig, "segmenter"): SegmenterConfig,
    (PipelineConfig, "gan_train"): TrainConfig,
    (PipelineConfig, "seg_train"): TrainConfig,
    (TrainConfig, "loss_weights"): LossWeights,
    (TrainConfig, "morph"): MorphParams,
}


def config_from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data, "config")


def load_config(path: str | Path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(f"{path}: invalid JSON ({exc})")
    return config_from_dict(data)


def apply_desk_scale(cfg: PipelineConfig) -> PipelineConfig:
    """Switch every module to its reduced CPU-friendly profile atomically."""
    area_scale = (64 * 64) / (cfg.maskgen.canvas[0] * cfg.maskgen.canvas[1])
    counts = tuple(
        max(1, round(c * area_scale)) for c in cfg.maskgen.count_range
    )
    return replace(
        cfg,
        maskgen=replace(cfg.maskgen, canvas=(64, 64), count_range=counts),
        generator=desk_scale_generator(cfg.generator),
        discriminator=desk_scale_discriminator(cfg.discriminator),
        segmenter=desk_scale_segmenter(cfg.segmenter),
        gan_train=replace(desk_scale_train(cfg.gan_train), steps=300),
        seg_train=replace(desk_scale_train(cfg.seg_train), steps=300),
        synth_count=min(cfg.synth_count, 64),
    )


def apply_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    return replace(
        cfg,
        maskgen=replace(cfg.maskgen, seed=seed),
        gan_train=replace(cfg.gan_train, seed=seed),
        seg_train=replace(cfg.seg_train, seed=seed),
    )


def apply_deterministic(cfg: PipelineConfig) -> PipelineConfig:
    return replace(
        cfg,
        gan_train=replace(cfg.gan_train, deterministic=True),
        seg_train=replace(cfg.seg_train, deterministic=True),
    )
