"""Networks (U-Net generator, patch discriminator, segmentation U-Net) and
the adversarial / reconstruction / structural loss terms."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .skeleton import MorphParams, soft_binarize_t, soft_skeleton_t

CHECKPOINT_FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 8
    base_channels: int = 64
    in_channels: int = 1
    out_channels: int = 1

    def __post_init__(self):
        if self.depth < 1 or self.base_channels < 1:
            raise ConfigError("depth and base_channels must be >= 1")


@dataclass(frozen=True)
class DiscriminatorConfig:
    layers: int = 4  # conv stages before the classifier; strides 2,2,2,1,...
    base_channels: int = 64
    in_channels: int = 2  # mask and image, channel-concatenated

    def __post_init__(self):
        if self.layers < 1 or self.base_channels < 1:
            raise ConfigError("layers and base_channels must be >= 1")


@dataclass(frozen=True)
class SegmenterConfig:
    depth: int = 4
    base_channels: int = 64
    in_channels: int = 1

    def __post_init__(self):
        if self.depth < 1 or self.base_channels < 1:
            raise ConfigError("depth and base_channels must be >= 1")


@dataclass(frozen=True)
class LossWeights:
    lambda_l1: float = 50.0
    lambda_s: float = 5.0

    def __post_init__(self):
        if self.lambda_l1 < 0 or self.lambda_s < 0:
            raise ConfigError("loss weights must be nonnegative")


def _stage_channels(base: int, i: int) -> int:
    return min(base * (1 << i), base * 8)


class UnetGenerator(nn.Module):
    """Encoder/decoder with mirror-stage skip connections.

    Stride-2 conv downsamplings with LeakyReLU(0.2); stride-2 transposed
    upsamplings with ReLU; tanh output affinely mapped to [0, 1].
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        d, base = cfg.depth, cfg.base_channels
        self.downs = nn.ModuleList()
        in_ch = cfg.in_channels
        for i in range(d):
            out_ch = _stage_channels(base, i)
            block = [nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1)]
            if 0 < i < d - 1:  # no norm on first or innermost stage
                block.append(nn.BatchNorm2d(out_ch))
            block.append(nn.LeakyReLU(0.2, inplace=True))
            self.downs.append(nn.Sequential(*block))
            in_ch = out_ch
        self.ups = nn.ModuleList()
        for i in reversed(range(d)):
            skip_ch = _stage_channels(base, i - 1) if i > 0 else 0
            out_ch = _stage_channels(base, i - 1) if i > 0 else cfg.out_channels
            src_ch = in_ch if i == d - 1 else in_ch * 2
            block = [nn.ConvTranspose2d(src_ch, out_ch, 4, stride=2, padding=1)]
            if i > 0:
                block.append(nn.BatchNorm2d(out_ch))
                block.append(nn.ReLU(inplace=True))
            self.ups.append(nn.Sequential(*block))
            in_ch = out_ch
        _ = skip_ch  # skip widths are implied by mirror-stage concatenation

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        side = 1 << self.cfg.depth
        if x.shape[-1] % side or x.shape[-2] % side:
            raise ConfigError(
                f"input {x.shape[-2]}x{x.shape[-1]} not divisible by 2^depth = {side}"
            )
        feats = []
        for down in self.downs:
            x = down(x)
            feats.append(x)
        y = feats[-1]
        for j, up in enumerate(self.ups):
            if j > 0:
                y = torch.cat([y, feats[-1 - j]], dim=1)
            y = up(y)
        return (torch.tanh(y) + 1.0) / 2.0


class PatchDiscriminator(nn.Module):
    """Grid-of-logits discriminator over the (mask, image) pair.

    Kernel-4 conv stack: three stride-2 stages, stride-1 thereafter, plus a
    single-channel stride-1 classifier (70x70 receptive field at defaults).
    """

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        layers = []
        in_ch = cfg.in_channels
        for i in range(cfg.layers):
            out_ch = _stage_channels(cfg.base_channels, i)
            stride = 2 if i < 3 else 1
            layers.append(nn.Conv2d(in_ch, out_ch, 4, stride=stride, padding=1))
            if i > 0:
                layers.append(nn.BatchNorm2d(out_ch))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            in_ch = out_ch
        layers.append(nn.Conv2d(in_ch, 1, 4, stride=1, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, mask: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([mask, image], dim=1))


class _DoubleConv(nn.Sequential):
    def __init__(self, in_ch, out_ch):
        super().__init__(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )


class SegmenterUnet(nn.Module):
    """Plain segmentation U-Net with sigmoid probability output."""

    def __init__(self, cfg: SegmenterConfig):
        super().__init__()
        self.cfg = cfg
        base, d = cfg.base_channels, cfg.depth
        self.inc = _DoubleConv(cfg.in_channels, base)
        self.downs = nn.ModuleList(
            _DoubleConv(_stage_channels(base, i), _stage_channels(base, i + 1))
            for i in range(d)
        )
        self.ups = nn.ModuleList()
        self.upconvs = nn.ModuleList()
        for i in reversed(range(d)):
            hi, lo = _stage_channels(base, i + 1), _stage_channels(base, i)
            self.upconvs.append(nn.ConvTranspose2d(hi, lo, 2, stride=2))
            self.ups.append(_DoubleConv(lo * 2, lo))
        self.outc = nn.Conv2d(base, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        side = 1 << self.cfg.depth
        if x.shape[-1] % side or x.shape[-2] % side:
            raise ConfigError(
                f"input {x.shape[-2]}x{x.shape[-1]} not divisible by 2^depth = {side}"
            )
        feats = [self.inc(x)]
        for down in self.downs:
            feats.append(down(F.max_pool2d(feats[-1], 2)))
        y = feats[-1]
        for j, (upconv, up) in enumerate(zip(self.upconvs, self.ups)):
            y = upconv(y)
            y = up(torch.cat([y, feats[-2 - j]], dim=1))
        return torch.sigmoid(self.outc(y))


def build_generator(cfg: GeneratorConfig) -> UnetGenerator:
    return UnetGenerator(cfg)


def build_discriminator(cfg: DiscriminatorConfig) -> PatchDiscriminator:
    return PatchDiscriminator(cfg)


def build_segmenter(cfg: SegmenterConfig) -> SegmenterUnet:
    return SegmenterUnet(cfg)


# --- losses ---


def adversarial_losses(
    d_real: torch.Tensor, d_fake: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Discriminator loss and non-saturating generator adversarial loss."""
    if d_real.shape != d_fake.shape:
        raise ValueError("logit grids must share a shape")
    loss_d = F.softplus(-d_real).mean() + F.softplus(d_fake).mean()
    loss_g_adv = F.softplus(-d_fake).mean()
    return loss_d, loss_g_adv


def l1_loss(y: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    if y.shape != g.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(g.shape)}")
    return (y - g).abs().mean()


def struct_loss(
    y: torch.Tensor, g: torch.Tensor, params: MorphParams
) -> torch.Tensor:
    """L1 distance between soft skeletons of softly binarized inputs."""
    if y.shape != g.shape:
        raise ValueError(f"shape mismatch: {tuple(y.shape)} vs {tuple(g.shape)}")
    beta = params.soft_binarize_sharpness
    t = params.soft_binarize_threshold
    k = params.soft_iterations
    sy = soft_skeleton_t(soft_binarize_t(y, beta, t), k)
    sg = soft_skeleton_t(soft_binarize_t(g, beta, t), k)
    return (sy - sg).abs().mean()


def generator_objective(
    adv: torch.Tensor | float,
    l1: torch.Tensor | float,
    structv: torch.Tensor | float,
    w: LossWeights,
):
    return adv + w.lambda_l1 * l1 + w.lambda_s * structv


# --- checkpoints ---

_CONFIG_CLASSES = {
    "generator": GeneratorConfig,
    "discriminator": DiscriminatorConfig,
    "segmenter": SegmenterConfig,
}


def config_hash(obj) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def save_checkpoint(
    path: str | Path,
    model: nn.Module,
    kind: str,
    step: int,
    seed: int,
    extra: dict | None = None,
) -> None:
    """Parameter payload plus a canonical sidecar JSON header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), path)
    cfg_dict = asdict(model.cfg)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": kind,
        "config": cfg_dict,
        "config_hash": config_hash({"kind": kind, "config": cfg_dict, **(extra or {})}),
        "step": step,
        "seed": seed,
        **(extra or {}),
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_checkpoint(path: str | Path) -> tuple[nn.Module, dict]:
    path = Path(path)
    header_path = path.with_suffix(path.suffix + ".json")
    if not path.exists() or not header_path.exists():
        raise FileNotFoundError(f"checkpoint missing: {path}")
    header = json.loads(header_path.read_text())
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format: {header.get('format_version')}")
    kind = header["kind"]
    cfg = _CONFIG_CLASSES[kind](**header["config"])
    if kind == "generator":
        model = build_generator(cfg)
    elif kind == "discriminator":
        model = build_discriminator(cfg)
    else:
        model = build_segmenter(cfg)
    model.load_state_dict(torch.load(path, weights_only=True))
    model.eval()
    return model, header


def checkpoint_id(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
