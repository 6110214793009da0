"""Training drivers: cGAN on paired data, synthesis from a checkpoint, and
segmenter training on mixed real/synthetic corpora, with determinism control."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import neural
from .neural import (
    DiscriminatorConfig,
    GeneratorConfig,
    LossWeights,
    SegmenterConfig,
    adversarial_losses,
    l1_loss,
    struct_loss,
)
from .raster import BinaryMask, GrayImage, extract_patches, load_image, load_mask, save_image
from .skeleton import MorphParams

ADAM_BETAS = (0.5, 0.999)


class TrainingError(RuntimeError):
    pass


class DivergenceError(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 64
    steps: int = 2000
    patch_size: int = 256
    patch_stride: int = 128
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)
    morph: MorphParams = field(default_factory=MorphParams)
    mix_ratio: float = 0.5
    log_every: int = 10
    checkpoint_every: int = 0  # 0 = final only
    deterministic: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ValueError("mix_ratio must lie in [0, 1]")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


def desk_scale_train(cfg: TrainConfig) -> TrainConfig:
    return replace(cfg, batch_size=4, patch_size=64, patch_stride=32)


def desk_scale_generator(cfg: GeneratorConfig) -> GeneratorConfig:
    return replace(cfg, depth=6, base_channels=16)


def desk_scale_discriminator(cfg: DiscriminatorConfig) -> DiscriminatorConfig:
    return replace(cfg, base_channels=16)


def desk_scale_segmenter(cfg: SegmenterConfig) -> SegmenterConfig:
    return replace(cfg, base_channels=16)


def _apply_determinism(cfg: TrainConfig) -> None:
    torch.manual_seed(cfg.seed)
    if cfg.deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def _wall_time(cfg: TrainConfig) -> float:
    # deterministic logs must be bit-identical across runs
    return 0.0 if cfg.deterministic else time.time()


def load_patch_arrays(
    records: list[dict], cfg: TrainConfig, min_fg: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Load manifest records and cut them into (images, masks) patch stacks."""
    imgs, masks = [], []
    for rec in records:
        img = load_image(rec["image"])
        mask = load_mask(rec["mask"])
        for p in extract_patches(
            img, mask, cfg.patch_size, cfg.patch_stride, min_fg, rec.get("id", "")
        ):
            imgs.append(p.image.data)
            masks.append(p.mask.data.astype(np.float64))
    if not imgs:
        raise TrainingError("no patches extracted from manifest")
    return np.stack(imgs), np.stack(masks)


def _batch(arr: np.ndarray, idx: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(arr[idx]).float().unsqueeze(1)


class TrainLog:
    """Append-only line-delimited JSON loss log."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def append(self, record: dict) -> None:
        if self.path:
            with self.path.open("a") as f:
                f.write(json.dumps(record, sort_keys=True) + "\n")


def train_gan(
    records: list[dict],
    cfg: TrainConfig,
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    out_dir: str | Path,
) -> Path:
    """Alternating one-D-step / one-G-step optimization of the full objective.

    Returns the final generator checkpoint path; writes `gan_log.jsonl` and
    a discriminator checkpoint alongside.
    """
    if not records:
        raise TrainingError("empty manifest")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _apply_determinism(cfg)

    images, masks = load_patch_arrays(records, cfg)
    if len(images) < 1:
        raise TrainingError("patch extraction produced no patches")

    gen = neural.build_generator(gen_cfg)
    disc = neural.build_discriminator(disc_cfg)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.learning_rate, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.learning_rate, betas=ADAM_BETAS)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    log = TrainLog(out_dir / "gan_log.jsonl")

    gen.train()
    disc.train()
    for step in range(1, cfg.steps + 1):
        idx = rng.integers(0, len(images), size=cfg.batch_size)
        x = _batch(masks, idx)
        y = _batch(images, idx)

        fake = gen(x)
        d_real = disc(x, y)
        d_fake = disc(x, fake.detach())
        loss_d, _ = adversarial_losses(d_real, d_fake)
        opt_d.zero_grad()
        loss_d.backward()
        opt_d.step()

        d_fake = disc(x, fake)
        adv_g = F.softplus(-d_fake).mean()
        rec = l1_loss(y, fake)
        st = struct_loss(y, fake, cfg.morph)
        loss_g = neural.generator_objective(adv_g, rec, st, cfg.loss_weights)
        opt_g.zero_grad()
        loss_g.backward()
        opt_g.step()

        vals = {
            "adv_D": float(loss_d.detach()),
            "adv_G": float(adv_g.detach()),
            "l1": float(rec.detach()),
            "struct": float(st.detach()),
        }
        if any(not math.isfinite(v) for v in vals.values()):
            raise DivergenceError(f"non-finite loss at step {step}: {vals}")
        if step % cfg.log_every == 0:
            log.append({"step": step, **vals, "wall_time": _wall_time(cfg)})
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            neural.save_checkpoint(
                out_dir / f"gan_step{step:07}.pt", gen, "generator", step, cfg.seed
            )

    gen_path = out_dir / "gan_final.pt"
    neural.save_checkpoint(gen_path, gen, "generator", cfg.steps, cfg.seed)
    neural.save_checkpoint(
        out_dir / "disc_final.pt", disc, "discriminator", cfg.steps, cfg.seed
    )
    return gen_path


def synthesize(
    checkpoint: str | Path,
    mask_records: list[dict],
    out_dir: str | Path,
) -> list[dict]:
    """Run the generator over mask files; emit paired synthetic records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen, header = neural.load_checkpoint(checkpoint)
    if header["kind"] != "generator":
        raise TrainingError(f"{checkpoint}: not a generator checkpoint")
    side = 1 << gen.cfg.depth
    fragment = []
    with torch.no_grad():
        for i, rec in enumerate(mask_records):
            mask_path = Path(rec["mask"])
            if not mask_path.exists():
                raise FileNotFoundError(f"mask file missing: {mask_path}")
            mask = load_mask(mask_path)
            if mask.height % side or mask.width % side:
                raise TrainingError(
                    f"{mask_path}: {mask.height}x{mask.width} incompatible with "
                    f"generator depth {gen.cfg.depth}"
                )
            x = torch.from_numpy(mask.data.astype(np.float64)).float()[None, None]
            out = gen(x)[0, 0].double().clamp(0.0, 1.0).numpy()
            img_path = out_dir / f"synth_{i:06}.png"
            save_image(GrayImage(out), img_path)
            fragment.append(
                {
                    "id": f"synth_{i:06}",
                    "image": str(img_path),
                    "mask": str(mask_path),
                    "origin": "synthetic",
                    "split": "train",
                }
            )
    return fragment


def _augment(img: np.ndarray, mask: np.ndarray, rng: np.random.Generator):
    """Random flip and 90-degree rotation, applied jointly."""
    k = int(rng.integers(0, 4))
    if k:
        img, mask = np.rot90(img, k), np.rot90(mask, k)
    if rng.integers(0, 2):
        img, mask = np.flip(img, axis=1), np.flip(mask, axis=1)
    return np.ascontiguousarray(img), np.ascontiguousarray(mask)


def train_seg(
    real_records: list[dict],
    synth_records: list[dict],
    cfg: TrainConfig,
    seg_cfg: SegmenterConfig,
    out_dir: str | Path,
) -> Path:
    """Binary cross-entropy training on per-batch real/synthetic mixtures."""
    if not real_records and not synth_records:
        raise TrainingError("empty manifests")
    if not real_records and cfg.mix_ratio < 1.0:
        raise TrainingError("real manifest empty but mix_ratio < 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _apply_determinism(cfg)

    real = load_patch_arrays(real_records, cfg) if real_records else None
    synth = load_patch_arrays(synth_records, cfg) if synth_records else None

    model = neural.build_segmenter(seg_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=ADAM_BETAS)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    log = TrainLog(out_dir / "seg_log.jsonl")

    model.train()
    for step in range(1, cfg.steps + 1):
        n_syn = math.ceil(cfg.mix_ratio * cfg.batch_size) if synth else 0
        n_syn = min(n_syn, cfg.batch_size)
        n_real = cfg.batch_size - n_syn if real else 0
        if n_real == 0 and synth:
            n_syn = cfg.batch_size
        imgs, masks = [], []
        for source, count in ((synth, n_syn), (real, n_real)):
            if not source or count == 0:
                continue
            idx = rng.integers(0, len(source[0]), size=count)
            for j in idx:
                im, mk = _augment(source[0][j], source[1][j], rng)
                imgs.append(im)
                masks.append(mk)
        x = torch.from_numpy(np.stack(imgs)).float().unsqueeze(1)
        t = torch.from_numpy(np.stack(masks)).float().unsqueeze(1)
        pred = model(x)
        loss = F.binary_cross_entropy(pred.clamp(1e-7, 1 - 1e-7), t)
        opt.zero_grad()
        loss.backward()
        opt.step()

        if not math.isfinite(float(loss.detach())):
            raise DivergenceError(f"non-finite loss at step {step}")
        if step % cfg.log_every == 0:
            log.append(
                {"step": step, "bce": float(loss.detach()), "wall_time": _wall_time(cfg)}
            )
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            neural.save_checkpoint(
                out_dir / f"seg_step{step:07}.pt", model, "segmenter", step, cfg.seed
            )

    path = out_dir / "seg_final.pt"
    neural.save_checkpoint(
        path, model, "segmenter", cfg.steps, cfg.seed, extra={"tile": cfg.patch_size}
    )
    return path


def _tile_positions(extent: int, tile: int, stride: int) -> list[int]:
    positions = list(range(0, extent - tile + 1, stride))
    if positions[-1] != extent - tile:
        positions.append(extent - tile)
    return positions


def predict_seg(
    model: torch.nn.Module, img: GrayImage, tile: int, overlap: int | None = None
) -> BinaryMask:
    """Tiled inference with overlap averaging; foreground iff mean prob > 0.5.

    Images smaller than a tile are reflect-padded, predicted, and cropped.
    """
    stride = tile - (overlap if overlap is not None else tile // 2)
    h, w = img.data.shape
    pad_h, pad_w = max(0, tile - h), max(0, tile - w)
    data = img.data
    if pad_h or pad_w:
        data = np.pad(data, ((0, pad_h), (0, pad_w)), mode="reflect")
    ph, pw = data.shape
    prob = np.zeros((ph, pw))
    count = np.zeros((ph, pw))
    model.eval()
    with torch.no_grad():
        for r in _tile_positions(ph, tile, stride):
            for c in _tile_positions(pw, tile, stride):
                x = torch.from_numpy(data[r : r + tile, c : c + tile]).float()[None, None]
                p = model(x)[0, 0].double().numpy()
                prob[r : r + tile, c : c + tile] += p
                count[r : r + tile, c : c + tile] += 1.0
    avg = prob / count
    return BinaryMask((avg > 0.5)[:h, :w])
