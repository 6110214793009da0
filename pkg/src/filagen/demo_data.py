"""Deterministic fabricated micrograph frames for self-contained runs.

Stage-1 GAN training needs paired real data; when no annotated corpus is
configured (desk-scale demos, CI), these frames stand in for it: procedural
masks rendered into blurred, noisy pseudo-fluorescence images.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .maskgen import MaskGenConfig, child_seed, generate_mask
from .raster import BinaryMask, GrayImage, save_image, save_mask


def render_pseudo_micrograph(
    mask: BinaryMask,
    rng: np.random.Generator,
    fg_gain: float = 0.75,
    noise_level: float = 0.02,
) -> GrayImage:
    """Blur the mask into filament-like intensity over a smooth noisy background."""
    fg = ndimage.gaussian_filter(mask.data.astype(np.float64), sigma=0.8)
    bg = ndimage.gaussian_filter(rng.normal(size=mask.data.shape), sigma=8.0)
    bg = 0.10 + 0.05 * (bg - bg.min()) / max(float(np.ptp(bg)), 1e-9)
    noise = noise_level * rng.normal(size=mask.data.shape)
    return GrayImage(np.clip(bg + fg_gain * fg + noise, 0.0, 1.0))


def fabricate_frames(
    mg_cfg: MaskGenConfig,
    n_train: int,
    n_test: int,
    frame_size: int,
    out_dir: str | Path,
    fg_gain: float = 0.75,
    noise_level: float = 0.02,
) -> list[dict]:
    """Write paired frame PNGs; record i is a pure function of (cfg, i)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # denser per-frame scaling so larger frames keep similar coverage
    scale = (frame_size * frame_size) / (mg_cfg.canvas[0] * mg_cfg.canvas[1])
    cfg = replace(
        mg_cfg,
        canvas=(frame_size, frame_size),
        count_range=(
            max(1, round(mg_cfg.count_range[0] * scale)),
            max(1, round(mg_cfg.count_range[1] * scale)),
        ),
    )
    records = []
    for i in range(n_train + n_test):
        mask = generate_mask(cfg, i)
        rng = np.random.Generator(np.random.PCG64(child_seed(cfg.seed ^ 0xF00D, i)))
        img = render_pseudo_micrograph(mask, rng, fg_gain, noise_level)
        img_path = out_dir / f"real_{i:06}.png"
        mask_path = out_dir / f"real_{i:06}_mask.png"
        save_image(img, img_path)
        save_mask(mask, mask_path)
        records.append(
            {
                "id": f"real_{i:06}",
                "image": str(img_path),
                "mask": str(mask_path),
                "origin": "real",
                "split": "train" if i < n_train else "test",
            }
        )
    return records
