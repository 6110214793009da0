#!/usr/bin/env python3
"""Desk-scale GAN memorization run: 4 fixed pairs, 2000 steps, report final L1."""

import argparse
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from filagen import neural, training
from filagen.demo_data import fabricate_frames
from filagen.maskgen import MaskGenConfig
from filagen.neural import DiscriminatorConfig, GeneratorConfig, LossWeights
from filagen.raster import load_image, load_mask
from filagen.training import (
    TrainConfig,
    desk_scale_discriminator,
    desk_scale_generator,
    desk_scale_train,
)


def run(seed: int, lambda_s: float, steps: int, out_dir: Path):
    pair_cfg = MaskGenConfig(canvas=(64, 64), count_range=(2, 5), seed=7)
    pairs = fabricate_frames(
        pair_cfg, 4, 0, 64, out_dir / "pairs", fg_gain=0.65, noise_level=0.08
    )
    cfg = replace(
        desk_scale_train(TrainConfig(seed=seed, steps=steps, deterministic=True)),
        patch_stride=64,
        loss_weights=LossWeights(50.0, lambda_s),
    )
    ckpt = training.train_gan(
        pairs,
        cfg,
        desk_scale_generator(GeneratorConfig()),
        desk_scale_discriminator(DiscriminatorConfig()),
        out_dir / "gan",
    )
    gen, _ = neural.load_checkpoint(ckpt)
    l1s = []
    with torch.no_grad():
        for rec in pairs:
            x = torch.from_numpy(load_mask(rec["mask"]).data.astype(np.float64)).float()[None, None]
            y = torch.from_numpy(load_image(rec["image"]).data).float()[None, None]
            l1s.append(float((gen(x) - y).abs().mean()))
    return ckpt, float(np.mean(l1s))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--lambda-s", type=float, default=5.0)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="memorization_"))
    ckpt, l1 = run(args.seed, args.lambda_s, args.steps, out)
    print(f"checkpoint: {ckpt}")
    print(f"final training-set mean L1: {l1:.4f}")


if __name__ == "__main__":
    main()
