#!/usr/bin/env python3
"""Structural-loss ablation: compare hard-skeleton agreement of generators
trained with and without the structural term, over several seeds."""

import argparse
import tempfile
from pathlib import Path

import numpy as np
import torch

from filagen import neural
from filagen.raster import GrayImage, binarize, load_mask
from filagen.skeleton import thin

from gan_memorization import run


def skeleton_distance(ckpt, pairs_dir: Path):
    gen, _ = neural.load_checkpoint(ckpt)
    vals = []
    with torch.no_grad():
        for mask_path in sorted(pairs_dir.glob("*_mask.png")):
            m = load_mask(mask_path)
            x = torch.from_numpy(m.data.astype(np.float64)).float()[None, None]
            g = gen(x)[0, 0].double().clamp(0, 1).numpy()
            sk_gen = thin(binarize(GrayImage(g), "fixed", 0.5)).data.astype(float)
            sk_gt = thin(m).data.astype(float)
            vals.append(np.abs(sk_gen - sk_gt).mean())
    return float(np.mean(vals))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[7, 8, 9])
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()

    results = {}
    for lam in (5.0, 0.0):
        dists = []
        for seed in args.seeds:
            out = Path(tempfile.mkdtemp(prefix=f"ablation_{lam}_{seed}_"))
            ckpt, l1 = run(seed, lam, args.steps, out)
            d = skeleton_distance(ckpt, out / "pairs")
            dists.append(d)
            print(f"lambda_s={lam} seed={seed}: L1={l1:.4f} skeleton distance={d:.5f}")
        results[lam] = float(np.mean(dists))
    print(f"mean skeleton distance  with structural loss: {results[5.0]:.5f}")
    print(f"mean skeleton distance  without:              {results[0.0]:.5f}")
    print("structural loss helps" if results[5.0] <= results[0.0] else "no improvement")


if __name__ == "__main__":
    main()
