"""Morphological thinning (hard) and differentiable soft skeletonization.

Hard thinning (Zhang-Suen) serves evaluation; the soft pipeline
(logistic binarization followed by iterated soft erosion/opening)
serves the training-time structural loss, where gradients must flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

from .raster import BinaryMask, GrayImage


@dataclass(frozen=True)
class MorphParams:
    soft_iterations: int = 10
    soft_binarize_sharpness: float = 50.0
    soft_binarize_threshold: float = 0.5

    def __post_init__(self):
        if self.soft_iterations < 1:
            raise ValueError("soft_iterations must be >= 1")
        if self.soft_binarize_sharpness <= 0:
            raise ValueError("soft_binarize_sharpness must be > 0")
        if not 0.0 <= self.soft_binarize_threshold <= 1.0:
            raise ValueError("soft_binarize_threshold must lie in [0, 1]")


def _neighbors(p: np.ndarray):
    # P2..P9 clockwise from north, on a zero-padded uint8 array
    p2 = p[:-2, 1:-1]
    p3 = p[:-2, 2:]
    p4 = p[1:-1, 2:]
    p5 = p[2:, 2:]
    p6 = p[2:, 1:-1]
    p7 = p[2:, :-2]
    p8 = p[1:-1, :-2]
    p9 = p[:-2, :-2]
    return p2, p3, p4, p5, p6, p7, p8, p9


def thin(mask: BinaryMask) -> BinaryMask:
    """Zhang-Suen two-subiteration thinning to fixpoint.

    Out-of-image pixels are background. Output is a subset of the input.
    """
    img = mask.data.astype(np.uint8)
    changed = True
    while changed:
        changed = False
        for phase in (0, 1):
            p = np.pad(img, 1)
            p2, p3, p4, p5, p6, p7, p8, p9 = _neighbors(p)
            ring = [p2, p3, p4, p5, p6, p7, p8, p9, p2]
            b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            a = np.zeros_like(b)
            for i in range(8):
                a += (ring[i] == 0) & (ring[i + 1] == 1)
            if phase == 0:
                c1 = p2 * p4 * p6 == 0
                c2 = p4 * p6 * p8 == 0
            else:
                c1 = p2 * p4 * p8 == 0
                c2 = p2 * p6 * p8 == 0
            remove = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
            if remove.any():
                img[remove] = 0
                changed = True
    return BinaryMask(img.astype(bool))


_SQUARE8 = np.ones((3, 3), dtype=bool)


def dilate(mask: BinaryMask, r: int) -> BinaryMask:
    """Dilation by a (2r+1)x(2r+1) square, clipped at the image border."""
    if r < 0:
        raise ValueError("dilation radius must be >= 0")
    if r == 0 or not mask.data.any():
        return BinaryMask(mask.data.copy())
    se = np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
    return BinaryMask(ndimage.binary_dilation(mask.data, structure=se))


def erode(mask: BinaryMask, r: int) -> BinaryMask:
    """Erosion by a (2r+1)x(2r+1) square; out-of-image treated as background."""
    if r < 0:
        raise ValueError("erosion radius must be >= 0")
    if r == 0:
        return BinaryMask(mask.data.copy())
    se = np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
    return BinaryMask(ndimage.binary_erosion(mask.data, structure=se, border_value=0))


def connected_components(mask: BinaryMask) -> int:
    """8-connected component count."""
    _, n = ndimage.label(mask.data, structure=_SQUARE8)
    return n


# --- differentiable soft morphology (torch tensors, shape (..., H, W)) ---


def soft_binarize_t(x: torch.Tensor, beta: float, threshold: float) -> torch.Tensor:
    return torch.sigmoid(beta * (x - threshold))


def _soft_erode_t(x: torch.Tensor) -> torch.Tensor:
    # 3x3 min-pool with edge replication
    shape = x.shape
    x4 = x.reshape(-1, 1, shape[-2], shape[-1])
    y = -F.max_pool2d(F.pad(-x4, (1, 1, 1, 1), mode="replicate"), 3, stride=1)
    return y.reshape(shape)


def _soft_dilate_t(x: torch.Tensor) -> torch.Tensor:
    shape = x.shape
    x4 = x.reshape(-1, 1, shape[-2], shape[-1])
    y = F.max_pool2d(F.pad(x4, (1, 1, 1, 1), mode="replicate"), 3, stride=1)
    return y.reshape(shape)


def soft_skeleton_t(x: torch.Tensor, iterations: int) -> torch.Tensor:
    """Iterated soft erosion/opening skeleton.

    Each round peels one soft erosion and accumulates the top-hat residue
    (current minus its opening); on exactly-binary input the result is
    exactly binary and contained in the foreground.
    """
    opened = _soft_dilate_t(_soft_erode_t(x))
    skel = F.relu(x - opened)
    for _ in range(iterations):
        x = _soft_erode_t(x)
        opened = _soft_dilate_t(_soft_erode_t(x))
        delta = F.relu(x - opened)
        skel = skel + F.relu(delta - skel * delta)
    return skel


def soft_binarize(img: GrayImage, params: MorphParams) -> GrayImage:
    t = soft_binarize_t(
        torch.from_numpy(img.data),
        params.soft_binarize_sharpness,
        params.soft_binarize_threshold,
    )
    return GrayImage(t.numpy())


def soft_skeleton(img: GrayImage, params: MorphParams) -> GrayImage:
    t = soft_skeleton_t(torch.from_numpy(img.data), params.soft_iterations)
    return GrayImage(t.numpy())
