"""Grayscale image / binary mask containers, PNG I/O, binarization, patching."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image


class RasterError(ValueError):
    pass


class DecodeError(RasterError):
    pass


@dataclass(frozen=True)
class GrayImage:
    """2-D raster of intensities normalized to [0, 1], row-major."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise RasterError(f"GrayImage requires a 2-D array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise RasterError("GrayImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """2-D boolean raster."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise RasterError(f"BinaryMask requires a 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "data", arr.astype(bool))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def foreground_fraction(self) -> float:
        return float(self.data.mean()) if self.data.size else 0.0


@dataclass(frozen=True)
class PatchPair:
    image: GrayImage
    mask: BinaryMask
    source_id: str
    offset: tuple[int, int]

    def __post_init__(self):
        if self.image.data.shape != self.mask.data.shape:
            raise RasterError("patch image and mask dimensions differ")


def load_image(path: str | Path) -> GrayImage:
    """Decode an 8- or 16-bit grayscale PNG (RGB accepted, channel-averaged)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("RGB", "RGBA"):
                arr = np.asarray(im.convert("RGB"), dtype=np.float64).mean(axis=2)
                return GrayImage(arr / 255.0)
            if mode == "L":
                return GrayImage(np.asarray(im, dtype=np.float64) / 255.0)
            if mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64)
                if arr.size and arr.max() > 65535:
                    raise DecodeError(f"{path}: unsupported bit depth (> 16-bit)")
                return GrayImage(arr / 65535.0)
            raise DecodeError(f"{path}: unsupported PNG mode {mode!r}")
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"{path}: cannot decode image ({exc})") from exc


def save_image(img: GrayImage, path: str | Path) -> None:
    """Encode as 8-bit grayscale PNG (round-to-nearest quantization)."""
    arr = np.round(img.data * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask(path: str | Path) -> BinaryMask:
    """Decode an 8-bit PNG mask; any value >= 128 counts as foreground."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except Exception as exc:
        raise DecodeError(f"{path}: cannot decode mask ({exc})") from exc
    return BinaryMask(arr >= 128)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    arr = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def otsu_threshold(img: GrayImage) -> float | None:
    """Threshold maximizing inter-class variance over a 256-bin histogram.

    Returns None for a constant image (no valid split).
    """
    bins = np.minimum((img.data * 256.0).astype(np.int64), 255)
    hist = np.bincount(bins.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    cum = np.cumsum(hist)
    cum_mean = np.cumsum(hist * np.arange(256))
    mean_all = cum_mean[-1] / total
    best_var, best_k = -1.0, None
    for k in range(255):
        w0 = cum[k]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = cum_mean[k] / w0
        mu1 = (cum_mean[-1] - cum_mean[k]) / w1
        var = w0 * w1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_var, best_k = var, k
    if best_k is None:
        return None
    return (best_k + 1) / 256.0


def binarize(
    img: GrayImage,
    method: Literal["fixed", "otsu"] = "fixed",
    threshold: float = 0.5,
) -> BinaryMask:
    """Foreground = strictly greater than the threshold."""
    if method == "fixed":
        if not 0.0 <= threshold <= 1.0:
            raise RasterError(f"fixed threshold must lie in [0, 1], got {threshold}")
        t = threshold
    elif method == "otsu":
        t = otsu_threshold(img)
        if t is None:
            warnings.warn("otsu on constant image; falling back to fixed(0.5)")
            t = 0.5
    else:
        raise RasterError(f"unknown binarization method {method!r}")
    return BinaryMask(img.data > t)


def extract_patches(
    img: GrayImage,
    mask: BinaryMask,
    size: int,
    stride: int,
    min_fg: float = 0.0,
    source_id: str = "",
) -> list[PatchPair]:
    """Grid-aligned patches from (0,0), residual borders dropped."""
    if img.data.shape != mask.data.shape:
        raise RasterError("image and mask dimensions differ")
    h, w = img.data.shape
    if size > h or size > w:
        raise RasterError(f"patch size {size} exceeds image dimensions {h}x{w}")
    if stride < 1:
        raise RasterError("stride must be >= 1")
    patches = []
    for r in range(0, h - size + 1, stride):
        for c in range(0, w - size + 1, stride):
            m = mask.data[r : r + size, c : c + size]
            if m.mean() < min_fg:
                continue
            patches.append(
                PatchPair(
                    image=GrayImage(img.data[r : r + size, c : c + size]),
                    mask=BinaryMask(m),
                    source_id=source_id,
                    offset=(r, c),
                )
            )
    return patches
