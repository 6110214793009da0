"""Procedural filament mask generation: correlated random walks, stroked
rasterization, and deterministic index-addressable corpus emission."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .raster import BinaryMask, save_mask

MASK_U64 = (1 << 64) - 1

PRESET_COUNT_RANGES = {
    "microtubule-like": (10, 40),
    "actin-like": (40, 120),
}


@dataclass(frozen=True)
class FilamentPolyline:
    points: np.ndarray  # (n, 2) float (row, col)
    thickness: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs >= 2 (row, col) points")
        if np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise ValueError("consecutive points must be distinct")
        if self.thickness < 1:
            raise ValueError("thickness must be >= 1 pixel")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class MaskGenConfig:
    canvas: tuple[int, int] = (256, 256)
    count_range: tuple[int, int] = (10, 40)
    step_length: float = 4.0
    length_range: tuple[int, int] = (10, 60)
    max_turn: float = 0.3
    thickness_range: tuple[float, float] = (1.0, 3.0)
    seed: int = 0
    preset: str | None = None

    def __post_init__(self):
        if self.canvas[0] <= 0 or self.canvas[1] <= 0:
            raise ValueError("canvas dimensions must be positive")
        for name in ("count_range", "length_range", "thickness_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be ordered")
        if not 0.0 <= self.max_turn < math.pi:
            raise ValueError("max_turn must lie in [0, pi)")
        if self.step_length <= 0:
            raise ValueError("step_length must be positive")

    def with_preset(self, preset: str) -> "MaskGenConfig":
        if preset not in PRESET_COUNT_RANGES:
            raise ValueError(f"unknown preset {preset!r}")
        return replace(self, preset=preset, count_range=PRESET_COUNT_RANGES[preset])


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer; the per-index child-seed mixer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK_U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK_U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK_U64
    return (x ^ (x >> 31)) & MASK_U64


def child_seed(seed: int, index: int) -> int:
    return (seed ^ splitmix64(index)) & MASK_U64


def sample_filament(rng: np.random.Generator, cfg: MaskGenConfig) -> FilamentPolyline:
    """Correlated random walk: fixed step length, bounded per-step turn."""
    h, w = cfg.canvas
    margin = cfg.step_length
    r = rng.uniform(min(margin, h / 2), max(h - margin, h / 2))
    c = rng.uniform(min(margin, w / 2), max(w - margin, w / 2))
    heading = rng.uniform(0.0, 2.0 * math.pi)
    steps = int(rng.integers(cfg.length_range[0], cfg.length_range[1] + 1))
    pts = np.empty((steps + 1, 2))
    pts[0] = (r, c)
    for i in range(steps):
        heading += rng.uniform(-cfg.max_turn, cfg.max_turn)
        r += cfg.step_length * math.sin(heading)
        c += cfg.step_length * math.cos(heading)
        pts[i + 1] = (r, c)
    thickness = rng.uniform(cfg.thickness_range[0], cfg.thickness_range[1])
    return FilamentPolyline(points=pts, thickness=thickness)


def _stamp_segment(canvas: np.ndarray, p0, p1, radius: float) -> None:
    h, w = canvas.shape
    r0 = max(0, int(math.floor(min(p0[0], p1[0]) - radius)))
    r1 = min(h - 1, int(math.ceil(max(p0[0], p1[0]) + radius)))
    c0 = max(0, int(math.floor(min(p0[1], p1[1]) - radius)))
    c1 = min(w - 1, int(math.ceil(max(p0[1], p1[1]) + radius)))
    if r0 > r1 or c0 > c1:
        return
    rr, cc = np.meshgrid(
        np.arange(r0, r1 + 1), np.arange(c0, c1 + 1), indexing="ij"
    )
    d = np.stack([rr - p0[0], cc - p0[1]], axis=-1).astype(np.float64)
    seg = np.array([p1[0] - p0[0], p1[1] - p0[1]])
    seg_len2 = float(seg @ seg)
    if seg_len2 == 0.0:
        dist2 = d[..., 0] ** 2 + d[..., 1] ** 2
    else:
        t = np.clip((d @ seg) / seg_len2, 0.0, 1.0)
        proj = d - t[..., None] * seg
        dist2 = proj[..., 0] ** 2 + proj[..., 1] ** 2
    canvas[r0 : r1 + 1, c0 : c1 + 1] |= dist2 <= radius * radius


def render_mask(
    filaments: list[FilamentPolyline], canvas: tuple[int, int]
) -> BinaryMask:
    """Stroke each polyline with a disc pen of diameter = thickness."""
    if canvas[0] <= 0 or canvas[1] <= 0:
        raise ValueError("canvas dimensions must be positive")
    out = np.zeros(canvas, dtype=bool)
    for fil in filaments:
        radius = fil.thickness / 2.0
        pts = fil.points
        for i in range(len(pts) - 1):
            _stamp_segment(out, pts[i], pts[i + 1], radius)
    return BinaryMask(out)


def generate_mask(cfg: MaskGenConfig, index: int) -> BinaryMask:
    """Mask i depends only on (cfg, i); regeneration is index-addressable."""
    rng = np.random.Generator(np.random.PCG64(child_seed(cfg.seed, index)))
    count = int(rng.integers(cfg.count_range[0], cfg.count_range[1] + 1))
    filaments = [sample_filament(rng, cfg) for _ in range(count)]
    return render_mask(filaments, cfg.canvas)


def max_foreground_fraction(cfg: MaskGenConfig) -> float:
    """Upper bound on any generated mask's foreground fraction."""
    h, w = cfg.canvas
    t = cfg.thickness_range[1]
    per_filament = cfg.length_range[1] * cfg.step_length * t + math.pi * (t / 2 + 1) ** 2
    return min(1.0, cfg.count_range[1] * per_filament / (h * w))


def generate_mask_corpus(
    cfg: MaskGenConfig,
    n: int,
    out_dir: str | Path,
    workers: int = 1,
) -> list[dict]:
    """Write n mask PNGs and return their manifest-fragment records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def emit(i: int) -> dict:
        mask = generate_mask(cfg, i)
        path = out_dir / f"mask_{i:06}.png"
        save_mask(mask, path)
        return {
            "id": f"mask_{i:06}",
            "image": None,
            "mask": str(path),
            "origin": "synthetic",
            "split": "train",
        }

    if workers <= 1:
        return [emit(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(emit, range(n)))
