"""Qualitative montage emission: rows of (mask, image[, prediction]) panels."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .raster import GrayImage, load_image, load_mask, save_image

MAX_ROWS = 8
SEPARATOR = 2  # white separator width in pixels


def montage(rows: list[list[np.ndarray]], out_path: str | Path) -> GrayImage:
    """Assemble panels (each [0,1] float 2-D, equal sizes) into a grid PNG."""
    if not rows:
        raise ValueError("montage needs at least one row")
    rows = rows[:MAX_ROWS]
    h, w = rows[0][0].shape
    ncols = len(rows[0])
    for row in rows:
        if len(row) != ncols or any(p.shape != (h, w) for p in row):
            raise ValueError("all montage panels must share dimensions")
    out_h = len(rows) * h + (len(rows) - 1) * SEPARATOR
    out_w = ncols * w + (ncols - 1) * SEPARATOR
    canvas = np.ones((out_h, out_w))
    for ri, row in enumerate(rows):
        for ci, panel in enumerate(row):
            r0 = ri * (h + SEPARATOR)
            c0 = ci * (w + SEPARATOR)
            canvas[r0 : r0 + h, c0 : c0 + w] = panel
    img = GrayImage(canvas)
    save_image(img, out_path)
    return img


def preview_pairs(records: list[dict], out_path: str | Path) -> GrayImage:
    """Montage of (mask, image) pairs, first MAX_ROWS records by id order."""
    if not records:
        raise ValueError("no displayable pairs")
    chosen = sorted(records, key=lambda r: r["id"])[:MAX_ROWS]
    rows = []
    for rec in chosen:
        mask = load_mask(rec["mask"]).data.astype(np.float64)
        panels = [mask]
        if rec.get("image"):
            panels.append(load_image(rec["image"]).data)
        if rec.get("prediction"):
            panels.append(load_mask(rec["prediction"]).data.astype(np.float64))
        rows.append(panels)
    return montage(rows, out_path)
