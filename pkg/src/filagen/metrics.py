"""IoU and skeleton-IoU evaluation with JSON report emission."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .neural import checkpoint_id, load_checkpoint
from .raster import BinaryMask, load_image, load_mask
from .skeleton import dilate, thin
from .training import predict_seg

DEFAULT_TOLERANCE = 2


@dataclass(frozen=True)
class ImageMetrics:
    id: str
    iou: float
    skiou: float


@dataclass(frozen=True)
class MetricsReport:
    per_image: list[ImageMetrics]
    mean_iou: float
    mean_skiou: float
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "per_image": [asdict(m) for m in self.per_image],
            "mean_iou": self.mean_iou,
            "mean_skiou": self.mean_skiou,
            "provenance": self.provenance,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"
        )

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            per_image=[ImageMetrics(**m) for m in d["per_image"]],
            mean_iou=d["mean_iou"],
            mean_skiou=d["mean_skiou"],
            provenance=d["provenance"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "MetricsReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """Pixel overlap ratio; two empty masks count as perfect agreement."""
    if pred.data.shape != gt.data.shape:
        raise ValueError("mask dimensions differ")
    union = (pred.data | gt.data).sum()
    if union == 0:
        return 1.0
    return float((pred.data & gt.data).sum() / union)


def skiou(pred: BinaryMask, gt: BinaryMask, r: int = DEFAULT_TOLERANCE) -> float:
    """Symmetric tolerance-dilated skeleton overlap.

    Both inputs are thinned; each skeleton is scored against the other's
    r-dilation. Empty-vs-empty is 1.0, exactly one empty is 0.0.
    """
    if pred.data.shape != gt.data.shape:
        raise ValueError("mask dimensions differ")
    if r < 0:
        raise ValueError("tolerance must be >= 0")
    p = thin(pred).data
    g = thin(gt).data
    np_, ng = p.sum(), g.sum()
    if np_ == 0 and ng == 0:
        return 1.0
    if np_ == 0 or ng == 0:
        return 0.0
    p_hit = (p & dilate(BinaryMask(g), r).data).sum()
    g_hit = (g & dilate(BinaryMask(p), r).data).sum()
    return float((p_hit + g_hit) / (np_ + ng))


def evaluate(
    checkpoint: str | Path,
    records: list[dict],
    r: int = DEFAULT_TOLERANCE,
    seed: int | None = None,
) -> MetricsReport:
    """Tiled segmentation of every record, both metrics, order-stable report."""
    if not records:
        raise ValueError("empty manifest")
    model, header = load_checkpoint(checkpoint)
    if header["kind"] != "segmenter":
        raise ValueError(f"{checkpoint}: not a segmenter checkpoint")
    tile = header.get("tile", 64)
    per_image = []
    for rec in sorted(records, key=lambda x: x["id"]):
        try:
            img = load_image(rec["image"])
            gt = load_mask(rec["mask"])
        except Exception as exc:
            raise RuntimeError(f"record {rec['id']}: {exc}") from exc
        pred = predict_seg(model, img, tile)
        per_image.append(
            ImageMetrics(id=rec["id"], iou=iou(pred, gt), skiou=skiou(pred, gt, r))
        )
    n = len(per_image)
    return MetricsReport(
        per_image=per_image,
        mean_iou=sum(m.iou for m in per_image) / n,
        mean_skiou=sum(m.skiou for m in per_image) / n,
        provenance={
            "checkpoint": checkpoint_id(checkpoint),
            "config_hash": header["config_hash"],
            "seed": header["seed"] if seed is None else seed,
            "tolerance": r,
        },
    )
