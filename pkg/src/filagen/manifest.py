"""Dataset manifests: JSON schema, validation, and split filtering."""

from __future__ import annotations

import json
from pathlib import Path

from PIL import Image

ORIGINS = ("real", "synthetic")
SPLITS = ("train", "test")


class ManifestError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("manifest validation failed:\n" + "\n".join(problems))


def save_manifest(records: list[dict], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps({"records": records}, sort_keys=True, indent=2) + "\n"
    )


def load_manifest(path: str | Path) -> list[dict]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "records" not in data:
        raise ManifestError([f"{path}: missing top-level 'records'"])
    return data["records"]


def _png_size(path: str) -> tuple[int, int] | None:
    try:
        with Image.open(path) as im:
            return im.size
    except Exception:
        return None


def validate_manifest(records: list[dict], check_dims: bool = True) -> list[dict]:
    """Check id uniqueness, file existence, and per-record dimension agreement.

    All violations are aggregated before raising.
    """
    problems: list[str] = []
    seen: set[str] = set()
    for i, rec in enumerate(records):
        rid = rec.get("id", f"<record {i}>")
        if rid in seen:
            problems.append(f"{rid}: duplicate id")
        seen.add(rid)
        for key in ("origin",):
            if rec.get(key) not in ORIGINS:
                problems.append(f"{rid}: invalid origin {rec.get(key)!r}")
        if rec.get("split") not in SPLITS:
            problems.append(f"{rid}: invalid split {rec.get('split')!r}")
        sizes = {}
        for key in ("image", "mask"):
            p = rec.get(key)
            if p is None:
                continue
            if not Path(p).exists():
                problems.append(f"{rid}: {key} file missing: {p}")
            elif check_dims:
                sizes[key] = _png_size(p)
        if check_dims and len(sizes) == 2 and None not in sizes.values():
            if sizes["image"] != sizes["mask"]:
                problems.append(
                    f"{rid}: image/mask dimension mismatch "
                    f"{sizes['image']} vs {sizes['mask']}"
                )
    if problems:
        raise ManifestError(problems)
    return records


def filter_split(records: list[dict], split: str) -> list[dict]:
    return [r for r in records if r.get("split") == split]


def filter_origin(records: list[dict], origin: str) -> list[dict]:
    return [r for r in records if r.get("origin") == origin]
