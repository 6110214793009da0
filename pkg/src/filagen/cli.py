"""Command-line entry point tying mask generation, GAN training, synthesis,
segmentation training, evaluation, and previews together.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import demo_data, maskgen, metrics, preview, training
from .config import (
    ConfigValidationError,
    PipelineConfig,
    apply_desk_scale,
    apply_deterministic,
    apply_seed,
    load_config,
)
from .manifest import (
    ManifestError,
    load_manifest,
    filter_origin,
    filter_split,
    save_manifest,
    validate_manifest,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="filagen", description=__doc__)
    p.add_argument("--config", type=str, default=None, help="pipeline JSON config")
    p.add_argument("--seed", type=int, default=None, help="override all seeds")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--desk-scale", action="store_true", help="reduced CPU profile")
    p.add_argument("--workdir", type=str, default=None)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("masks", help="generate a procedural mask corpus")
    sp.add_argument("-n", type=int, default=None, help="number of masks")
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("train-gan", help="stage 1: train the conditional GAN")
    sp.add_argument("--manifest", type=str, default=None, help="real paired data")
    sp.add_argument("--out", type=str, default=None)

    sp = sub.add_parser("synth", help="stage 2: render images for mask corpus")
    sp.add_argument("--checkpoint", type=str, default=None)
    sp.add_argument("--masks-manifest", type=str, default=None)
    sp.add_argument("--out", type=str, default=None)

    sp = sub.add_parser("train-seg", help="stage 3: train the segmenter")
    sp.add_argument("--manifest", type=str, default=None, help="real paired data")
    sp.add_argument("--synth-manifest", type=str, default=None)
    sp.add_argument("--out", type=str, default=None)

    sp = sub.add_parser("eval", help="IoU/SKIoU over a test manifest")
    sp.add_argument("--checkpoint", type=str, default=None)
    sp.add_argument("--manifest", type=str, default=None)
    sp.add_argument("--out", type=str, default=None)

    sp = sub.add_parser("preview", help="qualitative montage")
    sp.add_argument("--manifest", type=str, required=True)
    sp.add_argument("--out", type=str, default=None)

    sub.add_parser("validate", help="validate a manifest").add_argument(
        "--manifest", type=str, required=True
    )

    sub.add_parser("pipeline", help="run all stages per config")
    return p


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.desk_scale:
        cfg = apply_desk_scale(cfg)
    if args.seed is not None:
        cfg = apply_seed(cfg, args.seed)
    if args.deterministic:
        cfg = apply_deterministic(cfg)
    workdir = args.workdir or os.environ.get("FILAGEN_WORKDIR") or cfg.workdir
    cfg = apply_workdir(cfg, workdir)
    return cfg


def apply_workdir(cfg: PipelineConfig, workdir: str) -> PipelineConfig:
    from dataclasses import replace

    Path(workdir).mkdir(parents=True, exist_ok=True)
    return replace(cfg, workdir=workdir)


@contextmanager
def workdir_lock(workdir: Path):
    lock = workdir / ".filagen.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"workdir locked by another pipeline run: {lock}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _real_records(cfg: PipelineConfig, manifest_path: str | None) -> list[dict]:
    """Load the configured real corpus or fabricate a deterministic stand-in."""
    if manifest_path:
        return validate_manifest(load_manifest(manifest_path))
    demo_dir = Path(cfg.workdir) / "demo_real"
    demo_manifest = demo_dir / "manifest.json"
    frame_size = cfg.gan_train.patch_size * 2
    records = demo_data.fabricate_frames(
        cfg.maskgen,
        cfg.demo_frames_train,
        cfg.demo_frames_test,
        frame_size,
        demo_dir,
    )
    save_manifest(records, demo_manifest)
    return records


def cmd_masks(cfg: PipelineConfig, args) -> int:
    n = args.n if args.n is not None else cfg.synth_count
    out = Path(args.out or Path(cfg.workdir) / "masks")
    records = maskgen.generate_mask_corpus(cfg.maskgen, n, out, workers=args.workers)
    save_manifest(records, out / "manifest.json")
    print(f"wrote {n} masks to {out}")
    return EXIT_OK


def cmd_train_gan(cfg: PipelineConfig, args) -> int:
    records = filter_split(_real_records(cfg, args.manifest), "train")
    out = Path(args.out or Path(cfg.workdir) / "gan")
    path = training.train_gan(records, cfg.gan_train, cfg.generator, cfg.discriminator, out)
    print(f"generator checkpoint: {path}")
    return EXIT_OK


def cmd_synth(cfg: PipelineConfig, args) -> int:
    checkpoint = args.checkpoint or str(Path(cfg.workdir) / "gan" / "gan_final.pt")
    if not Path(checkpoint).exists():
        raise ConfigValidationError(f"checkpoint not found: {checkpoint}")
    mask_manifest = args.masks_manifest or str(
        Path(cfg.workdir) / "masks" / "manifest.json"
    )
    mask_records = load_manifest(mask_manifest)
    out = Path(args.out or Path(cfg.workdir) / "synth")
    fragment = training.synthesize(checkpoint, mask_records, out)
    save_manifest(fragment, out / "manifest.json")
    print(f"synthesized {len(fragment)} images to {out}")
    return EXIT_OK


def cmd_train_seg(cfg: PipelineConfig, args) -> int:
    real = filter_split(_real_records(cfg, args.manifest), "train")
    synth_manifest = args.synth_manifest or str(
        Path(cfg.workdir) / "synth" / "manifest.json"
    )
    synth = load_manifest(synth_manifest) if Path(synth_manifest).exists() else []
    out = Path(args.out or Path(cfg.workdir) / "seg")
    path = training.train_seg(real, synth, cfg.seg_train, cfg.segmenter, out)
    print(f"segmenter checkpoint: {path}")
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, args) -> int:
    checkpoint = args.checkpoint or str(Path(cfg.workdir) / "seg" / "seg_final.pt")
    if not Path(checkpoint).exists():
        raise ConfigValidationError(f"checkpoint not found: {checkpoint}")
    if args.manifest:
        records = filter_split(validate_manifest(load_manifest(args.manifest)), "test")
    else:
        demo_manifest = Path(cfg.workdir) / "demo_real" / "manifest.json"
        if not demo_manifest.exists():
            raise ConfigValidationError(f"no manifest given and {demo_manifest} missing")
        records = filter_split(load_manifest(demo_manifest), "test")
    report = metrics.evaluate(checkpoint, records, r=cfg.tolerance)
    out = Path(args.out or Path(cfg.workdir) / "metrics_report.json")
    report.save(out)
    print(f"mean_iou={report.mean_iou:.4f} mean_skiou={report.mean_skiou:.4f} -> {out}")
    return EXIT_OK


def cmd_preview(cfg: PipelineConfig, args) -> int:
    records = load_manifest(args.manifest)
    if not records:
        raise ConfigValidationError("preview: empty manifest")
    out = Path(args.out or Path(cfg.workdir) / "preview.png")
    preview.preview_pairs(records, out)
    print(f"montage: {out}")
    return EXIT_OK


def cmd_validate(cfg: PipelineConfig, args) -> int:
    validate_manifest(load_manifest(args.manifest))
    print("manifest ok")
    return EXIT_OK


def cmd_pipeline(cfg: PipelineConfig, args) -> int:
    """masks -> train-gan -> synth -> train-seg -> eval -> preview."""
    workdir = Path(cfg.workdir)
    with workdir_lock(workdir):
        real = _real_records(cfg, None)
        real_train = filter_split(real, "train")
        real_test = filter_split(real, "test")

        mask_dir = workdir / "masks"
        mask_records = maskgen.generate_mask_corpus(cfg.maskgen, cfg.synth_count, mask_dir)
        save_manifest(mask_records, mask_dir / "manifest.json")
        print(f"[1/6] masks: {len(mask_records)}")

        gan_path = training.train_gan(
            real_train, cfg.gan_train, cfg.generator, cfg.discriminator, workdir / "gan"
        )
        print(f"[2/6] train-gan: {gan_path}")

        synth_records = training.synthesize(gan_path, mask_records, workdir / "synth")
        save_manifest(synth_records, workdir / "synth" / "manifest.json")
        print(f"[3/6] synth: {len(synth_records)} images")

        seg_path = training.train_seg(
            real_train, synth_records, cfg.seg_train, cfg.segmenter, workdir / "seg"
        )
        print(f"[4/6] train-seg: {seg_path}")

        report = metrics.evaluate(seg_path, real_test, r=cfg.tolerance)
        report.save(workdir / "metrics_report.json")
        print(f"[5/6] eval: mean_iou={report.mean_iou:.4f} mean_skiou={report.mean_skiou:.4f}")

        preview.preview_pairs(synth_records, workdir / "preview.png")
        print(f"[6/6] preview: {workdir / 'preview.png'}")
    return EXIT_OK


_COMMANDS = {
    "masks": cmd_masks,
    "train-gan": cmd_train_gan,
    "synth": cmd_synth,
    "train-seg": cmd_train_seg,
    "eval": cmd_eval,
    "preview": cmd_preview,
    "validate": cmd_validate,
    "pipeline": cmd_pipeline,
}


def cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg, args)
    except (ConfigValidationError, ManifestError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
