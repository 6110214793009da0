import json

import numpy as np
import pytest

from filagen.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, cli
from filagen.config import (
    ConfigValidationError,
    PipelineConfig,
    apply_desk_scale,
    config_from_dict,
    load_config,
)
from filagen.manifest import ManifestError, load_manifest, save_manifest, validate_manifest
from filagen.preview import MAX_ROWS, SEPARATOR, montage, preview_pairs
from filagen.raster import BinaryMask, GrayImage, save_image, save_mask


def make_pair(tmp_path, name, size=32):
    rng = np.random.default_rng(hash(name) % 2**32)
    img_p = tmp_path / f"{name}.png"
    mask_p = tmp_path / f"{name}_mask.png"
    save_image(GrayImage(rng.random((size, size))), img_p)
    save_mask(BinaryMask(rng.random((size, size)) > 0.5), mask_p)
    return {
        "id": name,
        "image": str(img_p),
        "mask": str(mask_p),
        "origin": "real",
        "split": "train",
    }


class TestManifest:
    def test_well_formed(self, tmp_path):
        records = [make_pair(tmp_path, "a"), make_pair(tmp_path, "b")]
        assert validate_manifest(records) == records

    def test_duplicate_id(self, tmp_path):
        records = [make_pair(tmp_path, "a"), make_pair(tmp_path, "a")]
        with pytest.raises(ManifestError, match="duplicate id"):
            validate_manifest(records)

    def test_dimension_mismatch_names_record(self, tmp_path):
        rec = make_pair(tmp_path, "k", size=256)
        bad_mask = tmp_path / "small_mask.png"
        save_mask(BinaryMask(np.zeros((128, 128), bool)), bad_mask)
        rec["mask"] = str(bad_mask)
        with pytest.raises(ManifestError, match="k: image/mask dimension mismatch"):
            validate_manifest([rec])

    def test_missing_file(self, tmp_path):
        rec = make_pair(tmp_path, "a")
        rec["image"] = str(tmp_path / "ghost.png")
        with pytest.raises(ManifestError, match="file missing"):
            validate_manifest([rec])

    def test_aggregates_all_problems(self, tmp_path):
        r1 = make_pair(tmp_path, "a")
        r2 = make_pair(tmp_path, "a")
        r2["origin"] = "imagined"
        with pytest.raises(ManifestError) as exc:
            validate_manifest([r1, r2])
        assert len(exc.value.problems) == 2

    def test_roundtrip(self, tmp_path):
        records = [make_pair(tmp_path, "a")]
        p = tmp_path / "m.json"
        save_manifest(records, p)
        assert load_manifest(p) == records


class TestConfig:
    def test_hash_stable_under_key_order(self):
        a = config_from_dict(json.loads('{"tolerance": 3, "synth_count": 8}'))
        b = config_from_dict(json.loads('{"synth_count": 8, "tolerance": 3}'))
        assert a.hash() == b.hash()

    def test_hash_changes_with_content(self):
        a = config_from_dict({"tolerance": 3})
        b = config_from_dict({"tolerance": 2})
        assert a.hash() != b.hash()

    def test_unknown_field_reports_path(self):
        with pytest.raises(ConfigValidationError, match="config.mystery"):
            config_from_dict({"mystery": 1})

    def test_invalid_nested_field(self):
        with pytest.raises(ConfigValidationError, match="gan_train"):
            config_from_dict({"gan_train": {"batch_size": 0}})

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError):
            load_config(tmp_path / "none.json")

    def test_desk_scale_is_atomic(self):
        cfg = apply_desk_scale(PipelineConfig())
        assert cfg.gan_train.patch_size == 64
        assert cfg.generator.depth == 6
        assert cfg.generator.base_channels == 16
        assert cfg.segmenter.base_channels == 16
        assert cfg.maskgen.canvas == (64, 64)


class TestMontage:
    def test_layout_arithmetic(self, tmp_path):
        panels = [[np.zeros((16, 16)), np.ones((16, 16))]]
        img = montage(panels, tmp_path / "m.png")
        assert img.data.shape == (16, 2 * 16 + SEPARATOR)

    def test_row_cap(self, tmp_path):
        records = [make_pair(tmp_path, f"p{i:02}") for i in range(10)]
        img = preview_pairs(records, tmp_path / "m.png")
        rows = (img.data.shape[0] + SEPARATOR) // (32 + SEPARATOR)
        assert rows == MAX_ROWS

    def test_deterministic_output(self, tmp_path):
        records = [make_pair(tmp_path, "a"), make_pair(tmp_path, "b")]
        preview_pairs(records, tmp_path / "m1.png")
        preview_pairs(records, tmp_path / "m2.png")
        assert (tmp_path / "m1.png").read_bytes() == (tmp_path / "m2.png").read_bytes()

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            preview_pairs([], tmp_path / "m.png")


class TestCli:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert cli(["frobnicate"]) == EXIT_USAGE

    def test_masks_subcommand(self, tmp_path):
        rc = cli(
            ["--workdir", str(tmp_path), "--desk-scale", "--seed", "3", "masks", "-n", "5"]
        )
        assert rc == EXIT_OK
        masks = sorted((tmp_path / "masks").glob("mask_*.png"))
        assert len(masks) == 5
        records = load_manifest(tmp_path / "masks" / "manifest.json")
        assert len(records) == 5

    def test_eval_missing_checkpoint(self, tmp_path, capsys):
        rc = cli(["--workdir", str(tmp_path), "eval"])
        assert rc == EXIT_VALIDATION
        assert "checkpoint" in capsys.readouterr().err

    def test_invalid_config_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"gan_train": {"batch_size": 0}}')
        rc = cli(["--config", str(cfg), "--workdir", str(tmp_path), "masks", "-n", "1"])
        assert rc == EXIT_VALIDATION

    def test_validate_subcommand(self, tmp_path):
        records = [make_pair(tmp_path, "a")]
        save_manifest(records, tmp_path / "m.json")
        rc = cli(["validate", "--manifest", str(tmp_path / "m.json")])
        assert rc == EXIT_OK

    def test_preview_subcommand(self, tmp_path):
        records = [make_pair(tmp_path, "a")]
        save_manifest(records, tmp_path / "m.json")
        rc = cli(
            [
                "--workdir",
                str(tmp_path),
                "preview",
                "--manifest",
                str(tmp_path / "m.json"),
            ]
        )
        assert rc == EXIT_OK
        assert (tmp_path / "preview.png").exists()

    def test_workdir_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FILAGEN_WORKDIR", str(tmp_path / "wd"))
        rc = cli(["--desk-scale", "masks", "-n", "1"])
        assert rc == EXIT_OK
        assert (tmp_path / "wd" / "masks" / "mask_000000.png").exists()
