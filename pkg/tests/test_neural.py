import math

import numpy as np
import pytest
import torch

from filagen import neural
from filagen.neural import (
    ConfigError,
    DiscriminatorConfig,
    GeneratorConfig,
    LossWeights,
    SegmenterConfig,
    adversarial_losses,
    build_discriminator,
    build_generator,
    build_segmenter,
    generator_objective,
    l1_loss,
    struct_loss,
)
from filagen.skeleton import MorphParams


class TestGenerator:
    def test_shape_preserved_256(self):
        gen = build_generator(GeneratorConfig(depth=8, base_channels=4))
        out = gen(torch.randn(1, 1, 256, 256))
        assert out.shape == (1, 1, 256, 256)

    def test_output_in_unit_interval(self):
        gen = build_generator(GeneratorConfig(depth=6, base_channels=4))
        out = gen(torch.randn(2, 1, 64, 64) * 10)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_indivisible_input_rejected(self):
        gen = build_generator(GeneratorConfig(depth=8, base_channels=4))
        with pytest.raises(ConfigError):
            gen(torch.randn(1, 1, 64, 64))

    def test_bottleneck_is_1x1_at_full_depth(self):
        gen = build_generator(GeneratorConfig(depth=8, base_channels=4))
        feats = []
        x = torch.randn(1, 1, 256, 256)
        for down in gen.downs:
            x = down(x)
            feats.append(x.shape)
        assert feats[-1][-2:] == (1, 1)

    def test_channel_cap_at_8x_base(self):
        gen = build_generator(GeneratorConfig(depth=8, base_channels=8))
        widths = [blk[0].out_channels for blk in gen.downs]
        assert max(widths) == 64
        assert widths[:4] == [8, 16, 32, 64]


class TestDiscriminator:
    def test_grid_256_is_30x30(self):
        d = build_discriminator(DiscriminatorConfig(base_channels=4))
        out = d(torch.randn(1, 1, 256, 256), torch.randn(1, 1, 256, 256))
        assert out.shape == (1, 1, 30, 30)

    def test_grid_128_is_14x14(self):
        d = build_discriminator(DiscriminatorConfig(base_channels=4))
        out = d(torch.randn(1, 1, 128, 128), torch.randn(1, 1, 128, 128))
        assert out.shape == (1, 1, 14, 14)

    def test_first_layer_sees_two_channels(self):
        d = build_discriminator(DiscriminatorConfig())
        assert d.net[0].in_channels == 2


class TestSegmenter:
    def test_shape_and_range(self):
        seg = build_segmenter(SegmenterConfig(depth=4, base_channels=4))
        out = seg(torch.randn(1, 1, 64, 64))
        assert out.shape == (1, 1, 64, 64)
        assert out.min() > 0.0 and out.max() < 1.0

    def test_zero_weights_give_half(self):
        seg = build_segmenter(SegmenterConfig(depth=2, base_channels=4))
        with torch.no_grad():
            for p in seg.parameters():
                p.zero_()
        out = seg(torch.randn(1, 1, 16, 16))
        assert torch.allclose(out, torch.full_like(out, 0.5))

    def test_depth4_downsamples_by_16(self):
        seg = build_segmenter(SegmenterConfig(depth=4, base_channels=4))
        with pytest.raises(ConfigError):
            seg(torch.randn(1, 1, 24, 24))  # not divisible by 2^4


class TestAdversarialLosses:
    def test_zero_logits(self):
        z = torch.zeros(2, 1, 4, 4, dtype=torch.float64)
        loss_d, loss_g = adversarial_losses(z, z)
        assert loss_d.item() == pytest.approx(2 * math.log(2), abs=1e-12)
        assert loss_g.item() == pytest.approx(math.log(2), abs=1e-12)

    def test_perfect_discriminator_limit(self):
        big = torch.full((1, 1, 3, 3), 50.0)
        loss_d, _ = adversarial_losses(big, -big)
        assert loss_d.item() < 1e-8

    def test_generator_loss_monotone_in_fake_logit(self):
        d_fake = torch.linspace(-3, 3, 7)
        losses = [
            adversarial_losses(torch.zeros(1), v.reshape(1))[1].item() for v in d_fake
        ]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adversarial_losses(torch.zeros(2, 2), torch.zeros(3, 3))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(0)
        logits = torch.from_numpy(rng.normal(size=(8, 8))).requires_grad_(True)
        loss_d, _ = adversarial_losses(torch.zeros(8, 8, dtype=torch.float64), logits)
        loss_d.backward()
        h = 1e-6
        for idx in [(0, 0), (3, 5)]:
            lp = logits.detach().clone()
            lp[idx] += h
            lm = logits.detach().clone()
            lm[idx] -= h
            fd = (
                adversarial_losses(torch.zeros(8, 8, dtype=torch.float64), lp)[0]
                - adversarial_losses(torch.zeros(8, 8, dtype=torch.float64), lm)[0]
            ).item() / (2 * h)
            assert logits.grad[idx].item() == pytest.approx(fd, rel=1e-3)


class TestL1Loss:
    def test_identical(self):
        x = torch.rand(2, 1, 8, 8)
        assert l1_loss(x, x).item() == 0.0

    def test_constant_offset(self):
        y = torch.full((1, 1, 4, 4), 0.3, dtype=torch.float64)
        assert l1_loss(y, y + 0.1).item() == pytest.approx(0.1, abs=1e-12)

    def test_single_pixel_extremes(self):
        assert l1_loss(torch.zeros(1, 1, 1, 1), torch.ones(1, 1, 1, 1)).item() == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            l1_loss(torch.zeros(2, 2), torch.zeros(2, 3))


class TestStructLoss:
    PARAMS = MorphParams(soft_iterations=3)

    def test_identical_inputs(self):
        x = torch.rand(1, 1, 16, 16, dtype=torch.float64)
        assert struct_loss(x, x, self.PARAMS).item() == 0.0

    def test_disjoint_shifted_bars(self):
        # two width-3 bars whose skeletons are disjoint length-L lines
        y = torch.zeros(1, 1, 32, 32, dtype=torch.float64)
        y[..., 4:7, 6:26] = 1.0
        g = torch.zeros_like(y)
        g[..., 14:17, 6:26] = 1.0
        val = struct_loss(y, g, MorphParams(soft_iterations=5)).item()
        # skeletons: hard thin of width-3 bars = centerline; soft version of a
        # bar yields its centerline away from the ends; disjoint supports sum
        from filagen.skeleton import soft_binarize_t, soft_skeleton_t

        sy = soft_skeleton_t(soft_binarize_t(y, 50.0, 0.5), 5)
        sg = soft_skeleton_t(soft_binarize_t(g, 50.0, 0.5), 5)
        expect = (sy.sum() + sg.sum()).item() / y.numel()
        assert val == pytest.approx(expect, rel=1e-9)

    def test_gradient_nonzero_near_mismatch(self):
        y = torch.zeros(1, 1, 16, 16, dtype=torch.float64)
        y[..., 7, 2:14] = 1.0
        # g carries a bar shifted away from y's, soft enough to pass gradient
        g = torch.full((1, 1, 16, 16), 0.35, dtype=torch.float64)
        g[..., 3, 2:14] = 0.65
        g.requires_grad_(True)
        struct_loss(y, g, self.PARAMS).backward()
        assert g.grad.abs().sum() > 0


class TestGeneratorObjective:
    def test_paper_weight_arithmetic(self):
        w = LossWeights(lambda_l1=50.0, lambda_s=5.0)
        total = generator_objective(0.6931, 0.02, 0.004, w)
        assert total == pytest.approx(0.6931 + 1.0 + 0.02, abs=1e-12)

    def test_zero_weights_identity(self):
        w = LossWeights(lambda_l1=0.0, lambda_s=0.0)
        assert generator_objective(1.23, 9.0, 9.0, w) == 1.23

    def test_linearity_identity(self):
        w = LossWeights(lambda_l1=50.0, lambda_s=5.0)
        a, l, s = 0.37, 0.011, 0.0021
        assert generator_objective(a, l, s, w) == a + 50.0 * l + 5.0 * s

    def test_negative_weights_rejected(self):
        with pytest.raises(ConfigError):
            LossWeights(lambda_l1=-1.0)


class TestCheckpoints:
    def test_roundtrip(self, tmp_path):
        gen = build_generator(GeneratorConfig(depth=4, base_channels=4))
        p = tmp_path / "g.pt"
        neural.save_checkpoint(p, gen, "generator", step=17, seed=3)
        loaded, header = neural.load_checkpoint(p)
        assert header["step"] == 17 and header["seed"] == 3
        assert header["format_version"] == neural.CHECKPOINT_FORMAT_VERSION
        x = torch.randn(1, 1, 16, 16)
        gen.eval()
        assert torch.allclose(gen(x), loaded(x))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            neural.load_checkpoint(tmp_path / "none.pt")

    def test_header_is_canonical_json(self, tmp_path):
        gen = build_generator(GeneratorConfig(depth=4, base_channels=4))
        p = tmp_path / "g.pt"
        neural.save_checkpoint(p, gen, "generator", step=0, seed=0)
        import json

        raw = p.with_suffix(".pt.json").read_text()
        assert raw == json.dumps(
            json.loads(raw), sort_keys=True, separators=(",", ":")
        ) + "\n"
