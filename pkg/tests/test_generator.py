import numpy as np
import pytest

from freqface.autograd import Tensor, tensor
from freqface.dct import DctCoefficientMap
from freqface.errors import DimensionError, UsageError
from freqface.generator import (Generator, GeneratorConfig, ablation_config,
                                micro_generator_config, toy_generator_config)
from freqface.losses import structure_loss


def small_config(scale=4, hr_size=128, **kw):
    base = dict(scale=scale, hr_size=hr_size, channels=8, modules_per_stage=2,
                blocks_per_module=1, structure_blocks=1, freq_channels=8, freq_hidden=12)
    base.update(kw)
    return GeneratorConfig(**base)


def random_inputs(cfg, rng, batch=None):
    shape = (3, cfg.lr_size, cfg.lr_size)
    gshape = (64, cfg.lr_grid_size, cfg.lr_grid_size)
    if batch is not None:
        shape = (batch,) + shape
        gshape = (batch,) + gshape
    lr = tensor(rng.standard_normal(shape))
    grid = DctCoefficientMap(cfg.block_size, tensor(rng.standard_normal(gshape)),
                             (cfg.lr_size, cfg.lr_size))
    return lr, grid


class TestShapeContracts:
    def test_scale4_32_to_128(self, rng):
        cfg = small_config(scale=4)
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        out = gen.forward(lr, grid)
        assert out.sr_image.shape == (3, 128, 128)
        assert out.dct_pred.grid.shape == (64, 16, 16)
        assert out.structure_image.shape == (3, 128, 128)

    def test_scale8_16_to_128(self, rng):
        cfg = small_config(scale=8)
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        assert grid.grid.shape == (64, 2, 2)
        out = gen.forward(lr, grid)
        assert out.sr_image.shape == (3, 128, 128)
        assert out.dct_pred.grid.shape == (64, 16, 16)
        assert out.structure_image.shape == (3, 128, 128)

    def test_toy_preset_16_to_64(self, rng):
        cfg = toy_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        out = gen.forward(lr, grid)
        assert out.sr_image.shape == (3, 64, 64)
        assert out.dct_pred.grid.shape == (64, 8, 8)

    def test_batched_forward(self, rng):
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng, batch=2)
        out = gen.forward(lr, grid)
        assert out.sr_image.shape == (2, 3, 32, 32)
        assert out.dct_pred.grid.shape == (2, 64, 4, 4)

    def test_batched_matches_single(self, rng):
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng, batch=3)
        batched = gen.forward(lr, grid)
        for i in range(3):
            single = gen.forward(
                Tensor(lr.data[i]),
                DctCoefficientMap(cfg.block_size, Tensor(grid.grid.data[i]),
                                  grid.source_dims))
            np.testing.assert_allclose(batched.sr_image.data[i], single.sr_image.data,
                                       atol=1e-5)

    def test_config_validation(self):
        with pytest.raises(UsageError):
            GeneratorConfig(scale=3)
        with pytest.raises(UsageError):
            GeneratorConfig(scale=4, hr_size=100)

    def test_forward_validation(self, rng):
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        with pytest.raises(DimensionError):
            gen.forward(tensor(rng.standard_normal((3, 16, 16))))
        with pytest.raises(UsageError):
            gen.forward(tensor(rng.standard_normal((3, 8, 8))))  # missing coefficients
        lr, _ = random_inputs(cfg, rng)
        bad = DctCoefficientMap(8, tensor(rng.standard_normal((64, 2, 2))), (16, 16))
        with pytest.raises(DimensionError):
            gen.forward(lr, bad)


class TestAblations:
    @pytest.mark.parametrize("column", list("abcdef"))
    def test_all_columns_forward(self, rng, column):
        cfg = ablation_config(small_config(), column)
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        out = gen.forward(lr, grid if cfg.use_dct_branch else None)
        assert out.sr_image.shape == (3, 128, 128)
        assert (out.dct_pred is not None) == cfg.use_dct_branch
        assert (out.structure_image is not None) == cfg.use_structure_branch

    def test_unknown_column_rejected(self):
        with pytest.raises(UsageError):
            ablation_config(small_config(), "z")

    def test_structure_off_leaves_sr_bit_identical(self, rng):
        cfg_on = small_config()
        cfg_off = small_config(use_structure_branch=False)
        lr, grid = random_inputs(cfg_on, rng)
        sr_on = Generator(cfg_on, seed=5).forward(lr, grid).sr_image.data
        sr_off = Generator(cfg_off, seed=5).forward(lr, grid).sr_image.data
        np.testing.assert_array_equal(sr_on, sr_off)

    def test_dct_branch_off_shares_trunk_parameters(self):
        gen_on = Generator(small_config(), seed=5)
        gen_off = Generator(small_config(use_dct_branch=False), seed=5)
        for name, t in gen_off.store.items():
            np.testing.assert_array_equal(t.data, gen_on.store[name].data)

    def test_identity_fusion_reproduces_branchless_forward(self, rng):
        # fusion conv set to [I | 0] with zero bias passes features through:
        # the fused forward must equal the dct-branch-off forward exactly
        cfg_on = small_config()
        gen_on = Generator(cfg_on, seed=5)
        c = cfg_on.channels
        mix = np.zeros((c, c + 1, 1, 1), np.float32)
        mix[np.arange(c), np.arange(c)] = 1.0
        gen_on.store["fusion.mix.w"].data = mix
        gen_on.store["fusion.mix.b"].data = np.zeros(c, np.float32)
        gen_off = Generator(small_config(use_dct_branch=False), seed=5)
        lr, grid = random_inputs(cfg_on, rng)
        sr_on = gen_on.forward(lr, grid).sr_image.data
        sr_off = gen_off.forward(lr, None).sr_image.data
        assert np.abs(sr_on - sr_off).max() <= 1e-6


class TestGradientFlow:
    def test_dct_branch_receives_gradient_through_fusion(self, rng):
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        out = gen.forward(lr, grid)
        out.sr_image.sum().backward()
        for name in gen.store.names():
            if name.startswith("freq."):
                g = gen.store[name].grad
                assert g is not None and np.abs(g).max() > 0, f"no gradient into {name}"

    def test_structure_loss_reaches_shared_trunk(self, rng):
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        out = gen.forward(lr, grid)
        target = tensor(rng.standard_normal((3, 32, 32)))
        structure_loss(out.structure_image, target).backward()
        stem = gen.store["trunk.stem.w"]
        assert stem.grad is not None and np.abs(stem.grad).max() > 0

    def test_encoder_parameter_sensitivity(self, rng):
        # perturbing any coefficient-branch parameter tensor must change the
        # output grid (no dead path)
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        base = gen.forward(lr, grid).dct_pred.grid.data.copy()
        for name in gen.store.names():
            if not name.startswith("freq."):
                continue
            t = gen.store[name]
            t.data = t.data + np.float32(0.05)
            changed = gen.forward(lr, grid).dct_pred.grid.data
            t.data = t.data - np.float32(0.05)
            assert np.abs(changed - base).max() > 0, f"dead parameter {name}"


class TestDeterminism:
    def test_same_seed_same_parameters(self):
        a = Generator(micro_generator_config(), seed=9)
        b = Generator(micro_generator_config(), seed=9)
        for name in a.store.names():
            np.testing.assert_array_equal(a.store[name].data, b.store[name].data)

    def test_forward_bit_identical(self, rng):
        cfg = micro_generator_config()
        gen = Generator(cfg, seed=0)
        lr, grid = random_inputs(cfg, rng)
        a = gen.forward(lr, grid).sr_image.data
        b = gen.forward(lr, grid).sr_image.data
        np.testing.assert_array_equal(a, b)
