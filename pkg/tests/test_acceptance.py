"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. The overfit smoke test
(criterion 7) trains the toy preset for several minutes; everything else is
fast.
"""
import contextlib
import os
import shutil
import time

import numpy as np
import pytest

from conftest import micro_run_config
from freqface import gradcheck, training
from freqface.autograd import tensor
from freqface.dataset import prepare_data
from freqface.dct import DctCoefficientMap, dct_block, idct_block
from freqface.generator import Generator, GeneratorConfig, ablation_config
from freqface.losses import LossWeights, dct_loss, structure_loss, total_loss
from freqface.metrics import psnr, ssim
from freqface.params import same_files
from freqface.training import evaluate, overfit_run_config, train
from test_metrics import ssim_reference


@contextlib.contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {number} {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {number} {name}: PASS")


def test_criterion_1_gradient_suite():
    with criterion(1, "gradient suite"):
        t0 = time.monotonic()
        results, ok = gradcheck.run_suites("all", seed=0)
        elapsed = time.monotonic() - t0
        worst = max(r.max_rel_err for r in results)
        assert ok, {r.name: r.max_rel_err for r in results if not r.passed()}
        assert worst < 1e-3
        assert elapsed < 120.0, f"gradient suite took {elapsed:.1f}s"


def test_criterion_2_dct_fidelity(rng):
    with criterion(2, "dct fidelity"):
        worst_roundtrip = 0.0
        worst_parseval = 0.0
        for _ in range(100):
            block = rng.standard_normal((8, 8))
            coeffs = dct_block(block)
            worst_roundtrip = max(worst_roundtrip,
                                  np.abs(idct_block(coeffs) - block).max())
            energy = np.sum(block * block)
            worst_parseval = max(worst_parseval,
                                 abs(np.sum(coeffs * coeffs) - energy) / energy)
        assert worst_roundtrip < 1e-6
        assert worst_parseval < 1e-6
        for value in (1.0, -0.37, 42.5):
            coeffs = dct_block(np.full((8, 8), value))
            assert abs(coeffs[0, 0] - 8 * value) < 1e-9 * max(1.0, abs(value))
            coeffs[0, 0] = 0.0
            assert np.abs(coeffs).max() < 1e-12 * max(1.0, abs(value))


def test_criterion_3_loss_oracles(rng):
    with criterion(3, "loss oracles"):
        a = rng.standard_normal((64, 4, 4))
        b = rng.standard_normal((64, 4, 4))
        loss = float(dct_loss(
            DctCoefficientMap(8, tensor(a, dtype=np.float64), (32, 32)),
            DctCoefficientMap(8, tensor(b, dtype=np.float64), (32, 32))).data)
        brute = sum(abs(a[c, i, j] - b[c, i, j])
                    for c in range(64) for i in range(4) for j in range(4))
        assert abs(loss - brute / a.size) < 1e-12

        pa = rng.standard_normal((3, 8, 8))
        pb = rng.standard_normal((3, 8, 8))
        loss = float(structure_loss(tensor(pa, dtype=np.float64),
                                    tensor(pb, dtype=np.float64)).data)
        brute = sum(abs(pa[c, i, j] - pb[c, i, j])
                    for c in range(3) for i in range(8) for j in range(8))
        assert abs(loss - brute / pa.size) < 1e-12

        parts = [tensor(np.array(v), dtype=np.float64)
                 for v in rng.uniform(0.2, 3.0, size=4)]
        feat, adv, dct, struct = parts

        def total(wa, wb, wc):
            return float(total_loss(feat, adv, dct, struct,
                                    LossWeights(wa, wb, wc)).data)

        base = total(0.0, 0.0, 0.0)
        recovered_alpha = (total(1.0, 0.0, 0.0) - base) / float(adv.data)
        recovered_beta = (total(0.0, 1.0, 0.0) - base) / float(dct.data)
        recovered_gamma = (total(0.0, 0.0, 1.0) - base) / float(struct.data)
        assert abs(recovered_alpha - 1.0) < 1e-6
        assert abs(recovered_beta - 1.0) < 1e-6
        assert abs(recovered_gamma - 1.0) < 1e-6


def test_criterion_4_metric_oracles(rng):
    with criterion(4, "metric oracles"):
        a = rng.integers(0, 255, (1, 24, 24)).astype(np.float64)
        assert abs(psnr(a, a + 1.0) - 48.1308) < 1e-3
        x = rng.uniform(0, 255, (20, 20))
        assert ssim(x, x) == 1.0
        y = np.clip(x + rng.normal(0, 25, x.shape), 0, 255)
        assert abs(ssim(x, y) - ssim_reference(x, y)) < 1e-6


def test_criterion_5_shape_algebra(rng):
    with criterion(5, "shape algebra"):
        small = dict(channels=8, modules_per_stage=2, blocks_per_module=1,
                     structure_blocks=1, freq_channels=8, freq_hidden=12)
        for scale, lr_size, grid in ((4, 32, 4), (8, 16, 2)):
            cfg = GeneratorConfig(scale=scale, hr_size=128, **small)
            gen = Generator(cfg, seed=0)
            lr = tensor(rng.standard_normal((3, lr_size, lr_size)))
            lr_map = DctCoefficientMap(
                8, tensor(rng.standard_normal((64, grid, grid))), (lr_size, lr_size))
            out = gen.forward(lr, lr_map)
            assert out.sr_image.shape == (3, 128, 128)
            assert out.dct_pred.grid.shape == (64, 16, 16)
            assert out.structure_image.shape == (3, 128, 128)
        base = GeneratorConfig(scale=4, hr_size=128, **small)
        for column in "abcdef":
            cfg = ablation_config(base, column)
            gen = Generator(cfg, seed=0)
            lr = tensor(rng.standard_normal((3, 32, 32)))
            lr_map = DctCoefficientMap(
                8, tensor(rng.standard_normal((64, 4, 4))), (32, 32))
            out = gen.forward(lr, lr_map if cfg.use_dct_branch else None)
            assert out.sr_image.shape == (3, 128, 128)


def test_criterion_6_morphable_model(rng):
    with criterion(6, "morphable model"):
        from freqface.morphable import make_synthetic_model, render_target, sample_shape
        model = make_synthetic_model(seed=21)
        np.testing.assert_array_equal(sample_shape(model, np.zeros(8)), model.mean)
        gamma = np.zeros(8)
        gamma[0] = 1.0
        np.testing.assert_allclose(sample_shape(model, gamma),
                                   model.mean + model.sigmas[0] * model.components[0],
                                   atol=1e-12)
        flat = model.components.reshape(8, -1)
        assert np.abs(flat @ flat.T - np.eye(8)).max() < 1e-6
        img = rng.uniform(0.0, 0.8, (3, 128, 128)).astype(np.float32)
        pts = np.stack([rng.uniform(0, 127, 40), rng.uniform(0, 127, 40)], axis=1)
        distinct = {(int(np.floor(u + 0.5)), int(np.floor(v + 0.5))) for u, v in pts}
        target = render_target(img, pts)
        changed = int((target.image != img).any(axis=0).sum())
        assert changed == len(distinct)
        assert len(target.points) == len(pts)


@pytest.fixture(scope="module")
def overfit_dataset(tmp_path_factory):
    data_dir = str(tmp_path_factory.mktemp("overfit_data"))
    prepare_data(None, data_dir, scale=4, seed=5, hr_size=64, synthetic=4)
    return data_dir


def test_criterion_7_overfit_smoke(overfit_dataset, tmp_path):
    with criterion(7, "overfit smoke"):
        out_dir = str(tmp_path / "run")
        cfg = overfit_run_config(overfit_dataset, out_dir, steps=400, seed=3,
                                 checkpoint_interval=0)
        assert cfg.adv_weight == 0.0 and cfg.batch_size == 4 and cfg.steps <= 2000
        t0 = time.monotonic()
        train(cfg)
        elapsed = time.monotonic() - t0
        log = open(os.path.join(out_dir, training.LOG_NAME)).read().splitlines()[1:]
        first_dct = float(log[0].split(",")[3])
        final_dct = float(log[-1].split(",")[3])
        assert final_dct < 0.25 * first_dct, (
            f"coefficient loss only fell to {final_dct / first_dct:.2f} of initial")
        rows = evaluate(os.path.join(out_dir, training.FINAL_CHECKPOINT), overfit_dataset)
        mean = rows[-1]
        assert mean["psnr"] >= mean["bicubic_psnr"] + 0.5, (
            f"model {mean['psnr']:.2f} dB vs bicubic {mean['bicubic_psnr']:.2f} dB")
        assert elapsed < 900.0, f"overfit run took {elapsed:.0f}s"
        print(f"\n  overfit: dct {final_dct / first_dct:.3f} of initial, "
              f"psnr {mean['psnr']:.2f} vs bicubic {mean['bicubic_psnr']:.2f} dB "
              f"({elapsed:.0f}s, {cfg.steps} steps)")


def _checkpoint_bytes(path):
    return {name: open(os.path.join(path, name), "rb").read()
            for name in sorted(os.listdir(path))}


def test_criterion_8_determinism(micro_dataset, tmp_path):
    with criterion(8, "determinism"):
        out_dir = str(tmp_path / "run")
        cfg = micro_run_config(micro_dataset, out_dir, steps=4)

        # two complete runs with identical seed/config/data, same out_dir
        train(cfg)
        final = os.path.join(out_dir, training.FINAL_CHECKPOINT)
        kept = str(tmp_path / "first_final")
        shutil.copytree(final, kept)
        csv_a = str(tmp_path / "a.csv")
        evaluate(final, micro_dataset, out_csv=csv_a)
        shutil.rmtree(out_dir)
        train(cfg)
        assert _checkpoint_bytes(final) == _checkpoint_bytes(kept)
        csv_b = str(tmp_path / "b.csv")
        evaluate(final, micro_dataset, out_csv=csv_b)
        assert same_files(csv_a, csv_b)

        # resume must continue the identical byte stream
        shutil.rmtree(out_dir)
        part = micro_run_config(micro_dataset, out_dir, steps=2)
        train(part)
        resumed = micro_run_config(micro_dataset, out_dir, steps=4)
        train(resumed, resume_from=final)
        assert _checkpoint_bytes(final) == _checkpoint_bytes(kept)
