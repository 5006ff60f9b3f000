"""Finite-difference verification of analytic gradients.

All checks run in float64 with central differences (default eps 1e-3); the
reported figure per check is max_c |analytic_c - numeric_c| / denom, where
denom is the largest gradient magnitude seen among the checked coordinates
(floored at 1e-8). The suites cover every differentiable primitive, the DCT
packing ops, and a miniature instance of the full three-branch model with
all four loss terms and the discriminator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .dct import DctCoefficientMap, dct_map_to_image, image_to_dct_map
from .errors import UsageError
from .generator import Generator, micro_generator_config
from .losses import (Discriminator, DiscriminatorConfig, FeatureExtractor, LossWeights,
                     adversarial_losses, dct_loss, structure_loss, total_loss)

TOLERANCE = 1e-3
DEFAULT_EPS = 1e-3


@dataclass
class CheckResult:
    name: str
    max_rel_err: float

    def passed(self, tol: float = TOLERANCE) -> bool:
        return self.max_rel_err < tol


def check_leaves(f, leaves, eps: float = DEFAULT_EPS, samples: int | None = None,
                 seed: int = 0, freeze_branches: bool = False) -> float:
    """Compare backward() gradients of the scalar f() against central differences.

    ``f`` is re-evaluated with the leaf tensors' data perturbed in place, so it
    must be a pure function of those arrays. With ``samples`` set, only that
    many randomly chosen coordinates per leaf are differenced.

    ``freeze_branches`` records the piecewise ops' branch masks on the base
    evaluation and replays them during the difference evaluations. Reverse
    mode differentiates exactly that branch selection, and in a deep network
    some activation always sits close enough to a leaky_relu/abs kink that a
    +-eps stencil hops branches and the plain difference stops estimating the
    derivative at all. Freezing makes the probe measure the selected branch
    function. Mask construction itself is covered separately by the unfrozen
    per-op checks at kink-free points.
    """
    rng = np.random.default_rng(seed)
    for t in leaves:
        t.grad = None
    tape = ag.BranchTape()
    if freeze_branches:
        with ag.recording_branches(tape):
            out = f()
    else:
        out = f()
    if out.ndim != 0:
        raise UsageError("gradcheck target must be scalar")
    out.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in leaves]

    def evaluate():
        if freeze_branches:
            with ag.replaying_branches(tape):
                return float(f().data)
        return float(f().data)

    worst = 0.0
    for t, grad in zip(leaves, analytic):
        flat = t.data.reshape(-1)
        n = flat.size
        if samples is None or n <= samples:
            coords = np.arange(n)
        else:
            coords = np.sort(rng.choice(n, size=samples, replace=False))
        numeric = np.empty(len(coords))
        for j, c in enumerate(coords):
            orig = flat[c]
            flat[c] = orig + eps
            fp = evaluate()
            flat[c] = orig - eps
            fm = evaluate()
            flat[c] = orig
            numeric[j] = (fp - fm) / (2.0 * eps)
        picked = grad.reshape(-1)[coords]
        denom = max(np.abs(grad).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
        err = np.abs(picked - numeric).max(initial=0.0) / denom
        worst = max(worst, err)
    return worst


def check_function(f, arrays, eps: float = DEFAULT_EPS, samples: int | None = None,
                   seed: int = 0) -> float:
    """check_leaves for a plain function of float64 input arrays."""
    leaves = [Tensor(np.asarray(a, dtype=np.float64), requires_grad=True) for a in arrays]
    return check_leaves(lambda: f(*leaves), leaves, eps=eps, samples=samples, seed=seed)


def op_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []

    def run(name, f, *arrays, samples=None):
        results.append(CheckResult(name, check_function(f, arrays, samples=samples, seed=seed)))

    def proj(shape):
        # fixed random projection to a scalar; drawn once per check so the
        # differenced function stays pure, and catches permuted-output bugs
        # that a plain sum would miss
        p = Tensor(rng.standard_normal(shape))
        return lambda out: (out * p).sum()

    x = rng.standard_normal((2, 3, 6, 6))
    y = rng.standard_normal((2, 3, 6, 6))
    col = rng.standard_normal((2, 3, 1, 1))
    p366 = proj((2, 3, 6, 6))
    run("add_broadcast", lambda a, b: p366(a + b), x, col)
    run("sub", lambda a, b: p366(a - b), x, y)
    run("mul_broadcast", lambda a, b: p366(a * b), x, col)
    run("div", lambda a, b: p366(a / b), x, 2.0 + np.abs(y))
    run("neg_abs", lambda a: (-a).abs().sum(), 0.5 + np.abs(x))
    run("sum", lambda a: a.sum(), x)
    run("mean", lambda a: a.mean(), x)
    p_flat = proj((6, 36))
    run("reshape", lambda a: p_flat(a.reshape(6, 36)), x)

    w = rng.standard_normal((4, 3 * 5 * 5))
    b = rng.standard_normal(4)
    xin = rng.standard_normal((7, 3 * 5 * 5))
    p_lin = proj((7, 4))
    run("linear", lambda a, ww, bb: p_lin(ag.linear(a, ww, bb)), xin, w, b)

    img = rng.standard_normal((2, 3, 7, 7))
    k3 = rng.standard_normal((4, 3, 3, 3))
    kb = rng.standard_normal(4)
    p_c3 = proj((2, 4, 7, 7))
    run("conv2d_k3", lambda a, ww, bb: p_c3(ag.conv2d(a, ww, bb, padding=1)), img, k3, kb)
    p_s2 = proj((2, 4, 4, 4))
    run("conv2d_k3_s2", lambda a, ww, bb: p_s2(ag.conv2d(a, ww, bb, stride=2, padding=1)),
        img, k3, kb)
    k1 = rng.standard_normal((5, 3, 1, 1))
    p_k1 = proj((2, 5, 7, 7))
    run("conv2d_k1", lambda a, ww: p_k1(ag.conv2d(a, ww)), img, k1)

    dw = rng.standard_normal((3, 1, 3, 3))
    db = rng.standard_normal(3)
    p_dw = proj((2, 3, 7, 7))
    run("depthwise", lambda a, ww, bb: p_dw(ag.depthwise_conv2d(a, ww, bb)), img, dw, db)
    pw = rng.standard_normal((4, 3, 1, 1))
    p_sep = proj((2, 4, 7, 7))
    run("separable", lambda a, d, p: p_sep(ag.depthwise_separable_conv(a, d, p)), img, dw, pw)

    p55 = proj((3, 5, 5))
    away = (0.5 + np.abs(rng.standard_normal((3, 5, 5)))) \
        * np.sign(rng.standard_normal((3, 5, 5)) + 0.01)  # clear of the kink at 0
    run("leaky_relu", lambda a: p55(ag.leaky_relu(a, 0.2)), away)
    run("sigmoid", lambda a: p55(ag.sigmoid(a)), rng.standard_normal((3, 5, 5)))
    run("log", lambda a: p55(ag.log(a)), 0.5 + np.abs(rng.standard_normal((3, 5, 5))))
    run("clamp_interior", lambda a: p55(ag.clamp(a, -10.0, 10.0)),
        rng.standard_normal((3, 5, 5)))

    p_cat = proj((2, 6, 6, 6))
    run("concat", lambda a, b: p_cat(ag.concat([a, b], axis=-3)), x, y)
    p_gap = proj((2, 3))
    run("global_avg_pool", lambda a: p_gap(ag.global_avg_pool(a)), x)
    shuf = rng.standard_normal((2, 8, 3, 3))
    p_shuf = proj((2, 2, 6, 6))
    run("pixel_shuffle", lambda a: p_shuf(ag.pixel_shuffle(a, 2)), shuf)
    unshuf = rng.standard_normal((2, 2, 6, 6))
    p_unshuf = proj((2, 8, 3, 3))
    run("pixel_unshuffle", lambda a: p_unshuf(ag.pixel_unshuffle(a, 2)), unshuf)
    p_up = proj((2, 3, 12, 12))
    run("upsample_nearest", lambda a: p_up(ag.upsample_nearest(a, 2)), x)

    c = 6
    se_x = rng.standard_normal((2, c, 5, 5))
    w1 = rng.standard_normal((2, c))
    b1 = rng.standard_normal(2)
    w2 = rng.standard_normal((c, 2))
    b2 = rng.standard_normal(c)
    p_se = proj((2, c, 5, 5))
    run("squeeze_excite_gate", lambda a, p, q, r, s: p_se(
        ag.squeeze_excite_gate(a, p, q, r, s)), se_x, w1, b1, w2, b2)

    return results


def dct_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []

    img = rng.standard_normal((1, 16, 16))
    grid_proj = Tensor(rng.standard_normal((64, 2, 2)))
    results.append(CheckResult("dct_pack", check_function(
        lambda a: (image_to_dct_map(a, 8).grid * grid_proj).sum(), [img], seed=seed)))

    grid = rng.standard_normal((64, 2, 2))
    img_proj = Tensor(rng.standard_normal((1, 16, 16)))
    results.append(CheckResult("dct_unpack", check_function(
        lambda g: (dct_map_to_image(DctCoefficientMap(8, g, (16, 16))) * img_proj).sum(),
        [grid], seed=seed)))

    feats = rng.standard_normal((4, 16, 16))
    mix_w = rng.standard_normal((4, 5, 1, 1))
    fused_proj = Tensor(rng.standard_normal((4, 16, 16)))

    def fusion(g, f, w):
        spatial = dct_map_to_image(DctCoefficientMap(8, g, (16, 16)))
        mixed = ag.conv2d(ag.concat([f, spatial], axis=-3), w)
        return (mixed * fused_proj).sum()

    results.append(CheckResult("dct_fusion", check_function(fusion, [grid, feats, mix_w],
                                                            seed=seed)))
    return results


def model_suite(seed: int = 0, samples_per_param: int = 2) -> list[CheckResult]:
    """Full three-branch generator + discriminator + all four loss terms."""
    cfg = micro_generator_config()
    gen = Generator(cfg, seed=seed, dtype=np.float64)
    disc = Discriminator(DiscriminatorConfig(widths=(4, 4), strides=(2, 2), dense=8),
                         cfg.hr_size, seed=seed, dtype=np.float64)
    extractor = FeatureExtractor(channels=4, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)

    lr = Tensor(rng.standard_normal((3, cfg.lr_size, cfg.lr_size)))
    hr = Tensor(rng.standard_normal((3, cfg.hr_size, cfg.hr_size)))
    target = Tensor(rng.standard_normal((3, cfg.hr_size, cfg.hr_size)))
    g = cfg.lr_grid_size
    lr_map = DctCoefficientMap(cfg.block_size,
                               Tensor(rng.standard_normal((64, g, g))),
                               (cfg.lr_size, cfg.lr_size))
    hg = cfg.hr_grid_size
    target_map = DctCoefficientMap(cfg.block_size,
                                   Tensor(rng.standard_normal((64, hg, hg))),
                                   (cfg.hr_size, cfg.hr_size))
    weights = LossWeights(adversarial=0.5, dct=1.0, structure=1.0)

    def objective():
        out = gen.forward(lr, lr_map)
        diff = extractor(out.sr_image) - extractor(hr)
        l_feat = (diff * diff).mean()
        l_dct = dct_loss(out.dct_pred, target_map)
        l_struct = structure_loss(out.structure_image, target)
        d_real = disc(hr)
        d_fake = disc(out.sr_image)
        l_adv, d_loss = adversarial_losses(d_real, d_fake)
        return total_loss(l_feat, l_adv, l_dct, l_struct, weights) + d_loss

    leaves = gen.store.tensors() + disc.store.tensors()
    err = check_leaves(objective, leaves, samples=samples_per_param, seed=seed,
                       freeze_branches=True)
    return [CheckResult("three_branch_model", err)]


SUITES = {
    "ops": op_suite,
    "dct": dct_suite,
    "model": model_suite,
}


def run_suites(which: str = "all", seed: int = 0):
    """Run the selected suites; returns (results, all_passed)."""
    names = list(SUITES) if which == "all" else [which]
    for name in names:
        if name not in SUITES:
            raise UsageError(f"unknown gradcheck suite {which!r}; "
                             f"expected one of {['all'] + list(SUITES)}")
    results = []
    for name in names:
        results.extend(SUITES[name](seed))
    return results, all(r.passed() for r in results)
