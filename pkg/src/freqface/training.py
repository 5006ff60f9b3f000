"""Alternating GAN training loop, checkpointing, inference and evaluation.

Everything is bit-reproducible: the run seed plus the step counter derive all
batch sampling (a fresh counter-based generator per step), so resuming from a
checkpoint continues the exact byte stream an uninterrupted run would have
produced. Checkpoints are manifest+blob parameter stores plus the flat-text
config snapshot and step counter.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from . import imaging, metrics
from .autograd import Tensor
from .dataset import Dataset, load_dataset, lr_coefficient_grid, read_index
from .dct import DctCoefficientMap
from .errors import DimensionError, NumericError, TrainingDiverged, UsageError
from .generator import Generator, GeneratorConfig
from .losses import (Discriminator, DiscriminatorConfig, FeatureExtractor, LossWeights,
                     adversarial_losses, dct_loss, structure_loss, total_loss)
from .params import load_arrays, save_arrays

log = logging.getLogger(__name__)

LOG_NAME = "train_log.csv"
LOG_HEADER = "step,feature,adversarial,dct,structure,total,discriminator\n"
FINAL_CHECKPOINT = "checkpoint_final"
DIAGNOSTIC_CHECKPOINT = "checkpoint_diagnostic"

# Fields a resumed run may legitimately change.
RESUME_MUTABLE = {"steps", "out_dir", "data_dir", "checkpoint_interval"}


@dataclass
class RunConfig:
    """Flat training configuration; all defaults follow the reference recipe
    where it states them (batch 8, Adam 0.9/0.999, lr 1e-4, scales 4/8)."""

    data_dir: str = ""
    out_dir: str = ""
    steps: int = 1000
    seed: int = 0
    checkpoint_interval: int = 0
    batch_size: int = 8
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    adv_weight: float = 1e-3
    dct_weight: float = 1.0
    structure_weight: float = 1.0
    scale: int = 4
    hr_size: int = 128
    channels: int = 64
    modules_per_stage: int = 5
    blocks_per_module: int = 5
    structure_blocks: int = 5
    expansion: int = 3
    reduction: int = 24
    slope: float = 0.2
    block_size: int = 8
    freq_channels: int = 64
    freq_hidden: int = 128
    progressive: bool = True
    use_channel_attention: bool = True
    use_dct_branch: bool = True
    use_structure_branch: bool = True
    disc_widths: tuple[int, ...] = (16, 32, 64, 64)
    disc_strides: tuple[int, ...] = (2, 2, 2, 2)
    disc_dense: int = 64

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            scale=self.scale, hr_size=self.hr_size, channels=self.channels,
            modules_per_stage=self.modules_per_stage,
            blocks_per_module=self.blocks_per_module,
            structure_blocks=self.structure_blocks, expansion=self.expansion,
            reduction=self.reduction, slope=self.slope, block_size=self.block_size,
            freq_channels=self.freq_channels, freq_hidden=self.freq_hidden,
            progressive=self.progressive,
            use_channel_attention=self.use_channel_attention,
            use_dct_branch=self.use_dct_branch,
            use_structure_branch=self.use_structure_branch)

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(widths=tuple(self.disc_widths),
                                   strides=tuple(self.disc_strides),
                                   dense=self.disc_dense, slope=self.slope)

    def weights(self) -> LossWeights:
        return LossWeights(adversarial=self.adv_weight, dct=self.dct_weight,
                           structure=self.structure_weight)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name}={text}\n")
        return "".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in known:
                raise UsageError(f"config line {lineno}: unknown key {key!r}")
            values[key] = _parse_field(known[key], raw)
        return cls(**values)


def _parse_field(f, raw: str):
    base = f.type if isinstance(f.type, type) else str(f.type)
    if base is bool or base == "bool":
        if raw not in ("true", "false"):
            raise UsageError(f"{f.name}: expected true/false, got {raw!r}")
        return raw == "true"
    if base is int or base == "int":
        return int(raw)
    if base is float or base == "float":
        return float(raw)
    if "tuple" in str(base):
        return tuple(int(v) for v in raw.split(",")) if raw else ()
    return raw


def load_config(path: str) -> RunConfig:
    with open(path) as f:
        return RunConfig.from_text(f.read())


def toy_run_config(scale: int = 4, **overrides) -> RunConfig:
    """CI-sized preset: halved widths, two stacks per stage, 64px targets."""
    cfg = RunConfig(scale=scale, hr_size=64, channels=32, modules_per_stage=2,
                    freq_channels=32, freq_hidden=64,
                    disc_widths=(8, 16, 32, 32), disc_dense=32)
    return dataclasses.replace(cfg, **overrides)


def overfit_run_config(data_dir: str, out_dir: str, **overrides) -> RunConfig:
    """Smoke-test preset: toy widths, tiny batch, no adversarial term, hot lr."""
    cfg = toy_run_config(data_dir=data_dir, out_dir=out_dir, batch_size=4,
                         adv_weight=0.0, learning_rate=1e-3, steps=600)
    return dataclasses.replace(cfg, **overrides)


# -- optimizer ------------------------------------------------------------------

def adam_step(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
              lr: float, beta1: float, beta2: float, eps: float, t: int):
    """Standard bias-corrected Adam update, in place, in the arrays' dtype."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Per-parameter-store Adam state."""

    def __init__(self, store, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.store = store
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, t: int):
        for name, p in self.store.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            adam_step(p.data, grad, self.m[name], self.v[name],
                      self.lr, self.beta1, self.beta2, self.eps, t)


# -- training state and checkpoints ----------------------------------------------

@dataclass
class TrainingState:
    config: RunConfig
    generator: Generator
    discriminator: Discriminator
    g_opt: Adam
    d_opt: Adam
    step: int = 0


def build_state(cfg: RunConfig) -> TrainingState:
    gen = Generator(cfg.generator_config(), seed=cfg.seed)
    disc = Discriminator(cfg.discriminator_config(), cfg.hr_size, seed=cfg.seed)
    return TrainingState(
        config=cfg, generator=gen, discriminator=disc,
        g_opt=Adam(gen.store, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
        d_opt=Adam(disc.store, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
        step=0)


def save_checkpoint(state: TrainingState, ckpt_dir: str):
    os.makedirs(ckpt_dir, exist_ok=True)
    with open(os.path.join(ckpt_dir, "config.txt"), "w") as f:
        f.write(state.config.to_text())
    with open(os.path.join(ckpt_dir, "state.txt"), "w") as f:
        f.write(f"step={state.step}\n")
    save_arrays(os.path.join(ckpt_dir, "generator"), state.generator.store.state_arrays())
    save_arrays(os.path.join(ckpt_dir, "generator_adam_m"), state.g_opt.m)
    save_arrays(os.path.join(ckpt_dir, "generator_adam_v"), state.g_opt.v)
    save_arrays(os.path.join(ckpt_dir, "discriminator"), state.discriminator.store.state_arrays())
    save_arrays(os.path.join(ckpt_dir, "discriminator_adam_m"), state.d_opt.m)
    save_arrays(os.path.join(ckpt_dir, "discriminator_adam_v"), state.d_opt.v)


def load_checkpoint(ckpt_dir: str) -> TrainingState:
    with open(os.path.join(ckpt_dir, "config.txt")) as f:
        cfg = RunConfig.from_text(f.read())
    state = build_state(cfg)
    state.generator.store.load_state(load_arrays(os.path.join(ckpt_dir, "generator")))
    state.discriminator.store.load_state(load_arrays(os.path.join(ckpt_dir, "discriminator")))
    state.g_opt.m = load_arrays(os.path.join(ckpt_dir, "generator_adam_m"))
    state.g_opt.v = load_arrays(os.path.join(ckpt_dir, "generator_adam_v"))
    state.d_opt.m = load_arrays(os.path.join(ckpt_dir, "discriminator_adam_m"))
    state.d_opt.v = load_arrays(os.path.join(ckpt_dir, "discriminator_adam_v"))
    with open(os.path.join(ckpt_dir, "state.txt")) as f:
        for line in f:
            key, _, value = line.strip().partition("=")
            if key == "step":
                state.step = int(value)
    return state


def _check_resume_config(saved: RunConfig, requested: RunConfig):
    for f in fields(RunConfig):
        if f.name in RESUME_MUTABLE:
            continue
        if getattr(saved, f.name) != getattr(requested, f.name):
            raise UsageError(
                f"resume config mismatch on {f.name!r}: checkpoint has "
                f"{getattr(saved, f.name)!r}, requested {getattr(requested, f.name)!r}")


# -- the loop ---------------------------------------------------------------------

def _mse(a: Tensor, b: Tensor) -> Tensor:
    d = a - b
    return (d * d).mean()


def train(cfg: RunConfig, resume_from: str | None = None) -> TrainingState:
    if not cfg.data_dir:
        raise UsageError("data_dir is required")
    if not cfg.out_dir:
        raise UsageError("out_dir is required")
    ds = load_dataset(cfg.data_dir, cfg.block_size)
    if ds.hr.shape[-1] != cfg.hr_size:
        raise DimensionError(
            f"dataset images are {ds.hr.shape[-1]}px but config expects {cfg.hr_size}px")
    os.makedirs(cfg.out_dir, exist_ok=True)

    if resume_from is not None:
        state = load_checkpoint(resume_from)
        _check_resume_config(state.config, cfg)
        state.config = cfg
        log.info("resumed from %s at step %d", resume_from, state.step)
    else:
        state = build_state(cfg)

    extractor = FeatureExtractor()
    hr_features = extractor(Tensor(ds.hr)).data  # frozen targets, computed once
    weights = cfg.weights()

    log_path = os.path.join(cfg.out_dir, LOG_NAME)
    append = resume_from is not None and os.path.exists(log_path)
    log_file = open(log_path, "a" if append else "w")
    if not append:
        log_file.write(LOG_HEADER)

    try:
        while state.step < cfg.steps:
            step = state.step + 1
            idx = np.random.default_rng([cfg.seed, step]).integers(0, len(ds), size=cfg.batch_size)
            lr_t = Tensor(ds.lr[idx])
            hr_t = Tensor(ds.hr[idx])
            lr_size = _lr_size(cfg)
            lr_map = DctCoefficientMap(cfg.block_size, Tensor(ds.lr_grids[idx]),
                                       (lr_size, lr_size))

            try:
                row = _train_step(state, ds, idx, lr_t, hr_t, lr_map, hr_features,
                                  extractor, weights, step)
            except NumericError as exc:
                save_checkpoint(state, os.path.join(cfg.out_dir, DIAGNOSTIC_CHECKPOINT))
                raise TrainingDiverged(
                    f"non-finite values at step {step}: {exc}; diagnostic checkpoint written")

            state.step = step
            log_file.write(row)
            if cfg.checkpoint_interval > 0 and step % cfg.checkpoint_interval == 0:
                save_checkpoint(state, os.path.join(cfg.out_dir, f"checkpoint_{step:07d}"))
    finally:
        log_file.close()

    save_checkpoint(state, os.path.join(cfg.out_dir, FINAL_CHECKPOINT))
    return state


def _train_step(state: TrainingState, ds: Dataset, idx, lr_t, hr_t, lr_map,
                hr_features, extractor, weights, step: int) -> str:
    cfg = state.config
    gen, disc = state.generator, state.discriminator

    # generator phase
    gen.store.zero_grads()
    disc.store.zero_grads()
    out = gen.forward(lr_t, lr_map)
    l_feat = _mse(extractor(out.sr_image), Tensor(hr_features[idx]))
    l_dct = None
    if out.dct_pred is not None:
        target_map = DctCoefficientMap(cfg.block_size, Tensor(ds.hr_grids[idx]),
                                       (cfg.hr_size, cfg.hr_size))
        l_dct = dct_loss(out.dct_pred, target_map)
    l_struct = None
    if out.structure_image is not None:
        l_struct = structure_loss(out.structure_image, Tensor(ds.targets[idx]))

    sr_detached = out.sr_image.detach()
    if cfg.adv_weight != 0.0:
        # only the generator-side -log D(G(x)) term is needed here; the first
        # argument is a placeholder and the paired discriminator loss is unused
        d_fake_gen = disc(out.sr_image)
        l_adv, _ = adversarial_losses(d_fake_gen.detach(), d_fake_gen)
    else:
        l_adv = None

    loss = total_loss(l_feat, l_adv, l_dct, l_struct, weights)
    if not np.isfinite(loss.data):
        raise NumericError("generator loss is not finite")
    loss.backward()
    state.g_opt.step(step)

    # discriminator phase
    disc.store.zero_grads()
    d_real = disc(hr_t)
    d_fake = disc(sr_detached)
    g_adv_log, d_loss = adversarial_losses(d_real, d_fake)
    if not np.isfinite(d_loss.data):
        raise NumericError("discriminator loss is not finite")
    d_loss.backward()
    state.d_opt.step(step)

    adv_value = l_adv.item() if l_adv is not None else g_adv_log.item()
    return "%d,%.8e,%.8e,%.8e,%.8e,%.8e,%.8e\n" % (
        step, l_feat.item(), adv_value,
        l_dct.item() if l_dct is not None else 0.0,
        l_struct.item() if l_struct is not None else 0.0,
        loss.item(), d_loss.item())


def _lr_size(cfg: RunConfig) -> int:
    return cfg.hr_size // cfg.scale


# -- inference and evaluation ------------------------------------------------------

def super_resolve(state: TrainingState, lr_u8: np.ndarray) -> np.ndarray:
    """uint8 LR image -> uint8 SR image through the generator."""
    cfg = state.config
    expected = _lr_size(cfg)
    if lr_u8.shape[0] != expected or lr_u8.shape[1] != expected:
        raise DimensionError(
            f"LR input is {lr_u8.shape[1]}x{lr_u8.shape[0]}, checkpoint expects "
            f"{expected}x{expected}")
    lr_t = Tensor(imaging.to_float_chw(lr_u8))
    lr_map = None
    if cfg.use_dct_branch:
        grid = lr_coefficient_grid(lr_u8, cfg.block_size)
        lr_map = DctCoefficientMap(cfg.block_size, Tensor(grid), (expected, expected))
    out = state.generator.forward(lr_t, lr_map)
    return imaging.to_u8_hwc(out.sr_image.data)


def infer(ckpt_dir: str, input_path: str, output_path: str) -> str:
    state = load_checkpoint(ckpt_dir)
    sr = super_resolve(state, imaging.load_image(input_path))
    imaging.save_image(output_path, sr)
    return output_path


def evaluate(ckpt_dir: str, data_dir: str, out_csv: str | None = None,
             crop_border: bool = False) -> list[dict]:
    """Per-image and mean Y-channel PSNR/SSIM against HR, with a bicubic column."""
    state = load_checkpoint(ckpt_dir)
    cfg = state.config
    entries = sorted(read_index(data_dir), key=lambda e: e.name)
    crop = cfg.scale if crop_border else 0

    def y_plane(u8):
        plane = imaging.to_luma(u8)
        return plane[:, crop:plane.shape[1] - crop, crop:plane.shape[2] - crop] if crop else plane

    rows = []
    for e in entries:
        hr = imaging.read_ppm(os.path.join(data_dir, e.hr_file))
        lr = imaging.read_ppm(os.path.join(data_dir, e.lr_file))
        sr = super_resolve(state, lr)
        bicubic = imaging.bicubic_resize(lr, float(cfg.scale))
        y_hr = y_plane(hr)
        rows.append({
            "name": e.name,
            "psnr": metrics.psnr(y_plane(sr), y_hr),
            "ssim": metrics.ssim(y_plane(sr), y_hr),
            "bicubic_psnr": metrics.psnr(y_plane(bicubic), y_hr),
            "bicubic_ssim": metrics.ssim(y_plane(bicubic), y_hr),
        })
    mean_row = {"name": "mean"}
    for key in ("psnr", "ssim", "bicubic_psnr", "bicubic_ssim"):
        mean_row[key] = sum(r[key] for r in rows) / len(rows) if rows else math.nan
    rows.append(mean_row)

    if out_csv:
        with open(out_csv, "w") as f:
            f.write("name,psnr,ssim,bicubic_psnr,bicubic_ssim\n")
            for r in rows:
                f.write("%s,%.6f,%.6f,%.6f,%.6f\n" % (
                    r["name"], r["psnr"], r["ssim"], r["bicubic_psnr"], r["bicubic_ssim"]))
    return rows
