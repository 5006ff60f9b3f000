"""Three-branch super-resolution generator.

The trunk progressively doubles resolution (stem conv, multi-kernel stacks,
channel attention, subpixel x2 per stage). A coefficient autoencoder branch
predicts the HR blockwise-DCT grid from the LR grid; its inverse-DCT image is
fused into the trunk (channel concat + 1x1 mix) just before the terminal
3-channel conv. A structural branch reads the shared stem features and
produces a full-size image supervised by mesh-point targets.

Branch parameters are drawn from independent per-branch RNG streams, so
toggling one branch leaves every other branch's initial weights bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .blocks import ChannelAttentionBlock, MultiKernelBlock, MultiKernelStack, UpsampleStage, add_conv
from .dct import DctCoefficientMap, dct_map_to_image
from .errors import DimensionError, UsageError
from .params import ParamStore


@dataclass
class GeneratorConfig:
    scale: int = 4
    hr_size: int = 128
    channels: int = 64
    modules_per_stage: int = 5
    blocks_per_module: int = 5
    structure_blocks: int = 5
    bottleneck: int | None = None
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

    def __post_init__(self):
        if self.scale not in (4, 8):
            raise UsageError(f"scale must be 4 or 8, got {self.scale}")
        if self.hr_size % (self.scale * self.block_size) != 0:
            raise UsageError(
                f"hr_size {self.hr_size} must be a multiple of scale*block_size "
                f"({self.scale * self.block_size})")

    @property
    def stages(self) -> int:
        return int(math.log2(self.scale))

    @property
    def lr_size(self) -> int:
        return self.hr_size // self.scale

    @property
    def lr_grid_size(self) -> int:
        return self.lr_size // self.block_size

    @property
    def hr_grid_size(self) -> int:
        return self.hr_size // self.block_size


@dataclass
class GeneratorOutput:
    sr_image: Tensor
    dct_pred: DctCoefficientMap | None
    structure_image: Tensor | None


class _Stage:
    """One trunk stage: optional input conv, module chain, attention, upsamples."""

    def __init__(self, store, name, cfg: GeneratorConfig, rng, input_conv: bool,
                 num_upsamples: int):
        c = cfg.channels
        self.slope = cfg.slope
        self.ece = add_conv(store, f"{name}.ece", c, c, 3, rng) if input_conv else None
        self.modules = [
            MultiKernelStack(store, f"{name}.module{i}", c, cfg.blocks_per_module,
                             cfg.bottleneck, cfg.slope, rng)
            for i in range(cfg.modules_per_stage)
        ]
        self.concat_count = min(4, cfg.modules_per_stage)
        if cfg.use_channel_attention:
            self.attention = ChannelAttentionBlock(
                store, f"{name}.attention", c * self.concat_count, c,
                cfg.expansion, cfg.reduction, cfg.slope, rng)
        else:
            self.attention = None
        self.upsamples = [
            UpsampleStage(store, f"{name}.up{j}", c, cfg.slope, rng)
            for j in range(num_upsamples)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        if self.ece is not None:
            x = ag.leaky_relu(ag.conv2d(x, *self.ece, padding=1), self.slope)
        outs = []
        y = x
        for module in self.modules:
            y = module(y)
            outs.append(y)
        if self.attention is not None:
            y = self.attention(ag.concat(outs[-self.concat_count:], axis=-3))
        for up in self.upsamples:
            y = up(y)
        return y


class Generator:
    def __init__(self, cfg: GeneratorConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.store = ParamStore(dtype)
        trunk_rng = np.random.default_rng([seed, 0])
        freq_rng = np.random.default_rng([seed, 1])
        fusion_rng = np.random.default_rng([seed, 2])
        structure_rng = np.random.default_rng([seed, 3])

        c = cfg.channels
        self.stem = add_conv(self.store, "trunk.stem", 3, c, 3, trunk_rng)
        if cfg.progressive:
            self.trunk_stages = [
                _Stage(self.store, f"trunk.stage{s}", cfg, trunk_rng,
                       input_conv=(s > 0), num_upsamples=1)
                for s in range(cfg.stages)
            ]
        else:
            self.trunk_stages = [
                _Stage(self.store, "trunk.stage0", cfg, trunk_rng,
                       input_conv=False, num_upsamples=cfg.stages)
            ]
        self.final = add_conv(self.store, "trunk.final", c, 3, 3, trunk_rng)

        if cfg.use_dct_branch:
            self._build_freq_branch(freq_rng)
            self.fusion = add_conv(self.store, "fusion.mix", c + 1, c, 1, fusion_rng)
        if cfg.use_structure_branch:
            self.structure_blocks = [
                MultiKernelBlock(self.store, f"structure.block{i}", c,
                                 cfg.bottleneck, cfg.slope, structure_rng)
                for i in range(cfg.structure_blocks)
            ]
            self.structure_ups = [
                UpsampleStage(self.store, f"structure.up{j}", c, cfg.slope, structure_rng)
                for j in range(cfg.stages)
            ]
            self.structure_final = add_conv(self.store, "structure.final", c, 3, 3,
                                            structure_rng)

    # -- coefficient autoencoder -------------------------------------------

    def _build_freq_branch(self, rng):
        cfg = self.cfg
        coeffs = cfg.block_size * cfg.block_size
        w, hidden = cfg.freq_channels, cfg.freq_hidden
        # each downsampling must halve the grid exactly or the x2 decoder
        # chain cannot land back on the HR grid size
        downs, remaining = 0, cfg.lr_grid_size
        while downs < 2 and remaining % 2 == 0:
            remaining //= 2
            downs += 1
        self.freq_downs_count = downs
        ups = self.freq_downs_count + cfg.stages

        self.freq_stem = add_conv(self.store, "freq.stem", coeffs, w, 3, rng)
        self.freq_downs = []
        cin = w
        for i in range(self.freq_downs_count):
            self.freq_downs.append(add_conv(self.store, f"freq.down{i}", cin, hidden, 3, rng))
            cin = hidden
        self.freq_ups = []
        for j in range(ups):
            mirrored = j < self.freq_downs_count
            last_mirrored = j == self.freq_downs_count - 1
            cout = w if (not mirrored or last_mirrored) else hidden
            self.freq_ups.append(add_conv(self.store, f"freq.up{j}", cin, cout, 3, rng))
            cin = cout
        self.freq_final = add_conv(self.store, "freq.final", cin, coeffs, 3, rng)

    def _freq_forward(self, grid: Tensor) -> Tensor:
        s = self.cfg.slope
        skips = []
        y = ag.leaky_relu(ag.conv2d(grid, *self.freq_stem, padding=1), s)
        skips.append(y)
        for down in self.freq_downs:
            y = ag.leaky_relu(ag.conv2d(y, *down, stride=2, padding=1), s)
            skips.append(y)
        skips.pop()  # the bottleneck itself is not a skip source
        for j, up in enumerate(self.freq_ups):
            y = ag.upsample_nearest(y, 2)
            y = ag.conv2d(y, *up, padding=1)
            if j < self.freq_downs_count:
                y = y + skips.pop()
            y = ag.leaky_relu(y, s)
        return ag.conv2d(y, *self.freq_final, padding=1)

    # -- forward --------------------------------------------------------------

    def forward(self, lr: Tensor, lr_coeffs: DctCoefficientMap | None = None) -> GeneratorOutput:
        cfg = self.cfg
        if lr.shape[-3] != 3 or lr.shape[-2] != cfg.lr_size or lr.shape[-1] != cfg.lr_size:
            raise DimensionError(
                f"generator expects (...,3,{cfg.lr_size},{cfg.lr_size}) input, got {lr.shape}")

        x = ag.leaky_relu(ag.conv2d(lr, *self.stem, padding=1), cfg.slope)
        shared = x
        for stage in self.trunk_stages:
            x = stage(x)

        dct_pred = None
        if cfg.use_dct_branch:
            if lr_coeffs is None:
                raise UsageError("dct branch is enabled but no LR coefficient map was given")
            if lr_coeffs.grid.shape[-2:] != (cfg.lr_grid_size, cfg.lr_grid_size):
                raise DimensionError(
                    f"LR coefficient grid {lr_coeffs.grid.shape} does not match "
                    f"expected {cfg.lr_grid_size}x{cfg.lr_grid_size}")
            pred_grid = self._freq_forward(lr_coeffs.grid)
            dct_pred = DctCoefficientMap(cfg.block_size, pred_grid,
                                         (cfg.hr_size, cfg.hr_size))
            spatial = dct_map_to_image(dct_pred)
            x = ag.conv2d(ag.concat([x, spatial], axis=-3), *self.fusion)

        sr = ag.conv2d(x, *self.final, padding=1)

        structure = None
        if cfg.use_structure_branch:
            y = shared
            for block in self.structure_blocks:
                y = block(y)
            for up in self.structure_ups:
                y = up(y)
            structure = ag.conv2d(y, *self.structure_final, padding=1)

        return GeneratorOutput(sr_image=sr, dct_pred=dct_pred, structure_image=structure)

    def __call__(self, lr, lr_coeffs=None):
        return self.forward(lr, lr_coeffs)


def toy_generator_config(scale: int = 4) -> GeneratorConfig:
    """Halved widths, two stacks per stage, 64px targets; fast enough for CI."""
    return GeneratorConfig(scale=scale, hr_size=64, channels=32, modules_per_stage=2,
                           freq_channels=32, freq_hidden=64)


def paper_generator_config(scale: int = 4) -> GeneratorConfig:
    return GeneratorConfig(scale=scale)


def micro_generator_config(scale: int = 4) -> GeneratorConfig:
    """Smallest legal configuration; used by the gradient-check harness."""
    return GeneratorConfig(scale=scale, hr_size=32, channels=6, modules_per_stage=1,
                           blocks_per_module=1, structure_blocks=1,
                           freq_channels=6, freq_hidden=8)


def ablation_config(base: GeneratorConfig, column: str) -> GeneratorConfig:
    """Component-study variants: (a) single-stage upsampling with the
    multi-kernel stacks only, (b) progressive stages, (c) +channel attention,
    (d) +coefficient branch, (e) progressive+attention+structure branch,
    (f) everything."""
    settings = {
        "a": dict(progressive=False, use_channel_attention=False,
                  use_dct_branch=False, use_structure_branch=False),
        "b": dict(progressive=True, use_channel_attention=False,
                  use_dct_branch=False, use_structure_branch=False),
        "c": dict(progressive=True, use_channel_attention=True,
                  use_dct_branch=False, use_structure_branch=False),
        "d": dict(progressive=True, use_channel_attention=True,
                  use_dct_branch=True, use_structure_branch=False),
        "e": dict(progressive=True, use_channel_attention=True,
                  use_dct_branch=False, use_structure_branch=True),
        "f": dict(progressive=True, use_channel_attention=True,
                  use_dct_branch=True, use_structure_branch=True),
    }
    if column not in settings:
        raise UsageError(f"unknown ablation column {column!r}; expected a-f")
    return replace(base, **settings[column])
