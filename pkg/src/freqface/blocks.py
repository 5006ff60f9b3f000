"""Reusable generator blocks: multi-kernel feature extraction, efficient
channel attention, and the subpixel x2 reconstruction stage.

Every residual unit puts a trailing projection inside its residual branch, so
zeroing the terminal projections turns each unit into the identity map.
"""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .params import ParamStore

# Residual branches start small so a deep unnormalized stack neither explodes
# nor vanishes at init: with terminal projections scaled by s, each block
# perturbs its input by O(s^2) variance instead of doubling it.
RESIDUAL_SCALE = 0.1


def add_conv(store: ParamStore, name: str, cin: int, cout: int, k: int,
             rng: np.random.Generator, scale: float = 1.0):
    w = store.add(name + ".w", scale * ag.conv_weight(rng, cout, cin, k, store.dtype))
    b = store.add(name + ".b", np.zeros(cout, dtype=store.dtype))
    return w, b


def add_dense(store: ParamStore, name: str, fin: int, fout: int,
              rng: np.random.Generator):
    w = store.add(name + ".w", ag.dense_weight(rng, fout, fin, store.dtype))
    b = store.add(name + ".b", np.zeros(fout, dtype=store.dtype))
    return w, b


class MultiKernelBlock:
    """Parallel 1x1 / 1x1-3x3 / 1x1-5x5 branches, concat, 1x1 projection, skip.

    The 1x1 convs ahead of the 3x3 and 5x5 branches bottleneck the channel
    count, keeping the wide-kernel parameter cost below a dense conv.
    """

    def __init__(self, store: ParamStore, name: str, channels: int,
                 bottleneck: int | None, slope: float, rng: np.random.Generator):
        self.slope = slope
        bn = bottleneck if bottleneck is not None else max(1, channels // 2)
        self.w1, self.b1 = add_conv(store, f"{name}.k1", channels, channels, 1, rng)
        self.r3w, self.r3b = add_conv(store, f"{name}.k3.reduce", channels, bn, 1, rng)
        self.w3, self.b3 = add_conv(store, f"{name}.k3.conv", bn, channels, 3, rng)
        self.r5w, self.r5b = add_conv(store, f"{name}.k5.reduce", channels, bn, 1, rng)
        self.w5, self.b5 = add_conv(store, f"{name}.k5.conv", bn, channels, 5, rng)
        self.pw, self.pb = add_conv(store, f"{name}.project", 3 * channels, channels, 1, rng,
                                    scale=RESIDUAL_SCALE)

    def __call__(self, x: Tensor) -> Tensor:
        s = self.slope
        a = ag.leaky_relu(ag.conv2d(x, self.w1, self.b1), s)
        b = ag.leaky_relu(ag.conv2d(x, self.r3w, self.r3b), s)
        b = ag.leaky_relu(ag.conv2d(b, self.w3, self.b3, padding=1), s)
        c = ag.leaky_relu(ag.conv2d(x, self.r5w, self.r5b), s)
        c = ag.leaky_relu(ag.conv2d(c, self.w5, self.b5, padding=2), s)
        y = ag.conv2d(ag.concat([a, b, c], axis=-3), self.pw, self.pb)
        return y + x


class MultiKernelStack:
    """Chain of blocks with a projected long skip around the whole chain."""

    def __init__(self, store: ParamStore, name: str, channels: int, num_blocks: int,
                 bottleneck: int | None, slope: float, rng: np.random.Generator):
        self.blocks = [
            MultiKernelBlock(store, f"{name}.block{i}", channels, bottleneck, slope, rng)
            for i in range(num_blocks)
        ]
        self.tw, self.tb = add_conv(store, f"{name}.tail", channels, channels, 1, rng,
                                    scale=RESIDUAL_SCALE)

    def __call__(self, x: Tensor) -> Tensor:
        y = x
        for block in self.blocks:
            y = block(y)
        return ag.conv2d(y, self.tw, self.tb) + x


class ChannelAttentionBlock:
    """Pointwise expansion, depthwise conv, squeeze-excite gate, projection."""

    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 expansion: int, reduction: int, slope: float, rng: np.random.Generator):
        self.slope = slope
        expanded = in_channels * expansion
        hidden = max(1, expanded // reduction)
        self.ew, self.eb = add_conv(store, f"{name}.expand", in_channels, expanded, 1, rng)
        self.dw = store.add(f"{name}.depthwise.w",
                            ag.he_normal(rng, (expanded, 1, 3, 3), fan_in=9, dtype=store.dtype))
        self.db = store.add(f"{name}.depthwise.b", np.zeros(expanded, dtype=store.dtype))
        self.sw1, self.sb1 = add_dense(store, f"{name}.se.fc1", expanded, hidden, rng)
        self.sw2, self.sb2 = add_dense(store, f"{name}.se.fc2", hidden, expanded, rng)
        self.pw, self.pb = add_conv(store, f"{name}.project", expanded, out_channels, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        s = self.slope
        y = ag.leaky_relu(ag.conv2d(x, self.ew, self.eb), s)
        y = ag.leaky_relu(ag.depthwise_conv2d(y, self.dw, self.db), s)
        y = ag.squeeze_excite_gate(y, self.sw1, self.sb1, self.sw2, self.sb2, s)
        return ag.conv2d(y, self.pw, self.pb)


class UpsampleStage:
    """Subpixel x2: conv to 4C channels, pixel shuffle, LeakyReLU."""

    def __init__(self, store: ParamStore, name: str, channels: int, slope: float,
                 rng: np.random.Generator):
        self.slope = slope
        self.w, self.b = add_conv(store, f"{name}.conv", channels, 4 * channels, 3, rng)

    def __call__(self, x: Tensor) -> Tensor:
        y = ag.conv2d(x, self.w, self.b, padding=1)
        return ag.leaky_relu(ag.pixel_shuffle(y, 2), self.slope)
