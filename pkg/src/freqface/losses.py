"""The four training loss terms and the binary-classifier discriminator.

Total generator objective: feature loss plus weighted adversarial, coefficient
(DCT) and structural terms. The coefficient and structural terms are plain L1
means; the feature term is an MSE in the space of a fixed, seeded conv stack
(a deterministic stand-in for a pretrained perceptual network). Adversarial
terms use the non-saturating form with probabilities clamped away from 0/1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .blocks import add_conv, add_dense
from .dct import DctCoefficientMap
from .errors import DimensionError, NumericError, UsageError
from .morphable import StructureTarget
from .params import ParamStore

PROB_EPS = 1e-7
FEATURE_EXTRACTOR_SEED = 1730


@dataclass
class LossWeights:
    adversarial: float = 1e-3
    dct: float = 1.0
    structure: float = 1.0


def dct_loss(pred: DctCoefficientMap, target: DctCoefficientMap) -> Tensor:
    """Mean absolute coefficient difference over the whole grid."""
    if pred.block_size != target.block_size or pred.grid.shape != target.grid.shape:
        raise DimensionError(
            f"coefficient grids differ: {pred.grid.shape} vs {target.grid.shape}")
    return (pred.grid - target.grid).abs().mean()


def structure_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute pixel difference against the rendered mesh-point target."""
    target_tensor = target
    if isinstance(target, StructureTarget):
        target_tensor = Tensor(np.asarray(target.image, dtype=pred.dtype))
    if pred.shape != target_tensor.shape:
        raise DimensionError(f"images differ: {pred.shape} vs {target_tensor.shape}")
    return (pred - target_tensor).abs().mean()


def feature_loss(sr: Tensor, hr: Tensor, extractor: "FeatureExtractor") -> Tensor:
    """MSE between extractor features of the generated and reference images."""
    if sr.shape != hr.shape:
        raise DimensionError(f"images differ: {sr.shape} vs {hr.shape}")
    diff = extractor(sr) - extractor(hr)
    return (diff * diff).mean()


def adversarial_losses(d_real: Tensor, d_fake: Tensor):
    """Non-saturating GAN terms from discriminator probabilities.

    d_loss = -[log d_real + log(1 - d_fake)], g_loss = -log d_fake; inputs may
    be scalars or per-sample vectors (reduced by mean). Probabilities are
    clamped to [eps, 1-eps] before the logs.
    """
    for name, t in (("d_real", d_real), ("d_fake", d_fake)):
        if np.any(t.data < 0.0) or np.any(t.data > 1.0):
            raise UsageError(f"{name} must lie in (0,1), got values outside [0,1]")
    pr = ag.clamp(d_real, PROB_EPS, 1.0 - PROB_EPS)
    pf = ag.clamp(d_fake, PROB_EPS, 1.0 - PROB_EPS)
    g_loss = -ag.log(pf).mean()
    d_loss = -(ag.log(pr).mean() + ag.log(1.0 - pf).mean())
    return g_loss, d_loss


def total_loss(feature: Tensor, adversarial: Tensor | None, dct: Tensor | None,
               structure: Tensor | None, weights: LossWeights) -> Tensor:
    """feature + a*adversarial + b*dct + c*structure; None terms are skipped."""
    parts = [feature, adversarial, dct, structure]
    for part in parts:
        if part is not None and not np.isfinite(part.data).all():
            raise NumericError("non-finite loss term")
    out = feature
    if adversarial is not None:
        out = out + weights.adversarial * adversarial
    if dct is not None:
        out = out + weights.dct * dct
    if structure is not None:
        out = out + weights.structure * structure
    return out


class FeatureExtractor:
    """Frozen four-layer conv stack with seeded He weights.

    Rebuilt identically from its seed every run, so checkpoints never need to
    carry it.
    """

    def __init__(self, channels: int = 16, depth: int = 4, seed: int = FEATURE_EXTRACTOR_SEED,
                 slope: float = 0.2, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.slope = slope
        self.layers = []
        cin = 3
        for _ in range(depth):
            w = Tensor(ag.conv_weight(rng, channels, cin, 3, dtype))
            b = Tensor(np.zeros(channels, dtype=dtype))
            self.layers.append((w, b))
            cin = channels

    def __call__(self, image: Tensor) -> Tensor:
        y = image
        for i, (w, b) in enumerate(self.layers):
            y = ag.conv2d(y, w, b, padding=1)
            if i < len(self.layers) - 1:
                y = ag.leaky_relu(y, self.slope)
        return y


@dataclass
class DiscriminatorConfig:
    widths: tuple[int, ...] = (16, 32, 64, 64)
    strides: tuple[int, ...] = (2, 2, 2, 2)
    dense: int = 64
    slope: float = 0.2

    def __post_init__(self):
        if len(self.widths) != len(self.strides):
            raise UsageError("widths and strides must have the same length")


def toy_discriminator_config() -> DiscriminatorConfig:
    return DiscriminatorConfig(widths=(8, 16, 32, 32), strides=(2, 2, 2, 2), dense=32)


class Discriminator:
    """Strided conv stack -> dense -> sigmoid probability of being real."""

    def __init__(self, cfg: DiscriminatorConfig, image_size: int, seed: int = 0,
                 dtype=np.float32):
        self.cfg = cfg
        self.image_size = image_size
        self.store = ParamStore(dtype)
        rng = np.random.default_rng([seed, 9])
        cin, size = 3, image_size
        self.convs = []
        for i, (width, stride) in enumerate(zip(cfg.widths, cfg.strides)):
            self.convs.append((add_conv(self.store, f"disc.conv{i}", cin, width, 3, rng), stride))
            size = (size + 2 - 3) // stride + 1
            cin = width
        self.flat_size = cin * size * size
        self.d1 = add_dense(self.store, "disc.dense1", self.flat_size, cfg.dense, rng)
        self.d2 = add_dense(self.store, "disc.dense2", cfg.dense, 1, rng)

    def __call__(self, image: Tensor) -> Tensor:
        if image.shape[-3] != 3 or image.shape[-2] != self.image_size \
                or image.shape[-1] != self.image_size:
            raise DimensionError(
                f"discriminator expects (...,3,{self.image_size},{self.image_size}), "
                f"got {image.shape}")
        s = self.cfg.slope
        y = image
        for (w, b), stride in self.convs:
            y = ag.leaky_relu(ag.conv2d(y, w, b, stride=stride, padding=1), s)
        batched = y.ndim == 4
        y = y.reshape((y.shape[0], self.flat_size) if batched else (self.flat_size,))
        y = ag.leaky_relu(ag.linear(y, *self.d1), s)
        y = ag.sigmoid(ag.linear(y, *self.d2))
        return y.reshape((y.shape[0],) if batched else ())
