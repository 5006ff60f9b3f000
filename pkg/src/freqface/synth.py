"""Deterministic synthetic face-like test images.

Not meant to look convincing: the point is seeded, reproducible images with
smooth regions, hard ellipse edges and fine stripe texture, so that cubic
upsampling visibly loses detail and an overfitting network has something
to recover.
"""
from __future__ import annotations

import numpy as np


def _ellipse_mask(size, cx, cy, rx, ry):
    yy, xx = np.mgrid[0:size, 0:size]
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def synthetic_face(seed: int, size: int = 128) -> np.ndarray:
    """One (size, size, 3) uint8 face-ish image, a pure function of the seed."""
    rng = np.random.default_rng([seed, 77])
    img = np.zeros((size, size, 3), dtype=np.float64)

    # background: vertical two-colour gradient
    top = rng.uniform(0.1, 0.9, size=3)
    bottom = rng.uniform(0.1, 0.9, size=3)
    t = np.linspace(0.0, 1.0, size)[:, None, None]
    img += top * (1 - t) + bottom * t

    # head
    cx = size / 2 + rng.uniform(-0.05, 0.05) * size
    cy = size / 2 + rng.uniform(-0.05, 0.05) * size
    rx = rng.uniform(0.28, 0.36) * size
    ry = rng.uniform(0.36, 0.44) * size
    skin = np.array([0.85, 0.65, 0.5]) + rng.uniform(-0.12, 0.12, size=3)
    img[_ellipse_mask(size, cx, cy, rx, ry)] = skin

    # hair band: upper part of the head in a darker colour
    hair = rng.uniform(0.05, 0.35, size=3)
    hair_mask = _ellipse_mask(size, cx, cy - 0.15 * ry, rx, ry * 0.95)
    hair_mask &= np.mgrid[0:size, 0:size][0] < cy - 0.35 * ry
    img[hair_mask] = hair

    # eyes
    eye_dy = cy - 0.15 * ry
    eye_dx = 0.4 * rx
    eye_r = max(2.0, 0.1 * rx)
    eye = rng.uniform(0.0, 0.3, size=3)
    for sx in (-1, 1):
        img[_ellipse_mask(size, cx + sx * eye_dx, eye_dy, eye_r, eye_r * 0.7)] = eye

    # mouth
    mouth = np.array([0.6, 0.15, 0.2]) + rng.uniform(-0.1, 0.1, size=3)
    img[_ellipse_mask(size, cx, cy + 0.45 * ry, 0.35 * rx, 0.08 * ry)] = mouth

    # fine diagonal stripes over part of the background (high-frequency detail)
    yy, xx = np.mgrid[0:size, 0:size]
    period = int(rng.integers(3, 6))
    stripes = ((xx + yy) // period) % 2 == 0
    corner = (xx > 0.7 * size) | (yy > 0.85 * size)
    img[stripes & corner] *= 0.55

    # mild seeded texture everywhere
    img += rng.normal(0.0, 0.015, size=(size, size, 3))

    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
