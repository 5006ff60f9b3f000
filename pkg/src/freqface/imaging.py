"""8-bit RGB image handling: PPM/PNG IO, bicubic resampling, luma extraction.

Images move through the package as (H, W, 3) uint8 arrays at the IO boundary
and as [0,1] float32 (3, H, W) tensors inside the networks. Binary PPM (P6)
is the canonical golden-file format; PNG is read/written through Pillow.
"""
from __future__ import annotations

import logging

import numpy as np
from PIL import Image

from .errors import DimensionError, UsageError

log = logging.getLogger(__name__)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def load_image(path: str) -> np.ndarray:
    """Read a PNG/PPM (or anything Pillow handles) as (H, W, 3) uint8."""
    if str(path).lower().endswith(".ppm"):
        return read_ppm(path)
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(path: str, pixels: np.ndarray):
    pixels = _require_u8(pixels)
    if str(path).lower().endswith(".ppm"):
        write_ppm(path, pixels)
    else:
        Image.fromarray(pixels, mode="RGB").save(path)


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P6" or fields[3] != b"255":
        raise UsageError(f"{path}: only binary 8-bit P6 PPM is supported")
    width, height = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).copy()


def write_ppm(path: str, pixels: np.ndarray):
    pixels = _require_u8(pixels)
    h, w, _ = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(pixels).tobytes())


def _require_u8(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise DimensionError(f"expected (H,W,3) uint8 pixels, got {pixels.shape} {pixels.dtype}")
    return pixels


# -- bicubic resampling -------------------------------------------------------

def cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel (a = -0.5 gives the Catmull-Rom spline)."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    near = (a + 2.0) * t ** 3 - (a + 3.0) * t ** 2 + 1.0
    far = a * t ** 3 - 5.0 * a * t ** 2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def resample_weights(n_in: int, n_out: int):
    """Per-output-pixel source taps and cubic weights for one axis.

    Output-pixel centres map to source coordinates via
    src = (i + 0.5) * n_in / n_out - 0.5; each output draws on the four
    nearest sources with Catmull-Rom weights (border taps clamp).
    Weights at every phase sum to 1.
    """
    i = np.arange(n_out, dtype=np.float64)
    src = (i + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    offsets = np.arange(-1, 3)
    taps = base[:, None] + offsets[None, :]
    dist = src[:, None] - taps
    weights = cubic_kernel(dist)
    taps = np.clip(taps, 0, n_in - 1)
    return taps, weights


def bicubic_resize(pixels: np.ndarray, factor: float) -> np.ndarray:
    """Separable Catmull-Rom resampling of (H,W,3) uint8 pixels.

    Values are computed in float64, clamped to [0,255], and rounded
    half-away-from-zero back to uint8.
    """
    pixels = _require_u8(pixels)
    h, w, _ = pixels.shape
    out_h = int(round(h * factor))
    out_w = int(round(w * factor))
    if out_h < 1 or out_w < 1:
        raise UsageError(f"resize factor {factor} collapses {h}x{w} below 1 pixel")
    data = pixels.astype(np.float64)
    taps_r, w_r = resample_weights(h, out_h)
    data = (data[taps_r] * w_r[:, :, None, None]).sum(axis=1)
    taps_c, w_c = resample_weights(w, out_w)
    data = (data[:, taps_c] * w_c[None, :, :, None]).sum(axis=2)
    return np.floor(np.clip(data, 0.0, 255.0) + 0.5).astype(np.uint8)


# -- colour handling ----------------------------------------------------------

def to_luma(pixels: np.ndarray) -> np.ndarray:
    """BT.601 full-range luma of (H,W,3) pixels as a real-valued (1,H,W) plane."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected (H,W,3) pixels, got {arr.shape}")
    r, g, b = LUMA_WEIGHTS
    return (r * arr[:, :, 0] + g * arr[:, :, 1] + b * arr[:, :, 2])[None]


def to_float_chw(pixels: np.ndarray) -> np.ndarray:
    """uint8 (H,W,3) -> float32 (3,H,W) in [0,1]."""
    return (_require_u8(pixels).astype(np.float32) / 255.0).transpose(2, 0, 1)


def to_u8_hwc(chw: np.ndarray) -> np.ndarray:
    """float (3,H,W) in [0,1] -> uint8 (H,W,3), clamped and rounded."""
    arr = np.asarray(chw, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise DimensionError(f"expected (3,H,W) plane stack, got {arr.shape}")
    scaled = np.clip(arr * 255.0, 0.0, 255.0)
    return np.floor(scaled + 0.5).astype(np.uint8).transpose(1, 2, 0)


def center_fit(pixels: np.ndarray, size: int) -> np.ndarray:
    """Center-crop (if larger) or bicubic-resize (if smaller) to size x size."""
    pixels = _require_u8(pixels)
    h, w, _ = pixels.shape
    if h == size and w == size:
        return pixels
    if h >= size and w >= size:
        log.warning("center-cropping %dx%d source to %dx%d", w, h, size, size)
        top = (h - size) // 2
        left = (w - size) // 2
        return pixels[top:top + size, left:left + size]
    log.warning("resizing %dx%d source to %dx%d", w, h, size, size)
    resized = bicubic_resize(pixels, size / min(h, w))
    return center_fit(resized, size)
