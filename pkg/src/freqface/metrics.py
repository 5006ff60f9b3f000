"""PSNR and SSIM, computed on real-valued single planes (normally Y channel)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, UsageError


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float


def _as_plane(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise DimensionError(f"expected a (H,W) or (1,H,W) plane, got {arr.shape}")
    return arr


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """10*log10(peak^2 / MSE); identical inputs give the +inf sentinel."""
    pa, pb = _as_plane(a), _as_plane(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"psnr: shapes differ {pa.shape} vs {pb.shape}")
    mse = np.mean((pa - pb) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return g[:, None] * g[None, :]


def ssim(a: np.ndarray, b: np.ndarray, window: int = 11, k1: float = 0.01,
         k2: float = 0.03, peak: float = 255.0, sigma: float = 1.5) -> float:
    """Mean local SSIM over all fully-interior Gaussian windows."""
    pa, pb = _as_plane(a), _as_plane(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"ssim: shapes differ {pa.shape} vs {pb.shape}")
    if window % 2 == 0:
        raise UsageError(f"ssim window must be odd, got {window}")
    if window > min(pa.shape):
        raise DimensionError(f"ssim window {window} larger than image {pa.shape}")
    kern = gaussian_window(window, sigma)

    def local_mean(x):
        return np.einsum("hwij,ij->hw", sliding_window_view(x, (window, window)), kern,
                         optimize=True)

    mu_a = local_mean(pa)
    mu_b = local_mean(pb)
    mu_aa = local_mean(pa * pa)
    mu_bb = local_mean(pb * pb)
    mu_ab = local_mean(pa * pb)
    var_a = mu_aa - mu_a * mu_a
    var_b = mu_bb - mu_b * mu_b
    cov = mu_ab - mu_a * mu_b
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def compare(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> MetricReport:
    return MetricReport(psnr_db=psnr(a, b, peak), ssim=ssim(a, b, peak=peak))
