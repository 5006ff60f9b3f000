"""Exact blockwise 2-D DCT/IDCT and coefficient-grid packing.

The transform is the orthonormal DCT-II: with C the M x M basis matrix
(C[a,x] = s(a) * cos((2x+1) a pi / 2M), s(0) = sqrt(1/M), s(a>0) = sqrt(2/M)),
a block transforms as D = C X C^T and inverts as X = C^T D C. Orthonormality
gives exact round trips and per-block energy preservation (Parseval).

A packed coefficient grid stores block (i,j)'s coefficient D[a,b] at channel
a*M + b, spatial position (i,j) - row-major channel order, no zigzag. Packing
and unpacking are linear and mutually adjoint, so both directions are exact
and differentiable (the gradient of unpacking is packing of the upstream
gradient, and vice versa).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, _accum, _node
from .errors import DimensionError

DEFAULT_BLOCK_SIZE = 8

_MATRIX_CACHE: dict[tuple[int, str], np.ndarray] = {}


def dct_matrix(m: int, dtype=np.float64) -> np.ndarray:
    """Orthonormal DCT-II basis matrix of size m x m."""
    key = (m, np.dtype(dtype).str)
    cached = _MATRIX_CACHE.get(key)
    if cached is not None:
        return cached
    x = np.arange(m, dtype=np.float64)
    a = x[:, None]
    c = np.cos((2.0 * x[None, :] + 1.0) * a * np.pi / (2.0 * m)) * np.sqrt(2.0 / m)
    c[0] *= np.sqrt(0.5)
    c = c.astype(dtype)
    _MATRIX_CACHE[key] = c
    return c


def dct_block(block: np.ndarray) -> np.ndarray:
    """Forward 2-D DCT of one square block."""
    block = np.asarray(block)
    c = dct_matrix(block.shape[0], block.dtype if block.dtype.kind == "f" else np.float64)
    return c @ block @ c.T


def idct_block(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of dct_block."""
    coeffs = np.asarray(coeffs)
    c = dct_matrix(coeffs.shape[0], coeffs.dtype if coeffs.dtype.kind == "f" else np.float64)
    return c.T @ coeffs @ c


def _pack(plane: np.ndarray, m: int) -> np.ndarray:
    """(..., H, W) -> (..., m*m, H/m, W/m) blockwise DCT grid."""
    c = dct_matrix(m, plane.dtype)
    h, w = plane.shape[-2:]
    nh, nw = h // m, w // m
    blocks = plane.reshape(plane.shape[:-2] + (nh, m, nw, m))
    coeffs = np.einsum("ax,...uxvy,by->...abuv", c, blocks, c, optimize=True)
    return coeffs.reshape(plane.shape[:-2] + (m * m, nh, nw))


def _unpack(grid: np.ndarray, m: int) -> np.ndarray:
    """Inverse (and adjoint) of _pack: (..., m*m, H/m, W/m) -> (..., H, W)."""
    c = dct_matrix(m, grid.dtype)
    nh, nw = grid.shape[-2:]
    coeffs = grid.reshape(grid.shape[:-3] + (m, m, nh, nw))
    blocks = np.einsum("ax,...abuv,by->...uxvy", c, coeffs, c, optimize=True)
    return blocks.reshape(grid.shape[:-3] + (nh * m, nw * m))


def blockwise_dct(plane: np.ndarray, block_size: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    """Plain-numpy blockwise DCT of a (..., H, W) plane into a packed grid."""
    h, w = plane.shape[-2:]
    if h % block_size or w % block_size:
        raise DimensionError(f"plane {h}x{w} is not a multiple of block size {block_size}")
    return _pack(np.asarray(plane), block_size)


def blockwise_idct(grid: np.ndarray, block_size: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    if grid.shape[-3] != block_size * block_size:
        raise DimensionError(f"grid has {grid.shape[-3]} channels, expected {block_size * block_size}")
    return _unpack(np.asarray(grid), block_size)


@dataclass
class DctCoefficientMap:
    """Packed blockwise DCT coefficients of one plane (optionally batched)."""

    block_size: int
    grid: Tensor
    source_dims: tuple[int, int]

    @property
    def grid_dims(self) -> tuple[int, int]:
        return self.grid.shape[-2], self.grid.shape[-1]


def image_to_dct_map(image: Tensor, block_size: int = DEFAULT_BLOCK_SIZE) -> DctCoefficientMap:
    """Blockwise DCT of a (..., 1, H, W) image into a packed coefficient map."""
    if image.ndim < 3 or image.shape[-3] != 1:
        raise DimensionError(f"expected a single-channel (...,1,H,W) image, got {image.shape}")
    h, w = image.shape[-2], image.shape[-1]
    if h % block_size or w % block_size:
        raise DimensionError(f"image {h}x{w} is not a multiple of block size {block_size}")
    m = block_size
    plane = image.data[..., 0, :, :]
    out_data = _pack(plane, m)

    def backward(g):
        _accum(image, np.expand_dims(_unpack(g, m), axis=-3))

    grid = _node(out_data, (image,), backward)
    return DctCoefficientMap(block_size=m, grid=grid, source_dims=(h, w))


def dct_map_to_image(coeff_map: DctCoefficientMap) -> Tensor:
    """Blockwise IDCT of a packed map back to a (..., 1, H, W) image."""
    m = coeff_map.block_size
    grid = coeff_map.grid
    if grid.shape[-3] != m * m:
        raise DimensionError(f"grid has {grid.shape[-3]} channels, expected {m * m}")
    out_data = np.expand_dims(_unpack(grid.data, m), axis=-3)

    def backward(g):
        _accum(grid, _pack(g[..., 0, :, :], m))

    return _node(out_data, (grid,), backward)
