"""Blockwise DCT of a synthetic face: round trip, energy, coefficient layout.

Run: python demos/01_dct_roundtrip.py
"""
import numpy as np

from freqface import imaging
from freqface.dct import blockwise_dct, blockwise_idct, dct_block
from freqface.synth import synthetic_face

img = synthetic_face(seed=4, size=128)
luma = imaging.to_luma(img)[0] / 255.0

grid = blockwise_dct(luma, block_size=8)
print(f"image 128x128 -> coefficient grid {grid.shape} (channel a*8+b holds D[a,b])")

back = blockwise_idct(grid, block_size=8)
print(f"round-trip max abs error: {np.abs(back - luma).max():.3e}")

energy_pixels = np.sum(luma * luma)
energy_coeffs = np.sum(grid * grid)
print(f"energy: pixels {energy_pixels:.6f} vs coefficients {energy_coeffs:.6f} "
      f"(orthonormal transform preserves it)")

block = luma[:8, :8]
coeffs = dct_block(block)
print(f"\ntop-left block: DC = {coeffs[0, 0]:.4f} (= 8 * block mean {8 * block.mean():.4f})")
ac_energy = np.sum(coeffs * coeffs) - coeffs[0, 0] ** 2
print(f"AC energy fraction of the block: {ac_energy / np.sum(coeffs * coeffs):.4f}")

constant = np.full((8, 8), 0.5)
print(f"\nconstant 0.5 block -> DC {dct_block(constant)[0, 0]:.4f}, "
      f"all other coefficients |max| {np.abs(dct_block(constant))[1:].max():.2e}")
