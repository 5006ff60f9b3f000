"""Dataset preparation and loading.

``prepare_data`` turns a directory of HR source images into, per image: the
HR image, the bicubic LR image, an f32 dump of the HR luma coefficient grid,
and the rendered mesh-point target, plus one plain-text ``index.txt`` mapping
name -> artifact files -> shape-coefficient vector. Re-running with the same
inputs and seed is byte-identical.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import imaging, morphable
from .dct import DEFAULT_BLOCK_SIZE, blockwise_dct
from .errors import UsageError
from .params import read_float_map, write_float_map
from .synth import synthetic_face

log = logging.getLogger(__name__)

INDEX_NAME = "index.txt"
MODEL_SEED_OFFSET = 101  # shape-model stream kept apart from per-image gamma streams

SOURCE_EXTENSIONS = (".png", ".ppm")


@dataclass
class Entry:
    name: str
    hr_file: str
    lr_file: str
    dct_file: str
    target_file: str
    gamma: np.ndarray


def prepare_data(src_dir: str | None, out_dir: str, scale: int, seed: int,
                 hr_size: int = 128, block_size: int = DEFAULT_BLOCK_SIZE,
                 synthetic: int = 0) -> int:
    """Write the training artifacts for every readable source image.

    With ``synthetic=N`` and no src_dir, N seeded synthetic faces are used as
    sources instead. Returns the number of index entries written.
    """
    if hr_size % (scale * block_size) != 0:
        raise UsageError(f"hr_size {hr_size} must be a multiple of scale*block_size")
    os.makedirs(out_dir, exist_ok=True)

    sources: list[tuple[str, np.ndarray]] = []
    if synthetic:
        for i in range(synthetic):
            sources.append((f"synthetic{i:03d}", synthetic_face(seed * 1000 + i, hr_size)))
    elif src_dir:
        for fname in sorted(os.listdir(src_dir)):
            if not fname.lower().endswith(SOURCE_EXTENSIONS):
                continue
            path = os.path.join(src_dir, fname)
            try:
                pixels = imaging.load_image(path)
            except Exception as exc:  # unreadable file: skip, keep going
                log.warning("skipping unreadable image %s (%s)", path, exc)
                continue
            sources.append((os.path.splitext(fname)[0], imaging.center_fit(pixels, hr_size)))
    else:
        raise UsageError("either a source directory or a synthetic count is required")

    model = morphable.make_synthetic_model(seed + MODEL_SEED_OFFSET)
    camera = morphable.default_camera(hr_size)

    lines = []
    for i, (name, hr) in enumerate(sources):
        lr = imaging.bicubic_resize(hr, 1.0 / scale)
        hr_luma = imaging.to_luma(hr) / 255.0
        grid = blockwise_dct(hr_luma[0].astype(np.float32), block_size)

        gamma = np.random.default_rng([seed, i]).standard_normal(model.num_components)
        target = morphable.make_target(imaging.to_float_chw(hr), model, gamma, camera)

        hr_file = f"{name}_hr.ppm"
        lr_file = f"{name}_lr.ppm"
        dct_file = f"{name}_dct.f32"
        target_file = f"{name}_target.ppm"
        imaging.write_ppm(os.path.join(out_dir, hr_file), hr)
        imaging.write_ppm(os.path.join(out_dir, lr_file), lr)
        write_float_map(os.path.join(out_dir, dct_file), grid)
        imaging.write_ppm(os.path.join(out_dir, target_file), imaging.to_u8_hwc(target.image))
        gamma_text = ",".join(f"{g:.17g}" for g in gamma)
        lines.append(f"{name} {hr_file} {lr_file} {dct_file} {target_file} {gamma_text}\n")

    with open(os.path.join(out_dir, INDEX_NAME), "w") as f:
        f.write(f"# name hr lr dct target gamma scale={scale} hr_size={hr_size} "
                f"block_size={block_size} seed={seed}\n")
        f.writelines(lines)
    return len(lines)


def read_index(data_dir: str) -> list[Entry]:
    path = os.path.join(data_dir, INDEX_NAME)
    if not os.path.exists(path):
        raise UsageError(f"no {INDEX_NAME} in {data_dir}; run prepare-data first")
    entries = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, hr_file, lr_file, dct_file, target_file, gamma_text = line.split(" ")
            gamma = np.array([float(g) for g in gamma_text.split(",")])
            entries.append(Entry(name, hr_file, lr_file, dct_file, target_file, gamma))
    return entries


@dataclass
class Dataset:
    """All training arrays resident in memory, float32, [0,1] images."""

    names: list[str]
    hr: np.ndarray        # (N, 3, S, S)
    lr: np.ndarray        # (N, 3, s, s)
    hr_grids: np.ndarray  # (N, B*B, S/B, S/B) target coefficient grids
    lr_grids: np.ndarray  # (N, B*B, s/B, s/B) input coefficient grids
    targets: np.ndarray   # (N, 3, S, S) mesh-point target images
    block_size: int

    def __len__(self):
        return len(self.names)


def load_dataset(data_dir: str, block_size: int = DEFAULT_BLOCK_SIZE) -> Dataset:
    entries = read_index(data_dir)
    if not entries:
        raise UsageError(f"{data_dir} index is empty")
    names, hrs, lrs, hr_grids, lr_grids, targets = [], [], [], [], [], []
    for e in entries:
        hr_u8 = imaging.read_ppm(os.path.join(data_dir, e.hr_file))
        lr_u8 = imaging.read_ppm(os.path.join(data_dir, e.lr_file))
        names.append(e.name)
        hrs.append(imaging.to_float_chw(hr_u8))
        lrs.append(imaging.to_float_chw(lr_u8))
        hr_grids.append(read_float_map(os.path.join(data_dir, e.dct_file)))
        lr_grids.append(lr_coefficient_grid(lr_u8, block_size))
        targets.append(imaging.to_float_chw(
            imaging.read_ppm(os.path.join(data_dir, e.target_file))))
    return Dataset(names=names, hr=np.stack(hrs), lr=np.stack(lrs),
                   hr_grids=np.stack(hr_grids), lr_grids=np.stack(lr_grids),
                   targets=np.stack(targets), block_size=block_size)


def lr_coefficient_grid(lr_u8: np.ndarray, block_size: int = DEFAULT_BLOCK_SIZE) -> np.ndarray:
    """Blockwise DCT grid of the LR image's [0,1] luma plane."""
    luma = imaging.to_luma(lr_u8) / 255.0
    return blockwise_dct(luma[0].astype(np.float32), block_size)
