"""Synthetic PCA face-shape model and mesh-point supervision targets.

A seeded synthetic model stands in for a scanned morphable model: a face-like
base mesh plus K orthonormal deformation components with per-component
standard deviations. Sampled meshes are pinhole-projected and the projected
vertices are stamped as single-pixel white markers onto the ground-truth
image, producing the supervision target for the structural branch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError


@dataclass
class ShapeModel:
    mean: np.ndarray         # (V, 3) model-unit vertex coordinates
    components: np.ndarray   # (K, V, 3), orthonormal when flattened
    sigmas: np.ndarray       # (K,) per-component standard deviations

    @property
    def num_vertices(self) -> int:
        return self.mean.shape[0]

    @property
    def num_components(self) -> int:
        return self.components.shape[0]


@dataclass
class Camera:
    focal: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class StructureTarget:
    """HR image with mesh points rendered, plus the surviving pixel coordinates."""

    image: np.ndarray                 # (3, S, S) float in [0,1]
    points: list[tuple[int, int]]     # (col, row) integer pixel positions


def make_synthetic_model(seed: int, num_vertices: int = 512,
                         num_components: int = 8) -> ShapeModel:
    """Deterministic synthetic shape model with orthonormal components."""
    if num_vertices < 4:
        raise UsageError(f"need at least 4 vertices, got {num_vertices}")
    if num_components < 1 or num_components > 3 * num_vertices:
        raise UsageError(f"component count {num_components} outside [1, {3 * num_vertices}]")
    rng = np.random.default_rng(seed)

    # Base mesh: points on a vertically stretched ellipsoid with mild bumps,
    # recentred so the centroid sits at the origin.
    directions = rng.standard_normal((num_vertices, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = 1.0 + 0.15 * rng.standard_normal(num_vertices)
    mean = directions * radii[:, None]
    mean[:, 1] *= 1.3
    mean[:, 2] *= 0.7
    mean -= mean.mean(axis=0)

    basis, _ = np.linalg.qr(rng.standard_normal((3 * num_vertices, num_components)))
    signs = np.sign(basis[0])
    signs[signs == 0] = 1.0
    components = (basis * signs).T.reshape(num_components, num_vertices, 3)

    sigmas = 0.25 * 0.85 ** np.arange(num_components)
    return ShapeModel(mean=mean, components=components, sigmas=sigmas)


def sample_shape(model: ShapeModel, gamma: np.ndarray) -> np.ndarray:
    """Mesh for one coefficient vector: mean + sum_i gamma_i * sigma_i * comp_i."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (model.num_components,):
        raise UsageError(f"gamma has shape {gamma.shape}, expected ({model.num_components},)")
    return model.mean + np.einsum("k,kvd->vd", gamma * model.sigmas, model.components)


def default_camera(image_size: int = 128) -> Camera:
    """Frontal camera preset that keeps the synthetic mesh inside the frame."""
    return Camera(focal=float(image_size), cx=image_size / 2.0, cy=image_size / 2.0,
                  rotation=np.eye(3), translation=np.array([0.0, 0.0, 4.0]))


def project(vertices: np.ndarray, camera: Camera):
    """Pinhole projection; vertices behind the camera are skipped and reported.

    Returns (points, skipped): points is (V', 2) pixel coordinates (u, v) for
    the vertices with positive camera-frame depth, skipped lists the indices
    of the dropped vertices.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    cam_frame = vertices @ camera.rotation.T + camera.translation
    in_front = cam_frame[:, 2] > 0
    skipped = list(np.nonzero(~in_front)[0])
    visible = cam_frame[in_front]
    u = camera.focal * visible[:, 0] / visible[:, 2] + camera.cx
    v = camera.focal * visible[:, 1] / visible[:, 2] + camera.cy
    return np.stack([u, v], axis=1), skipped


MARKER_VALUE = 1.0  # pure white in [0,1] planes


def render_target(hr_image: np.ndarray, points: np.ndarray) -> StructureTarget:
    """Stamp single-pixel white markers at the clipped integer point positions."""
    image = np.array(hr_image, dtype=np.float32, copy=True)
    _, height, width = image.shape
    kept: list[tuple[int, int]] = []
    for u, v in np.atleast_2d(np.asarray(points, dtype=np.float64).reshape(-1, 2)):
        col = int(np.floor(u + 0.5))
        row = int(np.floor(v + 0.5))
        if 0 <= col < width and 0 <= row < height:
            image[:, row, col] = MARKER_VALUE
            kept.append((col, row))
    return StructureTarget(image=image, points=kept)


def make_target(hr_image: np.ndarray, model: ShapeModel, gamma: np.ndarray,
                camera: Camera) -> StructureTarget:
    """Full pipeline: sample mesh -> project -> render onto the HR image."""
    mesh = sample_shape(model, gamma)
    points, _ = project(mesh, camera)
    return render_target(hr_image, points)
