"""Synthetic colored surfaces for self-validation and experiments.

Three shapes with distinct curvature character: a jittered plane, a sphere,
and a noisy torus. Colors vary smoothly with position so both geometry and
color channels carry structure for the predictors to exploit.
"""

from __future__ import annotations

import numpy as np

from .pointcloud import PointCloud

__all__ = ["plane_cloud", "sphere_cloud", "noisy_torus_cloud", "SHAPE_BUILDERS"]


def _smooth_colors(positions: np.ndarray, scale: float) -> np.ndarray:
    x, y, z = positions[:, 0], positions[:, 1], positions[:, 2]
    r = 128.0 + 90.0 * np.sin(2.0 * np.pi * x / scale)
    g = 128.0 + 90.0 * np.cos(2.0 * np.pi * y / scale)
    b = 128.0 + 90.0 * np.sin(2.0 * np.pi * (x + z) / scale)
    return np.clip(np.column_stack([r, g, b]), 0.0, 255.0)


def plane_cloud(n: int, rng_seed: int = 0, extent: float = 10.0) -> PointCloud:
    """Points on a gently waved plane patch of the given extent."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    xy = rng.uniform(-extent / 2, extent / 2, size=(n, 2))
    z = 0.15 * np.sin(xy[:, 0]) * np.cos(xy[:, 1])
    positions = np.column_stack([xy, z])
    return PointCloud(positions, _smooth_colors(positions, extent / 2))


def sphere_cloud(n: int, rng_seed: int = 0, radius: float = 5.0) -> PointCloud:
    """Points uniform on a sphere surface."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    positions = radius * v
    return PointCloud(positions, _smooth_colors(positions, radius))


def noisy_torus_cloud(n: int, rng_seed: int = 0, major: float = 5.0,
                      minor: float = 1.5, noise: float = 0.05) -> PointCloud:
    """Points on a torus with small radial jitter."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    u = rng.uniform(0.0, 2.0 * np.pi, size=n)
    w = rng.uniform(0.0, 2.0 * np.pi, size=n)
    x = (major + minor * np.cos(w)) * np.cos(u)
    y = (major + minor * np.cos(w)) * np.sin(u)
    z = minor * np.sin(w)
    positions = np.column_stack([x, y, z]) + rng.normal(0.0, noise, size=(n, 3))
    return PointCloud(positions, _smooth_colors(positions, major))


SHAPE_BUILDERS = {
    "plane": plane_cloud,
    "sphere": sphere_cloud,
    "torus": noisy_torus_cloud,
}
