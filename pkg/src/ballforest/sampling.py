"""Quasi-uniform point sets on spheres and in balls.

Covering claims are universally quantified over the sphere, so every sampler
here is deterministic and reports a mesh-norm estimate that callers add as
explicit slack.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0
_THREADS = 1


def set_threads(count: int) -> None:
    """Worker count for read-only KD-tree queries (results do not depend on it)."""
    global _THREADS
    if count < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = int(count)


def threads() -> int:
    return _THREADS


def circle_points(count: int, phase: float = 0.0) -> np.ndarray:
    theta = phase + 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(theta), np.sin(theta)])


def fibonacci_sphere(count: int) -> np.ndarray:
    """Generalized spiral on S^2 (offset Fibonacci lattice)."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = 2.0 * np.pi * i / GOLDEN
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def sobol_sphere(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points on S^(dim-1) by rejection from the cube then
    radial normalization."""
    engine = qmc.Sobol(d=dim, scramble=True, seed=seed)
    out = []
    have = 0
    while have < count:
        m = int(np.ceil(np.log2(max(2 * (count - have) * 2 ** (dim // 2), 2))))
        x = 2.0 * engine.random_base2(m) - 1.0
        r = np.linalg.norm(x, axis=1)
        keep = (r <= 1.0) & (r > 1e-3)
        x = x[keep] / r[keep, None]
        out.append(x)
        have += len(x)
    return np.concatenate(out)[:count]


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points on the unit sphere of R^dim."""
    if dim < 2:
        raise ValueError("sphere sampling needs ambient dimension >= 2")
    if dim == 2:
        return circle_points(count, phase=np.pi / count)
    if dim == 3:
        return fibonacci_sphere(count)
    return sobol_sphere(dim, count, seed=seed)


def mesh_norm_estimate(points: np.ndarray) -> float:
    """Twice the largest nearest-neighbour distance within the sample."""
    if len(points) < 2:
        return float("inf")
    d, _ = cKDTree(points).query(points, k=2, workers=_THREADS)
    return 2.0 * float(d[:, 1].max())


def ball_points(dim: int, count: int, radius: float = 1.0, seed: int = 0) -> np.ndarray:
    """Deterministic pseudo-random points filling the closed ball radius*B^dim,
    with a boundary share so that suprema of convex quantities are probed."""
    rng = np.random.default_rng(seed)
    n_bdry = count // 4
    n_in = count - n_bdry
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = np.ones(count)
    rad[:n_in] = rng.random(n_in) ** (1.0 / dim)
    return radius * g * rad[:, None]
