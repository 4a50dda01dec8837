"""Small hand-built inputs shared by tests, scripts and the CLI."""
from __future__ import annotations

import numpy as np

from .forest import TidyForest, build_shell_forest
from .geom import TangentBall
from .runge import Hypersurface


def five_ball_forest(inner: float = 0.62, outer: float = 0.9, radius: float = 0.1) -> TidyForest:
    """Tidy forest in R^4 = C^2: three balls on |p| = inner at angles 0, 120,
    240 degrees and two on |p| = outer at 60 and 180 degrees, all centred in
    the z1-plane so that every ball meets {w = c} for |c| <= radius."""
    ang_in = np.deg2rad([0.0, 120.0, 240.0])
    ang_out = np.deg2rad([60.0, 180.0])
    pts = [inner * np.array([np.cos(a), np.sin(a), 0.0, 0.0]) for a in ang_in]
    pts += [outer * np.array([np.cos(a), np.sin(a), 0.0, 0.0]) for a in ang_out]
    return TidyForest(3, np.array(pts), np.full(5, radius))


def fixture_surface() -> Hypersurface:
    """{w = 0.05}."""
    return Hypersurface.line(0.0, 0.05)


def outer_shell_ball(r1: float = 0.5, r2: float = 0.8) -> TangentBall:
    """The ball of the planar (r1, r2) shell forest farthest from the origin,
    placed in the z1-plane of C^2."""
    f = build_shell_forest(1, r1, r2)
    i = int(np.argmax(f.norms))
    return TangentBall(np.r_[f.centers[i], 0.0, 0.0], float(f.radii[i]))
