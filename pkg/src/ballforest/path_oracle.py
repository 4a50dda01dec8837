"""Shortest crossings of a shell amid tangent-ball obstacles.

The oracle can refute a claimed lower bound on crossing length (a feasible
polyline shorter than the claim is a genuine counterexample) but it can never
prove one: a grid optimum only over-approximates the continuum optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .forest import TidyForest
from .geom import GeometryError, segment_min_norm, segments_hit_balls
from .sampling import circle_points, fibonacci_sphere, sphere_points

MODES = ("euclidean", "projected")
ZERO_WEIGHT = 1e-12  # csgraph treats explicit zeros as missing edges


@dataclass
class CrossingProblem:
    forest: TidyForest
    r1: float
    r2: float
    h: float
    mode: str = "euclidean"
    seed: int = 0
    straighten_trials: int = 100_000
    heuristic_restarts: int = 2000

    def __post_init__(self):
        if self.mode not in MODES:
            raise GeometryError(f"mode must be one of {MODES}")
        if not self.h > 0:
            raise GeometryError("grid step must be positive")
        if not 0 < self.r1 < self.r2:
            raise GeometryError("need 0 < r1 < r2")
        if (self.r2 - self.r1) / self.h < 2:
            raise GeometryError("shell must hold at least 3 grid layers")

    @property
    def dim(self) -> int:
        return self.forest.n + 1

    @property
    def shell_tol(self) -> float:
        # chords between neighbours on the inner sphere dip below r1 by O(h^2)
        return self.h * self.h / self.r1


@dataclass
class CrossingResult:
    length: float
    grid_length: float
    witness: np.ndarray
    status: str  # "ok" | "blocked" | "heuristic"
    nodes: int = 0
    edges: int = 0
    info: dict = field(default_factory=dict)

    @property
    def blocked(self) -> bool:
        return self.status == "blocked"


def segment_weight(a: np.ndarray, b: np.ndarray, mode: str) -> np.ndarray:
    """Euclidean length, or the exact length of the radial image (the angle
    between endpoints, since a segment projects onto a great-circle arc)."""
    if mode == "euclidean":
        return np.linalg.norm(b - a, axis=-1)
    ua = a / np.linalg.norm(a, axis=-1, keepdims=True)
    ub = b / np.linalg.norm(b, axis=-1, keepdims=True)
    # atan2 form is accurate for tiny angles
    cr = np.linalg.norm(ub - ua, axis=-1)
    cs = np.linalg.norm(ub + ua, axis=-1)
    return 2.0 * np.arctan2(cr, cs)


def polyline_length(poly: np.ndarray, mode: str) -> float:
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 2:
        return 0.0
    return float(segment_weight(poly[:-1], poly[1:], mode).sum())


class Obstacles:
    """Ball arrays with a KD-tree on centres for candidate filtering."""

    def __init__(self, forest: TidyForest):
        self.centers = forest.centers
        self.radii = forest.radii
        self.rmax = float(self.radii.max()) if len(self.radii) else 0.0
        self.tree = cKDTree(self.centers) if len(self.radii) else None

    def __len__(self) -> int:
        return len(self.radii)

    def hits(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Per segment: does it meet any ball?"""
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        out = np.zeros(len(a), dtype=bool)
        if self.tree is None or len(a) == 0:
            return out
        mid = 0.5 * (a + b)
        half = 0.5 * np.linalg.norm(b - a, axis=1)
        # a ball point within the segment forces |centre - mid| <= r + half
        lists = self.tree.query_ball_point(mid, self.rmax + half + 1e-9)
        seg_idx = np.repeat(np.arange(len(a)), [len(x) for x in lists])
        if len(seg_idx) == 0:
            return out
        ball_idx = np.fromiter((j for x in lists for j in x), dtype=int, count=len(seg_idx))
        hit = segments_hit_balls(a[seg_idx], b[seg_idx], self.centers[ball_idx], self.radii[ball_idx])
        np.logical_or.at(out, seg_idx[hit], True)
        return out

    def hits_edges(self, pts: np.ndarray, ei: np.ndarray, ej: np.ndarray, chunk: int = 200_000) -> np.ndarray:
        """Edge-list variant: ball-centred queries against edge midpoints."""
        out = np.zeros(len(ei), dtype=bool)
        if self.tree is None or len(ei) == 0:
            return out
        a, b = pts[ei], pts[ej]
        mid = 0.5 * (a + b)
        half = 0.5 * float(np.linalg.norm(b - a, axis=1).max())
        mtree = cKDTree(mid)
        lists = mtree.query_ball_point(self.centers, self.radii + half + 1e-9)
        counts = np.array([len(x) for x in lists])
        if counts.sum() == 0:
            return out
        ball_idx = np.repeat(np.arange(len(self.radii)), counts)
        edge_idx = np.fromiter((j for x in lists for j in x), dtype=int, count=int(counts.sum()))
        for s in range(0, len(edge_idx), chunk):
            e, bl = edge_idx[s:s + chunk], ball_idx[s:s + chunk]
            hit = segments_hit_balls(a[e], b[e], self.centers[bl], self.radii[bl])
            out[e[hit]] = True
        return out


def _directions(dim: int, h: float, r2: float, seed: int):
    """Quasi-uniform directions at angular mesh about h/r2 and neighbour pairs."""
    step = h / r2
    if dim == 2:
        k = int(math.ceil(2.0 * math.pi / step))
        dirs = circle_points(k)
        i = np.arange(k)
        pairs = np.column_stack([i, (i + 1) % k])
        return dirs, pairs
    if dim == 3:
        k = int(math.ceil(4.0 * math.pi / (step * step) * 2.0 / math.sqrt(3.0)))
        dirs = fibonacci_sphere(k)
        _, nb = cKDTree(dirs).query(dirs, k=7)
        i = np.repeat(np.arange(k), 6)
        j = nb[:, 1:].reshape(-1)
        pairs = np.unique(np.sort(np.column_stack([i, j]), axis=1), axis=0)
        return dirs, pairs
    raise GeometryError("grid search supports ambient dimension 2 or 3")


def build_grid(problem: CrossingProblem):
    """Nodes level-major (node = level*K + direction) and undirected edges."""
    levels_n = int(math.ceil((problem.r2 - problem.r1) / problem.h)) + 1
    radii = np.linspace(problem.r1, problem.r2, levels_n)
    dirs, pairs = _directions(problem.dim, problem.h, problem.r2, problem.seed)
    K = len(dirs)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, problem.dim)
    lev = np.arange(levels_n)[:, None] * K
    pi, pj = pairs[:, 0], pairs[:, 1]
    ang = [(lev + pi).ravel(), (lev + pj).ravel()]
    lo = lev[:-1]
    up = lev[1:]
    d = np.arange(K)
    rad = [(lo + d).ravel(), (up + d).ravel()]
    dg1 = [(lo + pi).ravel(), (up + pj).ravel()]
    dg2 = [(lo + pj).ravel(), (up + pi).ravel()]
    ei = np.concatenate([ang[0], rad[0], dg1[0], dg2[0]])
    ej = np.concatenate([ang[1], rad[1], dg1[1], dg2[1]])
    return pts, radii, K, ei, ej


def _grid_search(problem: CrossingProblem, obstacles: Obstacles):
    pts, radii, K, ei, ej = build_grid(problem)
    blocked = obstacles.hits_edges(pts, ei, ej)
    ei, ej = ei[~blocked], ej[~blocked]
    w = segment_weight(pts[ei], pts[ej], problem.mode) + ZERO_WEIGHT
    n_nodes = len(pts)
    g = coo_matrix((w, (ei, ej)), shape=(n_nodes, n_nodes)).tocsr()
    sources = np.arange(K)
    sinks = np.arange((len(radii) - 1) * K, n_nodes)
    dist, pred, _ = dijkstra(g, directed=False, indices=sources, min_only=True, return_predecessors=True)
    dsink = dist[sinks]
    if not np.isfinite(dsink).any():
        return None, len(pts), len(ei)
    t = int(sinks[int(np.argmin(dsink))])
    path = [t]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return pts[path], len(pts), len(ei)


def feasible(problem: CrossingProblem, obstacles: Obstacles, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Segments clear of every ball and inside the closed shell."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    ok = segment_min_norm(a, b) >= problem.r1 - problem.shell_tol
    ok &= np.maximum(np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)) <= problem.r2 + 1e-12
    if np.any(ok):
        ok[ok] = ~obstacles.hits(a[ok], b[ok])
    return ok


def straighten(problem: CrossingProblem, obstacles: Obstacles, poly: np.ndarray) -> np.ndarray:
    """Seeded midpoint relaxation; collinear vertices are dropped."""
    rng = np.random.default_rng(problem.seed)
    P = [np.array(p) for p in poly]
    mode = problem.mode
    stall = 0
    for _ in range(problem.straighten_trials):
        if len(P) < 3:
            break
        i = int(rng.integers(1, len(P) - 1))
        a, x, b = P[i - 1], P[i], P[i + 1]
        old = segment_weight(a, x, mode) + segment_weight(x, b, mode)
        # try the shortcut first, then the midpoint, then half way to it
        if feasible(problem, obstacles, a, b)[0] and segment_weight(a, b, mode) <= old:
            del P[i]
            stall = 0
            continue
        moved = False
        for y in (0.5 * (a + b), 0.5 * (x + 0.5 * (a + b))):
            new = segment_weight(a, y, mode) + segment_weight(y, b, mode)
            if new < old - 1e-15 and feasible(problem, obstacles, np.stack([a, y]), np.stack([y, b])).all():
                P[i] = y
                moved = True
                break
        stall = 0 if moved else stall + 1
        if stall > 20 * len(P):
            break
    return np.array(P)


def _heuristic(problem: CrossingProblem, obstacles: Obstacles) -> np.ndarray | None:
    """Random restarts: radial segments, then two-leg detours via a random
    shell point. Any feasible polyline found is a genuine upper bound."""
    rng = np.random.default_rng(problem.seed)
    dim = problem.dim
    U = sphere_points(dim, problem.heuristic_restarts, seed=problem.seed)
    a, b = problem.r1 * U, problem.r2 * U
    ok = feasible(problem, obstacles, a, b)
    best, best_len = None, math.inf
    if ok.any():
        i = int(np.flatnonzero(ok)[0])
        best = np.stack([a[i], b[i]])
        best_len = polyline_length(best, problem.mode)
    if best_len > 0:
        m = rng.standard_normal((problem.heuristic_restarts, dim))
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        rad = problem.r1 + (problem.r2 - problem.r1) * rng.random(problem.heuristic_restarts)
        m = rad[:, None] * (U + 0.2 * m)
        m *= (rad / np.linalg.norm(m, axis=1))[:, None]
        ok = feasible(problem, obstacles, a, m) & feasible(problem, obstacles, m, b)
        for i in np.flatnonzero(ok):
            poly = np.stack([a[i], m[i], b[i]])
            L = polyline_length(poly, problem.mode)
            if L < best_len:
                best, best_len = poly, L
    return best


def min_crossing_length(problem: CrossingProblem) -> CrossingResult:
    """Shortest grid crossing from the inner to the outer sphere, straightened.

    Grid search runs in ambient dimension 2 and 3; higher dimensions use the
    randomized heuristic and say so in ``status``.
    """
    obstacles = Obstacles(problem.forest)
    if problem.dim <= 3:
        path, nn, ne = _grid_search(problem, obstacles)
        status = "ok"
    else:
        path, nn, ne = _heuristic(problem, obstacles), 0, 0
        status = "heuristic"
    if path is None:
        return CrossingResult(math.inf, math.inf, np.zeros((0, problem.dim)), "blocked", nn, ne,
                              {"note": f"blocked at resolution h={problem.h}"})
    grid_len = polyline_length(path, problem.mode)
    if len(path) > 2:
        path = straighten(problem, obstacles, path)
    return CrossingResult(polyline_length(path, problem.mode), grid_len, path, status, nn, ne)


@dataclass
class Verdict:
    claimed: float
    measured: float
    h: float
    mode: str
    verdict: str
    seed: int
    status: str
    note: str = ""

    @property
    def falsified(self) -> bool:
        return self.verdict == "FALSIFIED"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def falsify_bound(problem: CrossingProblem, claimed: float, result: CrossingResult | None = None):
    """FALSIFIED iff a feasible crossing shorter than claimed - 4h exists."""
    res = result if result is not None else min_crossing_length(problem)
    falsified = res.length < claimed - 4.0 * problem.h
    if falsified:
        note = "feasible witness shorter than the claimed bound"
    else:
        note = "no counterexample at this resolution; evidence only, not a proof"
    if res.blocked:
        note = res.info.get("note", "blocked")
    v = Verdict(float(claimed), float(res.length), problem.h, problem.mode,
                "FALSIFIED" if falsified else "consistent", problem.seed, res.status, note)
    return v, res
