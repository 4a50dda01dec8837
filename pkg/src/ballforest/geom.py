"""Points, tangent balls, hyperplanes and convex-hull support queries in R^(n+1).

A tangent ball ``TangentBall(p, r)`` is the closed r-disk centred at ``p``
inside the affine hyperplane ``p + <p>^perp``; it touches the sphere |p|S^n
at its centre. Points are plain read-only float arrays; C^(N+1) points use
the pairing (x1, x2, x3, ...) -> (x1 + i x2, x3 + i x4, ...).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .sampling import sphere_points

TOL = 1e-9


class GeometryError(ValueError):
    """Input violates a geometric precondition (zero vector, bad radius,
    dimension mismatch, ...)."""


def point(x) -> np.ndarray:
    """Immutable coordinate vector with at least two finite entries."""
    a = np.array(x, dtype=float).reshape(-1)
    if a.size < 2:
        raise GeometryError("points need dimension n+1 >= 2")
    if not np.all(np.isfinite(a)):
        raise GeometryError("point coordinates must be finite")
    a.setflags(write=False)
    return a


def _same_dim(*arrays) -> int:
    dims = {np.shape(a)[-1] for a in arrays}
    if len(dims) != 1:
        raise GeometryError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def to_complex(x: np.ndarray) -> np.ndarray:
    """Real (..., 2M) -> complex (..., M)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2:
        raise GeometryError("complex pairing needs an even real dimension")
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def radial_project(x) -> np.ndarray:
    """x / |x| (the radial projection onto the unit sphere)."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(nrm == 0.0):
        raise GeometryError("radial projection of the zero vector")
    return x / nrm


@dataclass(frozen=True)
class Hyperplane:
    """The affine hyperplane {x : <x, normal> = offset}, |normal| = 1."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        nu = point(self.normal)
        if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
            raise GeometryError("hyperplane normal must be a unit vector")
        object.__setattr__(self, "normal", nu)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, normal, offset) -> "Hyperplane":
        nu = np.asarray(normal, dtype=float)
        s = np.linalg.norm(nu)
        if s == 0.0:
            raise GeometryError("zero normal")
        return cls(nu / s, float(offset) / s)

    def signed_distance(self, x) -> np.ndarray:
        return np.asarray(x) @ self.normal - self.offset


@dataclass(frozen=True)
class TangentBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        p = point(self.center)
        if np.linalg.norm(p) == 0.0:
            raise GeometryError("tangent ball centre must be nonzero")
        if not self.radius > 0.0 or not np.isfinite(self.radius):
            raise GeometryError("tangent ball radius must be positive")
        object.__setattr__(self, "center", p)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.center))

    @property
    def normal(self) -> np.ndarray:
        return self.center / self.norm

    @property
    def outer_norm(self) -> float:
        """Largest |x| over the ball: its rim lies on sqrt(|p|^2 + r^2) S^n."""
        return float(np.hypot(self.norm, self.radius))

    @property
    def hyperplane(self) -> Hyperplane:
        return Hyperplane(self.normal, self.norm)

    def contains(self, x, tol: float = TOL) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        a = d @ self.normal
        return (np.abs(a) <= tol) & (np.linalg.norm(d, axis=-1) <= self.radius + tol)

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal basis (rows) of <p>^perp."""
        nu = self.normal
        q, _ = np.linalg.qr(np.column_stack([nu, np.eye(self.dim)]))
        return q[:, 1 : self.dim].T

    def sample(self, count: int, seed: int = 0, boundary_share: float = 0.5) -> np.ndarray:
        rng = np.random.default_rng(seed)
        basis = self.tangent_basis()
        g = rng.standard_normal((count, self.dim - 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = rng.random(count) ** (1.0 / max(self.dim - 1, 1))
        rad[: int(boundary_share * count)] = 1.0
        return self.center + self.radius * (g * rad[:, None]) @ basis

    def support(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        a = u @ self.normal
        w = u - a[:, None] * self.normal
        return u @ self.center + self.radius * np.linalg.norm(w, axis=1)

    def support_point(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        a = u @ self.normal
        w = u - a[:, None] * self.normal
        nw = np.linalg.norm(w, axis=1, keepdims=True)
        w = np.divide(w, nw, out=np.zeros_like(w), where=nw > 0)
        return self.center + self.radius * w

    def scaled(self, s: float) -> "TangentBall":
        return TangentBall(s * self.center, s * self.radius)


def dist_point_ball(x, ball: TangentBall) -> np.ndarray:
    """Exact Euclidean distance from point(s) x to the closed tangent ball."""
    x = np.asarray(x, dtype=float)
    _same_dim(x, ball.center)
    d = x - ball.center
    a = d @ ball.normal
    w = np.linalg.norm(d - a[..., None] * ball.normal, axis=-1)
    excess = np.maximum(w - ball.radius, 0.0)
    return np.hypot(a, excess)


def segments_hit_ball(a, b, ball: TangentBall, tol: float = TOL) -> np.ndarray:
    """Vectorised: does segment [a_k, b_k] meet the closed tangent ball?

    Touching counts as a hit. Segments lying in the ball's hyperplane are
    decided by a segment-to-centre distance test inside that plane.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    _same_dim(a, b, ball.center)
    return segments_hit_balls(a, b, ball.center[None], np.array([ball.radius]), tol)


def segments_hit_balls(a, b, centers, radii, tol: float = TOL) -> np.ndarray:
    """Elementwise hit test of segment k against ball k (rows broadcast)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    p = np.atleast_2d(np.asarray(centers, dtype=float))
    r = np.asarray(radii, dtype=float).reshape(-1)
    k = max(len(a), len(b), len(p), len(r))
    a, b, p = (np.broadcast_to(v, (k, v.shape[1])) for v in (a, b, p))
    r = np.broadcast_to(r, (k,))
    nu = p / np.linalg.norm(p, axis=1, keepdims=True)
    sa = np.einsum("ij,ij->i", a - p, nu)
    sb = np.einsum("ij,ij->i", b - p, nu)
    hit = np.zeros(k, dtype=bool)

    in_plane = (np.abs(sa) <= tol) & (np.abs(sb) <= tol)
    crossing = ~in_plane & ~(((sa > tol) & (sb > tol)) | ((sa < -tol) & (sb < -tol)))

    if np.any(crossing):
        sac, sbc = sa[crossing], sb[crossing]
        denom = sac - sbc
        lam = np.where(np.abs(denom) > 0, sac / np.where(denom == 0, 1.0, denom), 0.0)
        lam = np.clip(lam, 0.0, 1.0)
        ac = a[crossing]
        x = ac + lam[:, None] * (b[crossing] - ac)
        d = x - p[crossing]
        nc = nu[crossing]
        tang = d - np.einsum("ij,ij->i", d, nc)[:, None] * nc
        hit[crossing] = np.linalg.norm(tang, axis=1) <= r[crossing] + tol

    if np.any(in_plane):
        ai, bi, pi = a[in_plane], b[in_plane], p[in_plane]
        seg = bi - ai
        L2 = np.einsum("ij,ij->i", seg, seg)
        t = np.where(L2 > 0, np.einsum("ij,ij->i", pi - ai, seg) / np.where(L2 > 0, L2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        closest = ai + t[:, None] * seg
        hit[in_plane] = np.linalg.norm(closest - pi, axis=1) <= r[in_plane] + tol
    return hit


def segment_hits_ball(a, b, ball: TangentBall, tol: float = TOL) -> bool:
    a = point(a)
    b = point(b)
    if np.array_equal(a, b):
        raise GeometryError("degenerate segment")
    return bool(segments_hit_ball(a[None], b[None], ball, tol)[0])


def segment_min_norm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Smallest |x| over each segment [a_k, b_k]."""
    seg = b - a
    L2 = np.einsum("ij,ij->i", seg, seg)
    t = np.where(L2 > 0, -np.einsum("ij,ij->i", a, seg) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * seg, axis=1)


@dataclass(frozen=True)
class SolidBall:
    center: np.ndarray
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", point(self.center))
        if self.radius < 0 or not np.isfinite(self.radius):
            raise GeometryError("solid ball radius must be finite and >= 0")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def outer_norm(self) -> float:
        return float(np.linalg.norm(self.center) + self.radius)

    def support(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        return u @ self.center + self.radius * np.linalg.norm(u, axis=1)

    def support_point(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        nu = np.linalg.norm(u, axis=1, keepdims=True)
        return self.center + self.radius * u / np.where(nu > 0, nu, 1.0)


@dataclass(frozen=True)
class HullSpec:
    """Closed convex hull of solid balls and tangent balls, optionally
    thickened by a Minkowski ball of radius ``pad``."""

    generators: tuple
    pad: float = 0.0
    _dirs: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise GeometryError("hull needs at least one generator")
        _same_dim(*[g.center for g in gens])
        if self.pad < 0:
            raise GeometryError("pad must be nonnegative")
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return self.generators[0].center.size

    def with_generators(self, *extra) -> "HullSpec":
        return HullSpec(self.generators + tuple(extra), self.pad)

    def support(self, u) -> np.ndarray:
        """Support function h(u) = max_{x in H} <x, u> (any, not only unit, u)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        vals = np.max(np.stack([g.support(u) for g in self.generators]), axis=0)
        return vals + self.pad * np.linalg.norm(u, axis=1)

    def support_point(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        vals = np.stack([g.support(u) for g in self.generators])
        best = np.argmax(vals, axis=0)
        pts = np.stack([g.support_point(u) for g in self.generators])
        out = pts[best, np.arange(len(u))]
        nu = np.linalg.norm(u, axis=1, keepdims=True)
        return out + self.pad * u / np.where(nu > 0, nu, 1.0)

    def max_norm(self) -> float:
        """max |x| over the hull (attained at a generator)."""
        return max(g.outer_norm for g in self.generators) + self.pad

    def directions(self, count: int = 4096) -> np.ndarray:
        if count not in self._dirs:
            self._dirs[count] = sphere_points(self.dim, count, seed=7)
        return self._dirs[count]

    def boundary_samples(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        u = rng.standard_normal((count, self.dim))
        return self.support_point(u)

    def samples(self, count: int, seed: int = 0) -> np.ndarray:
        """Points of the hull: half on the boundary, half random convex
        combinations of boundary points (pulled toward the interior)."""
        rng = np.random.default_rng(seed)
        nb = count // 2
        bd = self.boundary_samples(nb, seed=seed)
        k = count - nb
        u = rng.standard_normal((k, 2, self.dim))
        ends = self.support_point(u.reshape(-1, self.dim)).reshape(k, 2, self.dim)
        t = rng.random((k, 1))
        inner = t * ends[:, 0] + (1 - t) * ends[:, 1]
        return np.concatenate([bd, inner])

    def signed_distance(self, x, dir_count: int = 2048, refine: bool = True) -> np.ndarray:
        """Signed distance to the hull boundary (negative inside).

        Uses  -min_{|u|=1} (h(u) - <x, u>), exact for convex sets; the minimum
        is taken over a direction grid and polished locally.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        U = self.directions(dir_count)
        H = self.support(U)
        G = H[None, :] - x @ U.T
        k = np.argmin(G, axis=1)
        val = G[np.arange(len(x)), k]
        if refine:
            for i in range(len(x)):
                val[i] = min(val[i], _sphere_min(lambda u, xi=x[i]: self.support(u)[0] - u[0] @ xi, U[k[i]]))
        return -val


def _sphere_min(fun, u0: np.ndarray) -> float:
    def obj(v):
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.inf
        return fun((v / nv)[None])

    res = minimize(obj, u0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 400 * len(u0)})
    return float(min(res.fun, obj(u0)))


def support_gap_min(fun, dim: int, dir_count: int = 4096, polish: int = 8) -> float:
    """min over the unit sphere of a support-type function ``fun(U) -> (k,)``."""
    U = sphere_points(dim, dir_count, seed=11)
    vals = fun(U)
    order = np.argsort(vals)[:polish]
    best = float(vals[order[0]])
    for k in order:
        best = min(best, _sphere_min(fun, U[k]))
    return best


def hull_hyperplane_gap(hull: HullSpec, plane: Hyperplane) -> float:
    """Clearance c - h_H(nu); positive means the hull lies strictly on the
    negative side of the plane by that much."""
    _same_dim(hull.generators[0].center, plane.normal)
    return float(plane.offset - hull.support(plane.normal)[0])


def nested_gap(inner: HullSpec, outer: HullSpec, dir_count: int = 4096) -> float:
    """dist(inner, complement of outer) = min_{|u|=1} h_outer(u) - h_inner(u)
    for inner contained in outer (negative if not nested)."""
    return support_gap_min(lambda U: outer.support(U) - inner.support(U), inner.dim, dir_count)


def ball_to_complement(ball: TangentBall, hull: HullSpec, dir_count: int = 4096) -> float:
    """dist(ball, complement of hull) for a ball inside the hull."""
    return support_gap_min(lambda U: hull.support(U) - ball.support(U), ball.dim, dir_count)


def tangent_balls_intersect(p1, r1, p2, r2, tol: float = TOL) -> np.ndarray:
    """Vectorised exact intersection test for pairs of closed tangent balls.

    Two tangent balls in distinct hyperplanes meet iff the minimum-norm point
    x0 of the codimension-2 intersection of their hyperplanes lies in both
    disks: any other point of that flat is x0 + v with v orthogonal to both
    centres, which only increases the distance to each centre.
    """
    p1 = np.atleast_2d(p1)
    p2 = np.atleast_2d(p2)
    r1 = np.broadcast_to(np.asarray(r1, dtype=float), (len(p1),))
    r2 = np.broadcast_to(np.asarray(r2, dtype=float), (len(p2),))
    rho1 = np.linalg.norm(p1, axis=1)
    rho2 = np.linalg.norm(p2, axis=1)
    n1 = p1 / rho1[:, None]
    n2 = p2 / rho2[:, None]
    c = np.clip(np.einsum("ij,ij->i", n1, n2), -1.0, 1.0)
    out = np.zeros(len(p1), dtype=bool)

    parallel = np.abs(1.0 - np.abs(c)) <= 1e-14
    same = parallel & (c > 0) & (np.abs(rho1 - rho2) <= tol)
    out[same] = np.linalg.norm(p1[same] - p2[same], axis=1) <= r1[same] + r2[same] + tol

    gen = ~parallel
    if np.any(gen):
        cg = c[gen]
        det = 1.0 - cg * cg
        a = (rho1[gen] - cg * rho2[gen]) / det
        b = (rho2[gen] - cg * rho1[gen]) / det
        x0 = a[:, None] * n1[gen] + b[:, None] * n2[gen]
        d1 = np.linalg.norm(x0 - p1[gen], axis=1)
        d2 = np.linalg.norm(x0 - p2[gen], axis=1)
        out[gen] = (d1 <= r1[gen] + tol) & (d2 <= r2[gen] + tol)
    return out
