"""Shear automorphisms that push a complex hypersurface off one tangent ball.

Pipeline for a ball D, a convex body E on the far side of D's hyperplane and
a hypersurface Z:

1. a unitary frame sends the hyperplane to {Re z1 = 0} and E into Re z1 < 0;
2. D sits in a cylinder D' x (lambda B) with D' a segment of the imaginary axis;
3. Z misses the thinner cylinder D' x (eta B);
4. a polynomial psi is small on pi_1(E) and has large real part on D';
5. Phi(z, xi) = (z, exp(psi(z)) xi) blows the eta-cylinder over the
   lambda-cylinder while moving E very little.

Complex points are arrays of shape (..., N+1); real points use the pairing
of :mod:`geom`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .geom import GeometryError, HullSpec, Hyperplane, TangentBall, hull_hyperplane_gap, to_complex, to_real

CLEAR_MIN = 1e-8
TRANSLATION_POWERS = range(20, 0, -1)  # 2^-20 .. 2^-1, smallest first
TAU_FLOOR = 1e-4


# ---------------------------------------------------------------- frames

@dataclass(frozen=True)
class Frame:
    """zeta -> U (zeta - q)."""

    unitary: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.unitary, dtype=complex)
        q = np.asarray(self.shift, dtype=complex).reshape(-1)
        if U.shape != (len(q), len(q)):
            raise GeometryError("frame shapes disagree")
        if not np.allclose(U @ U.conj().T, np.eye(len(q)), atol=1e-10, rtol=0):
            raise GeometryError("frame matrix is not unitary")
        object.__setattr__(self, "unitary", U)
        object.__setattr__(self, "shift", q)

    @property
    def dim(self) -> int:
        return len(self.shift)

    @classmethod
    def identity(cls, dim: int) -> "Frame":
        return cls(np.eye(dim, dtype=complex), np.zeros(dim, dtype=complex))

    def apply(self, zeta) -> np.ndarray:
        return (np.asarray(zeta, dtype=complex) - self.shift) @ self.unitary.T

    def inverse(self, omega) -> np.ndarray:
        return np.asarray(omega, dtype=complex) @ self.unitary.conj() + self.shift

    def apply_real(self, x) -> np.ndarray:
        return self.apply(to_complex(x))

    def first_coordinate_map(self) -> np.ndarray:
        """Real 2 x (2N+2) matrix A with (Re z1, Im z1) = A (x - q)."""
        u = self.unitary[0]
        # z1 = sum u_k zeta_k: Re/Im parts as real linear forms in (x, y) pairs
        A = np.zeros((2, 2 * self.dim))
        A[0, 0::2], A[0, 1::2] = u.real, -u.imag
        A[1, 0::2], A[1, 1::2] = u.imag, u.real
        return A

    def to_dict(self) -> dict:
        return {"unitary": _cplx_list(self.unitary), "shift": _cplx_list(self.shift)}

    @classmethod
    def from_dict(cls, d: dict) -> "Frame":
        return cls(_cplx_array(d["unitary"]), _cplx_array(d["shift"]))


def _cplx_list(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _cplx_array(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _complete_unitary(v: np.ndarray) -> np.ndarray:
    """Unitary whose first row is conj(v); Gram-Schmidt on v, e_1, e_2, ..."""
    dim = len(v)
    cols = [v / np.linalg.norm(v)]
    for k in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[k] = 1.0
        for c in cols:
            e = e - np.vdot(c, e) * c
        for c in cols:
            e = e - np.vdot(c, e) * c
        n = np.linalg.norm(e)
        if n > 1e-8:
            cols.append(e / n)
        if len(cols) == dim:
            break
    Q = np.column_stack(cols)
    return Q.conj().T


def normalize_frame(plane: Hyperplane, E: HullSpec | None = None) -> Frame:
    """Frame taking ``plane`` to {Re z1 = 0} with E on the side Re z1 < 0.

    The shift is the foot point offset*normal, so the fibre coordinates of a
    point equal those of U zeta and never exceed |zeta|.
    """
    nu = plane.normal
    if nu.size % 2:
        raise GeometryError("frames need even real dimension")
    if E is not None:
        gap = hull_hyperplane_gap(E, plane)
        if not gap > 0:
            raise GeometryError(f"convex body meets or crosses the hyperplane (gap {gap:.3g})")
    v = to_complex(nu)
    U = _complete_unitary(v)
    return Frame(U, to_complex(plane.offset * nu))


# ---------------------------------------------------------------- cylinders

@dataclass(frozen=True)
class Cylinder:
    """D' x (lambda B_N) with D' = [-i half, i half]."""

    half: float
    lam: float

    def __post_init__(self):
        if not self.lam > 0 or self.half < 0:
            raise GeometryError("cylinder needs lambda > 0 and half-length >= 0")

    def contains(self, omega, tol: float = 0.0) -> np.ndarray:
        omega = np.atleast_2d(omega)
        z = omega[:, 0]
        fib = np.linalg.norm(omega[:, 1:], axis=1)
        return (np.abs(z.real) <= tol + 1e-12) & (np.abs(z.imag) <= self.half + tol) & (fib <= self.lam + tol)

    def segment(self, count: int) -> np.ndarray:
        return 1j * np.linspace(-self.half, self.half, count)

    def to_dict(self) -> dict:
        return {"half": self.half, "lambda": self.lam}


def project_cylinder(D: TangentBall, frame: Frame, check: int = 64) -> Cylinder:
    """Smallest symmetric segment and fibre radius from the disk's extreme
    points, padded by 1e-6 and a factor 1.01."""
    if D.dim != 2 * frame.dim:
        raise GeometryError("ball and frame dimensions differ")
    pts = frame.apply_real(D.sample(check, seed=0))
    if np.max(np.abs(pts[:, 0].real)) > 1e-8:
        raise GeometryError("frame does not map the ball's hyperplane to Re z1 = 0")
    c = frame.apply_real(D.center)
    A = frame.first_coordinate_map()
    a = A[1]  # Im z1 as a real linear form
    a_t = a - (a @ D.normal) * D.normal
    half = abs(c[0].imag) + D.radius * float(np.linalg.norm(a_t)) + 1e-6
    lam = (float(np.linalg.norm(c[1:])) + D.radius) * 1.01
    return Cylinder(half, lam)


# ---------------------------------------------------------------- hypersurfaces

@dataclass(frozen=True)
class Hypersurface:
    """{zeta_2 - t_2 = g(zeta_1 - t_1)} in C^(N+1), free in zeta_3.. .

    ``kind`` is "line" (g affine) or "graph"; ``coeffs`` are ascending
    complex coefficients of g; ``translation`` shifts the whole set.
    """

    kind: str
    coeffs: tuple
    dim: int = 2
    translation: tuple = ()

    def __post_init__(self):
        if self.kind not in ("line", "graph"):
            raise GeometryError(f"unsupported hypersurface kind {self.kind!r}")
        c = tuple(complex(x) for x in self.coeffs) or (0j,)
        if self.kind == "line" and len(c) > 2:
            raise GeometryError("a line has at most two coefficients")
        if self.dim < 2:
            raise GeometryError("hypersurfaces live in C^(N+1) with N >= 1")
        t = tuple(complex(x) for x in self.translation) or (0j,) * self.dim
        if len(t) != self.dim:
            raise GeometryError("translation has the wrong length")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "translation", t)

    @classmethod
    def line(cls, a: complex, b: complex, dim: int = 2) -> "Hypersurface":
        """{w = a z + b}."""
        return cls("line", (b, a), dim)

    @classmethod
    def graph(cls, coeffs, dim: int = 2) -> "Hypersurface":
        return cls("graph", tuple(coeffs), dim)

    @property
    def g(self) -> Polynomial:
        return Polynomial(np.array(self.coeffs, dtype=complex))

    @property
    def degree(self) -> int:
        c = np.trim_zeros(np.array(self.coeffs, dtype=complex), "b")
        return max(len(c) - 1, 0)

    def translated(self, vec) -> "Hypersurface":
        t = np.array(self.translation) + np.asarray(vec, dtype=complex)
        return Hypersurface(self.kind, self.coeffs, self.dim, tuple(t))

    def residual(self, zeta) -> np.ndarray:
        zeta = np.atleast_2d(np.asarray(zeta, dtype=complex))
        t = np.array(self.translation)
        return zeta[:, 1] - t[1] - self.g(zeta[:, 0] - t[0])

    def sample(self, radius: float, grid: int = 200, seed: int = 0) -> np.ndarray:
        """Points of Z in the closed ball of the given radius: a grid x grid
        chart in zeta_1, extra coordinates random (N > 1)."""
        rng = np.random.default_rng(seed)
        t = np.array(self.translation)
        s = np.linspace(-radius, radius, grid)
        X, Y = np.meshgrid(s, s)
        z1 = (X + 1j * Y).ravel()
        z1 = z1[np.abs(z1) <= radius]
        pts = np.zeros((len(z1), self.dim), dtype=complex)
        pts[:, 0] = z1
        pts[:, 1] = t[1] + self.g(z1 - t[0])
        if self.dim > 2:
            extra = rng.standard_normal((len(z1), self.dim - 2, 2)) @ np.array([1, 1j])
            extra *= (radius * rng.random(len(z1)) / np.maximum(np.linalg.norm(extra, axis=1), 1e-300))[:, None]
            pts[:, 2:] = extra
        return pts[np.linalg.norm(pts, axis=1) <= radius]

    def fiber_distance(self, frame: Frame, z) -> np.ndarray:
        """Exact min |xi| over points (z, xi) of the framed surface, per z.

        Lines: closed form in any dimension. Graphs: polynomial roots in the
        single fibre coordinate (N = 1 only).
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        M = frame.unitary.conj().T  # zeta = M omega + q
        q = frame.shift
        t = np.array(self.translation)
        if self.kind == "line" or self.degree <= 1:
            b, a = (self.coeffs + (0j,))[:2]
            ell = np.zeros(self.dim, dtype=complex)
            ell[1], ell[0] = 1.0, -a
            c0 = b + t[1] - a * t[0]
            alpha = ell @ M[:, 0]
            beta = ell @ M[:, 1:]
            res = c0 - ell @ q - alpha * z
            nb = np.linalg.norm(beta)
            if nb < 1e-14:
                return np.where(np.abs(res) < 1e-14, 0.0, np.inf)
            return np.abs(res) / nb
        if self.dim != 2:
            raise GeometryError("exact fibre distance for nonlinear graphs needs N = 1")
        g = self.g
        out = np.empty(len(z))
        B1, B2 = M[0, 1], M[1, 1]
        for i, zi in enumerate(z):
            A1 = M[0, 0] * zi + q[0] - t[0]
            A2 = M[1, 0] * zi + q[1] - t[1]
            P = Polynomial([A2, B2]) - g(Polynomial([A1, B1]))
            c = np.trim_zeros(P.coef, "b")
            if len(c) == 0:
                out[i] = 0.0
            elif len(c) == 1:
                out[i] = np.inf
            else:
                out[i] = float(np.min(np.abs(Polynomial(c).roots())))
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coeffs": _cplx_list(self.coeffs), "dim": self.dim,
                "translation": _cplx_list(self.translation)}

    @classmethod
    def from_dict(cls, d: dict) -> "Hypersurface":
        return cls(d["kind"], tuple(_cplx_array(d["coeffs"])), int(d.get("dim", 2)),
                   tuple(_cplx_array(d["translation"])) if d.get("translation") else ())


@dataclass
class SampledSurface:
    """A surface known only through sample points (e.g. an image under
    earlier shears). Non-finite samples have escaped to infinity."""

    points: np.ndarray

    @property
    def finite(self) -> np.ndarray:
        return self.points[np.all(np.isfinite(self.points), axis=1)]


def _segment_distance(omega: np.ndarray, half: float) -> np.ndarray:
    """Euclidean distance from framed points to D' x {0}."""
    z = omega[:, 0]
    dy = np.maximum(np.abs(z.imag) - half, 0.0)
    return np.sqrt(z.real ** 2 + dy ** 2 + np.sum(np.abs(omega[:, 1:]) ** 2, axis=1))


@dataclass
class Clearance:
    eta: float
    min_distance: float
    surface: object
    translation: list
    method: str


def clearance_eta(Z, cyl: Cylinder, frame: Frame, samples: int = 1000) -> Clearance:
    """Half the smallest fibre distance from D' x {0} to Z.

    If Z comes within 1e-8 of the axis segment, Z is translated along the
    first fibre direction by the smallest 2^-k (k = 20..1) that clears it.
    Sampled surfaces use the Euclidean distance of their samples to the
    segment, which never exceeds the fibre distance.
    """
    zs = cyl.segment(samples)
    if isinstance(Z, SampledSurface):
        pts = Z.finite
        if len(pts) == 0:
            return Clearance(math.inf, math.inf, Z, [], "sampled")
        d = float(np.min(_segment_distance(frame.apply(pts), cyl.half)))
        if d < CLEAR_MIN:
            raise GeometryError(f"sampled surface touches the cylinder axis (distance {d:.3g})")
        return Clearance(0.5 * d, d, Z, [], "sampled")

    def min_dist(S: Hypersurface) -> float:
        if S.kind == "line" or S.degree <= 1:
            # exact: |res(z)| is affine in z, minimise over the segment
            d0 = S.fiber_distance(frame, np.array([0j]))
            dz = S.fiber_distance(frame, zs)
            return float(min(np.min(dz), np.min(d0) if cyl.half == 0 else np.inf, _line_min(S, frame, cyl)))
        return float(np.min(S.fiber_distance(frame, zs)))

    d = min_dist(Z)
    trans = []
    method = "exact" if (Z.kind == "line" or Z.degree <= 1) else "roots"
    if d < CLEAR_MIN:
        fib = frame.unitary.conj().T[:, 1]
        for k in TRANSLATION_POWERS:
            vec = 2.0 ** -k * fib
            S = Z.translated(vec)
            dk = min_dist(S)
            if dk >= CLEAR_MIN:
                Z, d, trans = S, dk, vec.tolist()
                break
        else:
            raise GeometryError("no dyadic translation clears the cylinder axis")
    return Clearance(0.5 * d, d, Z, [complex(x) for x in trans], method)


def _line_min(S: Hypersurface, frame: Frame, cyl: Cylinder) -> float:
    """min over z in D' of |c - alpha z| / |beta| (point-to-segment)."""
    M = frame.unitary.conj().T
    t = np.array(S.translation)
    b, a = (S.coeffs + (0j,))[:2]
    ell = np.zeros(S.dim, dtype=complex)
    ell[1], ell[0] = 1.0, -a
    c = b + t[1] - a * t[0] - ell @ frame.shift
    alpha = ell @ M[:, 0]
    nb = np.linalg.norm(ell @ M[:, 1:])
    if nb < 1e-14:
        return math.inf
    if abs(alpha) < 1e-300:
        return abs(c) / nb
    w = c / alpha  # zero of the residual in the z-plane
    y = min(max(w.imag, -cyl.half), cyl.half)
    return abs(alpha) * abs(w - 1j * y) / nb


# ---------------------------------------------------------------- planar convex sets

@dataclass
class PlanarConvex:
    """Compact convex set in C given by its support function."""

    support: object  # callable: (k, 2) unit directions -> (k,)
    support_point: object  # callable: (k, 2) -> (k,) complex

    @classmethod
    def disk(cls, center: complex, radius: float) -> "PlanarConvex":
        c = complex(center)
        return cls(lambda u: u @ np.array([c.real, c.imag]) + radius,
                   lambda u: c + radius * (u[:, 0] + 1j * u[:, 1]))

    @classmethod
    def from_hull(cls, E: HullSpec, frame: Frame) -> "PlanarConvex":
        """pi_1(frame(E)) via h(u) = h_E(A^T u) + <u, A q>."""
        A = frame.first_coordinate_map()
        off = A @ to_real(frame.shift)

        def sup(u):
            return E.support(u @ A) - u @ off

        def spt(u):
            x = E.support_point(u @ A)
            return frame.apply_real(x)[:, 0]

        return cls(sup, spt)

    def max_real(self) -> float:
        return float(self.support(np.array([[1.0, 0.0]]))[0])

    def boundary(self, count: int, fatten: float = 0.0) -> np.ndarray:
        """Support points over ``count`` directions, with the polygon they
        span resampled along its perimeter; pushed out by ``fatten``."""
        th = 2.0 * np.pi * np.arange(count) / count
        U = np.column_stack([np.cos(th), np.sin(th)])
        v = self.support_point(U)
        nxt = np.roll(v, -1)
        seg = np.abs(nxt - v)
        per = seg.sum()
        extra = []
        if per > 0:
            for a, b, L in zip(v, nxt, seg):
                k = int(count * L / per)
                if k > 0:
                    s = np.arange(1, k + 1) / (k + 1)
                    extra.append(a + s * (b - a))
        pts = np.concatenate([v] + extra) if extra else v
        if fatten > 0:
            # outward normal of the support line at each point
            h = self.support(U)
            idx = np.argmax(U @ np.stack([pts.real, pts.imag]) - h[:, None], axis=0)
            pts = pts + fatten * (U[idx, 0] + 1j * U[idx, 1])
        return pts

    def distance_to_axis_segment(self, half: float, count: int = 2048) -> float:
        """dist(E', [-i half, i half]) for E' in Re < 0 (lower bound via the
        support in the +Re direction combined with the boundary samples)."""
        b = self.boundary(count)
        dy = np.maximum(np.abs(b.imag) - half, 0.0)
        return float(min(np.min(np.hypot(b.real, dy)), -self.max_real()))


# ---------------------------------------------------------------- polynomials

@dataclass
class ArnoldiPoly:
    """p(z) = sum_k coeffs[k] q_k(s), s = (z - center)/scale, with the
    orthogonal basis q_k generated by the Hessenberg recurrence H."""

    coeffs: np.ndarray
    H: np.ndarray
    center: complex = 0j
    scale: float = 1.0

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, c: complex) -> "ArnoldiPoly":
        return cls(np.array([complex(c)]), np.zeros((1, 0), dtype=complex))

    def basis(self, z) -> np.ndarray:
        s = (np.asarray(z, dtype=complex).reshape(-1) - self.center) / self.scale
        d = self.degree
        W = np.empty((len(s), d + 1), dtype=complex)
        W[:, 0] = 1.0
        for k in range(d):
            w = s * W[:, k] - W[:, : k + 1] @ self.H[: k + 1, k]
            W[:, k + 1] = w / self.H[k + 1, k]
        return W

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        if self.degree == 0:
            return np.full(shape, self.coeffs[0], dtype=complex)
        out = np.empty(z.size, dtype=complex)
        flat = z.reshape(-1)
        step = 4096
        for i in range(0, len(flat), step):
            out[i:i + step] = self.basis(flat[i:i + step]) @ self.coeffs
        return out.reshape(shape)

    def to_dict(self) -> dict:
        return {"kind": "arnoldi", "coeffs": _cplx_list(self.coeffs), "H": _cplx_list(self.H),
                "center": _cplx_list(self.center), "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "ArnoldiPoly":
        H = _cplx_array(d["H"]) if len(d["H"]) else np.zeros((1, 0), dtype=complex)
        return cls(_cplx_array(d["coeffs"]).reshape(-1), H.reshape(len(d["coeffs"]), -1),
                   complex(_cplx_array(d["center"])), float(d["scale"]))


def arnoldi_fit(z, f, w, degree: int, center: complex, scale: float) -> ArnoldiPoly:
    """Weighted least squares in an Arnoldi-orthogonalised basis."""
    s = (np.asarray(z, dtype=complex) - center) / scale
    m = len(s)
    Q = np.zeros((m, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    Q[:, 0] = 1.0
    for k in range(degree):
        q = s * Q[:, k]
        for _ in range(2):  # classical Gram-Schmidt, reorthogonalised
            h = Q[:, : k + 1].conj().T @ q / m
            q = q - Q[:, : k + 1] @ h
            H[: k + 1, k] += h
        H[k + 1, k] = np.linalg.norm(q) / math.sqrt(m)
        Q[:, k + 1] = q / H[k + 1, k]
    coef, *_ = np.linalg.lstsq(w[:, None] * Q, w * f, rcond=None)
    return ArnoldiPoly(coef, H, center, scale)


@dataclass
class RungeWitness:
    poly: ArnoldiPoly
    tau: float
    marginE: float
    marginD: float
    degree: int
    certified: bool
    history: list = field(default_factory=list)
    lower: float = float("nan")

    def __call__(self, z):
        return self.poly(z)

    def to_dict(self) -> dict:
        return {"psi": self.poly.to_dict(), "tau": self.tau, "marginE": self.marginE,
                "marginD": self.marginD, "lower": self.lower, "degree": self.degree,
                "certified": self.certified}


class WitnessError(GeometryError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


def _margins(poly, tau, lower, zD, zE):
    return float(np.min(tau - np.abs(poly(zE)))), float(np.min(poly(zD).real - lower))


def runge_witness(half: float, Eproj: PlanarConvex, tau: float, degree_cap: int = 512,
                  verify: int = 1000, fatten: float = 1e-3, lower: float | None = None) -> RungeWitness:
    """Polynomial psi with |psi| < tau on E' and Re psi > lower on D'
    (lower defaults to 1/tau).

    Tries constants first (2 lower, or 0 when lower < 0), then weighted least
    squares toward 2 lower on D' and 0 on E' at degrees 8, 16, ... up to
    ``degree_cap``. Certification
    is on ``verify`` points of D' and of the boundary of E' fattened by
    ``fatten`` (maximum modulus covers the interior).
    """
    if not tau > 0:
        raise GeometryError("tau must be positive")
    if not Eproj.max_real() < 0:
        raise GeometryError("projected body must lie in Re z < 0")
    lower = 1.0 / tau if lower is None else float(lower)
    zD = 1j * np.linspace(-half, half, verify)
    zE = Eproj.boundary(verify, fatten=fatten)
    target = 2.0 * max(lower, 0.5 / tau if lower <= 0 else lower)
    history = []
    for c0 in ((0.0,) if lower < 0 else ()) + (2.0 * lower,):
        const = ArnoldiPoly.constant(c0)
        mE, mD = _margins(const, tau, lower, zD, zE)
        history.append((0, mE, mD))
        if mE > 0 and mD > 0:
            return RungeWitness(const, tau, mE, mD, 0, True, history, lower)

    gap = Eproj.distance_to_axis_segment(half)
    d = 8
    while d <= degree_cap:
        nfit = max(3 * d, 600)
        fe = min(max(2.0 * fatten, 0.1 * gap), 0.4 * gap)
        fd = min(0.1 * gap, 0.4 * gap)
        k = np.arange(nfit)
        cheb = half * np.cos(np.pi * (k + 0.5) / nfit)
        # D' fattened into a thin stadium of half-width fd
        caps = fd * np.exp(1j * np.linspace(-np.pi / 2, np.pi / 2, 9))
        ring = np.concatenate([1j * cheb, 1j * cheb + fd, 1j * cheb - fd,
                               1j * half + 1j * caps * 1j, -1j * half - 1j * caps * 1j])
        eb = np.concatenate([Eproj.boundary(nfit, fatten=fe), Eproj.boundary(nfit // 2, fatten=0.0)])
        z = np.concatenate([ring, eb])
        f = np.concatenate([np.full(len(ring), target), np.zeros(len(eb))]).astype(complex)
        # residual tolerances: target/2 on D', tau on E'
        w = np.concatenate([np.full(len(ring), 2.0 / target), np.full(len(eb), 1.0 / tau)])
        c = 0.5 * (z.real.max() + z.real.min()) + 0.5j * (z.imag.max() + z.imag.min())
        sc = float(np.max(np.abs(z - c)))
        poly = arnoldi_fit(z, f, w, d, c, sc)
        mE, mD = _margins(poly, tau, lower, zD, zE)
        history.append((d, mE, mD))
        if mE > 0 and mD > 0:
            return RungeWitness(poly, tau, mE, mD, d, True, history, lower)
        d *= 2
    raise WitnessError(f"no certified witness up to degree {degree_cap}; best (deg, marginE, marginD) = "
                       f"{max(history[1:], key=lambda h: min(h[1], h[2]))}", best=history)


# ---------------------------------------------------------------- shears

@dataclass
class ShearAutomorphism:
    """Frame-conjugated shear (z, xi) -> (z, exp(psi(z)) xi)."""

    frame: Frame
    psi: ArnoldiPoly
    tau: float = float("nan")
    info: dict = field(default_factory=dict)

    def _act(self, zeta, sign: float) -> np.ndarray:
        om = self.frame.apply(np.atleast_2d(zeta))
        with np.errstate(over="ignore", invalid="ignore"):
            fac = np.exp(sign * self.psi(om[:, 0]))
            om[:, 1:] = om[:, 1:] * fac[:, None]
            out = self.frame.inverse(om)
        return out

    def forward(self, zeta) -> np.ndarray:
        return self._act(zeta, 1.0)

    def inverse(self, zeta) -> np.ndarray:
        return self._act(zeta, -1.0)

    def forward_real(self, x) -> np.ndarray:
        return to_real(self.forward(to_complex(x)))

    def inverse_real(self, x) -> np.ndarray:
        return to_real(self.inverse(to_complex(x)))

    def to_dict(self) -> dict:
        return {"frame": self.frame.to_dict(), "psi": self.psi.to_dict(), "tau": self.tau, **self.info}

    @classmethod
    def from_dict(cls, d: dict) -> "ShearAutomorphism":
        info = {k: v for k, v in d.items() if k not in ("frame", "psi", "tau")}
        return cls(Frame.from_dict(d["frame"]), ArnoldiPoly.from_dict(d["psi"]), float(d["tau"]), info)


def choose_tau(eps: float, maxnorm: float, eta: float, lam: float) -> float:
    """Halve from 1 until (e^tau - 1) maxnorm < eps and e^(1/tau) eta > lam."""
    tau = 1.0
    while tau >= TAU_FLOOR:
        if math.expm1(tau) * maxnorm < eps and (1.0 / tau > math.log(lam / eta) if eta > 0 else False):
            return tau
        tau /= 2.0
    raise GeometryError(f"tau fell below {TAU_FLOOR}; constraints too tight")


@dataclass
class ShearReport:
    eta: float
    lam: float
    half: float
    tau: float
    lower: float
    threshold: str
    degree: int
    marginE: float
    marginD: float
    avoidance_margin: float  # min (eta - |e^-psi| |xi|) / eta over D samples
    max_displacement: float  # max |Phi - id| over E samples
    envelope: float  # (e^tau - 1) maxnorm(E)
    eps: float
    translation: list
    clearance_method: str

    @property
    def passed(self) -> bool:
        return self.avoidance_margin >= 1e-6 and self.max_displacement < self.eps

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["translation"] = _cplx_list(self.translation) if self.translation else []
        d["passed"] = self.passed
        return d


def build_shear(D: TangentBall, E: HullSpec, Z, eps: float, samples: int = 1000, degree_cap: int = 512,
                seed: int = 0, threshold: str = "needed"):
    """Shear with Phi(Z) off D and |Phi - id| < eps on E, certified on samples.

    ``threshold`` sets the lower bound for Re psi on D': "strict" uses 1/tau,
    "needed" uses log(lambda/eta) + 1, which is what the inclusion
    exp(psi) eta B > lambda B actually requires (with a factor e to spare).
    Returns (shear, report, surface) where ``surface`` is Z after any
    translation the clearance step applied.
    """
    if not eps > 0:
        raise GeometryError("eps must be positive")
    if threshold not in ("strict", "needed"):
        raise GeometryError("threshold must be 'strict' or 'needed'")
    plane = D.hyperplane
    frame = normalize_frame(plane, E)
    cyl = project_cylinder(D, frame)
    cl = clearance_eta(Z, cyl, frame)
    eta = cl.eta
    maxnorm = E.max_norm()
    tau = choose_tau(eps, maxnorm, eta, cyl.lam)
    if threshold == "strict":
        lower = 1.0 / tau
    else:
        lower = math.log(cyl.lam / eta) + 1.0 if eta < math.inf else -1.0
    Ep = PlanarConvex.from_hull(E, frame)
    wit = runge_witness(cyl.half, Ep, tau, degree_cap=degree_cap, lower=lower)
    shear = ShearAutomorphism(frame, wit.poly, tau)

    d_pts = frame.apply_real(D.sample(samples, seed=seed))
    with np.errstate(over="ignore", under="ignore"):
        pulled = np.abs(np.exp(-wit.poly(d_pts[:, 0]))) * np.linalg.norm(d_pts[:, 1:], axis=1)
    avoid = 1.0 if eta == math.inf else float(np.min((eta - pulled) / eta))
    e_pts = to_complex(E.samples(samples, seed=seed))
    disp = float(np.max(np.linalg.norm(shear.forward(e_pts) - e_pts, axis=1)))
    env = math.expm1(tau) * maxnorm
    rep = ShearReport(eta, cyl.lam, cyl.half, tau, lower, threshold, wit.degree, wit.marginE, wit.marginD, avoid,
                      disp, env, eps, cl.translation, cl.method)
    shear.info = {"margins": {"E": wit.marginE, "D": wit.marginD}, "translation_applied": rep.to_dict()["translation"],
                  "eta": eta, "lambda": cyl.lam, "half": cyl.half, "degree": wit.degree, "lower": lower,
                  "threshold": threshold}
    if not rep.passed:
        raise GeometryError(f"shear certification failed: avoidance {avoid:.3g}, displacement {disp:.3g} vs {eps}")
    return shear, rep, cl.surface
