"""Separated/covering families F_1..F_m on spheres tS^n.

For every r > 0 the construction returns m_n finite families, each
r-separated, whose union is a (c_n r)-net of the sphere. The circle case is
built by rotating -i in steps of 5*beta; higher spheres are sliced into
latitude spheres whose sub-nets come from the dimension below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .geom import GeometryError
from .sampling import mesh_norm_estimate, sphere_points, threads


@dataclass(frozen=True)
class NetConstants:
    n: int
    c: tuple  # c_1..c_n
    m: tuple  # m_1..m_n
    mu: tuple  # mu_2..mu_n
    sup_f: tuple = field(default=(), compare=False)  # numerical sup f behind each mu

    @property
    def c_n(self) -> float:
        return self.c[-1]

    @property
    def m_n(self) -> int:
        return self.m[-1]

    def to_dict(self) -> dict:
        return {"n": self.n, "c": list(self.c), "m": list(self.m), "mu": list(self.mu)}


def c_schedule(k: int) -> float:
    return 0.5 - 1.0 / (6.0 * 2 ** (k - 1))


def ratio_f(x, d: float):
    """arcsin(min(x/2, 1)) / arcsin(min(d x/2, 1)) with d = c_k - c_{k-1}."""
    x = np.asarray(x, dtype=float)
    return np.arcsin(np.minimum(x / 2.0, 1.0)) / np.arcsin(np.minimum(d * x / 2.0, 1.0))


def sup_ratio(d: float, lo: float = 1e-6, hi: float = 1e3, points: int = 20001) -> float:
    """sup_{x>0} of ratio_f: the x -> 0 limit 1/d, a log grid, then golden
    section refinement around the best grid cell."""
    xs = np.geomspace(lo, hi, points)
    vals = ratio_f(xs, d)
    i = int(np.argmax(vals))
    best = max(1.0 / d, float(vals[i]))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, points - 1)]
    if a < xs[i] < b:
        res = minimize_scalar(lambda x: -float(ratio_f(x, d)), bracket=(a, xs[i], b), method="golden",
                              options={"xtol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@lru_cache(maxsize=None)
def net_constants(n: int) -> NetConstants:
    if n < 1:
        raise GeometryError("sphere dimension n must be >= 1")
    c = [1.0 / 3.0]
    m = [10]
    mu = []
    sups = []
    for k in range(2, n + 1):
        ck = c_schedule(k)
        d = ck - c[-1]
        s = sup_ratio(d)
        lo, hi, pts = 1e-6, 1e3, 20001
        # a sup sitting on an integer makes the floor fragile: search harder
        while abs(s - round(s)) < 1e-9 and pts < 10 ** 7:
            lo, hi, pts = lo / 100, hi * 100, pts * 10
            s = sup_ratio(d, lo, hi, pts)
        mk = int(math.floor(s))
        if mk < 2:
            raise GeometryError(f"mu_{k} = {mk} < 2; schedule invalid")
        c.append(ck)
        mu.append(mk)
        sups.append(s)
        m.append((mk + 1) * m[-1])
    return NetConstants(n, tuple(c), tuple(m), tuple(mu), tuple(sups))


@dataclass(frozen=True)
class SphericalNet:
    n: int
    t: float
    r: float
    families: tuple  # of (k_j, n+1) arrays, possibly empty

    @property
    def constants(self) -> NetConstants:
        return net_constants(self.n)

    @property
    def points(self) -> np.ndarray:
        nonempty = [f for f in self.families if len(f)]
        if not nonempty:
            return np.zeros((0, self.n + 1))
        return np.concatenate(nonempty)

    def __len__(self) -> int:
        return sum(len(f) for f in self.families)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "r": self.r,
            "constants": self.constants.to_dict(),
            "families": [f.tolist() for f in self.families],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SphericalNet":
        n = int(d["n"])
        fams = tuple(np.asarray(f, dtype=float).reshape(-1, n + 1) for f in d["families"])
        return cls(n, float(d["t"]), float(d["r"]), fams)


def _circle_net(r: float) -> list:
    if r >= 2.0:
        ang = np.arange(10) * np.pi / 5
        return [np.array([[np.cos(a), np.sin(a)]]) for a in ang]
    beta = 2.0 * math.asin(r / 6.0)
    plus, minus = [], []
    for j in range(1, 6):
        k_max = int(math.floor((math.pi / beta - (j - 1)) / 5.0 + 1e-12)) + 1
        ang = np.array([((j - 1) + 5 * (k - 1)) * beta for k in range(1, k_max + 1)])
        ang = ang[ang <= math.pi + 1e-12]
        z = -1j * np.exp(1j * ang)
        plus.append(np.column_stack([z.real, z.imag]))
        zm = -np.conj(z)
        minus.append(np.column_stack([zm.real, zm.imag]))
    return plus + minus


def _unit_net(n: int, r: float) -> list:
    if n == 1:
        return _circle_net(r)
    k = net_constants(n)
    prev = net_constants(n - 1)
    mu = k.mu[-1]
    dc = k.c[-1] - k.c[-2]
    alpha = 2.0 * math.asin(min(r / 2.0, 1.0))
    beta = 2.0 * math.asin(min(dc * r / 2.0, 1.0))
    assert (mu + 1) * beta > alpha
    m_prev = prev.m_n
    fams = [[] for _ in range(m_prev * (mu + 1))]
    m_top = int(math.floor(math.pi / beta + 1e-12))
    for m in range(m_top + 1):
        t = -math.pi / 2 + m * beta
        kk = m % (mu + 1)
        ct, st = math.cos(t), math.sin(t)
        if m == 0 or abs(t - math.pi / 2) < 1e-12 or ct <= 0.0:
            pole = np.zeros((1, n + 1))
            pole[0, -1] = 1.0 if t > 0 else -1.0
            subs = [pole] * m_prev
        else:
            sub = _unit_net(n - 1, r / ct)
            subs = [np.column_stack([ct * a, np.full(len(a), st)]) if len(a) else np.zeros((0, n + 1))
                    for a in sub]
        for j in range(m_prev):
            fams[j * (mu + 1) + kk].append(subs[j])
    out = []
    for f in fams:
        f = [a for a in f if len(a)]
        out.append(np.concatenate(f) if f else np.zeros((0, n + 1)))
    return out


def build_net(n: int, r: float) -> SphericalNet:
    """The m_n families on the unit sphere S^n for separation parameter r."""
    if n < 1:
        raise GeometryError("sphere dimension n must be >= 1")
    if not r > 0:
        raise GeometryError("separation parameter must be positive")
    fams = _unit_net(n, float(r))
    assert len(fams) == net_constants(n).m_n
    for f in fams:
        f.setflags(write=False)
    return SphericalNet(n, 1.0, float(r), tuple(fams))


def scale_net(net: SphericalNet, t: float) -> SphericalNet:
    if not t > 0:
        raise GeometryError("scale must be positive")
    fams = tuple(t * f for f in net.families)
    return SphericalNet(net.n, net.t * t, net.r * t, fams)


def base_angles(r: float) -> tuple:
    """(alpha, beta) of the circle construction for 0 < r < 2."""
    return 2.0 * math.asin(r / 2.0), 2.0 * math.asin(r / 6.0)


@dataclass
class NetReport:
    min_gap: float
    max_cover: float
    mesh: float
    bound: float
    separation_ok: bool
    covering_ok: bool
    samples: int
    diagnostic: str = ""

    @property
    def passed(self) -> bool:
        return self.separation_ok and self.covering_ok

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def min_family_gap(net: SphericalNet) -> float:
    gap = math.inf
    for f in net.families:
        if len(f) > 1:
            d, _ = cKDTree(f).query(f, k=2)
            gap = min(gap, float(d[:, 1].min()))
    return gap


def verify_net(net: SphericalNet, samples: int = 10_000, seed: int = 0) -> NetReport:
    """Exact separation within families; sampled covering of the sphere."""
    if samples < 1000:
        raise GeometryError("covering check needs at least 1000 samples")
    pts = net.points
    cn = net.constants.c_n
    bound = cn * net.r
    gap = min_family_gap(net)
    sep_ok = gap >= net.r * (1 - 1e-12)
    if len(pts) == 0:
        return NetReport(gap, math.inf, math.nan, bound, sep_ok, False, samples, "empty union F")
    probe = net.t * sphere_points(net.n + 1, samples, seed=seed)
    mesh = net.t * mesh_norm_estimate(probe / net.t)
    d, _ = cKDTree(pts).query(probe, workers=threads())
    cover = float(d.max())
    cov_ok = cover <= bound + 2 * mesh
    diag = "" if cov_ok else f"sample {int(np.argmax(d))} is {cover:.6g} from F"
    return NetReport(gap, cover, mesh, bound, bool(sep_ok), bool(cov_ok), samples, diag)
