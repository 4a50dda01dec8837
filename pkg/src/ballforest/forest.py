"""Tidy forests of tangent balls.

A single shell (r1, r2) carries one rescaled copy of each net family on its
own level sphere; stacking N shells raises the crossing bound to any target
rho, and a schedule of stacks gives the infinite-length forest (stored
truncated at J stacks).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .geom import GeometryError, TangentBall, tangent_balls_intersect
from .sphere_net import build_net, net_constants, scale_net

GROUP_TOL = 1e-9


@dataclass(frozen=True)
class ShellParams:
    r1: float
    r2: float
    m: int
    delta: float
    r: float
    eta: float
    levels: tuple  # s_0 .. s_{m+1}

    @classmethod
    def for_shell(cls, n: int, r1: float, r2: float) -> "ShellParams":
        m = net_constants(n).m_n
        delta = (r2 - r1) / ((m + 1) * r2)
        r = 2.0 * math.sqrt(2.0 * delta)
        eta = math.sqrt(2.0 * delta - delta * delta)
        omega = (r2 - r1) / (m + 1)
        levels = tuple(r1 + j * omega for j in range(m + 1)) + (r2,)
        return cls(r1, r2, m, delta, r, eta, levels)

    def to_dict(self) -> dict:
        return {"r1": self.r1, "r2": self.r2, "m": self.m, "delta": self.delta, "r": self.r,
                "eta": self.eta, "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d: dict) -> "ShellParams":
        return cls(float(d["r1"]), float(d["r2"]), int(d["m"]), float(d["delta"]), float(d["r"]),
                   float(d["eta"]), tuple(float(s) for s in d["levels"]))


@dataclass
class TidyForest:
    """Tangent balls sorted by centre norm (ties: lexicographic centre).

    ``shell_ids`` / ``family_ids`` record where each ball came from; hand
    built forests use -1.
    """

    n: int
    centers: np.ndarray
    radii: np.ndarray
    shell_ids: np.ndarray = None
    family_ids: np.ndarray = None
    shells: list = field(default_factory=list)
    schedule: dict | None = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, self.n + 1)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        k = len(self.radii)
        if len(self.centers) != k:
            raise GeometryError("centres and radii differ in length")
        if self.shell_ids is None:
            self.shell_ids = np.full(k, -1, dtype=int)
        if self.family_ids is None:
            self.family_ids = np.full(k, -1, dtype=int)
        self.shell_ids = np.asarray(self.shell_ids, dtype=int)
        self.family_ids = np.asarray(self.family_ids, dtype=int)
        if k and (np.any(self.radii <= 0) or np.any(np.linalg.norm(self.centers, axis=1) == 0)):
            raise GeometryError("tangent balls need nonzero centres and positive radii")
        order = canonical_order(self.centers)
        self.centers = self.centers[order]
        self.radii = self.radii[order]
        self.shell_ids = self.shell_ids[order]
        self.family_ids = self.family_ids[order]

    def __len__(self) -> int:
        return len(self.radii)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.centers, axis=1)

    @property
    def outer_norms(self) -> np.ndarray:
        return np.hypot(self.norms, self.radii)

    @property
    def balls(self) -> list:
        return [TangentBall(c, r) for c, r in zip(self.centers, self.radii)]

    def ball(self, i: int) -> TangentBall:
        return TangentBall(self.centers[i], self.radii[i])

    def subset(self, mask) -> "TidyForest":
        mask = np.asarray(mask)
        return TidyForest(self.n, self.centers[mask], self.radii[mask], self.shell_ids[mask],
                          self.family_ids[mask], list(self.shells), self.schedule)

    def without_family(self, family: int, shell: int | None = None) -> "TidyForest":
        drop = self.family_ids == family
        if shell is not None:
            drop &= self.shell_ids == shell
        return self.subset(~drop)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "schedule": self.schedule,
            "shells": [s.to_dict() for s in self.shells],
            "balls": [{"center": c.tolist(), "radius": float(r), "shell": int(s), "family": int(f)}
                      for c, r, s, f in zip(self.centers, self.radii, self.shell_ids, self.family_ids)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TidyForest":
        n = int(d["n"])
        balls = d.get("balls", [])
        centers = np.array([b["center"] for b in balls], dtype=float).reshape(-1, n + 1)
        radii = np.array([b["radius"] for b in balls], dtype=float)
        sid = np.array([b.get("shell", -1) for b in balls], dtype=int)
        fid = np.array([b.get("family", -1) for b in balls], dtype=int)
        shells = [ShellParams.from_dict(s) for s in d.get("shells", [])]
        return cls(n, centers, radii, sid, fid, shells, d.get("schedule"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(self.n + 1)] + ["radius", "norm", "shell", "family"])
        for c, r, nrm, s, f in zip(self.centers, self.radii, self.norms, self.shell_ids, self.family_ids):
            w.writerow([repr(float(v)) for v in c] + [repr(float(r)), repr(float(nrm)), int(s), int(f)])
        return buf.getvalue()

    @classmethod
    def merge(cls, parts: list, schedule: dict | None = None) -> "TidyForest":
        n = parts[0].n
        offs = 0
        sids = []
        for p in parts:
            sids.append(np.where(p.shell_ids >= 0, p.shell_ids + offs, -1))
            offs += len(p.shells)
        return cls(n,
                   np.concatenate([p.centers for p in parts]),
                   np.concatenate([p.radii for p in parts]),
                   np.concatenate(sids),
                   np.concatenate([p.family_ids for p in parts]),
                   [s for p in parts for s in p.shells],
                   schedule)


def norm_groups(norms: np.ndarray, tol: float = GROUP_TOL) -> np.ndarray:
    """Group label per entry; sorted norms closer than tol share a group."""
    if len(norms) == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(norms, kind="stable")
    brk = np.diff(norms[order]) > tol
    lab_sorted = np.concatenate([[0], np.cumsum(brk)])
    labels = np.empty(len(norms), dtype=int)
    labels[order] = lab_sorted
    return labels


def canonical_order(centers: np.ndarray) -> np.ndarray:
    """Nondecreasing centre norm (grouped at 1e-9), then lexicographic."""
    if len(centers) == 0:
        return np.zeros(0, dtype=int)
    g = norm_groups(np.linalg.norm(centers, axis=1))
    keys = [centers[:, i] for i in reversed(range(centers.shape[1]))] + [g]
    return np.lexsort(keys)


def _check_shell(r1: float, r2: float) -> None:
    if not (0.0 < r1 < r2 < 1.0):
        raise GeometryError(f"need 0 < r1 < r2 < 1, got r1={r1}, r2={r2}")


def build_shell_forest(n: int, r1: float, r2: float) -> TidyForest:
    """One shell: family j of the net at separation r sits on level s_j as the
    balls s_j * T((1 - delta) p, eta)."""
    _check_shell(r1, r2)
    sp = ShellParams.for_shell(n, r1, r2)
    net = build_net(n, sp.r)
    centers, radii, fam = [], [], []
    for j, F in enumerate(net.families, start=1):
        if not len(F):
            continue
        s = sp.levels[j]
        lifted = scale_net(net, s * (1.0 - sp.delta)).families[j - 1]
        centers.append(lifted)
        radii.append(np.full(len(F), s * sp.eta))
        fam.append(np.full(len(F), j))
    return TidyForest(n, np.concatenate(centers), np.concatenate(radii),
                      np.zeros(sum(len(c) for c in centers), dtype=int), np.concatenate(fam), [sp])


def _frac(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def c_fraction(k: int) -> Fraction:
    return Fraction(1, 2) - Fraction(1, 6 * 2 ** (k - 1))


def a_squared(n: int) -> Fraction:
    """a_n^2 = (1/2 - c_n)^2 * 2 / (m_n + 1), exactly."""
    m = net_constants(n).m_n
    return (Fraction(1, 2) - c_fraction(n)) ** 2 * Fraction(2, m + 1)


def a_const(n: int) -> float:
    return math.sqrt(a_squared(n))


def shell_bound(n: int, r1: float, r2: float, euclidean: bool = False) -> float:
    """Lower bound on the projected (or, scaled by r1, Euclidean) length of a
    crossing path of the single-shell forest."""
    b = a_const(n) * math.sqrt(r2 - r1) / math.sqrt(r2)
    return r1 * b if euclidean else b


def stack_threshold(n: int, r1: float, r2: float, rho: float) -> Fraction:
    """r2 rho^2 / (a_n^2 (r2 - r1)) in exact rational arithmetic on the
    decimal representations of the inputs."""
    R1, R2, P = _frac(r1), _frac(r2), _frac(rho)
    return R2 * P * P / (a_squared(n) * (R2 - R1))


def stack_count(n: int, r1: float, r2: float, rho: float) -> int:
    """Smallest integer strictly above the threshold."""
    return math.floor(stack_threshold(n, r1, r2, rho)) + 1


def build_bound_forest(n: int, r1: float, r2: float, rho: float) -> TidyForest:
    _check_shell(r1, r2)
    if not rho > 0:
        raise GeometryError("rho must be positive")
    N = stack_count(n, r1, r2, rho)
    s = [r1 + j * (r2 - r1) / N for j in range(N)] + [r2]
    parts = [build_shell_forest(n, s[j - 1], s[j]) for j in range(1, N + 1)]
    return TidyForest.merge(parts, {"kind": "bound", "r1": r1, "r2": r2, "rho": rho, "N": N})


def default_schedules(lambda0: float, J: int, rho_scale: float = 1.0) -> tuple:
    """s_j = 1 - (1 - lambda0)/(j + 1) and rho_j = rho_scale * j, j = 0..J."""
    s = [1.0 - (1.0 - lambda0) / (j + 1) for j in range(J + 1)]
    rho = [rho_scale * j for j in range(J + 1)]
    return s, rho


def build_complete_forest(n: int, s_schedule, rho_schedule, J: int) -> TidyForest:
    s = [float(x) for x in s_schedule]
    rho = [float(x) for x in rho_schedule]
    if J < 1:
        raise GeometryError("truncation J must be >= 1")
    if len(s) < J + 1 or len(rho) < J + 1:
        raise GeometryError("schedules must provide entries 0..J")
    if not (0.0 < s[0] and all(a < b for a, b in zip(s, s[1:])) and s[-1] < 1.0):
        raise GeometryError("need 0 < s_0 < s_1 < ... < 1")
    if rho[0] != 0.0 or not all(a < b for a, b in zip(rho, rho[1:])):
        raise GeometryError("need 0 = rho_0 < rho_1 < ...")
    parts = [build_bound_forest(n, s[j - 1], s[j], rho[j]) for j in range(1, J + 1)]
    sched = {"kind": "complete", "s": s, "rho": rho, "J": J,
             "N": [p.schedule["N"] for p in parts]}
    return TidyForest.merge(parts, sched)


@dataclass
class TidyReport:
    bullet1: bool
    bullet2: bool
    bullet3: bool
    inside_unit_ball: bool
    clearance: float
    count_profile: list
    violations: list

    @property
    def passed(self) -> bool:
        return self.bullet1 and self.bullet2 and self.bullet3 and self.inside_unit_ball

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def verify_tidy(forest: TidyForest, t_grid: int = 21, max_violations: int = 20) -> TidyReport:
    """Check the three tidiness conditions.

    Equal-norm groups must share one radius and be pairwise disjoint; every
    ball of a smaller group must sit in the open ball through the next larger
    centre norm. The finiteness condition is reported as the count profile
    of balls meeting tB (always finite for stored forests, and monotone).
    """
    if len(forest) == 0:
        raise GeometryError("empty forest")
    order = canonical_order(forest.centers)
    C, R = forest.centers[order], forest.radii[order]
    norms = np.linalg.norm(C, axis=1)
    outer = np.hypot(norms, R)
    groups = norm_groups(norms)
    viol = []

    b2 = True
    starts = np.flatnonzero(np.r_[True, np.diff(groups) != 0])
    ends = np.r_[starts[1:], len(groups)]
    for a, b in zip(starts, ends):
        rg = R[a:b]
        if np.ptp(rg) > 1e-12 * max(1.0, rg.max()):
            b2 = False
            viol.append(f"group at |p|={norms[a]:.12g}: radii differ")
        if b - a < 2:
            continue
        pairs = cKDTree(C[a:b]).query_pairs(2.0 * rg.max() + 1e-9, output_type="ndarray")
        if len(pairs):
            hit = tangent_balls_intersect(C[a:b][pairs[:, 0]], rg[pairs[:, 0]],
                                          C[a:b][pairs[:, 1]], rg[pairs[:, 1]])
            if np.any(hit):
                b2 = False
                i, j = pairs[np.argmax(hit)]
                viol.append(f"balls {order[a + i]} and {order[a + j]} intersect")
        if len(viol) >= max_violations:
            break

    # prefix maximum of rim norms against the next group's centre norm
    b3 = True
    gmax = np.maximum.reduceat(outer, starts)
    prefix = np.maximum.accumulate(gmax)
    for g in range(len(starts) - 1):
        if not prefix[g] < norms[starts[g + 1]] - 1e-12:
            b3 = False
            viol.append(f"group {g} reaches {prefix[g]:.12g} >= next norm {norms[starts[g + 1]]:.12g}")
            if len(viol) >= max_violations:
                break

    ts = np.linspace(0.0, 1.0, t_grid)
    counts = [int(np.sum(norms <= t)) for t in ts]
    b1 = all(a <= b for a, b in zip(counts, counts[1:])) and counts[-1] <= len(forest)
    inside = bool(outer.max() < 1.0)
    if not inside:
        viol.append("forest leaves the open unit ball")
    profile = [[float(t), c] for t, c in zip(ts, counts)]
    return TidyReport(b1, b2, b3, inside, float(norms.min()), profile, viol)
