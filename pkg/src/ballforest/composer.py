"""Finite-stage composition of shears that clears obstacle balls one at a time.

Stage j pushes the current image of Z off ball T_j with a shear that is
eps_j-close to the identity on the convex body E_j. The bodies grow so that
E_j swallows T_1..T_{j-1} and stays clear of the pending balls; eps_j shrinks
fast enough that the composition converges on E_1 and never drags the image
back onto a ball already cleared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forest import TidyForest, norm_groups
from .geom import (GeometryError, HullSpec, SolidBall, ball_to_complement, dist_point_ball,
                   hull_hyperplane_gap, nested_gap, segments_hit_balls, to_complex, to_real)
from .runge import Hypersurface, SampledSurface, ShearAutomorphism, build_shear
from .sampling import ball_points

STAGE_TOL = 1e-9


class StageError(GeometryError):
    def __init__(self, msg, stage=None, margins=None):
        super().__init__(msg)
        self.stage = stage
        self.margins = margins or {}


@dataclass
class Exhaustion:
    """Bodies E_0..E_{J+1}; ``balls[j-1]`` is T_j."""

    bodies: list
    mu: list
    pads: list
    balls: list
    nest_gaps: list  # dist(E_{j-1}, complement of E_j), j = 1..J+1
    plane_gaps: list  # clearance of E_j from the hyperplane of T_j, j = 1..J
    pending_gaps: list  # min over i >= j of the clearance of E_j from T_i's hyperplane

    @property
    def J(self) -> int:
        return len(self.bodies) - 2 if len(self.bodies) > 1 else 0

    def to_dict(self) -> dict:
        return {"mu": self.mu, "pads": self.pads, "nest_gaps": self.nest_gaps, "plane_gaps": self.plane_gaps,
                "pending_gaps": self.pending_gaps}


def _hull(mu: float, dim: int, balls, pad: float) -> HullSpec:
    return HullSpec((SolidBall(np.zeros(dim), mu),) + tuple(balls), pad)


def build_exhaustion(forest: TidyForest, lambda0: float, lambda1: float, J: int, mu_fraction: float = 0.5,
                     pad: float | None = None) -> Exhaustion:
    """E_0 = lambda0 B, E_1 = lambda1 B, E_j = conv(mu_j B u T_1..T_{j-1}) + (j-1) kappa B.

    mu_j moves ``mu_fraction`` of the way from max(mu_{j-1}, outer norm of
    T_{j-1} when that lies inside |p_j|) toward |p_j|; past the last ball the
    target is the unit sphere. The pad kappa makes consecutive bodies strictly
    nested even where a shared generator dominates both support functions.
    """
    if not 0 < lambda0 < lambda1 < 1:
        raise GeometryError("need 0 < lambda0 < lambda1 < 1")
    if not 0 < mu_fraction <= 1:
        raise GeometryError("mu_fraction must lie in (0, 1]")
    dim = forest.n + 1
    if J == 0:
        return Exhaustion([_hull(lambda0, dim, (), 0.0)], [lambda0], [0.0], [], [], [], [])
    if len(forest) < J:
        raise GeometryError(f"forest has {len(forest)} balls, fewer than J = {J}")
    if float(forest.norms.min()) <= lambda1:
        raise GeometryError("forest meets lambda1 * closed ball")
    balls = forest.balls
    norms = forest.norms
    outer = forest.outer_norms
    mu = [lambda0, lambda1]
    for j in range(2, J + 2):
        target = norms[j - 1] if j <= len(balls) else 1.0
        base = mu[-1]
        if outer[j - 2] < target:
            base = max(base, outer[j - 2])
        mu.append(base + mu_fraction * (target - base))
    raw = [None, None] + [_hull(mu[j], dim, balls[: j - 1], 0.0) for j in range(2, J + 2)]
    if pad is None:
        gaps = [hull_hyperplane_gap(raw[j], balls[j - 1].hyperplane) for j in range(2, min(J + 1, len(balls)) + 1)]
        pad = min([0.01] + [0.25 * g / (j - 1) for j, g in zip(range(2, J + 2), gaps) if g > 0])
    pads = [0.0, 0.0] + [(j - 1) * pad for j in range(2, J + 2)]
    bodies = [_hull(lambda0, dim, (), 0.0), _hull(lambda1, dim, (), 0.0)]
    bodies += [_hull(mu[j], dim, balls[: j - 1], pads[j]) for j in range(2, J + 2)]

    nest = []
    for j in range(1, J + 2):
        g = nested_gap(bodies[j - 1], bodies[j])
        if not g > 0:
            raise StageError(f"E_{j - 1} is not strictly inside E_{j} (gap {g:.3g})", stage=j)
        nest.append(g)
    plane, pending = [], []
    for j in range(1, J + 1):
        g = hull_hyperplane_gap(bodies[j], balls[j - 1].hyperplane)
        if not g > 0:
            raise StageError(f"E_{j} reaches the hyperplane of T_{j} (gap {g:.3g})", stage=j)
        plane.append(g)
        pg = min(hull_hyperplane_gap(bodies[j], b.hyperplane) for b in balls[j - 1:])
        if not pg > 0:
            raise StageError(f"E_{j} is not clear of a pending ball (gap {pg:.3g})", stage=j)
        pending.append(pg)
    return Exhaustion(bodies, mu, pads, balls[:J], nest, plane, pending)


def epsilon_step(eps_prev: float, gap_in: float, gap_out: float, eta: float) -> float:
    """eps_j = (1/2) min(eps_{j-1}/2, gap(j-1 -> j), gap(j -> j+1), eta_j/2)."""
    terms = [eps_prev / 2.0, gap_in, gap_out, eta / 2.0]
    if min(gap_in, gap_out) <= 0 or eta <= 0:
        raise GeometryError("nonpositive gap or margin in the epsilon schedule")
    return 0.5 * min(terms)


def epsilon_schedule(ex: Exhaustion, eps: float, eta_list) -> list:
    out = []
    prev = eps
    for j, eta in enumerate(eta_list, start=1):
        prev = epsilon_step(prev, ex.nest_gaps[j - 1], ex.nest_gaps[j], eta)
        out.append(prev)
    return out


def min_ball_distance(points: np.ndarray, balls) -> float:
    """min over finite points and balls of the exact point-ball distance."""
    pts = points[np.all(np.isfinite(points), axis=1)]
    if len(pts) == 0 or not balls:
        return math.inf
    return float(min(np.min(dist_point_ball(pts, b)) for b in balls))


@dataclass
class AutomorphismSeq:
    shears: list
    eps: list
    etas: list
    eps0: float

    def psi(self, zeta, j: int | None = None) -> np.ndarray:
        """Psi_j = Phi_j o ... o Phi_1 (all stages by default)."""
        out = np.atleast_2d(np.asarray(zeta, dtype=complex))
        for sh in self.shears[: len(self.shears) if j is None else j]:
            out = sh.forward(out)
        return out

    def theta(self, zeta, j: int, k: int) -> np.ndarray:
        """Theta_{j,k} = Phi_k o ... o Phi_j (1-based, inclusive)."""
        out = np.atleast_2d(np.asarray(zeta, dtype=complex))
        for sh in self.shears[j - 1:k]:
            out = sh.forward(out)
        return out

    def psi_real(self, x, j: int | None = None) -> np.ndarray:
        return to_real(self.psi(to_complex(x), j))

    def to_dict(self) -> dict:
        return {"eps0": self.eps0, "eps": self.eps, "eta": self.etas, "shears": [s.to_dict() for s in self.shears]}

    @classmethod
    def from_dict(cls, d: dict) -> "AutomorphismSeq":
        return cls([ShearAutomorphism.from_dict(s) for s in d["shears"]], list(d["eps"]), list(d["eta"]),
                   float(d["eps0"]))


@dataclass
class ComposeConfig:
    lambda0: float = 0.3
    lambda1: float = 0.35
    eps: float = 0.05
    J: int = 3
    seed: int = 0
    z_grid: int = 200
    z_radius: float = 1.05
    check_samples: int = 1000
    degree_cap: int = 512
    mu_fraction: float = 0.1
    threshold: str = "needed"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ComposeResult:
    seq: AutomorphismSeq
    exhaustion: Exhaustion
    clouds: list  # pushed Z samples after each stage (stage 0 = source)
    report: dict
    surface: Hypersurface

    @property
    def passed(self) -> bool:
        return bool(self.report["passed"])


def compose(Z: Hypersurface, forest: TidyForest, cfg: ComposeConfig) -> ComposeResult:
    """Run stages 1..J; every stage certificate is checked on samples and a
    failure raises StageError carrying the stage index and margins."""
    if forest.n + 1 != 2 * Z.dim:
        raise GeometryError("forest and hypersurface dimensions differ")
    ex = build_exhaustion(forest, cfg.lambda0, cfg.lambda1, cfg.J, cfg.mu_fraction)
    src = Z.sample(cfg.z_radius, cfg.z_grid, seed=cfg.seed)
    if not np.any(np.linalg.norm(src, axis=1) <= cfg.lambda0):
        raise GeometryError("Z does not meet lambda0 * closed ball")
    cloud = src.copy()
    clouds = [cloud]
    shears, eps_list, etas, stages = [], [], [], []
    eps_prev = cfg.eps
    surface = Z
    for j in range(1, cfg.J + 1):
        T = ex.balls[j - 1]
        E = ex.bodies[j]
        done = ex.balls[: j - 1]
        real = to_real(cloud)
        if done:
            eta_cloud = min_ball_distance(real, done)
            eta_body = min(ball_to_complement(b, E) for b in done)
            eta = min(eta_cloud, eta_body)
        else:
            eta_cloud = eta_body = eta = math.inf
        if not eta > STAGE_TOL:
            raise StageError(f"stage {j}: image of Z touches a cleared ball", stage=j, margins={"eta": eta})
        eps_j = epsilon_step(eps_prev, ex.nest_gaps[j - 1], ex.nest_gaps[j], eta)
        target = surface if j == 1 else SampledSurface(cloud)
        try:
            shear, srep, new_surface = build_shear(T, E, target, eps_j, samples=cfg.check_samples,
                                                   degree_cap=cfg.degree_cap, seed=cfg.seed + j,
                                                   threshold=cfg.threshold)
        except GeometryError as err:
            raise StageError(f"stage {j}: {err}", stage=j) from err
        if j == 1 and isinstance(new_surface, Hypersurface) and new_surface is not surface:
            # a translation applied to Z carries through the whole pipeline
            surface = new_surface
            cloud = surface.sample(cfg.z_radius, cfg.z_grid, seed=cfg.seed)
            src = cloud.copy()
            clouds = [cloud]
        new_cloud = shear.forward(cloud)
        avoid = min_ball_distance(to_real(new_cloud), ex.balls[:j])
        # Phi_j(E_{j-1}) inside E_j: displacement below the nesting gap suffices
        bd = to_complex(ex.bodies[j - 1].boundary_samples(cfg.check_samples, seed=cfg.seed + 100 + j))
        move = float(np.max(np.linalg.norm(shear.forward(bd) - bd, axis=1)))
        stage = {
            "stage": j,
            "ball": {"center": T.center.tolist(), "radius": T.radius},
            "eps": eps_j,
            "eta": eta,
            "eta_cloud": eta_cloud,
            "eta_body": eta_body,
            "nest_gap_in": ex.nest_gaps[j - 1],
            "nest_gap_out": ex.nest_gaps[j],
            "plane_gap": ex.plane_gaps[j - 1],
            "shear": srep.to_dict(),
            "avoidance_distance": avoid,
            "escaped_samples": int(np.sum(~np.all(np.isfinite(new_cloud), axis=1))),
            "nesting_move": move,
            "conditions": {
                "halving": eps_j < eps_prev / 2.0,
                "inner_gap": eps_j < ex.nest_gaps[j - 1],
                "outer_gap": eps_j < ex.nest_gaps[j],
                "displacement": srep.max_displacement < eps_j,
                "avoidance": eps_j < eta / 2.0 and avoid > STAGE_TOL,
                "nesting": move < ex.nest_gaps[j - 1],
            },
        }
        stage["passed"] = all(stage["conditions"].values())
        stages.append(stage)
        if not stage["passed"]:
            raise StageError(f"stage {j} certificate failed: {stage['conditions']}", stage=j, margins=stage)
        shears.append(shear)
        eps_list.append(eps_j)
        etas.append(eta)
        eps_prev = eps_j
        cloud = new_cloud
        clouds.append(cloud)

    seq = AutomorphismSeq(shears, eps_list, etas, cfg.eps)
    report = diagnostics(seq, ex, cfg, clouds, stages)
    report["surface"] = surface.to_dict()
    report["config"] = cfg.to_dict()
    report["exhaustion"] = ex.to_dict()
    return ComposeResult(seq, ex, clouds, report, surface)


def diagnostics(seq: AutomorphismSeq, ex: Exhaustion, cfg: ComposeConfig, clouds, stages) -> dict:
    dim = ex.bodies[0].dim
    J = len(seq.shears)
    K = to_complex(ball_points(dim, cfg.check_samples, cfg.lambda0, seed=cfg.seed + 7))
    disp = float(np.max(np.linalg.norm(seq.psi(K) - K, axis=1))) if J else 0.0
    two_eps1 = 2.0 * seq.eps[0] if J else 0.0
    # telescoping on E_1 samples: |Psi_j - Psi_{j-1}| <= eps_j
    tele = []
    if J:
        E1 = to_complex(ex.bodies[1].samples(cfg.check_samples, seed=cfg.seed + 8))
        prev = E1
        for j, sh in enumerate(seq.shears, start=1):
            cur = sh.forward(prev)
            tele.append({"stage": j, "max_step": float(np.max(np.linalg.norm(cur - prev, axis=1))), "eps": seq.eps[j - 1]})
            prev = cur
    theta = []
    for j in range(1, J + 1):
        for k in range(j + 1, J + 1):
            Ej = to_complex(ex.bodies[j].samples(cfg.check_samples, seed=cfg.seed + 9))
            m = float(np.max(np.linalg.norm(seq.theta(Ej, j, k) - Ej, axis=1)))
            theta.append({"j": j, "k": k, "max": m, "bound": 2.0 * seq.eps[j - 1], "ok": m < 2.0 * seq.eps[j - 1]})
    assoc = 0.0
    if J >= 2:
        assoc = float(np.max(np.abs(seq.psi(K) - seq.theta(seq.shears[0].forward(K), 2, J))))
    final = clouds[-1]
    clear = min_ball_distance(to_real(final), ex.balls[:J])
    schedule_ok = all(s["conditions"]["halving"] and s["conditions"]["inner_gap"] and s["conditions"]["outer_gap"]
                      for s in stages)
    checks = {
        "stages": all(s["passed"] for s in stages),
        "identity_on_K": disp < cfg.eps,
        "telescoping": all(t["max_step"] <= t["eps"] for t in tele),
        "theta": all(t["ok"] for t in theta),
        "associativity": assoc <= 1e-9,
        "avoidance": clear > STAGE_TOL,
        "schedule": schedule_ok,
        "sum_eps_below_eps0": sum(seq.eps) < cfg.eps,
    }
    return {
        "J": J,
        "eps": seq.eps,
        "stages": stages,
        "identity_displacement_on_K": disp,
        "two_eps1": two_eps1,
        "telescoping": tele,
        "theta": theta,
        "associativity_error": assoc,
        "final_clearance": clear,
        "samples": {"Z": int(len(clouds[0])), "checks": cfg.check_samples},
        "not_machine_checked": ["limit j -> infinity", "biholomorphism onto the ball", "pseudoconvexity",
                                "Runge property"],
        "checks": checks,
        "passed": all(checks.values()),
    }


def cloud_rows(clouds) -> list:
    """Rows (Re z1, Im z1, Re z2, Im z2, ..., stage) of finite samples."""
    rows = []
    for s, c in enumerate(clouds):
        ok = np.all(np.isfinite(c), axis=1)
        r = to_real(c[ok])
        for x in r:
            rows.append(list(map(float, x)) + [s])
    return rows


def completeness_report(seq: AutomorphismSeq, Z: Hypersurface, forest: TidyForest, path_count: int = 16,
                        lambda0: float = 0.3, steps: int = 400) -> dict:
    """Radial curves of Z from the centre out to the unit sphere, mapped by
    Psi_J; image length per radial band and any crossings of forest balls.

    Evidence only: a finite stage cannot force infinite length.
    """
    J = len(seq.shears)
    theta = 2.0 * np.pi * np.arange(path_count) / path_count
    t = np.linspace(0.0, 1.0, steps)
    if forest.schedule and "s" in forest.schedule:
        edges = [0.0] + list(forest.schedule["s"]) + [1.0]
    else:
        g = norm_groups(forest.norms) if len(forest) else np.zeros(0, dtype=int)
        levels = sorted({float(forest.norms[g == k].min()) for k in np.unique(g)})
        edges = [0.0, lambda0] + levels + [1.0]
    edges = sorted(set(edges))
    centers, radii = forest.centers, forest.radii
    consumed = set(range(J))
    rows = []
    partial = None
    if forest.schedule and "rho" in forest.schedule:
        s, rho = forest.schedule["s"], forest.schedule["rho"]
        partial = [sum(s[k - 1] * rho[k] for k in range(1, j + 1)) for j in range(1, len(rho))]
    for k, th in enumerate(theta):
        z1 = t * np.exp(1j * th) * 1.2
        pts = np.zeros((steps, Z.dim), dtype=complex)
        pts[:, 0] = z1
        pts[:, 1] = np.array(Z.translation)[1] + Z.g(z1 - np.array(Z.translation)[0])
        inside = np.linalg.norm(pts, axis=1) <= 1.0
        pts = pts[inside]
        if len(pts) < 2:
            continue
        img = seq.psi(pts) if J else pts
        finite = np.all(np.isfinite(img), axis=1)
        src_len = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        seg_ok = finite[:-1] & finite[1:]
        a, b = to_real(img[:-1][seg_ok]), to_real(img[1:][seg_ok])
        seglen = np.linalg.norm(b - a, axis=1)
        mid_norm = np.linalg.norm(0.5 * (a + b), axis=1)
        band = np.searchsorted(edges, mid_norm, side="right") - 1
        per_band = [float(seglen[band == i].sum()) for i in range(len(edges) - 1)]
        hits_consumed = hits_pending = 0
        for i in range(len(radii)):
            h = segments_hit_balls(a, b, centers[i][None], np.array([radii[i]]))
            if np.any(h):
                if i in consumed:
                    hits_consumed += int(h.sum())
                else:
                    hits_pending += int(h.sum())
        rows.append({"path": k, "source_length": src_len, "image_length": float(seglen.sum()),
                     "per_band": per_band, "escaped": bool(not finite.all()),
                     "crossings_consumed": hits_consumed, "crossings_pending": hits_pending})
    return {"bands": edges, "schedule_partial_sums": partial, "paths": rows,
            "consumed_crossings": int(sum(r["crossings_consumed"] for r in rows)),
            "note": "evidence only; finite truncation cannot certify infinite length"}
