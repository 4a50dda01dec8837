import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ballforest.forest import (ShellParams, TidyForest, a_squared, build_bound_forest, build_complete_forest,
                               build_shell_forest, default_schedules, shell_bound, stack_count, stack_threshold,
                               verify_tidy)
from ballforest.geom import GeometryError
from ballforest.sphere_net import build_net, net_constants


def rim_points(forest, k=16):
    """Points on every ball rim."""
    out = []
    for c, r in zip(forest.centers, forest.radii):
        p = c / np.linalg.norm(c)
        t = np.array([-p[1], p[0]]) if len(p) == 2 else None
        if t is not None:
            out.append(c + r * t)
            out.append(c - r * t)
    return np.array(out)


def test_shell_params_arithmetic():
    sp = ShellParams.for_shell(1, 0.5, 0.8)
    # independent arithmetic with m_1 + 1 = 11
    delta = 0.3 / (11 * 0.8)
    assert sp.delta == pytest.approx(delta, abs=1e-15)
    assert sp.r == pytest.approx(2 * math.sqrt(2 * delta), abs=1e-15)
    assert sp.eta == pytest.approx(math.sqrt(2 * delta - delta ** 2), abs=1e-15)
    assert (1 - sp.delta) ** 2 + sp.eta ** 2 == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(sp.levels, [0.5 + 0.3 * j / 11 for j in range(12)], atol=1e-15)


@given(st.floats(0.05, 0.9), st.floats(0.01, 0.5), st.integers(1, 3))
def test_eq2nd_and_params(r1, width, n):
    r2 = min(r1 + width, 0.99)
    if r2 - r1 < 1e-3:
        return
    sp = ShellParams.for_shell(n, r1, r2)
    m = net_constants(n).m_n
    assert len(sp.levels) == m + 2
    for j in range(1, m + 1):
        assert sp.levels[j] * (1 - sp.delta) > sp.levels[j - 1]
    assert (1 - sp.delta) ** 2 + sp.eta ** 2 == pytest.approx(1.0, abs=1e-12)


def test_shell_forest_bounds(shell_forest):
    f = shell_forest
    sp = f.shells[0]
    rep = verify_tidy(f)
    assert rep.passed and rep.bullet1 and rep.bullet2 and rep.bullet3
    # boundary of s_j * T((1-delta)p, eta) lies on s_j S^n
    rim = rim_points(f)
    levels = np.repeat(np.array(sp.levels)[f.family_ids], 2)
    np.testing.assert_allclose(np.linalg.norm(rim, axis=1), levels, atol=1e-9)
    # min norm over a ball is its centre norm; strictly inside the open shell
    assert f.norms.min() >= 0.5 + 1e-12
    assert f.outer_norms.max() <= 0.8 - 1e-9


def test_shell_forest_n2_tidy():
    f = build_shell_forest(2, 0.5, 0.8)
    assert len(f) > 0 and verify_tidy(f).passed
    assert f.norms.min() > 0.5


def test_a_squared_exact():
    assert a_squared(1) == Fraction(1, 198)
    assert math.sqrt(a_squared(1)) == pytest.approx((1 / 6) * math.sqrt(2 / 11), rel=1e-15)


def test_stack_threshold_exact():
    assert stack_threshold(1, 0.5, 0.8, 0.5) == 132
    assert stack_count(1, 0.5, 0.8, 0.5) == 133
    assert stack_count(1, 0.5, 0.8, 1e-9) == 1


def test_bound_forest_small():
    f = build_bound_forest(1, 0.5, 0.8, 0.1)
    N = f.schedule["N"]
    assert N == math.floor(0.8 * 0.01 * 198 / 0.3) + 1
    assert len(f.shells) == N
    assert verify_tidy(f).passed
    assert f.norms.min() > 0.5


def test_shell_bound_value():
    assert shell_bound(1, 0.5, 0.8, euclidean=True) == pytest.approx(0.02176, abs=1e-6)
    assert shell_bound(1, 0.5, 0.8) == pytest.approx(0.02176 / 0.5, abs=2e-6)


def test_complete_forest_and_prefixes():
    s, rho = default_schedules(0.5, 2, rho_scale=0.1)
    f = build_complete_forest(1, s, rho, 2)
    assert verify_tidy(f).passed
    assert f.norms.min() > s[0]
    for k in (1, 100, 5000, len(f) // 2):
        assert verify_tidy(f.subset(np.arange(len(f)) < k)).passed


def test_default_schedules():
    s, rho = default_schedules(0.3, 5)
    assert s[0] == pytest.approx(0.3)
    assert all(a < b < 1 for a, b in zip(s, s[1:]))
    assert rho[0] == 0 and all(a < b for a, b in zip(rho, rho[1:]))


def test_schedule_validation():
    with pytest.raises(GeometryError):
        build_complete_forest(1, [0.5, 0.4], [0, 1], 1)
    with pytest.raises(GeometryError):
        build_complete_forest(1, [0.5, 0.6], [0.1, 1], 1)
    with pytest.raises(GeometryError):
        build_shell_forest(1, 0.8, 0.5)


def test_single_ball_and_pair():
    assert verify_tidy(TidyForest(1, [[0.5, 0.0]], [0.1])).passed
    two = TidyForest(1, [[0.5, 0.0], [-0.5, 0.0]], [0.1, 0.1])
    assert verify_tidy(two).bullet2


def test_inflated_radius_breaks_bullet2(shell_forest):
    f = shell_forest
    g = f.family_ids == 1
    radii = f.radii.copy()
    radii[g] *= 5.0
    bad = TidyForest(1, f.centers, radii, f.shell_ids, f.family_ids, f.shells)
    rep = verify_tidy(bad)
    assert not rep.bullet2 and not rep.passed


def test_bullet3_violation():
    bad = TidyForest(1, [[0.5, 0.0], [0.0, 0.51]], [0.2, 0.05])
    assert not verify_tidy(bad).bullet3


@given(st.randoms(use_true_random=False))
def test_order_invariance(rnd):
    f = build_shell_forest(1, 0.5, 0.8)
    perm = list(range(len(f)))
    rnd.shuffle(perm)
    g = TidyForest(1, f.centers[perm], f.radii[perm], f.shell_ids[perm], f.family_ids[perm], f.shells)
    assert g.centers.tolist() == f.centers.tolist()
    assert verify_tidy(g).to_dict() == verify_tidy(f).to_dict()


def test_projection_property():
    """Cap of radius (1/2 - c_n) r around p sits in the cap of radius r/2 at some q."""
    sp = ShellParams.for_shell(1, 0.5, 0.8)
    net = build_net(1, sp.r)
    F = net.points
    cn = net.constants.c_n
    th = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
    P = np.column_stack([np.cos(th), np.sin(th)])
    d = np.linalg.norm(P[:, None] - F[None], axis=2)
    q = F[np.argmin(d, axis=1)]
    assert d.min(axis=1).max() <= cn * sp.r + 1e-9
    # cap boundary points of p lie within r/2 of q (triangle inequality, checked on samples)
    half = (0.5 - cn) * sp.r
    phi = 2 * np.arcsin(half / 2)
    for sgn in (-1, 1):
        x = np.column_stack([np.cos(th + sgn * phi), np.sin(th + sgn * phi)])
        assert np.max(np.linalg.norm(x - q, axis=1)) <= sp.r / 2 + 1e-12


def test_json_and_csv_roundtrip(shell_forest):
    from ballforest.serialize import dumps, loads
    d = loads(dumps(shell_forest.to_dict()))
    back = TidyForest.from_dict(d)
    assert back.centers.tolist() == shell_forest.centers.tolist()
    assert verify_tidy(back).passed
    assert set(d) >= {"n", "schedule", "shells", "balls"}
    assert set(d["shells"][0]) >= {"r1", "r2", "delta", "r", "eta", "levels"}
    csv = shell_forest.to_csv().splitlines()
    assert len(csv) == len(shell_forest) + 1
