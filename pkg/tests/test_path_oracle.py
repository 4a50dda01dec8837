import numpy as np
import pytest
from hypothesis import given, strategies as st

from ballforest.forest import TidyForest, build_shell_forest, shell_bound
from ballforest.geom import GeometryError, segment_hits_ball
from ballforest.path_oracle import (CrossingProblem, falsify_bound, min_crossing_length, polyline_length,
                                    segment_weight)

EMPTY = TidyForest(1, np.zeros((0, 2)), np.zeros(0))


def check_witness(res, forest, r1, r2, shell_tol):
    w = res.witness
    assert abs(np.linalg.norm(w[0]) - r1) < 1e-9
    assert abs(np.linalg.norm(w[-1]) - r2) < 1e-9
    for a, b in zip(w[:-1], w[1:]):
        for ball in forest.balls:
            assert not segment_hits_ball(a, b, ball)
    assert np.linalg.norm(w, axis=1).max() <= r2 + 1e-12
    assert np.linalg.norm(w, axis=1).min() >= r1 - shell_tol


def test_empty_forest_lengths():
    h = 0.01
    e = min_crossing_length(CrossingProblem(EMPTY, 0.5, 0.8, h, "euclidean"))
    assert e.length == pytest.approx(0.3, abs=2 * h)
    p = min_crossing_length(CrossingProblem(EMPTY, 0.5, 0.8, h, "projected"))
    assert p.length <= 2 * h


@pytest.mark.parametrize("h", [0.01, 0.005])
def test_shell_witness_feasible(shell_forest, h):
    prob = CrossingProblem(shell_forest, 0.5, 0.8, h, "euclidean")
    res = min_crossing_length(prob)
    assert res.status == "ok"
    check_witness(res, shell_forest, 0.5, 0.8, prob.shell_tol)
    assert res.length <= res.grid_length + 1e-12
    assert res.length >= shell_bound(1, 0.5, 0.8, euclidean=True)
    # projected length of the same witness is bounded by euclidean / r1
    assert polyline_length(res.witness, "projected") <= res.length / 0.5 + 4 * h


def test_monotone_refinement(shell_forest):
    lens = {}
    for h in (0.02, 0.01, 0.005):
        lens[h] = min_crossing_length(CrossingProblem(shell_forest, 0.5, 0.8, h, "euclidean")).length
    assert lens[0.01] <= lens[0.02] + 4 * 0.01
    assert lens[0.005] <= lens[0.01] + 4 * 0.005


def test_claimed_zero_is_consistent(shell_forest):
    v, _ = falsify_bound(CrossingProblem(shell_forest, 0.5, 0.8, 0.01), 0.0)
    assert v.verdict == "consistent" and "not a proof" in v.note
    assert set(v.to_dict()) >= {"claimed", "measured", "h", "mode", "verdict", "seed"}


def test_blocked_ring():
    ang = np.arange(4) * np.pi / 2
    square = TidyForest(1, 0.6 * np.column_stack([np.cos(ang), np.sin(ang)]), np.full(4, 0.6))
    # the square's corners have norm 0.85, so every crossing to 0.9 meets an edge
    res = min_crossing_length(CrossingProblem(square, 0.5, 0.9, 0.01))
    assert res.blocked and np.isinf(res.length) and "resolution" in res.info["note"]
    v, _ = falsify_bound(CrossingProblem(square, 0.5, 0.9, 0.01), 0.1)
    assert v.verdict == "consistent"


def test_dropping_family_opens_projected_corridor(shell_forest):
    h = 0.005
    full = min_crossing_length(CrossingProblem(shell_forest, 0.5, 0.8, h, "projected")).length
    cut = CrossingProblem(shell_forest.without_family(1), 0.5, 0.8, h, "projected")
    v, res = falsify_bound(cut, full)
    assert v.falsified and res.length < full - 4 * h


def test_r3_grid():
    f = build_shell_forest(2, 0.5, 0.8)
    prob = CrossingProblem(f, 0.5, 0.8, 0.1)
    res = min_crossing_length(prob)
    assert res.status == "ok"
    check_witness(res, f, 0.5, 0.8, prob.shell_tol)


def test_r4_heuristic():
    from ballforest.fixtures import five_ball_forest
    f = five_ball_forest()
    prob = CrossingProblem(f, 0.5, 0.8, 0.05, heuristic_restarts=50, straighten_trials=2000)
    res = min_crossing_length(prob)
    assert res.status == "heuristic"
    check_witness(res, f, 0.5, 0.8, prob.shell_tol)


def test_problem_validation():
    with pytest.raises(GeometryError):
        CrossingProblem(EMPTY, 0.5, 0.8, 0.01, "chordal")
    with pytest.raises(GeometryError):
        CrossingProblem(EMPTY, 0.5, 0.8, 0.2)
    with pytest.raises(GeometryError):
        CrossingProblem(EMPTY, 0.8, 0.5, 0.01)


@given(st.floats(0.1, 1.0), st.floats(0, 2 * np.pi), st.floats(0.1, 1.0), st.floats(0, 2 * np.pi))
def test_projected_weight_bounds(ra, ta, rb, tb):
    a = ra * np.array([np.cos(ta), np.sin(ta)])
    b = rb * np.array([np.cos(tb), np.sin(tb)])
    w = float(segment_weight(a[None], b[None], "projected")[0])
    chord = np.linalg.norm(a / ra - b / rb)
    assert chord - 1e-12 <= w <= np.pi * chord / 2 + 1e-12
    assert float(segment_weight(a[None], b[None], "euclidean")[0]) == pytest.approx(np.linalg.norm(a - b))
