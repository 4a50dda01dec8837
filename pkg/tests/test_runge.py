import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ballforest.fixtures import fixture_surface, outer_shell_ball
from ballforest.geom import GeometryError, HullSpec, Hyperplane, SolidBall, TangentBall, to_complex, to_real
from ballforest.runge import (ArnoldiPoly, Cylinder, Frame, Hypersurface, PlanarConvex, SampledSurface,
                              ShearAutomorphism, WitnessError, build_shear, choose_tau, clearance_eta,
                              normalize_frame, project_cylinder, runge_witness)
from ballforest.sampling import ball_points


def unit_ball(r, dim=4):
    return HullSpec((SolidBall(np.zeros(dim), r),))


def test_identity_frame():
    # {Re z1 = 0} with the body on the negative side
    H = HullSpec((SolidBall([-1.0, 0, 0, 0], 0.5),))
    f = normalize_frame(Hyperplane([1.0, 0, 0, 0], 0.0), H)
    np.testing.assert_allclose(f.unitary, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(f.shift, 0, atol=1e-15)


def test_pure_shift_frame():
    f = normalize_frame(Hyperplane([1.0, 0, 0, 0], 1.0), unit_ball(0.5))
    np.testing.assert_allclose(f.unitary, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(f.shift, [1, 0], atol=1e-15)
    np.testing.assert_allclose(f.apply([[1.5 + 2j, 3j]]), [[0.5 + 2j, 3j]])


def test_frame_along_im_z2():
    plane = Hyperplane([0, 0, 0, 1.0], 0.7)
    f = normalize_frame(plane, unit_ball(0.5))
    rng = np.random.default_rng(0)
    x = rng.standard_normal((100, 4))
    x = x - np.outer(x @ plane.normal - plane.offset, plane.normal)
    om = f.apply_real(x)
    assert np.max(np.abs(om[:, 0].real)) < 1e-10
    assert np.all(f.apply_real(unit_ball(0.5).samples(200)).real[:, 0] < 0)


def test_frame_rejects_crossing_body():
    with pytest.raises(GeometryError):
        normalize_frame(Hyperplane([1.0, 0, 0, 0], 0.3), unit_ball(0.5))
    with pytest.raises(GeometryError):
        Frame(np.array([[1, 1], [0, 1]]), np.zeros(2))


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0.1, 2.0))
def test_frame_maps_plane_and_roundtrips(v, c):
    v = np.array(v)
    if np.linalg.norm(v) < 1e-2:
        return
    plane = Hyperplane(v / np.linalg.norm(v), c)
    f = normalize_frame(plane)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((20, 4))
    x = x - np.outer(x @ plane.normal - plane.offset, plane.normal)
    om = f.apply_real(x)
    assert np.max(np.abs(om[:, 0].real)) < 1e-10
    np.testing.assert_allclose(to_real(f.inverse(om)), x, atol=1e-12)


def test_project_cylinder_extremes():
    D = TangentBall([1.0, 0, 0, 0], 0.3)
    f = normalize_frame(D.hyperplane, unit_ball(0.5))
    cyl = project_cylinder(D, f)
    assert cyl.half == pytest.approx(0.3 + 1e-6, abs=1e-12)
    assert cyl.lam == pytest.approx(0.303, abs=1e-12)
    om = f.apply_real(D.sample(1000, seed=2))
    assert np.all(cyl.contains(om, tol=1e-12))


def test_project_cylinder_single_fibre():
    D = TangentBall([1.0, 0, 0, 0], 1e-9)
    cyl = project_cylinder(D, normalize_frame(D.hyperplane))
    assert cyl.half == pytest.approx(1e-6, abs=1e-8)


def test_project_cylinder_frame_mismatch():
    D = TangentBall([1.0, 0, 0, 0], 0.3)
    with pytest.raises(GeometryError):
        project_cylinder(D, Frame.identity(2))


def test_clearance_examples():
    cyl = Cylinder(1.0, 1.0)
    f = Frame.identity(2)
    assert clearance_eta(Hypersurface.line(1.0, -5.0), cyl, f).eta == pytest.approx(2.5)
    assert clearance_eta(Hypersurface.line(0.0, 1.0), cyl, f).eta == pytest.approx(0.5)
    cl = clearance_eta(Hypersurface.line(1.0, 0.0), cyl, f)
    assert cl.translation and cl.eta > 0
    assert np.linalg.norm(cl.translation) == 2.0 ** -20 * 2 ** int(round(math.log2(
        np.linalg.norm(cl.translation) / 2.0 ** -20)))


def test_clearance_graph_roots():
    cyl = Cylinder(1.0, 1.0)
    Z = Hypersurface.graph([2.0, 0.0, 1.0])  # w = z^2 + 2, min |.| on [-i, i] is 1
    assert clearance_eta(Z, cyl, Frame.identity(2)).eta == pytest.approx(0.5, abs=1e-9)


def test_clearance_sampled():
    pts = np.array([[0.5j, 0.2], [0.1 + 0j, 0.3]])
    cl = clearance_eta(SampledSurface(pts), Cylinder(1.0, 1.0), Frame.identity(2))
    assert cl.eta == pytest.approx(0.5 * min(0.2, math.hypot(0.1, 0.3)))


@given(st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2), st.floats(0.1, 1.5))
def test_sampler_satisfies_equation(a, b, r):
    Z = Hypersurface.line(a, b)
    pts = Z.sample(r, grid=30)
    if len(pts):
        assert np.max(np.abs(Z.residual(pts))) < 1e-10
        assert np.max(np.linalg.norm(pts, axis=1)) <= r + 1e-12
    G = Hypersurface.graph([b, a, 0.3])
    gp = G.sample(r, grid=30)
    if len(gp):
        assert np.max(np.abs(G.residual(gp))) < 1e-10


def test_constant_witness():
    w = runge_witness(1.0, PlanarConvex.disk(-2, 0.5), 10.0)
    assert w.degree == 0 and w.certified
    assert w(np.array([0j]))[0] == pytest.approx(0.2)


def test_witness_small_tau():
    w = runge_witness(1.0, PlanarConvex.disk(-2, 0.5), 0.1)
    assert w.certified and 0 < w.degree <= 512 and w.marginE > 0 and w.marginD > 0
    # independent dense re-check
    th = np.linspace(0, 2 * np.pi, 5000)
    assert np.max(np.abs(w(-2 + 0.5 * np.exp(1j * th)))) < 0.1
    assert np.min(w(1j * np.linspace(-1, 1, 5000)).real) > 10.0


def test_witness_failure_reports_margins():
    with pytest.raises(WitnessError) as err:
        runge_witness(1.0, PlanarConvex.disk(-0.6, 0.5), 0.01, degree_cap=16)
    assert err.value.best and len(err.value.best[-1]) == 3


def test_witness_rejects_body_on_axis():
    with pytest.raises(GeometryError):
        runge_witness(1.0, PlanarConvex.disk(0.0, 0.5), 0.1)


def test_arnoldi_roundtrip_is_bitwise():
    w = runge_witness(1.0, PlanarConvex.disk(-2, 0.5), 0.1)
    back = ArnoldiPoly.from_dict(w.poly.to_dict())
    z = np.linspace(-3, 1, 50) + 0.3j
    assert np.array_equal(back(z), w.poly(z))
    again = runge_witness(1.0, PlanarConvex.disk(-2, 0.5), 0.1)
    assert np.array_equal(again.poly.coeffs, w.poly.coeffs)


def test_choose_tau():
    def ok(t):
        return math.expm1(t) * 0.45 < 0.01 and 1 / t > math.log(0.5 / 0.05)

    tau = choose_tau(0.01, 0.45, 0.05, 0.5)
    # largest dyadic 2^-k that satisfies both smallness requirements
    assert ok(tau) and not ok(2 * tau)
    assert math.log2(tau) == round(math.log2(tau))
    with pytest.raises(GeometryError):
        choose_tau(1e-9, 1.0, 0.1, 1.0)


@pytest.fixture(scope="module")
def demo():
    D = outer_shell_ball()
    E = unit_ball(0.45)
    with np.errstate(over="ignore", invalid="ignore"):
        shear, rep, surf = build_shear(D, E, fixture_surface(), 0.01, threshold="strict")
    return D, E, shear, rep


def test_shear_certificate(demo):
    D, E, shear, rep = demo
    assert rep.passed and rep.avoidance_margin > 0 and rep.max_displacement < 0.01
    assert rep.max_displacement <= rep.envelope
    assert rep.avoidance_margin >= 1e-6


def test_shear_moves_surface_off_ball(demo):
    D, E, shear, rep = demo
    Z = fixture_surface()
    pts = Z.sample(1.0, grid=120)
    with np.errstate(over="ignore", invalid="ignore"):
        img = shear.forward(pts)
        img = to_real(img[np.all(np.isfinite(img), axis=1)])
    img = img[np.max(np.abs(img), axis=1) < 10.0]  # far images cannot meet D
    from ballforest.geom import dist_point_ball
    assert np.min(dist_point_ball(img, D)) > 0


def test_shear_structure(demo):
    D, E, shear, rep = demo
    z = to_complex(ball_points(4, 500, 0.5, seed=4))
    om = shear.frame.apply(z)
    out = shear.frame.apply(shear.forward(z))
    # first frame coordinate is fixed, the fibre is scaled by |e^psi|
    np.testing.assert_allclose(out[:, 0], om[:, 0], atol=1e-12)
    scale = np.abs(np.exp(shear.psi(om[:, 0])))
    np.testing.assert_allclose(np.abs(out[:, 1]), scale * np.abs(om[:, 1]), rtol=1e-9, atol=1e-14)
    back = shear.inverse(shear.forward(z))
    assert np.max(np.abs(back - z)) < 1e-9


def test_shear_envelope_on_samples(demo):
    D, E, shear, rep = demo
    z = to_complex(E.samples(1000, seed=5))
    disp = np.linalg.norm(shear.forward(z) - z, axis=1)
    assert disp.max() <= math.expm1(rep.tau) * E.max_norm() + 1e-15


def test_shear_serialization(demo):
    from ballforest.serialize import dumps, loads
    D, E, shear, rep = demo
    d = loads(dumps(shear.to_dict()))
    back = ShearAutomorphism.from_dict(d)
    z = to_complex(ball_points(4, 50, 0.45, seed=6))
    np.testing.assert_allclose(back.forward(z), shear.forward(z), atol=1e-12)
    assert "translation_applied" in d and "margins" in d


def test_shear_is_deterministic(demo):
    D, E, shear, rep = demo
    with np.errstate(over="ignore", invalid="ignore"):
        again, _, _ = build_shear(D, E, fixture_surface(), 0.01, threshold="strict")
    assert np.array_equal(again.psi.coeffs, shear.psi.coeffs)


def test_huge_eps_gives_tau_one():
    D = outer_shell_ball()
    with np.errstate(over="ignore", invalid="ignore"):
        _, rep, _ = build_shear(D, unit_ball(0.45), Hypersurface.line(0.0, 1.0), 1e3)
    assert rep.tau == 1.0


def test_build_shear_rejects_bad_eps():
    with pytest.raises(GeometryError):
        build_shear(outer_shell_ball(), unit_ball(0.45), fixture_surface(), 0.0)
