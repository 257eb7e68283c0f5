import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinlayer.beam import (BeamFrame, BeamSample, PolynomialField, ResolutionError, ShapeError,
                            check_moments, decompose, decompose_2d, elementary_displacement,
                            elementary_on_grid, interval_quadrature, sample_beam,
                            section_quadrature, seminorms, warping)

from support import korn_ratios

R0, D0 = 0.05, 0.5
Z = np.linspace(0.0, D0, 21)


@pytest.fixture(scope="module")
def quad():
    return section_quadrature(R0)


def rigid(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return (lambda x: a + np.cross(b, x),
            lambda x: np.broadcast_to(np.array([[0, -b[2], b[1]], [b[2], 0, -b[0]], [-b[1], b[0], 0]]),
                                      x.shape[:-1] + (3, 3)))


def test_quadrature_invariants(quad):
    assert quad.area == pytest.approx(np.pi * R0 ** 2, rel=1e-12)
    assert np.all(quad.weights > 0)
    first = quad.weights @ quad.nodes
    assert np.abs(first).max() <= 1e-12 * R0 * np.pi * R0 ** 2
    # int x1^2 over the disc
    assert quad.weights @ quad.nodes[:, 0] ** 2 == pytest.approx(np.pi * R0 ** 4 / 4, rel=1e-12)


def test_rigid_motion(quad):
    a, b = np.array([1.0, -2.0, 0.5]), np.array([0.3, -0.1, 0.7])
    f, j = rigid(a, b)
    s = sample_beam(f, quad, Z, jac=j)
    fr = decompose(s)
    np.testing.assert_allclose(fr.R, np.broadcast_to(b, fr.R.shape), atol=1e-13)
    exp_U = a + np.cross(b, np.column_stack([0 * Z, 0 * Z, Z]))
    np.testing.assert_allclose(fr.U, exp_U, atol=1e-13)
    w = warping(s, fr)
    assert np.abs(w).max() < 1e-13
    assert check_moments(w, quad).max_abs() < 1e-15
    n = seminorms(s, fr)
    for v in (n.warp_L2, n.dR_L2, n.dU_minus_Rxe3_L2, n.strain_L2):
        assert v < 1e-12


def test_torsion(quad):
    g = lambda z: 1 + z ** 2
    s = sample_beam(lambda x: np.stack([-x[..., 1] * g(x[..., 2]), x[..., 0] * g(x[..., 2]),
                                        0 * x[..., 0]], -1), quad, Z)
    fr = decompose(s)
    np.testing.assert_allclose(fr.R[:, 2], g(Z), rtol=1e-12)
    assert np.abs(fr.R[:, :2]).max() < 1e-13
    assert np.abs(fr.U).max() < 1e-13
    assert np.abs(warping(s, fr)).max() < 1e-13


def test_axial_bending(quad):
    h = lambda z: np.sin(z)
    s = sample_beam(lambda x: np.stack([0 * x[..., 0], 0 * x[..., 0], x[..., 0] * h(x[..., 2])], -1),
                    quad, Z)
    fr = decompose(s)
    np.testing.assert_allclose(fr.R[:, 1], -h(Z), atol=1e-14)
    assert np.abs(fr.U).max() < 1e-14
    w = warping(s, fr)
    assert np.abs(w).max() < 1e-14
    assert check_moments(w, quad).max_abs() == pytest.approx(0.0, abs=1e-18)


def test_elementary_examples():
    fr = BeamFrame(Z, np.tile([1.0, 2.0, 3.0], (Z.size, 1)), np.zeros((Z.size, 3)), R0, D0)
    x = np.array([[0.01, -0.02, 0.2], [0.0, 0.03, 0.4]])
    np.testing.assert_allclose(elementary_displacement(fr, x), [[1, 2, 3], [1, 2, 3]])
    c = 0.7
    fr = BeamFrame(Z, np.zeros((Z.size, 3)), np.tile([0.0, 0.0, c], (Z.size, 1)), R0, D0)
    np.testing.assert_allclose(elementary_displacement(fr, [R0, 0.0, 0.1]), [0, c * R0, 0], atol=1e-16)
    with pytest.raises(ValueError):
        elementary_displacement(fr, [0.0, 0.0, 2 * D0])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_polynomial_identities(seed):
    rng = np.random.default_rng(seed)
    quad = section_quadrature(R0)
    f = PolynomialField.random(rng, R0, D0)
    s = sample_beam(f, quad, Z, jac=f.jacobian)
    fr = decompose(s)
    w = warping(s, fr)
    scale = np.abs(s.values).max() * quad.area
    assert check_moments(w, quad).max_abs() <= 1e-12 * scale
    rec = elementary_on_grid(fr, quad) + w
    assert np.abs(rec - s.values).max() <= 1e-14 * np.abs(s.values).max()
    # idempotence
    ue = elementary_on_grid(fr, quad)
    fr2 = decompose(BeamSample(quad, Z, ue))
    np.testing.assert_allclose(fr2.U, fr.U, atol=1e-12 * np.abs(fr.U).max())
    np.testing.assert_allclose(fr2.R, fr.R, atol=1e-12 * np.abs(fr.R).max())
    assert np.abs(ue - elementary_on_grid(fr2, quad)).max() <= 1e-12 * np.abs(ue).max()


def test_axial_stretch():
    beta = 0.25
    r, d = 0.02, 0.3
    z = np.linspace(0, d, 31)
    quad = section_quadrature(r)
    s = sample_beam(lambda x: np.stack([0 * x[..., 0], 0 * x[..., 0], beta * x[..., 2]], -1), quad, z)
    n = seminorms(s, decompose(s))
    assert n.strain_L2 == pytest.approx(beta * np.sqrt(np.pi * r ** 2 * d), rel=1e-8)
    assert n.dU_minus_Rxe3_L2 == pytest.approx(beta * np.sqrt(d), rel=1e-8)
    assert n.warp_L2 < 1e-14
    assert n.dR_L2 < 1e-12


def test_korn_scaling():
    rs = np.array([1e-3, 1e-2, 1e-1])
    ratios = np.array([korn_ratios(r) for r in rs])
    slope_w = np.polyfit(np.log(rs), np.log(ratios[:, 0]), 1)[0]
    slope_r = np.polyfit(np.log(rs), np.log(ratios[:, 1]), 1)[0]
    assert abs(slope_w - 1.0) <= 0.15
    assert abs(slope_r) <= 0.15


def test_errors(quad):
    f = PolynomialField.random(np.random.default_rng(0), R0, D0)
    s = sample_beam(f, quad, Z[:2], jac=f.jacobian)
    with pytest.raises(ResolutionError):
        seminorms(s, decompose(s))
    with pytest.raises(ShapeError):
        BeamSample(quad, Z, np.zeros((Z.size, 3, 3)))
    full = sample_beam(f, quad, Z, jac=f.jacobian)
    other = decompose(sample_beam(f, quad, Z[:5], jac=f.jacobian))
    with pytest.raises(ShapeError):
        warping(full, other)
    with pytest.raises(ShapeError):
        BeamFrame(Z, np.zeros((3, 3)), np.zeros((Z.size, 3)), R0, D0)
    with pytest.raises(ShapeError):
        decompose_2d(np.zeros((Z.size, 64, 2)), quad, Z)


def test_csv(tmp_path, quad):
    f, j = rigid([1, 0, 0], [0, 0, 1])
    fr = decompose(sample_beam(f, quad, Z, jac=j))
    lines = fr.to_csv(tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x3,U1,U2,U3,R1,R2,R3"
    assert len(lines) == Z.size + 1


class TestPlane:
    q = interval_quadrature(0.1)
    z = np.linspace(0, 1, 11)

    def test_bending_mode(self):
        x1 = self.q.nodes[:, 0]
        rot = np.sin(self.z)
        vals = np.stack([np.broadcast_to(2.0, (self.z.size, x1.size)),
                         0.5 - rot[:, None] * x1[None, :]], -1)
        fr, w = decompose_2d(vals, self.q, self.z)
        np.testing.assert_allclose(fr.R, rot, atol=1e-14)
        np.testing.assert_allclose(fr.U, np.tile([2.0, 0.5], (self.z.size, 1)), atol=1e-14)
        assert np.abs(w).max() < 1e-14

    def test_warping_moments(self):
        rng = np.random.default_rng(3)
        x1 = self.q.nodes[:, 0]
        c = rng.standard_normal((4, 2))
        vals = sum(np.multiply.outer(np.ones_like(self.z), (x1 / 0.1) ** k)[..., None] * c[k] for k in range(4))
        _, w = decompose_2d(vals, self.q, self.z)
        assert np.abs(self.q.weights @ w[0]).max() < 1e-14
        assert abs(self.q.weights @ (x1 * w[0, :, 1])) < 1e-15
