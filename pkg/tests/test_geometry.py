import numpy as np
import pytest

from holocrit import _series as ser
from holocrit import geometry as geo
from holocrit.errors import CurvatureError, StructuralError


def test_jet_index_order():
    assert ser.jet_indices(1) == [(0,), (1,), (2,)]
    assert ser.jet_indices(2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert ser.sym_pairs(2) == [(0, 0), (0, 1), (1, 1)]


def test_series_power_matches_binomial():
    # (1 + u b)^3 has u^2 b^2 coefficient 3, so d^2_u d^2_b = 3 * 2! * 2! = 12
    t = {((1,), (1,)): 1.0}
    s = ser.binomial_power(1.0, t, 3, 1, ser.keep_bidegree(2, 2))
    assert ser.derivative(s, (2,), (2,)) == pytest.approx(12.0)
    assert ser.derivative(s, (1,), (1,)) == pytest.approx(3.0)


@pytest.mark.parametrize("N", [1, 2, 5])
def test_fs_curvature_at_origin(N):
    g = geo.fubini_study(1, N, 0)
    assert np.allclose(g.curvature, [[N]])
    assert abs(g.pure_jet((1,))) == 0 and abs(g.pure_jet((2,))) == 0


def test_flat_and_quadratic_curvature():
    assert np.allclose(geo.flat(1).curvature, 0)
    assert np.allclose(geo.quadratic([1.0, 2.0]).curvature, np.diag([1, 2]))


def test_curvature_missing_jets():
    with pytest.raises(StructuralError):
        geo.curvature_at({}, 1)


@pytest.mark.parametrize("z0", [0.0, 0.5, 0.3 - 0.8j])
def test_fs_r_equals_degree(z0):
    assert geo.fubini_study(1, 3, z0).r == pytest.approx(3.0, rel=1e-13)


def test_fs_curvature_off_origin():
    # Theta = N / (1 + |z|^2)^2
    z0 = 0.5
    assert geo.fubini_study(1, 3, z0).curvature[0, 0].real == pytest.approx(3 / 1.25 ** 2)


def test_hermitian_curvature_cp2():
    th = geo.fubini_study(2, 3, [0.3 + 0.1j, -0.2j]).curvature
    assert np.allclose(th, th.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(th).min() > 0


def test_jet_reality():
    g = geo.fubini_study(2, 2, [0.4, 0.1 + 0.3j])
    for (a, b), v in g.jets.items():
        assert v == pytest.approx(np.conj(g.jets[(b, a)]), abs=1e-12)


def test_fd_jets_match_analytic():
    N, z0 = 3, 0.5 + 0.2j
    fd = geo.from_potential(lambda z: N * np.log1p(abs(z[0]) ** 2), 1, z0)
    an = geo.fubini_study(1, N, z0)
    for key, val in an.jets.items():
        assert abs(fd.jets[key] - val) < 5e-6 * (1 + abs(val)), key


def test_adapt_frame_at_origin_is_trivial():
    gauge = geo.adapt_frame(geo.fubini_study(1, 4, 0))
    assert all(abs(c) == 0 for c in gauge.coefficients.values())


def test_adapt_frame_linear_term():
    g = geo.quadratic([1.0], 0.7)  # dK = conj(z0) at z0
    gauge = geo.adapt_frame(g)
    assert gauge.coefficients[(1,)] == pytest.approx(0.7)
    assert abs(gauge.transformed.pure_jet((1,))) < 1e-15
    assert geo.is_adapted(gauge.transformed)


def test_adapt_frame_preserves_mixed_jets():
    g = geo.fubini_study(2, 3, [0.2 + 0.4j, -0.3])
    t = geo.adapt_frame(g).transformed
    assert np.allclose(t.curvature, g.curvature, atol=1e-10)
    for (a, b), v in g.jets.items():
        if sum(a) >= 1 and sum(b) >= 1:
            assert t.jets[(a, b)] == v


def test_adapt_frame_random_quartic_by_fd():
    rng = np.random.default_rng(5)
    c = rng.standard_normal(6)

    def pot(z):
        x, y = z[0].real, z[0].imag
        return (c[0] * x + c[1] * y + c[2] * x * x + c[3] * x * y ** 2 + c[4] * x ** 4
                + c[5] * y ** 3 * x + (x * x + y * y))

    z0 = 0.3 - 0.2j
    g = geo.from_potential(pot, 1, z0)
    gauge = geo.adapt_frame(g)
    fd = geo.from_potential(gauge.gauged_potential(pot), 1, z0)
    assert abs(fd.pure_jet((1,))) < 1e-7
    assert abs(fd.pure_jet((2,))) < 1e-6


def test_normalize_scalar():
    n = geo.normalize_coordinates([[4.0]])
    assert np.allclose(n.linear_map, [[0.5]])
    assert n.jacobian_factor == pytest.approx(0.25)


def test_normalize_identity_and_cp2():
    assert np.allclose(geo.normalize_coordinates(np.eye(2)).linear_map, np.eye(2))
    n = geo.normalize_coordinates(3 * np.eye(2))
    assert np.allclose(n.linear_map, np.eye(2) / np.sqrt(3))
    assert n.jacobian_factor == pytest.approx(1 / 9)


def test_normalize_general_hermitian():
    th = np.array([[2.0, 0.5 - 0.3j], [0.5 + 0.3j, 1.0]])
    L = geo.normalize_coordinates(th).linear_map
    assert np.abs(L.conj().T @ th @ L - np.eye(2)).max() <= 1e-12
    assert np.allclose(L, L.conj().T)


@pytest.mark.parametrize("th", [[[-1.0]], np.diag([1.0, 0.0]), np.diag([1.0, -2.0])])
def test_normalize_rejects_nonpositive(th):
    with pytest.raises(CurvatureError, match="not definite"):
        geo.normalize_coordinates(th)


def test_normalize_rejects_degenerate():
    with pytest.raises(CurvatureError):
        geo.normalize_coordinates(np.diag([1.0, 1e-12]))
