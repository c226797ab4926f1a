from math import comb

import numpy as np
import pytest

from holocrit import geometry as geo
from holocrit import kernels as ker
from holocrit.errors import KernelError


@pytest.mark.parametrize("N", [1, 2, 3, 7])
def test_su2_jets_at_origin(N):
    j = ker.kernel_jets(ker.SU2(N), 0)
    assert j.entry((0,), (0,)) == 1
    assert j.entry((1,), (1,)) == N
    assert j.entry((2,), (2,)) == 2 * N * (N - 1)
    for a, b in [((1,), (0,)), ((2,), (0,)), ((1,), (2,)), ((2,), (1,))]:
        assert j.entry(a, b) == 0


def test_constant_kernel():
    fb = ker.FiniteBasis((ker.PolynomialBasisFunction.univariate([1.0]),))
    j = ker.kernel_jets(fb, 0.3)
    expect = np.zeros((3, 3))
    expect[0, 0] = 1
    assert np.array_equal(j.gram, expect)


@pytest.mark.parametrize("N", [2, 3])
def test_fs2_fourth_order_jets(N):
    j = ker.kernel_jets(ker.FSProjective(2, N), [0, 0])
    idx = j.indices
    e = [np.array(a) for a in [(1, 0), (0, 1)]]
    for jj in range(2):
        for q in range(2):
            for jp in range(2):
                for qp in range(2):
                    a = tuple(e[jj] + e[q])
                    b = tuple(e[jp] + e[qp])
                    d = lambda x, y: float(x == y)
                    expect = N * (N - 1) * (d(jj, jp) * d(q, qp) + d(jj, qp) * d(q, jp))
                    assert j.gram[idx.index(a), idx.index(b)] == pytest.approx(expect)


@pytest.mark.parametrize("spec,z0", [(ker.SU2(4), 0.4 - 0.9j),
                                     (ker.FSProjective(2, 3), [0.2 + 0.1j, -0.5j])])
def test_hermitian_symmetry(spec, z0):
    assert ker.kernel_jets(spec, z0).hermitian_defect() <= 1e-12


def test_fd_check_su2_origin():
    assert ker.fd_jet_check(ker.SU2(5), 0, 1e-4) < 1e-6


def test_fd_check_su2_off_origin():
    assert ker.fd_jet_check(ker.SU2(3), 0.7 + 0.2j, 1e-4) < 1e-6


def test_fd_check_polynomial_basis():
    fb = ker.FiniteBasis(tuple(ker.PolynomialBasisFunction.univariate([0] * k + [1])
                               for k in range(3)))
    assert ker.fd_jet_check(fb, 0, 1e-4) < 1e-8


def test_fd_check_cp2():
    assert ker.fd_jet_check(ker.FSProjective(2, 3), [0.1, 0.2j], 1e-4) < 1e-6


def test_fd_check_step_range():
    with pytest.raises(ValueError):
        ker.fd_jet_check(ker.SU2(2), 0, 1e-1)


def test_monomial_basis_reproduces_su2():
    z0 = 0.3 + 0.1j
    a = ker.kernel_jets(ker.monomial_basis(4), z0).gram
    b = ker.kernel_jets(ker.SU2(4), z0).gram
    assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_callable_basis_fallback():
    z0 = 0.3 + 0.1j
    funcs = tuple(ker.CallableBasisFunction(
        lambda z, k=k: np.sqrt(comb(4, k)) * z[..., 0] ** k) for k in range(5))
    a = ker.kernel_jets(ker.FiniteBasis(funcs), z0).gram
    b = ker.kernel_jets(ker.SU2(4), z0).gram
    assert np.abs(a - b).max() <= 1e-6 * np.abs(b).max()


def test_oracle_failure_names_basis_index():
    class Broken:
        dimension = 1

        def derivatives(self, z0):
            raise ZeroDivisionError("boom")

    fb = ker.FiniteBasis((ker.PolynomialBasisFunction.univariate([1.0]), Broken()))
    with pytest.raises(KernelError, match="basis function 1"):
        ker.kernel_jets(fb, 0)


def test_scaling_multiplies_every_entry():
    j = ker.kernel_jets(ker.SU2(3), 0.2)
    assert np.allclose(j.scaled(2.5).gram, 2.5 * j.gram)


def test_jet_rank_diagnostic():
    assert ker.kernel_jets(ker.SU2(2), 0.3).spans_2jets
    assert ker.kernel_jets(ker.SU2(1), 0.3).jet_rank() == 2
    assert not ker.kernel_jets(ker.SU2(1), 0.3).spans_2jets


def test_gauge_transform_matches_gauged_basis():
    # contour-difference jets of the gauged functions exp(-g) f_k
    N, z0 = 3, 0.6 - 0.2j
    g = geo.fubini_study(1, N, z0)
    gauge = geo.adapt_frame(g)
    jets = ker.gauge_kernel_jets(ker.kernel_jets(ker.SU2(N), z0), gauge)
    funcs = tuple(ker.CallableBasisFunction(
        lambda z, k=k: np.sqrt(comb(N, k)) * z[..., 0] ** k * np.exp(-gauge(z)))
        for k in range(N + 1))
    direct = ker.kernel_jets(ker.FiniteBasis(funcs), z0).gram
    assert np.abs(jets.gram - direct).max() <= 1e-6 * np.abs(direct).max()
