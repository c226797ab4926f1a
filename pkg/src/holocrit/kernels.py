"""Covariance kernels of Gaussian section ensembles and their diagonal jets.

The jet table of a kernel ``F(z, w)`` at ``z0`` is the Hermitian matrix

    G[a, b] = d^a_z d^b_wbar F(z, w) |_{z = w = z0}

indexed by the holomorphic multi-indices of order <= 2 from
:func:`holocrit._series.jet_indices`.  Since ``F = sum_j f_j(z) conj(f_j(w))``
for an orthonormal basis, ``G = E[J J^*]`` where ``J`` is the 2-jet of a
random section, which is all the downstream covariance assembly needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from . import _series as ser
from .errors import KernelError, StructuralError
from .geometry import FrameGauge, fd_step


# -- kernel specifications --------------------------------------------------

@dataclass(frozen=True)
class FSProjective:
    """Normalized Szego kernel ``(1 + z . conj(w))**N`` of ``O(N) -> CP^m``.

    The ``(N+1)/pi``-type prefactor is dropped; densities do not see it.
    """

    dimension: int
    degree: int

    def evaluate(self, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        return (1.0 + np.sum(z * np.conj(w), axis=-1)) ** self.degree


def SU2(degree: int) -> FSProjective:
    """SU(2) ensemble of degree-``N`` polynomials on ``CP^1``."""
    return FSProjective(1, degree)


class PolynomialBasisFunction:
    """Holomorphic polynomial ``sum_a c_a z^a`` with exact derivative oracle."""

    def __init__(self, coefficients: Mapping[Tuple[int, ...], complex]):
        self.coefficients = {tuple(a): complex(c) for a, c in coefficients.items()}
        dims = {len(a) for a in self.coefficients}
        if len(dims) != 1:
            raise StructuralError("inconsistent exponent lengths in polynomial")
        self.dimension = dims.pop()

    @classmethod
    def univariate(cls, coeffs: Sequence[complex]) -> "PolynomialBasisFunction":
        """From ascending coefficients ``[c0, c1, ...]`` in one variable."""
        return cls({(k,): c for k, c in enumerate(coeffs)})

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1], dtype=complex)
        for a, c in self.coefficients.items():
            out = out + c * np.prod(z ** np.asarray(a), axis=-1)
        return out

    def derivatives(self, z0) -> Dict[Tuple[int, ...], complex]:
        z0 = np.asarray(z0, dtype=complex).reshape(-1)
        out = {}
        for d in ser.jet_indices(self.dimension):
            total = 0j
            for a, c in self.coefficients.items():
                if any(x < y for x, y in zip(a, d)):
                    continue
                fall = 1.0
                for x, y in zip(a, d):
                    for i in range(y):
                        fall *= x - i
                total += c * fall * np.prod(z0 ** (np.asarray(a) - np.asarray(d)))
            out[d] = total
        return out


class CallableBasisFunction:
    """Holomorphic function given only by values; derivatives by contour differences."""

    def __init__(self, func: Callable[[np.ndarray], complex], dimension: int = 1,
                 step: float = 1e-4):
        self.func = func
        self.dimension = dimension
        self.step = step

    def __call__(self, z) -> np.ndarray:
        return np.asarray(self.func(np.asarray(z, dtype=complex)))

    def derivatives(self, z0) -> Dict[Tuple[int, ...], complex]:
        z0 = np.asarray(z0, dtype=complex).reshape(-1)
        m = self.dimension
        out = {}
        for k in range(3):
            radius = fd_step(self.step, max(k, 1))
            coeffs = _torus_coefficients(lambda u: self.func(z0 + u), m, radius, 16 if m == 1 else 8)
            for d in ser.jet_indices(m):
                if sum(d) == k:
                    out[d] = coeffs[tuple(x % coeffs.shape[i] for i, x in enumerate(d))] \
                        * ser.multi_factorial(d) / radius ** k
        return out


def _torus_coefficients(func, nvar: int, radius: float, npts: int) -> np.ndarray:
    """Taylor coefficients times ``radius**|a|`` of a holomorphic ``func`` in ``nvar`` variables."""
    theta = 2 * np.pi * np.arange(npts) / npts
    grids = np.meshgrid(*([radius * np.exp(1j * theta)] * nvar), indexing="ij")
    u = np.stack(grids, axis=-1)
    vals = np.asarray(func(u), dtype=complex)
    return np.fft.fftn(vals) / npts ** nvar


@dataclass(frozen=True)
class FiniteBasis:
    """Ensemble ``f = sum_j c_j f_j`` with iid standard complex ``c_j``."""

    basis: Tuple = field()
    dimension: int = 1

    def __post_init__(self):
        for i, f in enumerate(self.basis):
            if getattr(f, "dimension", self.dimension) != self.dimension:
                raise StructuralError(f"basis function {i} has wrong dimension")

    def evaluate(self, z: np.ndarray, w: np.ndarray) -> np.ndarray:
        out = 0j
        for f in self.basis:
            out = out + f(z) * np.conj(f(w))
        return out


def monomial_basis(degree: int) -> FiniteBasis:
    """Binomially weighted monomials ``sqrt(C(N, j)) z^j``; reproduces the SU(2) kernel."""
    return FiniteBasis(tuple(
        PolynomialBasisFunction.univariate([0] * j + [np.sqrt(comb(degree, j))])
        for j in range(degree + 1)))


# -- jet tables ---------------------------------------------------------------

@dataclass(frozen=True)
class KernelJets:
    dimension: int
    point: Tuple[complex, ...]
    gram: np.ndarray = field(repr=False)

    @property
    def indices(self) -> List[Tuple[int, ...]]:
        return ser.jet_indices(self.dimension)

    def entry(self, alpha, beta) -> complex:
        idx = self.indices
        return complex(self.gram[idx.index(tuple(alpha)), idx.index(tuple(beta))])

    def scaled(self, c: float) -> "KernelJets":
        return KernelJets(self.dimension, self.point, c * self.gram)

    def hermitian_defect(self) -> float:
        g = self.gram
        return float(np.abs(g - g.conj().T).max() / (1.0 + np.abs(g).max()))

    def jet_rank(self, rtol: float = 1e-10) -> int:
        """Numerical rank of the 2-jet map; full rank means 2-jet spanning here."""
        ev = np.linalg.eigvalsh(0.5 * (self.gram + self.gram.conj().T))
        return int(np.sum(ev > rtol * max(ev.max(), 0.0)))

    @property
    def spans_2jets(self) -> bool:
        return self.jet_rank() == len(self.indices)


def _point(z0, m: int) -> Tuple[complex, ...]:
    pt = np.atleast_1d(np.asarray(z0, dtype=complex))
    if pt.size == 1 and m > 1:
        pt = np.full(m, pt[0])
    if pt.size != m:
        raise StructuralError(f"point has {pt.size} coordinates, expected {m}")
    return tuple(complex(x) for x in pt)


def _fs_series(spec: FSProjective, p: Tuple[complex, ...]) -> ser.Series:
    m = spec.dimension
    keep = ser.keep_bidegree(2, 2)
    c = 1.0 + sum(abs(x) ** 2 for x in p)
    t: ser.Series = {}
    z0 = ser.zero(m)
    for j in range(m):
        e = ser.unit(m, j)
        t[(e, z0)] = np.conj(p[j])
        t[(z0, e)] = p[j]
        t[(e, e)] = 1.0
    return ser.binomial_power(c, t, spec.degree, m, keep, kmax=4)


def kernel_jets(spec, z0) -> KernelJets:
    m = spec.dimension
    p = _point(z0, m)
    idx = ser.jet_indices(m)
    if isinstance(spec, FSProjective):
        series = _fs_series(spec, p)
        gram = np.array([[ser.derivative(series, a, b) for b in idx] for a in idx])
        return KernelJets(m, p, gram)
    if isinstance(spec, FiniteBasis):
        gram = np.zeros((len(idx), len(idx)), dtype=complex)
        for i, f in enumerate(spec.basis):
            try:
                d = f.derivatives(np.asarray(p))
                vec = np.array([d[a] for a in idx], dtype=complex)
            except Exception as exc:  # noqa: BLE001 - re-raised with context
                raise KernelError(f"derivative oracle failed for basis function {i}: {exc}") from exc
            if not np.all(np.isfinite(vec)):
                raise KernelError(f"non-finite derivatives from basis function {i}")
            gram += np.outer(vec, vec.conj())
        return KernelJets(m, p, gram)
    raise StructuralError(f"unsupported kernel spec {type(spec).__name__}")


def fd_jet_check(spec, z0, step: float = 1e-4) -> float:
    """Max of ``|analytic - contour difference| / (1 + |analytic|)`` over the jet table.

    Derivatives are recovered from kernel values on a torus of circles around
    ``(z0, z0)`` (trapezoidal Cauchy rule, the complex analogue of central
    differences).  Entries of total order ``k`` use radius ``fd_step(step, k)``.
    """
    if not 1e-6 <= step <= 1e-2:
        raise ValueError("step must lie in [1e-6, 1e-2]")
    m = spec.dimension
    p = np.asarray(_point(z0, m))
    jets = kernel_jets(spec, p)
    idx = jets.indices
    npts = 16 if m == 1 else 8
    worst = 0.0
    by_radius: Dict[float, np.ndarray] = {}
    for i, a in enumerate(idx):
        for j, b in enumerate(idx):
            k = sum(a) + sum(b)
            radius = fd_step(step, max(k, 1))
            if radius not in by_radius:
                def func(u, _m=m):
                    return spec.evaluate(p + u[..., :_m], p + np.conj(u[..., _m:]))
                by_radius[radius] = _torus_coefficients(func, 2 * m, radius, npts)
            coeffs = by_radius[radius]
            # u-variables carry alpha, the conjugated w-variables carry beta
            key = tuple(x % npts for x in (tuple(a) + tuple(b)))
            approx = coeffs[key] * ser.multi_factorial(a) * ser.multi_factorial(b) / radius ** k
            exact = jets.gram[i, j]
            worst = max(worst, abs(exact - approx) / (1.0 + abs(exact)))
    return worst


def gauge_kernel_jets(jets: KernelJets, gauge: FrameGauge) -> KernelJets:
    """Jet table in the gauged frame, where ``f' = exp(-g) f``."""
    m = jets.dimension
    idx = jets.indices
    keep = ser.keep_bidegree(2, 0)
    z0 = ser.zero(m)
    minus_g = {(a, z0): -c for a, c in gauge.coefficients.items()}
    weight = ser.exponential(minus_g, m, keep, kmax=2)
    trans = np.zeros((len(idx), len(idx)), dtype=complex)
    for i, a in enumerate(idx):
        for j, g in enumerate(idx):
            if any(x < y for x, y in zip(a, g)):
                continue
            rest = tuple(x - y for x, y in zip(a, g))
            binom = np.prod([comb(x, y) for x, y in zip(a, g)])
            trans[i, j] = binom * ser.derivative(weight, rest, z0)
    return KernelJets(m, jets.point, trans @ jets.gram @ trans.conj().T)
