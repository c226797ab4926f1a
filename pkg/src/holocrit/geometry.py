"""Local geometry of a Hermitian line bundle in one coordinate chart.

The metric enters only through the local potential ``K = -log|e_L|_h^2``.
Its jets ``d^a_z d^b_zbar K`` at the base point are stored in a dict keyed by
``(alpha, beta)`` exponent tuples, ``|alpha| + |beta| <= 4``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, Mapping, Sequence, Tuple

import numpy as np

from . import _series as ser
from .errors import CurvatureError, StructuralError

JetTable = Mapping[Tuple[ser.MultiIndex, ser.MultiIndex], complex]

MAX_POTENTIAL_ORDER = 4
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class ChartGeometry:
    """Potential jets at ``point`` together with a reference volume form.

    ``volume_density`` is the density of the chosen volume form ``dV`` with
    respect to Lebesgue measure ``dz`` at ``point``; densities per ``dV`` are
    densities per ``dz`` divided by it.
    """

    dimension: int
    point: Tuple[complex, ...]
    jets: Dict[Tuple[ser.MultiIndex, ser.MultiIndex], complex] = field(repr=False)
    volume_density: float = 1.0

    def __post_init__(self):
        if len(self.point) != self.dimension:
            raise StructuralError(
                f"point has {len(self.point)} coordinates, expected {self.dimension}")

    @property
    def curvature(self) -> np.ndarray:
        return curvature_at(self.jets, self.dimension)

    @property
    def r(self) -> float:
        """Ratio ``(i/2) Theta_h / dV``; only meaningful in dimension one."""
        if self.dimension != 1:
            raise StructuralError("r is defined only for dimension one")
        return float(self.curvature[0, 0].real) / self.volume_density

    def pure_jet(self, alpha: ser.MultiIndex) -> complex:
        return self.jets.get((alpha, ser.zero(self.dimension)), 0j)

    def with_jets(self, jets) -> "ChartGeometry":
        return ChartGeometry(self.dimension, self.point, dict(jets), self.volume_density)


def curvature_at(jets: JetTable, m: int) -> np.ndarray:
    """Curvature matrix ``Theta_jq = d^2 K / dz_j dzbar_q`` from a jet table."""
    theta = np.empty((m, m), dtype=complex)
    for j in range(m):
        for q in range(m):
            key = (ser.unit(m, j), ser.unit(m, q))
            if key not in jets:
                raise StructuralError(f"potential jet {key} missing; need order (1,1)")
            theta[j, q] = jets[key]
    return theta


def _jets_from_series(series: ser.Series, m: int, max_order: int = MAX_POTENTIAL_ORDER):
    out = {}
    for a in ser.all_indices(m, max_order):
        for b in ser.all_indices(m, max_order - sum(a)):
            out[(a, b)] = ser.derivative(series, a, b)
    return out


def _point_tuple(point, m: int) -> Tuple[complex, ...]:
    pt = np.atleast_1d(np.asarray(point, dtype=complex))
    if pt.size == 1 and m > 1:
        pt = np.full(m, pt[0])
    return tuple(complex(x) for x in pt)


def fubini_study(m: int, degree: float, point=0.0) -> ChartGeometry:
    """``K = N log(1 + |z|^2)``: the metric ``h^N`` on ``O(N) -> CP^m`` in the affine chart.

    The volume form is ``omega_FS^m / m!`` so that ``r = N`` when ``m = 1``.
    """
    p = _point_tuple(point, m)
    keep = ser.keep_total(MAX_POTENTIAL_ORDER)
    c = 1.0 + sum(abs(x) ** 2 for x in p)
    t: ser.Series = {}
    for j in range(m):
        e, z0 = ser.unit(m, j), ser.zero(m)
        t[(e, z0)] = np.conj(p[j])
        t[(z0, e)] = p[j]
        t[(e, e)] = 1.0
    series = ser.scaled(ser.logarithm(c, t, m, keep), degree)
    return ChartGeometry(m, p, _jets_from_series(series, m), c ** (-(m + 1)))


def quadratic(weights: Sequence[float], point=0.0) -> ChartGeometry:
    """``K = sum_j w_j |z_j|^2``; flat when all weights vanish."""
    w = [float(x) for x in weights]
    m = len(w)
    p = _point_tuple(point, m)
    series: ser.Series = {}
    z0 = ser.zero(m)
    for j in range(m):
        e = ser.unit(m, j)
        series = ser.add(series, {(z0, z0): abs(p[j]) ** 2, (e, z0): np.conj(p[j]),
                                  (z0, e): p[j], (e, e): 1.0}, w[j])
    return ChartGeometry(m, p, _jets_from_series(series, m))


def flat(m: int, point=0.0) -> ChartGeometry:
    return quadratic([0.0] * m, point)


# -- finite-difference path -------------------------------------------------

# second-order central stencils for d^e/dx^e: (offsets in units of h, weights)
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def fd_step(step: float, order: int) -> float:
    """Step used for a derivative of total ``order``.

    Orders above two use ``step**(2/order)`` so the roundoff budget stays at
    the order-two level ``eps / step**2``.
    """
    if order <= 2:
        return step
    return step ** (2.0 / order)


def _real_partial(func, x0: np.ndarray, exps: Tuple[int, ...], h: float) -> float:
    stencils = [_STENCILS[e] for e in exps]
    total = 0.0
    for combo in product(*[range(len(s[0])) for s in stencils]):
        offs = np.array([stencils[d][0][i] for d, i in enumerate(combo)], dtype=float)
        wt = np.prod([stencils[d][1][i] for d, i in enumerate(combo)])
        total += wt * func(x0 + h * offs)
    return total / h ** sum(exps)


def _richardson_partial(func, x0, exps, step) -> float:
    h = fd_step(step, sum(exps))
    coarse = _real_partial(func, x0, exps, h)
    fine = _real_partial(func, x0, exps, h / 2)
    return (4.0 * fine - coarse) / 3.0


def _wirtinger_expansion(alpha, beta, m: int) -> Dict[Tuple[int, ...], complex]:
    """Expand ``d^alpha_z d^beta_zbar`` into real partials over ``(x_1..x_m, y_1..y_m)``."""
    op = {(0,) * (2 * m): 1.0 + 0j}
    factors = []
    for j in range(m):
        factors += [(j, -1j)] * alpha[j] + [(j, 1j)] * beta[j]
    for j, sy in factors:
        new: Dict[Tuple[int, ...], complex] = {}
        for key, c in op.items():
            kx = list(key)
            kx[j] += 1
            ky = list(key)
            ky[m + j] += 1
            new[tuple(kx)] = new.get(tuple(kx), 0j) + 0.5 * c
            new[tuple(ky)] = new.get(tuple(ky), 0j) + 0.5 * sy * c
        op = new
    return op


def potential_jets_fd(potential: Callable[[np.ndarray], float], point, m: int,
                      step: float = 1e-4, max_order: int = MAX_POTENTIAL_ORDER):
    """Jets of a user-supplied real potential by central differences.

    ``potential`` takes a complex array of shape ``(m,)``.  One Richardson
    extrapolation (``h`` and ``h/2``) is applied to every real partial.
    """
    p = np.asarray(_point_tuple(point, m))
    x0 = np.concatenate([p.real, p.imag])

    def real_func(x):
        return float(potential(x[:m] + 1j * x[m:]))

    cache: Dict[Tuple[int, ...], float] = {}
    jets = {}
    for a in ser.all_indices(m, max_order):
        for b in ser.all_indices(m, max_order - sum(a)):
            val = 0j
            for key, c in _wirtinger_expansion(a, b, m).items():
                if key not in cache:
                    cache[key] = _richardson_partial(real_func, x0, key, step)
                val += c * cache[key]
            jets[(a, b)] = val
    return jets


def from_potential(potential: Callable[[np.ndarray], float], m: int, point=0.0,
                   step: float = 1e-4, volume_density: float = 1.0) -> ChartGeometry:
    p = _point_tuple(point, m)
    return ChartGeometry(m, p, potential_jets_fd(potential, p, m, step), volume_density)


# -- frames and coordinates ---------------------------------------------------

@dataclass(frozen=True)
class FrameGauge:
    """Holomorphic gauge ``g`` (degree <= 2, ``g(z0) = 0``) with ``K' = K - 2 Re g``.

    The new frame is ``e' = exp(g) e_L``, so local section functions transform
    as ``f' = exp(-g) f``.  ``coefficients`` holds Taylor coefficients of
    ``g`` in powers of ``z - z0``.
    """

    point: Tuple[complex, ...]
    coefficients: Dict[ser.MultiIndex, complex]
    transformed: ChartGeometry

    def __call__(self, z):
        """Evaluate ``g`` at points of shape ``(..., m)``; scalars are accepted when ``m = 1``."""
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        if len(self.point) == 1 and (scalar or z.shape[-1] != 1):
            z = z[..., None]
        u = z - np.asarray(self.point)
        out = sum(c * np.prod(u ** np.asarray(a), axis=-1) for a, c in self.coefficients.items())
        out = np.asarray(out, dtype=complex)
        return complex(out) if out.ndim == 0 or (scalar and out.size == 1) else out

    def gauged_potential(self, potential: Callable[[np.ndarray], float]):
        return lambda z: potential(z) - 2.0 * np.real(self(z))


def adapt_frame(geometry: ChartGeometry) -> FrameGauge:
    """Gauge that kills the pure holomorphic 1- and 2-jets of ``K`` at the base point."""
    m = geometry.dimension
    z0 = ser.zero(m)
    coeffs = {}
    for a in ser.all_indices(m, 2):
        if sum(a) == 0:
            continue
        coeffs[a] = geometry.pure_jet(a) / ser.multi_factorial(a)
    jets = dict(geometry.jets)
    for a, c in coeffs.items():
        # d^a g = a! * coefficient; K' = K - g - conj(g)
        jets[(a, z0)] = jets.get((a, z0), 0j) - c * ser.multi_factorial(a)
        jets[(z0, a)] = jets.get((z0, a), 0j) - np.conj(c) * ser.multi_factorial(a)
    return FrameGauge(geometry.point, coeffs, geometry.with_jets(jets))


def is_adapted(geometry: ChartGeometry, tol: float = 1e-12) -> bool:
    m = geometry.dimension
    scale = 1.0 + abs(geometry.curvature).max()
    return all(abs(geometry.pure_jet(a)) <= tol * scale
               for a in ser.all_indices(m, 2) if sum(a) > 0)


@dataclass(frozen=True)
class CoordinateNormalization:
    """Linear map ``L`` with ``L^* Theta L = I``.

    New coordinates ``zeta`` are related by ``z - z0 = conj(L) zeta``; then the
    curvature matrix in ``zeta`` is the identity and ``dz = jacobian_factor dzeta``.
    """

    linear_map: np.ndarray
    jacobian_factor: float

    @property
    def coordinate_matrix(self) -> np.ndarray:
        return np.conj(self.linear_map)


def normalize_coordinates(theta) -> CoordinateNormalization:
    theta = np.atleast_2d(np.asarray(theta, dtype=complex))
    m = theta.shape[0]
    herm = 0.5 * (theta + theta.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    norm = max(np.abs(evals).max(), 0.0)
    if evals.min() <= 0:
        raise CurvatureError("curvature not definite")
    if np.prod(evals) < DEGENERACY_TOL * norm ** m:
        raise CurvatureError("curvature numerically degenerate")
    lmap = (evecs * (1.0 / np.sqrt(evals))) @ evecs.conj().T
    return CoordinateNormalization(lmap, float(abs(np.linalg.det(lmap)) ** 2))
