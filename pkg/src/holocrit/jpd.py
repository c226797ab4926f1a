"""Joint Gaussian law of (gradient, holomorphic Hessian, value) at a point.

For a random section written ``f e_L`` near ``z0`` the Chern-connection
quantities are

    v_j   = f_j - K_j f
    H'_jq = f_jq - K_j f_q - K_q f_j + (K_j K_q - K_jq) f
    x     = f

with ``K_j``, ``K_jq`` the pure holomorphic derivatives of the potential.
All three are linear in the 2-jet of ``f``, so their covariance is
``T G T^*`` with ``G`` the kernel jet table.  In an adapted frame ``T`` is a
coordinate projection.

The ``n = (m^2 + m + 2) / 2`` slots of the ``(H', x)`` vector are the
symmetric pairs ``j <= q`` in lexicographic order followed by ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg as sla

from . import _series as ser
from .errors import SpanningError, StructuralError
from .geometry import ChartGeometry, adapt_frame, is_adapted, normalize_coordinates
from .kernels import KernelJets, gauge_kernel_jets

SPANNING_COND = 1e12
LAMBDA_EIG_RTOL = 1e-12


@dataclass(frozen=True)
class JPDMatrices:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dimension: int

    @property
    def n(self) -> int:
        m = self.dimension
        return (m * m + m + 2) // 2

    @property
    def full(self) -> np.ndarray:
        """Block covariance ``[[A, B], [B^*, C]]``."""
        return np.block([[self.A, self.B], [self.B.conj().T, self.C]])

    def scaled(self, c: float) -> "JPDMatrices":
        return JPDMatrices(c * self.A, c * self.B, c * self.C, self.dimension)

    def as_dict(self) -> dict:
        return {"A": _cjson(self.A), "B": _cjson(self.B), "C": _cjson(self.C)}


def _cjson(mat: np.ndarray):
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.atleast_2d(mat)]


def slot_labels(m: int):
    return [f"H{j + 1}{q + 1}" for j, q in ser.sym_pairs(m)] + ["x"]


def covariant_map(geometry: ChartGeometry) -> np.ndarray:
    """Matrix ``T`` taking the 2-jet of ``f`` to ``(v, H', x)``."""
    m = geometry.dimension
    idx = ser.jet_indices(m)
    col = {a: i for i, a in enumerate(idx)}
    z0 = ser.zero(m)
    pairs = ser.sym_pairs(m)
    k1 = [geometry.jets.get((ser.unit(m, j), z0), 0j) for j in range(m)]
    trans = np.zeros((m + len(pairs) + 1, len(idx)), dtype=complex)
    for j in range(m):
        trans[j, col[ser.unit(m, j)]] = 1.0
        trans[j, col[z0]] = -k1[j]
    for r, (j, q) in enumerate(pairs):
        ej, eq = ser.unit(m, j), ser.unit(m, q)
        kjq = geometry.jets.get((ser.add_idx(ej, eq), z0), 0j)
        row = m + r
        trans[row, col[ser.add_idx(ej, eq)]] += 1.0
        trans[row, col[eq]] -= k1[j]
        trans[row, col[ej]] -= k1[q]
        trans[row, col[z0]] += k1[j] * k1[q] - kjq
    trans[-1, col[z0]] = 1.0
    return trans


def assemble_abc(jets: KernelJets, geometry: ChartGeometry, mode: str = "general") -> JPDMatrices:
    """Covariance blocks of ``v`` and ``(H', x)``.

    Parameters
    ----------
    jets : KernelJets
        Kernel jet table at the base point, in the frame of ``geometry``.
    geometry : ChartGeometry
        Potential jets in the same frame.
    mode : {"adapted", "general"}
        ``adapted`` requires vanishing pure potential jets and reads the
        blocks off the jet table directly; ``general`` applies the
        covariant corrections.
    """
    m = geometry.dimension
    if jets.dimension != m:
        raise StructuralError(
            f"kernel jets have dimension {jets.dimension}, geometry has {m}")
    if not np.allclose(jets.point, geometry.point, rtol=0, atol=1e-12):
        raise StructuralError("kernel jets and geometry are at different points")
    if mode == "adapted":
        if not is_adapted(geometry):
            raise StructuralError("adapted mode needs a frame with vanishing pure potential jets")
        flat = geometry.with_jets({})
        trans = covariant_map(flat)
    elif mode == "general":
        trans = covariant_map(geometry)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    delta = trans @ jets.gram @ trans.conj().T
    delta = 0.5 * (delta + delta.conj().T)
    return JPDMatrices(delta[:m, :m], delta[:m, m:], delta[m:, m:], m)


def assemble_adapted(jets: KernelJets, geometry: ChartGeometry) -> JPDMatrices:
    """Gauge to an adapted frame first, then read off the blocks."""
    gauge = adapt_frame(geometry)
    return assemble_abc(gauge_kernel_jets(jets, gauge), gauge.transformed, mode="adapted")


def compute_lambda(jpd: JPDMatrices) -> np.ndarray:
    """Schur complement ``C - B^* A^{-1} B`` via a Hermitian solve."""
    a = jpd.A
    ev = np.linalg.eigvalsh(a)
    if ev.min() <= 0 or ev.max() / ev.min() > SPANNING_COND:
        raise SpanningError("2-jet spanning violated at point")
    x = sla.solve(a, jpd.B, assume_a="her")
    lam = jpd.C - jpd.B.conj().T @ x
    return 0.5 * (lam + lam.conj().T)


def check_lambda(lam: np.ndarray) -> None:
    ev = np.linalg.eigvalsh(lam)
    if ev.min() < LAMBDA_EIG_RTOL * abs(ev).max():
        raise SpanningError("2-jet spanning violated at point: conditional covariance degenerate")


def joint_density_at_zero(A, lam, v) -> float:
    """Density of ``(H', x)`` jointly with ``v = 0`` evaluated at ``(H', x) = v``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    lam = np.atleast_2d(np.asarray(lam, dtype=complex))
    m = A.shape[0]
    try:
        chol = np.linalg.cholesky(lam)
    except np.linalg.LinAlgError as exc:
        raise SpanningError("conditional covariance is not positive definite") from exc
    v = np.asarray(v, dtype=complex).reshape(-1)
    y = sla.solve_triangular(chol, v, lower=True)
    quad = float(np.vdot(y, y).real)
    det_lam = float(np.prod(np.abs(np.diag(chol))) ** 2)
    det_a = float(np.linalg.det(A).real)
    return float(np.exp(-quad) / (np.pi ** comb(m + 2, 2) * det_a * det_lam))


def slot_transform(M: np.ndarray) -> np.ndarray:
    """Linear action ``H' -> M^T H' M`` on the packed ``(H', x)`` slots."""
    M = np.atleast_2d(M)
    m = M.shape[0]
    pairs = ser.sym_pairs(m)
    n = len(pairs) + 1
    P = np.zeros((n, n), dtype=complex)
    for r, (a, b) in enumerate(pairs):
        for s, (j, q) in enumerate(pairs):
            if j == q:
                P[r, s] = M[j, a] * M[j, b]
            else:
                P[r, s] = M[j, a] * M[q, b] + M[q, a] * M[j, b]
    P[-1, -1] = 1.0
    return P


def transform_coordinates(jpd: JPDMatrices, M: np.ndarray) -> JPDMatrices:
    """Blocks in coordinates ``zeta`` with ``z - z0 = M zeta``."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    P = slot_transform(M)
    mt = M.T
    return JPDMatrices(mt @ jpd.A @ mt.conj().T, mt @ jpd.B @ P.conj().T,
                       P @ jpd.C @ P.conj().T, jpd.dimension)


def normalized_jpd(jets: KernelJets, geometry: ChartGeometry):
    """Blocks in curvature-normalized coordinates, plus the Jacobian ``det Theta``.

    A density per ``dzeta`` converts to one per ``dz`` by multiplying by the
    returned factor.
    """
    norm = normalize_coordinates(geometry.curvature)
    jpd = transform_coordinates(assemble_abc(jets, geometry, "general"), norm.coordinate_matrix)
    return jpd, 1.0 / norm.jacobian_factor
