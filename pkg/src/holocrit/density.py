"""Expected densities of critical points.

Monte Carlo estimators sample ``(H', x)`` from the conditional Gaussian
``N_C(0, Lambda)`` and average the Kac-Rice Jacobian; the per-point density
is ``pi^{-m} / det A`` times that expectation.  In dimension one the
expectation has a closed form in terms of the eigenvalues of
``Lambda Q_r``, ``Q_r = diag(1, -r^2)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np

from . import _core
from .errors import ConfigurationError, SpanningError, StructuralError
from .geometry import ChartGeometry
from .jpd import check_lambda, compute_lambda, assemble_abc, normalized_jpd
from .kernels import KernelJets

N_BATCHES = 100
METHODS = ("exact1d", "mcNormalized", "mcGeneralTheta", "mcMorse")


@dataclass(frozen=True)
class DensityResult:
    value: float
    standard_error: float
    method: str
    sample_count: int
    measure: str = "dV"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def converted(self, factor: float, measure: str) -> "DensityResult":
        """Same result against another volume form, ``value * factor``."""
        return DensityResult(self.value * factor, self.standard_error * factor,
                             self.method, self.sample_count, measure)

    def as_dict(self) -> dict:
        return {"value": self.value, "standardError": self.standard_error,
                "method": self.method, "sampleCount": self.sample_count,
                "measure": self.measure}


@dataclass(frozen=True)
class IndexDensities:
    """Densities split by index; ``by_morse`` maps Morse index ``q`` to a result."""

    by_morse: Dict[int, DensityResult]
    total: DensityResult
    k_plus: Optional[float] = None
    k_minus: Optional[float] = None

    @property
    def k_index(self) -> Optional[float]:
        if self.k_plus is None:
            return None
        return self.k_plus - self.k_minus


# -- dimension one, closed form ---------------------------------------------

def eigen_lambda_q(lam, r: float) -> Tuple[float, float]:
    """Eigenvalues ``(mu1 > 0, mu2 < 0)`` of ``Lambda diag(1, -r^2)``."""
    lam = np.asarray(lam, dtype=complex)
    if lam.shape != (2, 2):
        raise StructuralError("eigen_lambda_q needs a 2x2 matrix")
    if r == 0:
        raise ValueError("r must be nonzero")
    r2 = float(r) ** 2
    tr = lam[0, 0].real - r2 * lam[1, 1].real
    det = -r2 * (lam[0, 0] * lam[1, 1] - lam[0, 1] * lam[1, 0]).real
    if det >= 0:
        raise SpanningError("Lambda is not positive definite")
    mu1 = 0.5 * tr + np.sqrt(0.25 * tr * tr - det) if tr >= 0 else None
    if mu1 is None:
        mu2 = 0.5 * tr - np.sqrt(0.25 * tr * tr - det)
        mu1 = det / mu2
    else:
        mu2 = det / mu1
    assert mu1 > 0 > mu2
    return float(mu1), float(mu2)


def _check_a(A) -> float:
    a = float(np.real(np.asarray(A).reshape(-1)[0]))
    if not a > 0:
        raise ValueError("A must be positive")
    return a


def density_dim1_exact(A, lam, r: float) -> DensityResult:
    """``(mu1^2 + mu2^2) / (pi A (|mu1| + |mu2|))``.

    ``A``, ``Lambda`` and ``r`` must refer to the same coordinates; the
    result is a density against the volume form that makes ``r`` the
    curvature ratio (Lebesgue measure when ``r`` is the curvature itself).
    """
    a = _check_a(A)
    mu1, mu2 = eigen_lambda_q(lam, r)
    val = (mu1 ** 2 + mu2 ** 2) / (np.pi * a * (abs(mu1) + abs(mu2)))
    return DensityResult(float(val), 0.0, "exact1d", 0)


def index_densities_dim1(A, lam, r: float) -> IndexDensities:
    a = _check_a(A)
    mu1, mu2 = eigen_lambda_q(lam, r)
    scale = np.pi * a * (abs(mu1) + abs(mu2))
    kp, km = mu1 ** 2 / scale, mu2 ** 2 / scale
    total = DensityResult(float(kp + km), 0.0, "exact1d", 0)
    return IndexDensities({1: DensityResult(float(kp), 0.0, "exact1d", 0),
                           2: DensityResult(float(km), 0.0, "exact1d", 0)},
                          total, float(kp), float(km))


def exact_density_from_jets(jets: KernelJets, geometry: ChartGeometry) -> DensityResult:
    """Closed-form density at the jet point, per ``geometry``'s volume form."""
    if geometry.dimension != 1:
        raise StructuralError("closed form is available in dimension one only")
    jpd = assemble_abc(jets, geometry, "general")
    lam = compute_lambda(jpd)
    theta = float(geometry.curvature[0, 0].real)
    res = density_dim1_exact(jpd.A, lam, theta)
    return res.converted(1.0 / geometry.volume_density, "dV")


# -- Monte Carlo --------------------------------------------------------------

def _batch_sizes(samples: int):
    if samples < 2:
        raise ConfigurationError("need at least two samples")
    nb = min(N_BATCHES, samples)
    base, extra = divmod(samples, nb)
    return [base + (1 if b < extra else 0) for b in range(nb)]


def batch_stream(seed: int, batch: int) -> np.random.Generator:
    """Counter-based generator for one batch; independent of worker layout."""
    ss = np.random.SeedSequence(seed, spawn_key=(batch,))
    return np.random.Generator(np.random.Philox(ss))


def complex_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex Gaussians, ``E|c|^2 = 1``."""
    g = rng.standard_normal(tuple(shape) + (2,))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)


def _cholesky(lam: np.ndarray) -> np.ndarray:
    check_lambda(lam)
    try:
        return np.linalg.cholesky(lam)
    except np.linalg.LinAlgError as exc:
        raise SpanningError("Cholesky factorization of Lambda failed") from exc


def _run_batches(lam, m, samples, seed, workers, accumulate):
    chol = _cholesky(np.asarray(lam, dtype=complex))
    sizes = _batch_sizes(samples)

    def one(b):
        xi = complex_normals(batch_stream(seed, b), (sizes[b], chol.shape[0]))
        return np.atleast_1d(accumulate(xi @ chol.T)) / sizes[b]

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(one, range(len(sizes))))
    else:
        means = [one(b) for b in range(len(sizes))]
    return np.array(means)  # (batches, buckets), fixed batch order


def _estimate(batch_means: np.ndarray, scale: float):
    nb = batch_means.shape[0]
    mean = batch_means.mean(axis=0)
    err = batch_means.std(axis=0, ddof=1) / np.sqrt(nb)
    return scale * mean, scale * err


def _prefactor(A, m: int) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape != (m, m):
        raise StructuralError(f"A has shape {A.shape}, expected ({m}, {m})")
    det = float(np.linalg.det(A).real)
    if not det > 0:
        raise SpanningError("2-jet spanning violated at point")
    return np.pi ** (-m) / det


def morse_densities_mc(A, lam, m: int, samples: int = 10 ** 6, seed: int = 0,
                       workers: int = 1, backend: Optional[str] = None) -> IndexDensities:
    """Morse-index split of the normalized-coordinate estimator on one stream.

    The total is defined as the sum of the per-index values, so the
    partition is exact in floating point.
    """
    kern = _core.get_backend(backend)
    scale = _prefactor(A, m)
    bm = _run_batches(lam, m, samples, seed, workers,
                      lambda y: kern.mc_normalized_sums(y, m))
    vals, errs = _estimate(bm, scale)
    by_q = {m + k: DensityResult(float(vals[k]), float(errs[k]), "mcMorse", samples, "dzeta")
            for k in range(m + 1)}
    total_val = sum(by_q[q].value for q in sorted(by_q))
    total_err = float(scale * bm.sum(axis=1).std(ddof=1) / np.sqrt(bm.shape[0]))
    total = DensityResult(total_val, total_err, "mcNormalized", samples, "dzeta")
    kp = km = None
    if m == 1:
        kp, km = by_q[1].value, by_q[2].value
    return IndexDensities(by_q, total, kp, km)


def density_mc_normalized(A, lam, m: int, samples: int = 10 ** 6, seed: int = 0,
                          workers: int = 1, backend: Optional[str] = None) -> DensityResult:
    """``pi^{-m} E|det(H' H'^* - |x|^2 I)| / det A`` in curvature-normalized coordinates.

    The result is a density against the curvature volume form (Lebesgue
    measure in the normalized coordinates).
    """
    return morse_densities_mc(A, lam, m, samples, seed, workers, backend).total


def morse_density_mc(A, lam, m: int, q: int, samples: int = 10 ** 6, seed: int = 0,
                     workers: int = 1, backend: Optional[str] = None) -> DensityResult:
    if not m <= q <= 2 * m:
        raise ValueError(f"Morse index {q} outside [{m}, {2 * m}]")
    return morse_densities_mc(A, lam, m, samples, seed, workers, backend).by_morse[q]


def density_mc_general_theta(A, lam, theta, samples: int = 10 ** 6, seed: int = 0,
                             workers: int = 1, backend: Optional[str] = None) -> DensityResult:
    """``pi^{-m} E|det H^c| / det A`` with the curvature block ``-x Theta``; per Lebesgue ``dz``."""
    theta = np.atleast_2d(np.asarray(theta, dtype=complex))
    m = theta.shape[0]
    kern = _core.get_backend(backend)
    scale = _prefactor(A, m)
    bm = _run_batches(lam, m, samples, seed, workers,
                      lambda y: kern.mc_theta_sum(y, m, theta))
    val, err = _estimate(bm, scale)
    return DensityResult(float(val[0]), float(err[0]), "mcGeneralTheta", samples, "dz")


def mc_density_from_jets(jets: KernelJets, geometry: ChartGeometry, samples: int = 10 ** 6,
                         seed: int = 0, workers: int = 1, backend=None) -> DensityResult:
    """Normalized-coordinate estimate converted to ``geometry``'s volume form."""
    jpd, jac = normalized_jpd(jets, geometry)
    res = density_mc_normalized(jpd.A, compute_lambda(jpd), geometry.dimension,
                                samples, seed, workers, backend)
    return res.converted(jac / geometry.volume_density, "dV")


def theta_density_from_jets(jets: KernelJets, geometry: ChartGeometry, samples: int = 10 ** 6,
                            seed: int = 0, workers: int = 1, backend=None) -> DensityResult:
    """Raw-coordinate estimate with the curvature block, per ``geometry``'s volume form."""
    jpd = assemble_abc(jets, geometry, "general")
    res = density_mc_general_theta(jpd.A, compute_lambda(jpd), geometry.curvature,
                                   samples, seed, workers, backend)
    return res.converted(1.0 / geometry.volume_density, "dV")


# -- exact rational counts --------------------------------------------------

def exact_cp1_numbers(N: int) -> Tuple[Fraction, Fraction, Fraction]:
    """Expected numbers of saddles, maxima and all critical points for ``O(N) -> CP^1``."""
    if N < 1:
        raise ValueError("degree must be at least 1")
    den = 3 * N - 2
    n_plus = Fraction(4 * (N - 1) ** 2, den)
    n_minus = Fraction(N * N, den)
    return n_plus, n_minus, n_plus + n_minus


def cp2_exact_number(N: int) -> Fraction:
    """Expected number of critical points for ``O(N) -> CP^2``."""
    if N < 2:
        raise ValueError("degree must be at least 2")
    num = 59 * N ** 5 - 231 * N ** 4 + 375 * N ** 3 - 310 * N ** 2 + 132 * N - 24
    return Fraction(num, (3 * N - 2) ** 3)


def fs_curvature_volume(m: int, N: int) -> float:
    """Total volume of ``CP^m`` for the curvature form of ``O(N)``: ``(N pi)^m / m!``."""
    from math import factorial
    return (N * np.pi) ** m / factorial(m)
