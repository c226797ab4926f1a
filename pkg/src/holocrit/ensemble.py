"""Random SU(2) sections on CP^1 and their critical points.

A section of ``O(N)`` is ``f(z) = sum_j c_j sqrt(C(N, j)) z^j`` in the affine
chart, with Hermitian metric ``|e|^2 = (1 + |z|^2)^-N``.  Its Chern gradient
vanishes where

    G(z) = f'(z) (1 + |z|^2) - N conj(z) f(z) = 0.

Writing ``w`` for ``conj(z)`` makes ``G`` bilinear, ``w`` can be solved for
from ``G = 0`` and substituted into the conjugate equation, leaving a single
polynomial in ``z``.  Its roots seed a Newton polish of the real system.
The same is done in the chart at infinity and the two lists are merged.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from . import _core
from .density import complex_normals, exact_cp1_numbers

CHART_ZERO = 0
CHART_INF = "inf"

# loose pre-filter on eliminant roots: |w(z) - conj(z)| below this (relative)
# marks a genuine candidate whose polish failure counts as a solver failure
CANDIDATE_TOL = 1e-3
MAX_CHART_RADIUS = 1.2
ACCEPT_RADIUS = 1.25


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-10
    dedupe: float = 1e-8
    singular: float = 1e-10
    degeneracy: float = 1e-10
    max_newton: int = 50

    def __post_init__(self):
        for name in ("residual", "dedupe", "singular", "degeneracy"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class SectionSample:
    degree: int
    coefficients: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.sqrt([comb(self.degree, j) for j in range(self.degree + 1)])

    def chart_coefficients(self, chart=CHART_ZERO) -> np.ndarray:
        """Ascending coefficients of the local function in ``chart``."""
        a = np.asarray(self.coefficients, dtype=complex) * self.weights
        return a if chart == CHART_ZERO else a[::-1].copy()

    def inverted(self) -> "SectionSample":
        """The same section written in the coordinate ``1/z``."""
        return SectionSample(self.degree, np.asarray(self.coefficients)[::-1].copy())

    def scaled(self, c: complex) -> "SectionSample":
        return SectionSample(self.degree, c * np.asarray(self.coefficients))


@dataclass(frozen=True)
class CriticalPointRecord:
    chart: object
    z: complex
    residual: float
    f_value: complex
    holo_hessian: complex
    top_index: int
    morse_index: int
    degenerate: bool = False

    @property
    def sphere_point(self) -> complex:
        """Coordinate in the affine chart (``inf`` for the point at infinity)."""
        if self.chart == CHART_ZERO:
            return self.z
        return complex(np.inf) if self.z == 0 else 1.0 / self.z


@dataclass
class SolveOutcome:
    records: List[CriticalPointRecord]
    solver_failures: int = 0
    # the clearing equations share a factor, so zeros need not be isolated
    nonisolated: bool = False

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    @property
    def degenerate(self) -> int:
        return sum(r.degenerate for r in self.records)

    @property
    def n_plus(self) -> int:
        return sum(r.top_index == 1 for r in self.records)

    @property
    def n_minus(self) -> int:
        return sum(r.top_index == -1 for r in self.records)


def trial_stream(seed: int, trial: int, attempt: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(trial, attempt))
    return np.random.Generator(np.random.Philox(ss))


def sample_su2_section(N: int, rng: np.random.Generator) -> SectionSample:
    if N < 1:
        raise ValueError("degree must be at least 1")
    return SectionSample(N, complex_normals(rng, (N + 1,)))


def gradient_residual(sample: SectionSample, z: complex, chart=CHART_ZERO) -> complex:
    """``v(z) = f'(z) - f(z) N conj(z) / (1 + |z|^2)`` in ``chart``."""
    a = sample.chart_coefficients(chart)
    f = P.polyval(z, a)
    d1 = P.polyval(z, P.polyder(a))
    return complex(d1 - f * sample.degree * np.conj(z) / (1.0 + abs(z) ** 2))


def eliminant(a: np.ndarray) -> np.ndarray:
    """Univariate polynomial whose roots contain every critical point of the chart.

    With ``P = f'`` and ``Q = N f - z f'``, the bilinear equation gives
    ``w = P / Q``; clearing ``Q^(N+1)`` in the conjugate equation yields

        sum_j conj(a_j) [ j P^(j-1) Q^(N-j+1) + (j - N) z P^j Q^(N-j) ].
    """
    a = np.asarray(a, dtype=complex)
    N = len(a) - 1
    j = np.arange(N + 1)
    p1 = P.polyder(a) if N > 0 else np.zeros(1, dtype=complex)
    q = (N - j) * a
    pw_p = [np.ones(1, dtype=complex)]
    pw_q = [np.ones(1, dtype=complex)]
    for _ in range(N + 1):
        pw_p.append(np.convolve(pw_p[-1], p1))
        pw_q.append(np.convolve(pw_q[-1], q))
    out = np.zeros(N * N + 2, dtype=complex)

    def acc(poly, coef, shift=0):
        out[shift:shift + len(poly)] += coef * poly

    for jj in range(N + 1):
        ca = np.conj(a[jj])
        if jj > 0:
            acc(np.convolve(pw_p[jj - 1], pw_q[N - jj + 1]), ca * jj)
        if jj < N:
            acc(np.convolve(pw_p[jj], pw_q[N - jj]), ca * (jj - N), shift=1)
    return out


def _chordal(z1: complex, z2: complex) -> float:
    if np.isinf(z1) or np.isinf(z2):
        if np.isinf(z1) and np.isinf(z2):
            return 0.0
        w = z2 if np.isinf(z1) else z1
        return 1.0 / np.sqrt(1.0 + abs(w) ** 2)
    return abs(z1 - z2) / np.sqrt((1.0 + abs(z1) ** 2) * (1.0 + abs(z2) ** 2))


def _local_hessian(a: np.ndarray, N: int, z: complex):
    """Covariant holomorphic Hessian ``H'``, value and curvature at a critical point.

    At ``v = 0`` the covariant second derivative equals the plain second
    derivative in a frame adapted at ``z`` (pure potential jets of order <= 2
    removed by a holomorphic gauge with ``g(z) = 0``).
    """
    f = P.polyval(z, a)
    d2 = P.polyval(z, P.polyder(a, 2)) if N >= 2 else 0j
    s = 1.0 + abs(z) ** 2
    kz = N * np.conj(z) / s
    kzz = -N * np.conj(z) ** 2 / s ** 2
    theta = N / s ** 2
    return d2 - f * kz * kz - f * kzz, f, theta


def classify_critical_point(sample: SectionSample, record: CriticalPointRecord,
                            tol: Tolerances = Tolerances()):
    """Topological and Morse index of a located point.

    Returns
    -------
    top_index : int
        Sign of ``det H^c = |H'|^2 - |f Theta|^2``.
    morse_index : int
        ``1 + #{|S|^2 < 1}`` with ``S = H' / (f Theta)`` the normalized Hessian.
    degenerate : bool
    """
    a = sample.chart_coefficients(record.chart)
    hess, f, theta = _local_hessian(a, sample.degree, record.z)
    h2 = abs(hess) ** 2
    m2 = abs(f * theta) ** 2
    det = h2 - m2
    degenerate = abs(det) <= tol.degeneracy * (h2 + m2)
    top = 1 if det > 0 else -1
    s = hess / (f * theta)
    morse = 1 + int(abs(s) ** 2 < 1.0)
    if not degenerate and top != (-1) ** (1 + morse):
        raise AssertionError("index rules disagree at a nondegenerate point")
    return top, morse, degenerate


def _chart_points(sample, chart, tol, kern):
    a = sample.chart_coefficients(chart)
    N = sample.degree
    elim = eliminant(a)
    scale = np.abs(elim).max()
    if scale <= 1e-13 * np.linalg.norm(a) ** (N + 2):
        return [], 0, True
    elim = np.trim_zeros(elim / scale, "b")
    if len(elim) < 2:
        return [], 0, False
    roots = P.polyroots(elim)
    roots = roots[np.abs(roots) <= MAX_CHART_RADIUS]
    if roots.size == 0:
        return [], 0, False
    p1 = P.polyval(roots, P.polyder(a))
    q = N * P.polyval(roots, a) - roots * p1
    with np.errstate(divide="ignore", invalid="ignore"):
        w = p1 / q
    genuine = np.abs(w - np.conj(roots)) < CANDIDATE_TOL * (1.0 + np.abs(roots) ** 2)
    z, conv, res = kern.polish_cp1(a, N, roots, tol.max_newton)
    cnorm = 1.0 + np.linalg.norm(sample.coefficients)
    ok = conv & (res <= tol.residual * cnorm) & (np.abs(z) <= ACCEPT_RADIUS)
    failures = int(np.sum(genuine & ~conv))
    return [(chart, complex(zz), float(rr)) for zz, rr, k in zip(z, res, ok) if k], failures, False


def find_critical_points_cp1(sample: SectionSample, tol: Tolerances = Tolerances(),
                             swap_charts: bool = False, backend=None) -> SolveOutcome:
    """All critical points of the Chern gradient of ``sample`` on the sphere.

    Parameters
    ----------
    swap_charts : bool
        Solve for the section written in the inverted coordinate and relabel
        the charts; used to check that the result does not depend on the
        choice of affine chart.

    Returns
    -------
    SolveOutcome
        ``nonisolated`` is set when the eliminant vanishes identically; the
        record list is then not a complete description of the critical set.
    """
    if swap_charts:
        out = find_critical_points_cp1(sample.inverted(), tol, False, backend)
        flip = {CHART_ZERO: CHART_INF, CHART_INF: CHART_ZERO}
        return SolveOutcome([replace(r, chart=flip[r.chart]) for r in out.records],
                            out.solver_failures, out.nonisolated)
    kern = _core.get_backend(backend)
    cands, failures, nonisolated = [], 0, False
    for chart in (CHART_ZERO, CHART_INF):
        pts, fails, flat = _chart_points(sample, chart, tol, kern)
        cands += pts
        failures += fails
        nonisolated |= flat
    # best-conditioned representative first
    cands.sort(key=lambda t: abs(t[1]))
    cnorm = np.linalg.norm(sample.coefficients)
    records: List[CriticalPointRecord] = []
    for chart, z, res in cands:
        a = sample.chart_coefficients(chart)
        f = P.polyval(z, a)
        if abs(f) < tol.singular * cnorm:
            continue
        rec = CriticalPointRecord(chart, z, res, complex(f), 0j, 0, 0)
        point = rec.sphere_point
        if any(_chordal(point, r.sphere_point) < tol.dedupe for r in records):
            continue
        top, morse, degenerate = classify_critical_point(sample, rec, tol)
        hess = _local_hessian(a, sample.degree, z)[0]
        records.append(replace(rec, holo_hessian=complex(hess), top_index=top,
                               morse_index=morse, degenerate=degenerate))
    return SolveOutcome(records, failures, nonisolated)


def chern_sum_check(records: Sequence[CriticalPointRecord], N: int) -> bool:
    return sum(r.top_index for r in records) == N - 2


# -- Monte Carlo over trials ------------------------------------------------

@dataclass
class TrialSummary:
    degree: int
    seed: int
    n_plus: np.ndarray
    n_minus: np.ndarray
    chern_sums: np.ndarray
    solver_failures: int = 0
    degenerate_flags: int = 0
    chern_violations: int = 0
    rejected: int = 0
    points: Optional[List[Tuple[int, CriticalPointRecord]]] = field(default=None, repr=False)

    @property
    def trials(self) -> int:
        return len(self.n_plus)

    @property
    def rejection_rate(self) -> float:
        return self.rejected / max(self.trials + self.rejected, 1)

    @property
    def reliable(self) -> bool:
        return self.rejection_rate <= 0.01

    @property
    def n_total(self) -> np.ndarray:
        return self.n_plus + self.n_minus

    @staticmethod
    def _mean_err(x):
        x = np.asarray(x, dtype=float)
        err = x.std(ddof=1) / np.sqrt(len(x)) if len(x) > 1 else float("nan")
        return float(x.mean()), float(err)

    def means(self):
        """``{name: (mean, stderr)}`` for ``nPlus``, ``nMinus`` and ``nTotal``."""
        return {"nPlus": self._mean_err(self.n_plus),
                "nMinus": self._mean_err(self.n_minus),
                "nTotal": self._mean_err(self.n_total)}

    def targets(self) -> dict:
        n_plus, n_minus, n_total = exact_cp1_numbers(self.degree)
        return {"nPlus": n_plus, "nMinus": n_minus, "nTotal": n_total}

    def z_scores(self) -> dict:
        out = {}
        tg = self.targets()
        for k, (mean, err) in self.means().items():
            diff = mean - float(tg[k])
            out[k] = 0.0 if err == 0 and diff == 0 else diff / err if err > 0 else float("inf")
        return out


def _run_trial(N, seed, trial, tol, backend, max_attempts=50):
    rejects = {"failures": 0, "degenerate": 0, "chern": 0, "rejected": 0}
    for attempt in range(max_attempts):
        sample = sample_su2_section(N, trial_stream(seed, trial, attempt))
        out = find_critical_points_cp1(sample, tol, backend=backend)
        bad = out.nonisolated
        if out.solver_failures:
            rejects["failures"] += out.solver_failures
            bad = True
        if out.degenerate:
            rejects["degenerate"] += out.degenerate
            bad = True
        if not bad and not chern_sum_check(out.records, N):
            rejects["chern"] += 1
            bad = True
        if not bad:
            return out, rejects
        rejects["rejected"] += 1
    raise RuntimeError(f"trial {trial}: no acceptable sample in {max_attempts} attempts")


def _run_chunk(args):
    N, seed, trials, tol, backend = args
    return [_run_trial(N, seed, t, tol, backend) for t in trials]


def monte_carlo_counts(N: int, trials: int = 2000, seed: int = 0, workers: int = 1,
                       tol: Tolerances = Tolerances(), backend=None,
                       keep_points: bool = False) -> TrialSummary:
    """Empirical critical-point counts over independent trials.

    Trial ``t`` draws from its own counter-based stream, so the summary does
    not depend on ``workers``.  Rejected samples (solver failure, degenerate
    point or index-sum violation) are redrawn from the next attempt stream.
    """
    if N < 1 or trials < 1:
        raise ValueError("need N >= 1 and trials >= 1")
    idx = list(range(trials))
    if workers and workers > 1:
        chunks = [idx[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(N, seed, c, tol, backend) for c in chunks]))
        results = [None] * trials
        for c, part in zip(chunks, parts):
            for t, r in zip(c, part):
                results[t] = r
    else:
        results = _run_chunk((N, seed, idx, tol, backend))
    n_plus = np.array([r[0].n_plus for r in results])
    n_minus = np.array([r[0].n_minus for r in results])
    chern = np.array([sum(p.top_index for p in r[0].records) for r in results])
    tot = {k: sum(r[1][k] for r in results) for k in results[0][1]}
    points = None
    if keep_points:
        points = [(t, rec) for t, r in enumerate(results) for rec in r[0].records]
    return TrialSummary(N, seed, n_plus, n_minus, chern, tot["failures"], tot["degenerate"],
                        tot["chern"], tot["rejected"], points)


# -- metric perturbation demo --------------------------------------------------

@dataclass(frozen=True)
class MetricDemoResult:
    points: Tuple[complex, ...]
    unconverged: int

    @property
    def count(self) -> int:
        return len(self.points)


def demo_potential_derivatives(p_desc: Sequence[complex], epsilon: float, z):
    """``(phi_z, phi_zz, phi_zzbar)`` for ``phi = -(1-eps)/k log(1+|p|^2) - eps log(1+|z|^2)``."""
    p = np.poly1d(p_desc)
    k = p.order
    a = (1.0 - epsilon) / k
    z = np.asarray(z, dtype=complex)
    pv, d1, d2 = p(z), p.deriv(1)(z), p.deriv(2)(z)
    sp = 1.0 + np.abs(pv) ** 2
    sz = 1.0 + np.abs(z) ** 2
    pb, zb = np.conj(pv), np.conj(z)
    phi_z = -a * d1 * pb / sp - epsilon * zb / sz
    phi_zz = -a * (d2 * pb / sp - (d1 * pb) ** 2 / sp ** 2) + epsilon * zb ** 2 / sz ** 2
    phi_zzb = -a * np.abs(d1) ** 2 / sp ** 2 - epsilon / sz ** 2
    return phi_z, phi_zz, phi_zzb


def perturbed_metric_crit_points(p_desc: Sequence[complex], epsilon: float = 0.01,
                                 grid: int = 41, maxiter: int = 100,
                                 dedupe: float = 1e-7) -> MetricDemoResult:
    """Critical points on ``C`` of the potential of a pulled-back FS metric.

    Parameters
    ----------
    p_desc : sequence
        Polynomial coefficients, highest degree first (``[1, 0, -1]`` is
        ``z^2 - 1``).  Roots must be distinct.
    epsilon : float
        Weight of the FS regularizing term, ``0 < epsilon < 1``.
    grid : int
        Multistart grid is ``grid x grid`` over a box containing the roots.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    p = np.poly1d(p_desc)
    if p.order < 1:
        raise ValueError("polynomial must have degree at least 1")
    roots = np.atleast_1d(p.roots)
    scale = 1.0 + np.abs(roots).max()
    if len(roots) > 1:
        # |p'| at the roots vanishes with the discriminant; eigenvalue roots of a
        # double root split by ~sqrt(eps), so separations alone are unreliable
        dp = np.abs(p.deriv()(roots)).min()
        if dp < 1e-6 * np.abs(p.coeffs).sum() * scale ** (p.order - 1):
            raise ValueError("polynomial roots are not distinct")
    half = 1.5 * scale
    xs = np.linspace(-half, half, grid)
    starts = (xs[:, None] + 1j * xs[None, :]).ravel()
    starts = np.concatenate([starts, roots, np.atleast_1d(p.deriv().roots)])
    z = starts.astype(complex)
    conv = np.zeros(z.shape, dtype=bool)
    # far-field starts may run off to infinity; they are counted as unconverged
    with np.errstate(all="ignore"):
        for _ in range(maxiter):
            g, gz, gzb = demo_potential_derivatives(p_desc, epsilon, z)
            den = np.abs(gz) ** 2 - np.abs(gzb) ** 2
            step = (-g * np.conj(gz) + gzb * np.conj(g)) / den
            step = np.where(np.isfinite(step) & ~conv, step, 0.0)
            z = z + step
            conv |= np.abs(step) <= 1e-14 * (1.0 + np.abs(z))
            if conv.all():
                break
        g = demo_potential_derivatives(p_desc, epsilon, z)[0]
    good = conv & (np.abs(g) <= 1e-10) & np.isfinite(z) & (np.abs(z) <= 10 * half)
    found: List[complex] = []
    for w in z[good]:
        if all(abs(w - u) > dedupe * (1.0 + abs(u)) for u in found):
            found.append(complex(w))
    found.sort(key=lambda w: (round(w.real, 9), round(w.imag, 9)))
    return MetricDemoResult(tuple(found), int(np.sum(~good)))
