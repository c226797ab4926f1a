"""Multi-index bookkeeping and truncated power series in (u, b) variables.

A series is a plain ``dict`` mapping ``(alpha, beta)`` pairs of exponent
tuples to complex coefficients.  ``u`` plays the role of the holomorphic
displacement ``z - z0`` and ``b`` the anti-holomorphic one (``conj(w - z0)``
for two-point kernels, ``conj(z - z0)`` for potentials).
"""
from __future__ import annotations

import math
from math import factorial
from typing import Callable, Dict, List, Tuple

MultiIndex = Tuple[int, ...]
Series = Dict[Tuple[MultiIndex, MultiIndex], complex]
Keep = Callable[[MultiIndex, MultiIndex], bool]


def unit(m: int, j: int) -> MultiIndex:
    return tuple(1 if i == j else 0 for i in range(m))


def zero(m: int) -> MultiIndex:
    return (0,) * m


def add_idx(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


def order(a: MultiIndex) -> int:
    return sum(a)


def multi_factorial(a: MultiIndex) -> int:
    out = 1
    for x in a:
        out *= factorial(x)
    return out


def sym_pairs(m: int) -> List[Tuple[int, int]]:
    """Symmetric index pairs ``(j, q)`` with ``j <= q``, lexicographic."""
    return [(j, q) for j in range(m) for q in range(j, m)]


def jet_indices(m: int) -> List[MultiIndex]:
    """Holomorphic multi-indices of order <= 2 in the canonical order.

    Order: the value, then first derivatives ``e_j``, then second derivatives
    ``e_j + e_q`` following :func:`sym_pairs`.
    """
    out = [zero(m)]
    out += [unit(m, j) for j in range(m)]
    out += [add_idx(unit(m, j), unit(m, q)) for j, q in sym_pairs(m)]
    return out


def all_indices(m: int, max_order: int) -> List[MultiIndex]:
    """All multi-indices in ``m`` variables with total order <= ``max_order``."""
    if m == 0:
        return [()]
    out = []
    for first in range(max_order + 1):
        for rest in all_indices(m - 1, max_order - first):
            out.append((first,) + rest)
    out.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return out


def keep_bidegree(max_u: int, max_b: int) -> Keep:
    return lambda a, b: sum(a) <= max_u and sum(b) <= max_b


def keep_total(max_total: int) -> Keep:
    return lambda a, b: sum(a) + sum(b) <= max_total


def constant(m: int, c: complex) -> Series:
    return {(zero(m), zero(m)): complex(c)}


def mul(x: Series, y: Series, keep: Keep) -> Series:
    out: Series = {}
    for (a1, b1), c1 in x.items():
        if c1 == 0:
            continue
        for (a2, b2), c2 in y.items():
            a = add_idx(a1, a2)
            b = add_idx(b1, b2)
            if not keep(a, b):
                continue
            out[(a, b)] = out.get((a, b), 0j) + c1 * c2
    return out


def add(x: Series, y: Series, scale: complex = 1.0) -> Series:
    out = dict(x)
    for k, v in y.items():
        out[k] = out.get(k, 0j) + scale * v
    return out


def scaled(x: Series, s: complex) -> Series:
    return {k: s * v for k, v in x.items()}


def binomial_power(c: complex, t: Series, power: float, m: int, keep: Keep, kmax: int = 4) -> Series:
    """Series of ``(c + t)**power`` where ``t`` has no constant term.

    ``kmax`` bounds the number of ``t`` factors; it must be at least the
    highest total degree retained by ``keep``.
    """
    out: Series = {}
    term = constant(m, 1.0)
    coeff = 1.0
    for k in range(kmax + 1):
        if k > 0:
            coeff *= (power - (k - 1)) / k
            term = mul(term, t, keep)
        if coeff == 0:
            break
        out = add(out, term, coeff * c ** (power - k))
    return out


def logarithm(c: float, t: Series, m: int, keep: Keep, kmax: int = 4) -> Series:
    """Series of ``log(c + t)`` for ``c > 0``; ``t`` has no constant term."""
    out = constant(m, math.log(c))
    term = constant(m, 1.0)
    for k in range(1, kmax + 1):
        term = mul(term, scaled(t, 1.0 / c), keep)
        out = add(out, term, (-1) ** (k + 1) / k)
    return out


def exponential(t: Series, m: int, keep: Keep, kmax: int = 4) -> Series:
    """Series of ``exp(t)`` where ``t`` has no constant term."""
    out = constant(m, 1.0)
    term = constant(m, 1.0)
    for k in range(1, kmax + 1):
        term = scaled(mul(term, t, keep), 1.0 / k)
        out = add(out, term)
    return out


def derivative(x: Series, a: MultiIndex, b: MultiIndex) -> complex:
    """``d^a_u d^b_b`` of the series at the origin."""
    return x.get((a, b), 0j) * multi_factorial(a) * multi_factorial(b)
