"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_backends.py [--samples 200000] [--repeat 5] [--json out.json]

Each kernel is run on identical inputs under both backends; the table
reports the best-of-``repeat`` wall time and the largest relative
difference between the two outputs.
"""
import argparse
import json
import timeit

import numpy as np

from holocrit import _core
from holocrit.density import complex_normals
from holocrit.ensemble import eliminant, sample_su2_section, trial_stream
from numpy.polynomial import polynomial as P


def _cases(samples, rng):
    y1 = complex_normals(rng, (samples, 2))
    y2 = complex_normals(rng, (samples, 4))
    theta = np.array([[2.0, 0.3j], [-0.3j, 1.0]])
    sample = sample_su2_section(8, trial_stream(0, 0))
    a = sample.chart_coefficients()
    el = eliminant(a)
    roots = P.polyroots(np.trim_zeros(el / np.abs(el).max(), "b"))
    roots = np.tile(roots, max(1, samples // (50 * len(roots))))
    return {
        "mc_normalized m=1": lambda k: k.mc_normalized_sums(y1, 1),
        "mc_normalized m=2": lambda k: k.mc_normalized_sums(y2, 2),
        "mc_theta m=1": lambda k: k.mc_theta_sum(y1, 1, np.eye(1) * 2.0),
        "mc_theta m=2": lambda k: k.mc_theta_sum(y2, 2, theta),
        f"polish_cp1 N=8 ({len(roots)} starts)": lambda k: k.polish_cp1(a, 8, roots)[0],
    }


def _reldiff(x, y):
    x, y = np.asarray(x), np.asarray(y)
    ok = np.isfinite(x) & np.isfinite(y)
    return float(np.max(np.abs(x[ok] - y[ok]) / (1.0 + np.abs(y[ok]))))


def run(samples=200000, repeat=5, seed=0):
    if "cython" not in _core.BACKENDS:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(seed)
    py, cy = _core.get_backend("python"), _core.get_backend("cython")
    rows = []
    for name, fn in _cases(samples, rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat))
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat))
        rows.append({"kernel": name, "python_s": t_py, "cython_s": t_cy,
                     "speedup": t_py / t_cy, "max_rel_diff": _reldiff(fn(cy), fn(py))})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    rows = run(args.samples, args.repeat)
    print(f"{'kernel':34s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max rel diff':>13s}")
    for r in rows:
        print(f"{r['kernel']:34s} {r['python_s']:11.5f} {r['cython_s']:11.5f} "
              f"{r['speedup']:8.1f} {r['max_rel_diff']:13.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
