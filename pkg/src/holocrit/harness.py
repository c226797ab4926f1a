"""Command-line runs, reports and cross-method comparisons.

Every command produces a :class:`Report`.  JSON is the canonical output;
CSV is a projection onto the fixed columns in ``CSV_COLUMNS``.  Reports
are deterministic for a fixed configuration and seed apart from the fields
in ``VOLATILE_FIELDS``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from math import factorial
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import __version__, _core
from . import density as dens
from . import ensemble as ens
from . import geometry as geo
from . import jpd as jp
from . import kernels as ker
from .errors import ConfigurationError, HolocritError

SCHEMA_VERSION = "holocrit.report/1"
VOLATILE_FIELDS = ("timestamp", "runtimeSeconds")
CSV_COLUMNS = ["quantity", "value", "stderr", "reference", "referenceExact", "tolerance", "pass"]
OUTPUT_DIR_ENV = "HOLOCRIT_OUTPUT_DIR"

DEFAULTS = {
    "samples": 10 ** 6,
    "trials": 2000,
    "seed": 0,
    "residual": 1e-10,
    "dedupe": 1e-8,
    "singular": 1e-10,
    "degeneracy": 1e-10,
}

EXIT_OK, EXIT_COMPARISON, EXIT_CONFIG = 0, 1, 2


@dataclass
class Report:
    command: str
    config: dict
    rows: List[dict] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    runtime: float = 0.0
    timestamp: str = ""

    @property
    def passed(self) -> Optional[bool]:
        flags = [r["pass"] for r in self.rows if r.get("pass") is not None]
        return all(flags) if flags else None

    def add_row(self, quantity, value, stderr=None, reference=None, tolerance=None, ok=None):
        ref_exact = None
        if isinstance(reference, Fraction):
            ref_exact = f"{reference.numerator}/{reference.denominator}"
        self.rows.append({
            "quantity": quantity,
            "value": None if value is None else float(value),
            "stderr": None if stderr is None else float(stderr),
            "reference": None if reference is None else float(reference),
            "referenceExact": ref_exact,
            "tolerance": tolerance,
            "pass": None if ok is None else bool(ok),
        })

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "rows": self.rows,
            "results": self.results,
            "pass": self.passed,
            "timestamp": self.timestamp,
            "runtimeSeconds": self.runtime,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: "" if row[k] is None else row[k] for k in CSV_COLUMNS})
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def strip_volatile(report: dict) -> dict:
    """Copy of a report dict without timestamp and timing fields."""
    return {k: v for k, v in report.items() if k not in VOLATILE_FIELDS}


def within(value, reference, stderr, k=3.0) -> bool:
    return abs(value - reference) <= k * stderr


# -- ensemble setup -------------------------------------------------------------

@dataclass
class Setup:
    spec: object
    geometry: geo.ChartGeometry
    volume: Optional[float]  # total volume of the dV form, if compact
    total_reference: Optional[Fraction]


def parse_point(text, m: int):
    if isinstance(text, (int, float, complex)):
        vals = [complex(text)]
    else:
        try:
            vals = [complex(s.strip().replace(" ", "")) for s in str(text).split(",")]
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse point {text!r}") from exc
    if len(vals) == 1:
        vals = vals * m
    if len(vals) != m:
        raise ConfigurationError(f"point needs {m} coordinates")
    return vals


def load_basis_file(path: str, degree: Optional[int]):
    """Polynomial basis from JSON.

    Format::

        {"dimension": 1,
         "functions": [[[[0], 1.0, 0.0]], [[[1], 1.0, 0.0]]],
         "potential": {"kind": "fubini_study", "degree": 2}}

    Each function is a list of ``[exponents, re, im]`` terms.  The potential
    may also be ``{"kind": "quadratic", "weights": [...]}`` or ``{"kind": "flat"}``.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
        m = int(data.get("dimension", 1))
        funcs = []
        for terms in data["functions"]:
            funcs.append(ker.PolynomialBasisFunction(
                {tuple(t[0]): complex(t[1], t[2]) for t in terms}))
    except (OSError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigurationError(f"bad basis file {path}: {exc}") from exc
    pot = data.get("potential", {"kind": "fubini_study", "degree": degree})
    return ker.FiniteBasis(tuple(funcs), m), m, pot


def build_setup(ensemble: str, degree: Optional[int], point, basis_file=None) -> Setup:
    if ensemble in ("su2", "fs2"):
        if degree is None:
            raise ConfigurationError("--degree is required")
        m = 1 if ensemble == "su2" else 2
        if degree < 2:
            raise ConfigurationError(
                f"degree {degree} fails the 2-jet spanning requirement (need degree >= 2)")
        pt = parse_point(point, m)
        spec = ker.SU2(degree) if m == 1 else ker.FSProjective(2, degree)
        ref = dens.exact_cp1_numbers(degree)[2] if m == 1 else dens.cp2_exact_number(degree)
        return Setup(spec, geo.fubini_study(m, degree, pt), np.pi ** m / factorial(m), ref)
    if ensemble == "basis-file":
        if not basis_file:
            raise ConfigurationError("--basis-file is required for ensemble basis-file")
        spec, m, pot = load_basis_file(basis_file, degree)
        pt = parse_point(point, m)
        kind = pot.get("kind")
        if kind == "fubini_study":
            if pot.get("degree") is None:
                raise ConfigurationError("fubini_study potential needs a degree")
            geom = geo.fubini_study(m, pot["degree"], pt)
        elif kind == "quadratic":
            geom = geo.quadratic(pot["weights"], pt)
        elif kind == "flat":
            geom = geo.flat(m, pt)
        else:
            raise ConfigurationError(f"unknown potential kind {kind!r}")
        return Setup(spec, geom, None, None)
    raise ConfigurationError(f"unknown ensemble {ensemble!r}")


def _jets(setup: Setup, scale: float = 1.0):
    jets = ker.kernel_jets(setup.spec, setup.geometry.point)
    if not jets.spans_2jets:
        raise ConfigurationError("ensemble fails the 2-jet spanning requirement at this point")
    return jets.scaled(scale) if scale != 1.0 else jets


# -- commands -------------------------------------------------------------------

def cmd_density(args) -> Report:
    setup = build_setup(args.ensemble, args.degree, args.point, args.basis_file)
    m = setup.geometry.dimension
    jets = _jets(setup, args.kernel_scale)
    rep = Report("density", {})
    kw = dict(samples=args.samples, seed=args.seed, workers=args.workers, backend=args.backend)
    reference = setup.total_reference
    label = "expectedTotal"
    if args.method == "exact":
        if m != 1:
            raise ConfigurationError("the closed form exists in dimension one only")
        res = dens.exact_density_from_jets(jets, setup.geometry)
    elif args.method == "mc":
        res = dens.mc_density_from_jets(jets, setup.geometry, **kw)
    elif args.method == "mc-theta":
        res = dens.theta_density_from_jets(jets, setup.geometry, **kw)
    elif args.method == "morse":
        if args.morse_q is None:
            raise ConfigurationError("--morse-q is required for method morse")
        if not m <= args.morse_q <= 2 * m:
            raise ConfigurationError(f"--morse-q must lie in [{m}, {2 * m}]")
        jpd, jac = jp.normalized_jpd(jets, setup.geometry)
        res = dens.morse_density_mc(jpd.A, jp.compute_lambda(jpd), m, args.morse_q, **kw)
        res = res.converted(jac / setup.geometry.volume_density, "dV")
        label = f"expectedMorse{args.morse_q}"
        if args.ensemble == "su2":
            n_plus, n_minus, _ = dens.exact_cp1_numbers(args.degree)
            reference = n_plus if args.morse_q == 1 else n_minus
        else:
            reference = None
    else:
        raise ConfigurationError(f"unknown method {args.method!r}")
    rep.results["density"] = res.as_dict()
    rep.add_row("density", res.value, res.standard_error)
    if setup.volume is not None:
        total, err = res.value * setup.volume, res.standard_error * setup.volume
        if reference is None:
            rep.add_row(label, total, err)
        elif res.method == "exact1d":
            ok = abs(total - float(reference)) <= 1e-12 * float(reference)
            rep.add_row(label, total, 0.0, reference, "1e-12 relative", ok)
        else:
            rep.add_row(label, total, err, reference, "3 stderr",
                        within(total, float(reference), err))
    rep.results["exact"] = res.method == "exact1d"
    return rep


def cmd_count(args) -> Report:
    if args.degree is None or args.degree < 1:
        raise ConfigurationError("--degree must be at least 1")
    if args.trials < 2:
        raise ConfigurationError("--trials must be at least 2")
    tol = ens.Tolerances(args.residual, args.dedupe, args.singular, args.degeneracy)
    summary = ens.monte_carlo_counts(args.degree, args.trials, args.seed, args.workers, tol,
                                     args.backend, keep_points=bool(args.dump_points))
    rep = Report("count", {})
    means, targets = summary.means(), summary.targets()
    for key in ("nPlus", "nMinus", "nTotal"):
        mean, err = means[key]
        ok = mean == float(targets[key]) if err == 0 else within(mean, float(targets[key]), err)
        rep.add_row(key, mean, err, targets[key], "3 stderr", ok)
    rep.add_row("rejectionRate", summary.rejection_rate, None, None, "< 0.01", summary.reliable)
    chern_ok = bool(np.all(summary.chern_sums == args.degree - 2))
    rep.add_row("chernSumAccepted", float(np.mean(summary.chern_sums == args.degree - 2)),
                None, None, "all trials", chern_ok)
    rep.results.update({
        "trials": summary.trials, "rejected": summary.rejected,
        "solverFailures": summary.solver_failures,
        "degenerateFlags": summary.degenerate_flags,
        "chernViolations": summary.chern_violations, "reliable": summary.reliable,
    })
    if args.dump_points:
        with open(args.dump_points, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "chart", "z_re", "z_im", "topIndex", "morseIndex", "residual"])
            for t, rec in summary.points:
                w.writerow([t, rec.chart, repr(rec.z.real), repr(rec.z.imag),
                            rec.top_index, rec.morse_index, repr(rec.residual)])
    return rep


def cmd_abc(args) -> Report:
    setup = build_setup(args.ensemble, args.degree, args.point, args.basis_file)
    jets = ker.kernel_jets(setup.spec, setup.geometry.point)
    if args.mode == "adapted":
        jpd = jp.assemble_adapted(jets, setup.geometry)
    else:
        jpd = jp.assemble_abc(jets, setup.geometry, "general")
    if args.normalized:
        norm = geo.normalize_coordinates(setup.geometry.curvature)
        jpd = jp.transform_coordinates(jpd, norm.coordinate_matrix)
    rep = Report("abc", {})
    rep.results.update(jpd.as_dict())
    rep.results["slots"] = jp.slot_labels(jpd.dimension)
    try:
        rep.results["Lambda"] = jp._cjson(jp.compute_lambda(jpd))
    except HolocritError as exc:
        raise ConfigurationError(str(exc)) from exc
    return rep


def cmd_cp2(args) -> Report:
    if args.degree is None or args.degree < 2:
        raise ConfigurationError("--degree must be at least 2")
    exact = dens.cp2_exact_number(args.degree)
    rep = Report("cp2-number", {})
    rep.results["exact"] = exact
    rep.add_row("cp2Exact", float(exact), 0.0, exact)
    if args.samples:
        setup = build_setup("fs2", args.degree, 0)
        jpd, _ = jp.normalized_jpd(_jets(setup), setup.geometry)
        res = dens.density_mc_normalized(jpd.A, jp.compute_lambda(jpd), 2, args.samples,
                                         args.seed, args.workers, args.backend)
        vol = dens.fs_curvature_volume(2, args.degree)
        total, err = res.value * vol, res.standard_error * vol
        ok = abs(total - float(exact)) < 0.01 * float(exact) and within(total, float(exact), err)
        rep.add_row("cp2MonteCarlo", total, err, exact, "1% and 3 stderr", ok)
    return rep


def cmd_demo(args) -> Report:
    try:
        coeffs = [complex(s) for s in args.poly.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse --poly {args.poly!r}") from exc
    try:
        res = ens.perturbed_metric_crit_points(coeffs, args.epsilon, grid=args.grid)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    k = len(coeffs) - 1
    rep = Report("demo-metric", {})
    rep.add_row("criticalPoints", res.count, None, 2 * k - 1, "exact", res.count == 2 * k - 1)
    rep.results["points"] = [complex(z) for z in res.points]
    rep.results["unconvergedStarts"] = res.unconverged
    return rep


def compare_methods(degree: int, point, samples: int, seed: int, workers: int = 1,
                    backend=None, kernel_scale: float = 1.0) -> Report:
    setup = build_setup("su2", degree, point)
    jets = _jets(setup, kernel_scale)
    exact = dens.exact_density_from_jets(jets, setup.geometry)
    mc = dens.mc_density_from_jets(jets, setup.geometry, samples, seed, workers, backend)
    th = dens.theta_density_from_jets(jets, setup.geometry, samples, seed + 1, workers, backend)
    rep = Report("compare", {})
    rep.add_row("exact1d", exact.value, 0.0)
    rep.add_row("mcNormalized", mc.value, mc.standard_error, exact.value, "3 stderr",
                within(mc.value, exact.value, mc.standard_error))
    rep.add_row("mcGeneralTheta", th.value, th.standard_error, exact.value, "3 stderr",
                within(th.value, exact.value, th.standard_error))
    comb = float(np.hypot(mc.standard_error, th.standard_error))
    rep.add_row("mcNormalized-mcGeneralTheta", mc.value - th.value, comb, 0.0, "3 stderr",
                abs(mc.value - th.value) <= 3 * comb)
    return rep


def cmd_compare(args) -> Report:
    if args.ensemble != "su2":
        raise ConfigurationError("compare needs a dimension-one ensemble (su2)")
    if args.degree is None or args.degree < 2:
        raise ConfigurationError(
            "compare needs degree >= 2 for the 2-jet spanning requirement")
    return compare_methods(args.degree, args.point, args.samples, args.seed, args.workers,
                           args.backend, args.kernel_scale)


def _selftest_checks(backend) -> List[tuple]:
    checks: List[tuple] = []

    def add(name: str, fn: Callable[[], bool]):
        checks.append((name, fn))

    def abc_fixture():
        for N in (2, 3, 5):
            jpd = jp.assemble_abc(ker.kernel_jets(ker.SU2(N), 0), geo.fubini_study(1, N, 0),
                                  "adapted")
            lam = jp.compute_lambda(jpd)
            if not (np.allclose(jpd.A, N) and np.allclose(jpd.B, 0)
                    and np.allclose(lam, np.diag([2 * N * (N - 1), 1]))):
                return False
        return True

    add("abc fixtures", abc_fixture)
    add("fd jet check", lambda: ker.fd_jet_check(ker.SU2(5), 0, 1e-4) < 1e-6
        and ker.fd_jet_check(ker.SU2(3), 0.7 + 0.2j, 1e-4) < 1e-6)

    def exact_counts():
        return all(abs(dens.exact_density_from_jets(ker.kernel_jets(ker.SU2(N), 0.5),
                                                    geo.fubini_study(1, N, 0.5)).value * np.pi
                       - float(dens.exact_cp1_numbers(N)[2])) < 1e-10 for N in range(2, 9))

    add("closed form reproduces rational counts", exact_counts)
    add("exact vs mc", lambda: compare_methods(3, 0.5, 20000, 1, backend=backend).passed)

    def block_det():
        rng = np.random.default_rng(0)
        y = dens.complex_normals(rng, (1000, 4))
        from . import _pykernels
        a = _pykernels.mc_normalized_sums(y, 2).sum()
        b = _pykernels.mc_theta_sum(y, 2, np.eye(2))
        return abs(a - b) <= 1e-10 * abs(a)

    add("block determinant identity", block_det)

    def partition():
        md = dens.morse_densities_mc([[1.0]], np.eye(2), 1, 10000, 3, backend=backend)
        return sum(md.by_morse[q].value for q in sorted(md.by_morse)) == md.total.value

    add("morse partition", partition)

    def chern():
        s = ens.monte_carlo_counts(5, 40, 11, backend=backend)
        return bool(np.all(s.chern_sums == 3)) and s.reliable

    add("chern sum", chern)
    add("cp2 rational", lambda: dens.cp2_exact_number(3) == Fraction(3333, 343)
        and dens.cp2_exact_number(2) == 3)
    add("metric demo", lambda: ens.perturbed_metric_crit_points([1, 0, -1], 0.01).count == 3)
    return checks


def cmd_selftest(args) -> Report:
    rep = Report("selftest", {})
    for name, fn in _selftest_checks(args.backend):
        try:
            ok = bool(fn())
        except Exception as exc:  # noqa: BLE001 - a failing check must not abort the suite
            ok = False
            rep.results[name] = f"error: {exc}"
        rep.add_row(name, None, None, None, None, ok)
    return rep


COMMANDS = {
    "density": cmd_density,
    "count": cmd_count,
    "abc": cmd_abc,
    "cp2-number": cmd_cp2,
    "demo-metric": cmd_demo,
    "selftest": cmd_selftest,
    "compare": cmd_compare,
}


# -- argument parsing -----------------------------------------------------------

def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError("must be positive")
        return val
    return conv


def _seed(text):
    val = int(text)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned value")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holocrit",
                                     description="Critical points of random holomorphic sections")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULTS["seed"])
    common.add_argument("--output", choices=("json", "csv"), default="json")
    common.add_argument("--out", default=None, help="write the report here")
    common.add_argument("--workers", type=_positive(int), default=1)
    common.add_argument("--backend", choices=("cython", "python"), default=None)

    ensemble = argparse.ArgumentParser(add_help=False)
    ensemble.add_argument("--ensemble", choices=("su2", "fs2", "basis-file"), default="su2")
    ensemble.add_argument("--basis-file", default=None)
    ensemble.add_argument("--degree", type=int, default=None)
    ensemble.add_argument("--point", default="0")
    ensemble.add_argument("--kernel-scale", type=_positive(float), default=1.0)

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("density", parents=[common, ensemble])
    p.add_argument("--method", choices=("exact", "mc", "mc-theta", "morse"), default="exact")
    p.add_argument("--morse-q", type=int, default=None)
    p.add_argument("--samples", type=_positive(int), default=DEFAULTS["samples"])

    p = sub.add_parser("count", parents=[common])
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--trials", type=_positive(int), default=DEFAULTS["trials"])
    p.add_argument("--dump-points", default=None, help="per-point CSV path")
    for name in ("residual", "dedupe", "singular", "degeneracy"):
        p.add_argument(f"--{name}", type=_positive(float), default=DEFAULTS[name])

    p = sub.add_parser("abc", parents=[common, ensemble])
    p.add_argument("--mode", choices=("adapted", "general"), default="general")
    p.add_argument("--normalized", action="store_true")

    p = sub.add_parser("cp2-number", parents=[common])
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--samples", type=int, default=0)

    p = sub.add_parser("demo-metric", parents=[common])
    p.add_argument("--poly", required=True, help="coefficients, highest degree first")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--grid", type=_positive(int), default=41)

    sub.add_parser("selftest", parents=[common])

    p = sub.add_parser("compare", parents=[common, ensemble])
    p.add_argument("--samples", type=_positive(int), default=DEFAULTS["samples"])
    return parser


def _config_of(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "output")}
    cfg["backend"] = _core.backend_name(args.backend)
    return cfg


def run_command(argv: Sequence[str]) -> Report:
    """Parse ``argv`` and run; raises :class:`ConfigurationError` on bad input."""
    args = build_parser().parse_args(list(argv))
    t0 = time.perf_counter()
    try:
        rep = COMMANDS[args.command](args)
    except ConfigurationError:
        raise
    except (HolocritError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    rep.config = _config_of(args)
    rep.runtime = time.perf_counter() - t0
    rep.timestamp = datetime.now(timezone.utc).isoformat()
    return rep


def _output_path(args) -> Optional[str]:
    if args.out:
        return args.out
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root:
        os.makedirs(root, exist_ok=True)
        return os.path.join(root, f"{args.command}-{args.seed}.{args.output}")
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        rep = run_command(argv)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = rep.to_json() if args.output == "json" else rep.to_csv()
    path = _output_path(args)
    if path:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return EXIT_COMPARISON if rep.passed is False else EXIT_OK
