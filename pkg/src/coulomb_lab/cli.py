"""Command-line harness: runs one experiment, writes a result file plus a JSON run manifest.

Exit status: 0 ok, 1 a checked report row failed, 2 invalid input,
3 numerical non-convergence, 4 output not writable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .ground_state import (density_histogram, enumerate_tent_minima, find_critical_force, solve_equilibrium)
from .model import ForceField, PotentialSpec
from .gibbs.bessel import bessel_K, bessel_K_asymptotic, bessel_identity_rhs, laplace_integral
from .gibbs.conditional import (conditional_variance, dirichlet_stats, fit_power_law, lclt_sup_error,
                                mc_conditional_variance)
from .gibbs.densities import make_gibbs_density

OUTPUT_ENV = "COULOMB_LAB_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_UNWRITABLE = 0, 1, 2, 3, 4

SCHEMAS = {
    "ground-state": ["k", "position", "spacing"],
    "critical-scan": ["N", "F_cr", "F_cr_over_N"],
    "density-profile": ["bin_center", "rho"],
    "tent-minima": ["minimum_id", "energy", "num_pinned_left"],
    "gibbs-variance": ["N", "d_N", "scaled_d_N", "method"],
    "gibbs-sample": ["N", "d_N", "std_error", "acceptance", "method"],
    "lclt-check": ["N", "sup_error"],
    "bessel-check": ["alpha", "z", "lhs", "rhs", "rel_err"],
}


class NonConvergence(RuntimeError):
    pass


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


# ---- report ---------------------------------------------------------------

@dataclass
class ReportRow:
    name: str
    text: str
    value: float
    target: Optional[float] = None
    tol: Optional[float] = None
    relative: bool = False
    passed: Optional[bool] = None  # set directly for non-numeric checks

    def status(self, checking: bool) -> str:
        if not checking or (self.tol is None and self.passed is None):
            return "INFO"
        if self.passed is not None:
            return "PASS" if self.passed else "FAIL"
        err = abs(self.value - self.target)
        if self.relative:
            err /= abs(self.target)
        return "PASS" if err <= self.tol else "FAIL"


def emit_report(rows, checking: bool, tolerances=None, stream=None) -> int:
    """Print one line per row in the given order; return 1 if any checked row failed."""
    stream = stream or sys.stdout
    if not rows:
        raise ValueError("empty report")
    tolerances = tolerances or {}
    failed = False
    for r in rows:
        if r.name in tolerances:
            r.tol = tolerances[r.name]
        st = r.status(checking)
        failed |= st == "FAIL"
        print(f"{r.text}: {st}", file=stream)
    return EXIT_FAIL if failed else EXIT_OK


def _target_text(name, value, target, tol, relative=False, digits=3):
    rng = f"{tol:g}" + (" rel" if relative else "")
    return f"{name} {value:.{digits}f} (target {target:g} ± {rng})"


# ---- parsing helpers --------------------------------------------------------

def int_list(s: str):
    try:
        vals = [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {s!r}")
    if not vals or any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("N lists must be strictly increasing positive integers")
    return vals


def float_list(s: str):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {s!r}")


def positive(s: str):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def tol_pair(s: str):
    name, _, val = s.partition("=")
    if not name or not val:
        raise argparse.ArgumentTypeError("tolerance must look like NAME=VALUE")
    return name, float(val)


def make_density(args):
    kind = {"power": "pure_power", "pure_power": "pure_power", "coulomb": "coulomb", "tabulated": "tabulated"}[args.family]
    samples = None
    if kind == "tabulated":
        if not args.modulation:
            raise ValueError("tabulated family needs --modulation FILE")
        samples = np.loadtxt(args.modulation, dtype=float, ndmin=1)
    beta = args.beta if args.beta is not None else (1.0 if kind == "coulomb" else 0.0)
    return make_gibbs_density(kind, alpha=args.alpha, beta=beta, samples=samples)


# ---- workers (top level so they pickle) --------------------------------------

def _critical_worker(item):
    N, L, b, tol = item
    res = find_critical_force(N, L, PotentialSpec(b, 1.0), tol=tol)
    return [N, res.F_cr, res.F_cr / N]


def _variance_worker(item):
    g, N, method = item
    st = dirichlet_stats(N, g.alpha) if method == "dirichlet_exact" else conditional_variance(g, N)
    return [N, st.d_N, st.scaled, st.method]


def _lclt_worker(item):
    g, N = item
    return [N, lclt_sup_error(g, N)]


def _bessel_worker(item):
    alpha, lam, beta = item
    lhs = laplace_integral(lam, beta, alpha)
    rhs = bessel_identity_rhs(lam, beta, alpha)
    return [alpha, 2 * math.sqrt(lam * beta), lhs, rhs, abs(lhs - rhs) / abs(rhs)]


def _pmap(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        # map keeps input order whatever the completion order
        return list(ex.map(fn, items))


# ---- commands ----------------------------------------------------------------

def cmd_ground_state(args):
    pot = PotentialSpec(args.b, 1.0)
    field_ = ForceField.constant(1.0, scaling=(args.force, args.gamma)) if args.force else ForceField.zero()
    res = solve_equilibrium(args.N, args.L, pot, field_)
    if not res.converged:
        raise NonConvergence(f"equilibrium solve stopped at residual {res.residual_norm:g}")
    x = res.positions
    sp = np.concatenate([[np.nan], x[:-1] - x[1:]])
    rows = [[k, x[k], sp[k] if k else ""] for k in range(x.size)]
    dev = float(np.max(np.abs(np.diff(-x) - args.L / args.N)))
    report = [
        ReportRow("detached", f"x_N {x[-1]:.6g}, detached={res.detached}", x[-1]),
        ReportRow("iterations", f"iterations {res.iterations}, residual {res.residual_norm:.3g}", res.iterations),
    ]
    if not args.force:
        report.append(ReportRow("uniform_spacing", f"max spacing deviation {dev:.3g} (target < 1e-10)", dev,
                                passed=dev < 1e-10))
    summary = {"x_N": float(x[-1]), "residual_norm": res.residual_norm, "iterations": res.iterations,
               "active_pins": list(res.active_pins), "max_spacing_deviation": dev}
    return rows, report, summary


def cmd_critical_scan(args):
    items = [(N, args.L, args.b, args.tol) for N in args.N]
    rows = _pmap(_critical_worker, items, args.jobs)
    ratios = [r[2] for r in rows]
    target = 4.0 / args.L ** 2
    last = ratios[-1]
    report = [ReportRow("c_cr", _target_text("F_cr/N at N=%d:" % args.N[-1], last, target, 0.03, True),
                        last, target, 0.03, True)]
    if args.b == 1.0 and len(ratios) > 1:
        mono = all(abs(b - target) < abs(a - target) for a, b in zip(ratios, ratios[1:]))
        report.append(ReportRow("monotone", "monotone approach to 4/L^2", float(mono), passed=mono))
    return rows, report, {"F_cr_over_N": ratios}


def cmd_density_profile(args):
    pot = PotentialSpec(args.b, 1.0)
    field_ = ForceField.constant(1.0, scaling=(args.c, args.gamma)) if args.c else ForceField.zero()
    res = solve_equilibrium(args.N, args.L, pot, field_)
    if not res.converged:
        raise NonConvergence("equilibrium solve did not converge")
    centers, rho = density_histogram(res.config, args.bins)
    rows = [[c, r] for c, r in zip(centers, rho)]
    width = args.L / args.bins
    top_mass = float(rho[-1] * width)
    report = [ReportRow("mass_top_bin", f"mass in the bin adjacent to 0: {top_mass:.4f}", top_mass),
              ReportRow("min_max", f"rho min {rho.min():.4g}, max {rho.max():.4g}", float(rho.max()))]
    return rows, report, {"x_N": float(res.positions[-1]), "mass_top_bin": top_mass}


def cmd_tent_minima(args):
    L = args.L
    center = -L / 2
    field_ = ForceField.tent(args.a, args.b_slope, center=center, scaling=(args.c, 1.0))
    found = enumerate_tent_minima(args.N, args.c, args.seeds, rng_seed=args.seed, field=field_, L=L)
    # particles in the left basin: below the unstable zero of the tent force
    split = center - args.a / (2 * args.b_slope)
    rows = [[i, r.energy, int(np.sum(r.positions < split))] for i, r in enumerate(found)]
    n = len(found)
    report = [ReportRow("distinct_minima", f"distinct minima {n} (target >= {args.min_count})", n,
                        passed=n >= args.min_count)]
    return rows, report, {"distinct_minima": n}


def cmd_gibbs_variance(args):
    g = make_density(args)
    method = "dirichlet_exact" if args.method == "dirichlet" else "grid_convolution"
    if method == "dirichlet_exact" and (g.kind != "pure_power"):
        raise ValueError("the Dirichlet oracle applies to the power family only")
    rows = _pmap(_variance_worker, [(g, N, method) for N in args.N], args.jobs)
    report = []
    if len(rows) >= 4:
        expo, const, resid = fit_power_law([(r[0], r[1]) for r in rows])
        target = -3.0 if g.beta > 0 else -2.0
        tol = 0.1 if g.beta > 0 else 0.05
        report.append(ReportRow("exponent", f"exponent {expo:.2f} (target {target:g} ± {tol:g})",
                                expo, target, tol))
        report.append(ReportRow("constant", f"fitted constant {const:.4g}, max log residual {resid:.3g}", const))
        top = [r[2] for r in rows if r[0] * 2 >= rows[-1][0]]
        var = (max(top) - min(top)) / max(top)
        report.append(ReportRow("plateau", f"plateau variation over top octave {var:.4f} (target < 0.05)",
                                var, passed=var < 0.05))
    for r in rows:
        report.append(ReportRow("d_N", f"N={r[0]} d_N {r[1]:.10g} scaled {r[2]:.6g}", r[1]))
        if g.kind == "pure_power" and method != "dirichlet_exact":
            ref = dirichlet_stats(r[0], g.alpha).d_N
            report.append(ReportRow("oracle", _target_text(f"N={r[0]} d_N / Dirichlet", r[1] / ref, 1.0, 0.005, True, 5),
                                    r[1] / ref, 1.0, 0.005, True))
    summary = {"results": [{"N": r[0], "d_N": r[1], "scaled_d_N": r[2], "method": r[3]} for r in rows]}
    return rows, report, summary


def cmd_gibbs_sample(args):
    g = make_density(args)
    st = mc_conditional_variance(g, args.N, args.samples, window=args.window, seed=args.seed)
    rows = [[args.N, st.d_N, st.std_error, st.extra["acceptance"], st.method]]
    report = [ReportRow("mc", f"N={args.N} d_N {st.d_N:.8g} ± {st.std_error:.3g}", st.d_N)]
    if args.compare:
        ref = conditional_variance(g, args.N).d_N
        z = (st.d_N - ref) / st.std_error
        report.append(ReportRow("mc_vs_grid", f"MC - grid = {z:.2f} standard errors (target |z| <= 3)", z,
                                passed=abs(z) <= 3))
    return rows, report, {"d_N": st.d_N, "std_error": st.std_error, "acceptance": st.extra["acceptance"]}


def cmd_lclt_check(args):
    g = make_density(args)
    rows = _pmap(_lclt_worker, [(g, N) for N in args.N], args.jobs)
    errs = [r[1] for r in rows]
    dec = all(b < a for a, b in zip(errs, errs[1:]))
    report = [ReportRow("decreasing", "sup error strictly decreasing in N", float(dec), passed=dec)]
    return rows, report, {"sup_error": errs}


def cmd_bessel_check(args):
    items = [(a, lam, beta) for a in args.alpha for lam in args.lam for beta in args.beta]
    rows = _pmap(_bessel_worker, items, args.jobs)
    worst = max(r[4] for r in rows)
    report = [ReportRow("identity", f"max identity rel error {worst:.3g} (target <= 1e-08)", worst, passed=worst <= 1e-8)]
    for a in sorted(set(args.alpha)):
        ratio = bessel_K_asymptotic(a, 100.0, scaled=True) / bessel_K(a, 100.0, scaled=True)
        report.append(ReportRow("asymptotic", _target_text(f"asymptotic/direct K_{a:g}(100)", ratio, 1.0, 1e-3, digits=6),
                                ratio, 1.0, 1e-3))
    return rows, report, {"max_rel_err": worst}


COMMANDS = {
    "ground-state": cmd_ground_state,
    "critical-scan": cmd_critical_scan,
    "density-profile": cmd_density_profile,
    "tent-minima": cmd_tent_minima,
    "gibbs-variance": cmd_gibbs_variance,
    "gibbs-sample": cmd_gibbs_sample,
    "lclt-check": cmd_lclt_check,
    "bessel-check": cmd_bessel_check,
}
STOCHASTIC = {"tent-minima", "gibbs-sample"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coulomb-lab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    common.add_argument("--output", default=None, help="explicit result file path")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--check", action="store_true", help="grade report rows against built-in targets")
    common.add_argument("--tolerance", type=tol_pair, action="append", default=[], metavar="NAME=VALUE",
                        help="override the tolerance of a report row (implies --check)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    def chain(sp):
        sp.add_argument("--L", type=positive, default=1.0)
        sp.add_argument("--b", type=positive, default=1.0, help="potential exponent")

    def gibbs(sp):
        sp.add_argument("--family", choices=["power", "pure_power", "coulomb", "tabulated"], required=True)
        sp.add_argument("--alpha", type=positive, default=1.0)
        sp.add_argument("--beta", type=float, default=None)
        sp.add_argument("--modulation", default=None, help="file of positive modulation samples (tabulated)")

    sp = add("ground-state", "equilibrium positions for a constant force c N^gamma")
    sp.add_argument("--N", type=int, required=True)
    chain(sp)
    sp.add_argument("--force", type=float, default=0.0, help="renormalized force coefficient c")
    sp.add_argument("--gamma", type=float, default=0.0)

    sp = add("critical-scan", "critical detachment force over N")
    sp.add_argument("--N", type=int_list, required=True)
    chain(sp)
    sp.add_argument("--tol", type=positive, default=1e-6)

    sp = add("density-profile", "histogram of equilibrium positions")
    sp.add_argument("--N", type=int, required=True)
    chain(sp)
    sp.add_argument("--c", type=float, default=0.0)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--bins", type=int, default=20)

    sp = add("tent-minima", "distinct local minima under the tent force")
    sp.add_argument("--N", type=int, default=21)
    sp.add_argument("--L", type=positive, default=2.0)
    sp.add_argument("--c", type=positive, default=10.0)
    sp.add_argument("--a", type=positive, default=1.0)
    sp.add_argument("--b-slope", dest="b_slope", type=positive, default=2.0)
    sp.add_argument("--seeds", type=int, default=200)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--min-count", dest="min_count", type=int, default=3)

    sp = add("gibbs-variance", "conditional spacing variance d_N over N")
    gibbs(sp)
    sp.add_argument("--N", type=int_list, required=True)
    sp.add_argument("--method", choices=["grid", "dirichlet"], default="grid")

    sp = add("gibbs-sample", "Monte Carlo estimate of d_N")
    gibbs(sp)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--window", type=positive, default=0.1)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--compare", action="store_true", help="compare with the grid value")

    sp = add("lclt-check", "local CLT sup error of the tilted convolution powers")
    gibbs(sp)
    sp.add_argument("--N", type=int_list, required=True)

    sp = add("bessel-check", "Laplace integral against the Bessel closed form")
    sp.add_argument("--alpha", type=float_list, default=[0.0, 1.0, 2.0])
    sp.add_argument("--lam", type=float_list, default=[10.0, 100.0, 1000.0])
    sp.add_argument("--beta", type=float_list, default=[1.0, 2.0])
    return p


def _result_path(args) -> str:
    if args.output:
        return args.output
    base = args.out or os.environ.get(OUTPUT_ENV) or "results"
    return os.path.join(base, f"{args.command}.{args.format}")


def render(command, rows, fmt_: str) -> str:
    header = SCHEMAS[command]
    if fmt_ == "json":
        recs = [{h: (fmt(v) if isinstance(v, str) else v) for h, v in zip(header, r)} for r in rows]
        return json.dumps(recs, indent=2, default=float) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    if args.command in STOCHASTIC and args.seed is None:
        print("error: --seed is required for stochastic commands", file=sys.stderr)
        return EXIT_INVALID
    tolerances = dict(args.tolerance)
    checking = args.check or bool(tolerances)
    path = _result_path(args)
    manifest_path = os.path.splitext(path)[0] + ".manifest.json"
    inputs = {k: v for k, v in vars(args).items() if k not in ("out", "output", "jobs")}
    t0 = time.perf_counter()
    status = EXIT_OK
    error = None
    rows, report, summary = [], [], {}
    try:
        rows, report, summary = COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        status, error = EXIT_INVALID, str(e)
    except (NonConvergence, RuntimeError, FloatingPointError) as e:
        status, error = EXIT_NONCONVERGED, str(e)
    wall = time.perf_counter() - t0
    manifest = {
        "command": args.command,
        "inputs": inputs,
        "seed": getattr(args, "seed", None),
        "versions": {"coulomb_lab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "status": status,
        "error": error,
        "summary": summary,
        "result_file": path if status == EXIT_OK else None,
        "wall_time_s": wall,
    }
    try:
        if status == EXIT_OK:
            _write(path, render(args.command, rows, args.format))
        _write(manifest_path, json.dumps(manifest, indent=2, default=float) + "\n")
    except OSError as e:
        print(f"error: cannot write output: {e}", file=sys.stderr)
        return EXIT_UNWRITABLE
    if status != EXIT_OK:
        print(f"error: {error}", file=sys.stderr)
        return status
    return emit_report(report, checking, tolerances)


if __name__ == "__main__":
    sys.exit(main())
