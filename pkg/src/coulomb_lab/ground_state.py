"""Equilibrium (ground-state) configurations of the pinned chain and the scans built on them."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from .model import COULOMB, ChainConfig, ForceField, PotentialSpec, eval_energy, eval_gradient, eval_hessian_bands

log = logging.getLogger(__name__)

DETACH_GAP = 1e-9


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 500
    armijo: float = 1e-4
    max_backtracks: int = 60


@dataclass
class GroundStateResult:
    config: ChainConfig
    active_pins: tuple
    residual_norm: float
    iterations: int
    converged: bool
    energy: float = float("nan")
    multipliers: tuple = (0.0, 0.0)

    @property
    def positions(self) -> np.ndarray:
        return self.config.positions

    @property
    def detached(self) -> bool:
        L = self.config.L
        return bool(self.positions[-1] > -L + DETACH_GAP * L)


@dataclass
class CriticalForceResult:
    N: int
    L: float
    F_cr: float
    bracket: tuple
    tolerance: float
    evaluations: int = 0


def _active_set(x, g, L):
    top = x[0] >= 0.0 and g[0] <= 0.0
    bottom = x[-1] <= -L and g[-1] >= 0.0
    return top, bottom


def _gradient_scale(x, pot, field):
    d = x[:-1] - x[1:]
    s = float(np.max(np.abs(pot.d1(d))))
    if field.amplitude != 0:
        s = max(s, float(np.max(np.abs(field(x)))))
    return s


def _projected(g, top, bottom):
    pg = g.copy()
    if top:
        pg[0] = 0.0
    if bottom:
        pg[-1] = 0.0
    return pg


def _newton_direction(x, g, free, pot, field):
    diag, off = eval_hessian_bands(x, pot, field)
    idx = np.flatnonzero(free)
    if idx.size == 0:
        return None
    # free indices are contiguous: the pinned ones can only be the two ends
    lo, hi = idx[0], idx[-1] + 1
    dg, od = diag[lo:hi], off[lo:hi - 1]
    rhs = -g[lo:hi]
    shift = 0.0
    scale = float(np.max(np.abs(dg))) or 1.0
    for _ in range(40):
        if hi - lo == 1:
            if dg[0] + shift > 0:
                step = rhs / (dg + shift)
                break
            shift = max(1e-10 * scale, 10 * shift)
            continue
        ab = np.zeros((2, hi - lo))
        ab[0, 1:] = od
        ab[1] = dg + shift
        try:
            step = solveh_banded(ab, rhs, lower=False, check_finite=False)
            break
        except LinAlgError:
            shift = max(1e-10 * scale, 10 * shift)
    else:
        return None
    d = np.zeros_like(x)
    d[lo:hi] = step
    return d


def _project_bounds(x, L):
    x = x.copy()
    if x[0] > 0.0:
        x[0] = 0.0
    if x[-1] < -L:
        x[-1] = -L
    return x


def _line_search(x, U, g, d, L, pot, field, opts):
    t = 1.0
    # keep every spacing positive along the ray
    dd = d[:-1] - d[1:]
    gap = x[:-1] - x[1:]
    shrinking = dd < 0
    if np.any(shrinking):
        t = min(1.0, 0.99 * float(np.min(gap[shrinking] / -dd[shrinking])))
    # U is a difference of O(pair energy) terms, so that sets its rounding level
    tiny = 64 * np.finfo(float).eps * (abs(U) + float(np.sum(pot.value(gap))))
    for _ in range(opts.max_backtracks):
        xn = _project_bounds(x + t * d, L)
        Un = eval_energy(xn, pot, field, L)
        if np.isfinite(Un):
            decrease = float(g @ (xn - x))
            if Un <= U + opts.armijo * decrease:
                return xn, Un
            # roundoff regime: energy differences below resolution
            if abs(decrease) <= tiny and Un <= U + tiny:
                return xn, Un
        t *= 0.5
    return None, U


def solve_equilibrium(N: int, L: float, pot: PotentialSpec = COULOMB, field: Optional[ForceField] = None,
                      opts: Optional[SolverOptions] = None, x0=None) -> GroundStateResult:
    """Local energy minimum with the endpoints pinned where the net force pushes outward.

    The iteration is a damped Newton method on the tridiagonal Hessian; pins are
    an active set (a pin stays active while its multiplier is nonnegative).
    Indefinite Hessians get a Levenberg shift; if the Newton direction fails the
    line search, a projected gradient step is tried instead.
    """
    if N < 1 or not L > 0:
        raise ValueError("need N >= 1 and L > 0")
    field = (field if field is not None else ForceField.zero()).at_size(N, pot).on_interval(L)
    opts = opts or SolverOptions()
    if x0 is None:
        x = -L * np.arange(N + 1) / N
    else:
        x = np.array(x0, dtype=float)
        if x.size != N + 1:
            raise ValueError("initial configuration has the wrong size")
    x = _project_bounds(x, L)
    U = eval_energy(x, pot, field, L)
    if not np.isfinite(U):
        raise ValueError("initial configuration is not strictly ordered")

    converged = False
    it = 0
    res = np.inf
    for it in range(opts.max_iter + 1):
        g = eval_gradient(x, pot, field)
        top, bottom = _active_set(x, g, L)
        pg = _projected(g, top, bottom)
        res = float(np.max(np.abs(pg))) / _gradient_scale(x, pot, field)
        if res <= opts.tol:
            converged = True
            break
        if it == opts.max_iter:
            break
        free = np.ones(x.size, bool)
        free[0] = not top
        free[-1] = not bottom
        d = _newton_direction(x, pg, free, pot, field)
        xn = None
        if d is not None and float(pg @ d) < 0:
            xn, Un = _line_search(x, U, pg, d, L, pot, field, opts)
        if xn is None:
            xn, Un = _line_search(x, U, pg, -pg / max(np.max(np.abs(pg)), 1e-300) * (x[0] - x[-1]) / N,
                                  L, pot, field, opts)
        if xn is None:
            log.debug("line search stalled at iteration %d, residual %.3e", it, res)
            break
        x, U = xn, Un

    g = eval_gradient(x, pot, field)
    top, bottom = _active_set(x, g, L)
    cfg = ChainConfig(x, L, bool(x[0] == 0.0), bool(x[-1] == -L))
    return GroundStateResult(cfg, (top, bottom), res, it, converged, float(U),
                             (float(-g[0]) if x[0] == 0.0 else 0.0, float(g[-1]) if x[-1] == -L else 0.0))


def random_initial_configs(N: int, L: float, count: int, seed) -> list:
    """Configurations with Dirichlet(1, ..., 1) gaps (including the two end gaps)."""
    children = np.random.SeedSequence(seed).spawn(count)
    out = []
    for ss in children:
        rng = np.random.default_rng(ss)
        gaps = rng.dirichlet(np.ones(N + 2)) * L
        x = -np.cumsum(gaps[:-1])
        out.append(x)
    return out


def find_critical_force(N: int, L: float, pot: PotentialSpec = COULOMB, tol: float = 1e-6,
                        max_force: float = 1e15, opts: Optional[SolverOptions] = None) -> CriticalForceResult:
    """Bisect the constant renormalized force at which the bottom particle leaves ``-L``."""
    evaluations = []
    warm = {"x": None}

    def detached(f):
        res = solve_equilibrium(N, L, pot, ForceField.constant(1.0).with_renormalized(f, pot), opts, warm["x"])
        if not res.converged:
            raise RuntimeError(f"solver did not converge at force {f:g}")
        warm["x"] = res.positions
        evaluations.append((f, res.detached))
        return res.detached

    lo = 0.0
    hi = 1.0 / L ** 2
    while not detached(hi):
        lo = hi
        hi *= 2.0
        if hi > max_force:
            raise RuntimeError("no detachment found below the configured force range")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if detached(mid):
            hi = mid
        else:
            lo = mid
    evaluations.sort()
    flags = [e[1] for e in evaluations]
    if any(a and not b for a, b in zip(flags, flags[1:])):
        raise RuntimeError("detachment predicate is not monotone in the force")
    return CriticalForceResult(N, L, 0.5 * (lo + hi), (lo, hi), tol, len(evaluations))


@dataclass
class MultiscaleFit:
    k: np.ndarray
    deviation: np.ndarray
    predicted: np.ndarray
    slope: float
    intercept: float
    r2: float
    predicted_slope: float
    balance_slope: float


def multiscale_deviation(result: GroundStateResult, field: ForceField, pot: PotentialSpec = COULOMB) -> MultiscaleFit:
    """Spacing deviations from ``L/N`` against the linear-in-``k`` law for a fixed constant force.

    ``predicted`` is the law ``F L^(1+b)/(1+b) N^(-b) (k - N/2)``;
    ``balance_slope`` is the slope from linearizing the exact force balance
    around uniform spacing, ``F L^(b+2) / (b (b+1) N^(b+2))``.
    """
    cfg = result.config
    N, L = cfg.N, cfg.L
    b = pot.exponent
    F = field.renormalized(pot) * field.params.get("a", 1.0)
    k = np.arange(1, N + 1, dtype=float)
    dev = cfg.spacings - L / N
    coeff = F * L ** (1 + b) / (1 + b) * N ** (-b)
    predicted = coeff * (k - N / 2)
    A = np.vstack([k - N / 2, np.ones_like(k)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, dev, rcond=None)
    fitted = A @ np.array([slope, intercept])
    ss_res = float(np.sum((dev - fitted) ** 2))
    ss_tot = float(np.sum((dev - dev.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    balance = F * L ** (b + 2) / (b * (b + 1) * N ** (b + 2))
    return MultiscaleFit(k, dev, predicted, float(slope), float(intercept), r2, coeff, balance)


def density_histogram(config: ChainConfig, bins: int):
    """Normalized histogram of particle positions over ``[-L, 0]``: ``(centers, rho)``.

    A particle on a bin edge (up to rounding) goes to the bin above it, so a
    lattice commensurate with the bins is counted evenly.
    """
    L = config.L
    width = L / bins
    u = (config.positions + L) / width
    idx = np.clip(np.floor(u + 1e-9).astype(int), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    rho = counts / (counts.sum() * width)
    centers = -L + width * (np.arange(bins) + 0.5)
    return centers, rho


def weak_contraction_edge(c: float, L: float, N: int, pot: PotentialSpec = COULOMB,
                          opts: Optional[SolverOptions] = None) -> float:
    """Bottom position ``x_N`` at renormalized constant force ``c N``."""
    res = solve_equilibrium(N, L, pot, ForceField.constant(1.0, scaling=(c, 1.0)), opts)
    if not res.converged:
        raise RuntimeError("equilibrium solve did not converge")
    return float(res.positions[-1])


def _feasible_directions(result: GroundStateResult, count: int, rng) -> list:
    x = result.positions
    top, bottom = x[0] == 0.0, x[-1] == -result.config.L
    dirs = []
    for _ in range(count):
        d = rng.standard_normal(x.size)
        if top:
            d[0] = 0.0
        if bottom:
            d[-1] = 0.0
        dirs.append(d / np.linalg.norm(d))
    return dirs


def is_local_minimum(result: GroundStateResult, pot: PotentialSpec, field: ForceField, tol: float = 1e-8,
                     directions: int = 20, seed=0) -> bool:
    """Projected-gradient residual plus centred second differences along random feasible directions."""
    if not result.converged or result.residual_norm > tol:
        return False
    x = result.positions
    L = result.config.L
    field = field.at_size(result.config.N, pot).on_interval(L)
    U0 = eval_energy(x, pot, field, L)
    eps = 1e-3 * float(np.min(x[:-1] - x[1:]))
    curv_scale = float(np.max(np.abs(eval_hessian_bands(x, pot, field)[0])))
    rng = np.random.default_rng(seed)
    for d in _feasible_directions(result, directions, rng):
        up = eval_energy(x + eps * d, pot, field, L)
        dn = eval_energy(x - eps * d, pot, field, L)
        curv = (up - 2 * U0 + dn) / eps ** 2
        noise = 8 * np.finfo(float).eps * abs(U0) / eps ** 2
        if curv < -max(1e-8 * curv_scale, noise):
            return False
    return True


def enumerate_tent_minima(N: int, c: float, seeds: int, rng_seed=0, field: Optional[ForceField] = None,
                          L: float = 2.0, pot: PotentialSpec = COULOMB, distinct_tol: float = 1e-6,
                          opts: Optional[SolverOptions] = None) -> list:
    """Distinct verified local minima reached from random Dirichlet starts.

    The default field is the tent with ``a = 1``, ``b_slope = 2`` centred in the
    interval ``[-L, 0]``, at renormalized amplitude ``c N``.
    """
    if field is None:
        field = ForceField.tent(1.0, 2.0, center=-L / 2, scaling=(c, 1.0))
    found = []
    for x0 in random_initial_configs(N, L, seeds, rng_seed):
        res = solve_equilibrium(N, L, pot, field, opts, x0)
        if not is_local_minimum(res, pot, field, tol=(opts or SolverOptions()).tol):
            continue
        if any(np.max(np.abs(res.positions - r.positions)) < distinct_tol for r in found):
            continue
        found.append(res)
    found.sort(key=lambda r: r.energy)
    return found
