"""Moments of the exponentially tilted family ``h_lam(x) = exp(-lam x) g(x) / z(lam)``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .densities import GibbsDensity

EPSREL = 1e-13


@dataclass(frozen=True)
class TiltSolution:
    lam: float
    z: float
    log_z: float
    m: float
    sigma2: float
    a4: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def _scalar_log_smooth(g: GibbsDensity):
    """Fast scalar version of ``g.log_smooth`` for use inside ``quad``."""
    ln, beta, spline = g.log_norm, g.beta, g.modulation
    if spline is None:
        if beta > 0:
            return lambda x: ln - beta / x
        return lambda x: ln
    if beta > 0:
        return lambda x: ln + float(spline(x)) - beta / x
    return lambda x: ln + float(spline(x))


def _mode_and_width(g: GibbsDensity, lam: float):
    a1, beta = g.alpha - 1.0, g.beta
    if beta > 0:
        if lam > 0:
            x = (a1 + math.sqrt(a1 * a1 + 4 * lam * beta)) / (2 * lam)
        else:
            x = beta / -a1 if a1 < 0 else 1.0
        x = min(max(x, 1e-300), 1.0)
        curv = abs(a1 / x ** 2 + 2 * beta / x ** 3)
        return x, min(1.0, 1.0 / math.sqrt(curv)) if curv > 0 else 1.0
    width = max(g.alpha, 1.0) / lam if lam > 0 else 1.0
    return 0.0, min(width, 1.0)


def _breakpoints(center, width):
    pts = {1.0}
    for k in range(-12, 40):
        for sgn in (-1.0, 1.0):
            p = center + sgn * width * 2.0 ** (k / 2)
            if 0.0 < p < 1.0:
                pts.add(p)
    if center > 0:
        for k in range(1, 60):
            p = center * 2.0 ** -k
            if p < 1e-300:
                break
            pts.add(p)
    return [0.0] + sorted(pts)


class _TiltIntegrator:
    """Integrals ``int_0^1 q(x) exp(-lam x) g(x) dx`` scaled by a log offset near the peak."""

    def __init__(self, g: GibbsDensity, lam: float):
        self.g, self.lam = g, float(lam)
        center, width = _mode_and_width(g, lam)
        self.pts = _breakpoints(center, width)
        # integrand peaks near 1 after the offset, so the total is at least ~width
        self.epsabs = 1e-16 * width
        ls = _scalar_log_smooth(g)
        a1, lam_ = g.alpha - 1.0, self.lam
        self.edge = g.edge_exponent
        probe = [p for p in self.pts[1:]] + ([center] if center > 0 else [])
        self.offset = max(ls(p) + a1 * math.log(p) - lam_ * p for p in probe)
        off = self.offset
        if self.edge < 0:
            self.first = lambda x: math.exp(ls(x) - lam_ * x - off) if x > 0 else math.exp(ls(0.0) - off)
        self.full = lambda x: math.exp(ls(x) + a1 * math.log(x) - lam_ * x - off) if x > 0 else 0.0

    def integrate(self, q=None):
        total = 0.0
        pts = self.pts
        for i, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
            if i == 0 and self.edge < 0:
                f = self.first if q is None else (lambda x: q(x) * self.first(x))
                val = quad(f, a, b, weight="alg", wvar=(self.edge, 0.0), epsabs=self.epsabs, epsrel=EPSREL, limit=200)[0]
            else:
                f = self.full if q is None else (lambda x: q(x) * self.full(x))
                val = quad(f, a, b, epsabs=self.epsabs, epsrel=EPSREL, limit=200)[0]
            total += val
        return total


def tilt_moments(g: GibbsDensity, lam: float) -> TiltSolution:
    """Partition function, mean, variance and normalized fourth moment of ``h_lam``."""
    if lam < 0:
        raise ValueError("negative tilts are not supported")
    ti = _TiltIntegrator(g, lam)
    i0 = ti.integrate()
    if not i0 > 0:
        raise FloatingPointError(f"tilted partition function vanished at lam={lam:g}")
    m = ti.integrate(lambda x: x) / i0
    c2 = ti.integrate(lambda x: (x - m) ** 2) / i0
    c4 = ti.integrate(lambda x: (x - m) ** 4) / i0
    log_z = math.log(i0) + ti.offset
    return TiltSolution(float(lam), math.exp(log_z) if log_z > -745 else 0.0, log_z, m, c2, c4 / c2 ** 2)


def tilt_mean(g: GibbsDensity, lam: float) -> float:
    ti = _TiltIntegrator(g, lam)
    return ti.integrate(lambda x: x) / ti.integrate()


def solve_tilt_lambda(g: GibbsDensity, N: int, atol: float = 1e-12, max_lambda: float = 1e18) -> TiltSolution:
    """Unique tilt whose mean equals ``1/N``, by bracket doubling then bisection.

    Monotonicity of the mean in the tilt is asserted along the whole path.
    """
    target = 1.0 / N
    m0 = tilt_mean(g, 0.0)
    if abs(m0 - target) <= atol:
        return tilt_moments(g, 0.0)
    if target > m0:
        raise ValueError(f"1/N = {target:g} exceeds the untilted mean {m0:g}; negative tilts are out of scope")
    path = [(0.0, m0)]

    def mean_at(lam):
        m = tilt_mean(g, lam)
        path.append((lam, m))
        return m

    lo, hi = 0.0, max(1.0, 0.5 * N)
    while mean_at(hi) > target:
        lo, hi = hi, 2.0 * hi
        if hi > max_lambda:
            raise RuntimeError("tilt bracket exceeded the configured range")
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        m = mean_at(mid)
        if abs(m - target) <= atol:
            lo = hi = mid
            break
        if m > target:
            lo = mid
        else:
            hi = mid
    path.sort()
    ms = np.array([p[1] for p in path])
    if np.any(np.diff(ms) >= 0):
        raise RuntimeError("tilted mean is not strictly decreasing along the bisection path")
    return tilt_moments(g, 0.5 * (lo + hi))
