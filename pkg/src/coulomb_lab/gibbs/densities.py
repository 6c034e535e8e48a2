"""Spacing densities on (0, 1] with small-x behaviour ``c0 x^(alpha-1) exp(-beta/x)``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class GibbsDensity:
    """Normalized density ``g(x) = x^(alpha-1) exp(-beta/x) s(x) / Z`` on ``(0, 1]``.

    ``s`` is a positive smooth modulation (identically 1 for the built-in
    families) and ``c0 = s(0) / Z`` is the small-x prefactor.
    """

    alpha: float
    beta: float
    c0: float
    kind: str
    log_norm: float
    modulation: Optional[CubicSpline] = field(default=None, repr=False, compare=False)
    normalized: bool = True

    def log_smooth(self, x):
        """``log g(x) - (alpha-1) log x`` (finite at 0 when beta = 0)."""
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.log_norm)
        if self.modulation is not None:
            out = out + self.modulation(np.clip(x, 0.0, 1.0))
        if self.beta > 0:
            with np.errstate(divide="ignore"):
                out = out - self.beta / x
        return out

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.log_smooth(x) + (self.alpha - 1.0) * np.log(x)
        if self.beta > 0 or self.alpha > 1:
            out = np.where(x > 0, out, -np.inf)
        elif self.alpha == 1:
            out = np.where(x > 0, out, self.log_smooth(np.zeros_like(x)))
        else:
            out = np.where(x > 0, out, np.inf)
        return np.where((x < 0) | (x > 1), -np.inf, out)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def __call__(self, x):
        return self.pdf(x)

    @property
    def edge_exponent(self) -> float:
        """Power of the small-x singularity that quadrature has to treat analytically."""
        return self.alpha - 1.0 if (self.beta == 0 and self.alpha < 1) else 0.0


def _log_partition(alpha, beta, log_s):
    """log of ``int_0^1 x^(alpha-1) exp(-beta/x) exp(log_s(x)) dx``."""
    if beta > 0:
        # peak of -beta/x + (alpha-1) log x sits at x = beta/(1-alpha) when alpha < 1
        xs = np.geomspace(1e-4, 1.0, 200)
        phi = -beta / xs + (alpha - 1) * np.log(xs) + log_s(xs)
        off = float(np.max(phi))
        f = lambda x: np.exp(-beta / x + (alpha - 1) * np.log(x) + log_s(x) - off) if x > 0 else 0.0
        pts = [p for p in (1e-3, 1e-2, 0.1) if p < 1]
        val = quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=400, points=pts)[0]
        return np.log(val) + off
    if alpha <= 0:
        raise ValueError("beta = 0 requires alpha > 0 for integrability")
    f = lambda x: np.exp(log_s(x))
    val = quad(f, 0.0, 1.0, weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return float(np.log(val))


def make_gibbs_density(kind: str, alpha: float = 1.0, beta: float = 0.0, samples=None) -> GibbsDensity:
    """Build one of the families ``pure_power(alpha)``, ``coulomb(beta)``, ``tabulated(alpha, beta, samples)``.

    ``samples`` are positive values of the modulation ``s`` on equispaced nodes of [0, 1].
    """
    if kind == "pure_power":
        if not alpha > 0:
            raise ValueError("pure_power needs alpha > 0")
        return GibbsDensity(float(alpha), 0.0, float(alpha), kind, float(np.log(alpha)))
    if kind == "coulomb":
        if not beta > 0:
            raise ValueError("coulomb needs beta > 0")
        log_z = _log_partition(1.0, float(beta), lambda x: 0.0 * np.asarray(x))
        return GibbsDensity(1.0, float(beta), float(np.exp(-log_z)), kind, -log_z)
    if kind == "tabulated":
        if beta < 0 or (beta == 0 and not alpha > 0):
            raise ValueError("non-integrable parameters: need beta > 0, or beta = 0 with alpha > 0")
        s = np.asarray(samples, dtype=float)
        if s.ndim != 1 or s.size < 2 or np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("tabulated samples must be a finite positive 1-D sequence")
        spline = CubicSpline(np.linspace(0.0, 1.0, s.size), np.log(s))
        log_z = _log_partition(float(alpha), float(beta), spline)
        c0 = float(np.exp(spline(0.0) - log_z))
        return GibbsDensity(float(alpha), float(beta), c0, kind, -log_z, spline)
    raise ValueError(f"unknown density family {kind!r}")


def pure_power(alpha: float) -> GibbsDensity:
    return make_gibbs_density("pure_power", alpha=alpha)


def coulomb(beta: float) -> GibbsDensity:
    return make_gibbs_density("coulomb", beta=beta)
