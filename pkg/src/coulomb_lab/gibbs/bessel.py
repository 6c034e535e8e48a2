"""Modified Bessel function of the second kind by quadrature, and the Laplace-type integral it closes."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad


def _log_cosh(x):
    x = abs(x)
    return x + math.log1p(math.exp(-2 * x)) - math.log(2.0)


def bessel_K(alpha: float, z: float, scaled: bool = False) -> float:
    """``K_alpha(z)``; with ``scaled=True`` returns ``exp(z) K_alpha(z)`` to avoid underflow.

    Uses ``x = e^t`` in the half-line integral, giving
    ``exp(z) K = int_0^inf cosh(alpha t) exp(-z (cosh t - 1)) dt``.
    """
    if not z > 0:
        raise ValueError("z must be positive")
    a = abs(float(alpha))

    def logf(t):
        return _log_cosh(a * t) - z * (math.cosh(t) - 1.0) if t < 700 else -math.inf

    # peak of alpha t - z (cosh t - 1)  is at sinh t = alpha / z
    t_peak = math.asinh(a / z)
    peak = logf(t_peak)
    t_end = max(2 * t_peak, 1.0)
    while logf(t_end) > peak - 60.0:
        t_end *= 1.5
    f = lambda t: math.exp(logf(t) - peak)
    pts = [p for p in (t_peak, t_peak + 1.0 / math.sqrt(z + a + 1.0)) if 0 < p < t_end]
    val = quad(f, 0.0, t_end, points=pts or None, epsabs=0.0, epsrel=1e-13, limit=400)[0]
    log_val = math.log(val) + peak
    return math.exp(log_val) if scaled else math.exp(log_val - z)


def laplace_integral(lam: float, beta: float, alpha: float, log: bool = False) -> float:
    """``int_0^inf exp(-lam x - beta/x) x^(alpha-1) dx`` by direct quadrature in ``s = log x``."""
    if not (lam > 0 and beta > 0):
        raise ValueError("lam and beta must be positive")
    s0 = math.log((alpha + math.sqrt(alpha * alpha + 4 * lam * beta)) / (2 * lam))

    def phi(s):
        return alpha * s - lam * math.exp(s) - beta * math.exp(-s)

    peak = phi(s0)
    curv = lam * math.exp(s0) + beta * math.exp(-s0)
    w = 1.0 / math.sqrt(curv)
    lo, hi = s0 - w, s0 + w
    while phi(lo) > peak - 60.0:
        lo -= 2 * (s0 - lo)
    while phi(hi) > peak - 60.0:
        hi += 2 * (hi - s0)
    f = lambda s: math.exp(phi(s) - peak)
    val = quad(f, lo, hi, points=[s0 - w, s0, s0 + w], epsabs=0.0, epsrel=1e-13, limit=400)[0]
    out = math.log(val) + peak
    return out if log else math.exp(out)


def bessel_identity_rhs(lam: float, beta: float, alpha: float, log: bool = False) -> float:
    """Closed-form side ``2 (beta/lam)^(alpha/2) K_alpha(2 sqrt(lam beta))`` of the Laplace integral."""
    z = 2.0 * math.sqrt(lam * beta)
    out = math.log(2.0) + 0.5 * alpha * math.log(beta / lam) + math.log(bessel_K(alpha, z, scaled=True)) - z
    return out if log else math.exp(out)


def bessel_K_asymptotic(alpha: float, z: float, scaled: bool = False) -> float:
    """Two-term large-argument expansion ``sqrt(pi/(2z)) e^{-z} (1 + (4 alpha^2 - 1)/(8 z))``."""
    val = math.sqrt(math.pi / (2 * z)) * (1.0 + (4 * alpha * alpha - 1.0) / (8 * z))
    return val if scaled else val * math.exp(-z)


def partition_prefactor_ratio(lam: float, beta: float, alpha: float) -> float:
    """Ratio of ``int_0^inf exp(-lam x - beta/x) x^(alpha-1) dx`` to the leading-order form
    ``sqrt(pi/2) (beta/lam)^(alpha/2) exp(-2 sqrt(lam beta)) / (lam beta)^(1/4)``.

    Tends to ``sqrt(2)`` for large ``lam beta``: the leading prefactor obtained from the Bessel
    representation is ``sqrt(pi)``.
    """
    log_ref = (0.5 * math.log(math.pi / 2) + 0.5 * alpha * math.log(beta / lam)
               - 2 * math.sqrt(lam * beta) - 0.25 * math.log(lam * beta))
    return float(np.exp(laplace_integral(lam, beta, alpha, log=True) - log_ref))
