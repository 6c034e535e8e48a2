"""Densities sampled on a uniform grid of ``[0, T]`` and their convolution powers.

A :class:`GridDensity` stores a smooth factor on the nodes; the represented
density is ``exp(log_scale) * t**left * (T - t)**right * values(t)``.  The two
edge exponents (default 0) carry integrable power singularities so that
quadrature near the ends can be done with exact product weights.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.special import beta as beta_fn

EDGE_CELLS = 64
# fourth-order Gregory end weights (the rest are 1); need at least 6 nodes
GREGORY = np.array([3 / 8, 7 / 6, 23 / 24])
SHORT_RULES = {2: np.array([1, 4, 1]) / 3, 3: np.array([1, 3, 3, 1]) * 3 / 8, 4: np.array([1, 4, 2, 4, 1]) / 3}


@dataclass(frozen=True)
class GridDensity:
    step: float
    values: np.ndarray
    log_scale: float = 0.0
    left: float = 0.0
    right: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("grid density needs at least two nodes")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("grid values must be finite and nonnegative")
        if not (self.left > -1 and self.right > -1):
            raise ValueError("edge exponents must be integrable (> -1)")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def length(self) -> float:
        return self.step * (self.size - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.size)

    @property
    def singular(self) -> bool:
        return self.left != 0 or self.right != 0

    def density(self) -> np.ndarray:
        """Represented density at the nodes (``inf`` at a singular end)."""
        t = self.nodes
        out = self.values * math.exp(self.log_scale)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.left:
                out = out * t ** self.left
            if self.right:
                out = out * (self.length - t) ** self.right
        return out

    def weights(self) -> np.ndarray:
        return quadrature_weights(self.size, self.step, self.left, self.right)

    def integrate(self, fn_values=None) -> float:
        """``int density(t) * fn(t) dt`` where ``fn_values`` are ``fn`` at the nodes."""
        v = self.values if fn_values is None else self.values * fn_values
        return float(np.dot(self.weights(), v)) * math.exp(self.log_scale)

    def mass(self) -> float:
        return self.integrate()

    def normalized(self) -> "GridDensity":
        w = float(np.dot(self.weights(), self.values))
        return GridDensity(self.step, self.values / w, 0.0, self.left, self.right)

    def rescaled(self) -> "GridDensity":
        """Fold the magnitude of ``values`` into ``log_scale``."""
        top = float(np.max(self.values))
        if top == 0:
            raise FloatingPointError("grid density vanished")
        return GridDensity(self.step, self.values / top, self.log_scale + math.log(top), self.left, self.right)

    def interpolator(self):
        """Interpolant of the smooth factor; linear when the factor may jump inside the grid."""
        if self.length <= 1.0 + 1e-12:
            return CubicSpline(self.nodes, self.values)
        t, v = self.nodes, self.values
        return lambda x: np.interp(x, t, v)


@lru_cache(maxsize=64)
def _cached_weights(n, step, left, right):
    L = step * (n - 1)
    t = step * np.arange(n)
    if not (left or right):
        w = np.full(n, step)
        if n >= 6:
            w[:3] *= GREGORY
            w[-3:] *= GREGORY[::-1]
        else:
            w[0] = w[-1] = 0.5 * step
        w.setflags(write=False)
        return w

    def factor(x):
        return (x ** left if left else 1.0) * ((L - x) ** right if right else 1.0)

    k = min(EDGE_CELLS, n - 1)
    edge = np.zeros(n - 1, bool)
    if left:
        edge[:k] = True
    if right:
        edge[n - 1 - k:] = True
    with np.errstate(divide="ignore"):
        f = factor(t)
    w = np.zeros(n)
    mid = np.flatnonzero(~edge)
    np.add.at(w, mid, 0.5 * step * f[mid])
    np.add.at(w, mid + 1, 0.5 * step * f[mid + 1])
    # cells next to a singular end get exact product weights
    for c in np.flatnonzero(edge):
        wl, wr = _cell_product_weights(t[c], t[c + 1], c == 0, c == n - 2, step, left, right, L)
        w[c] += wl
        w[c + 1] += wr
    w.setflags(write=False)
    return w


def _cell_product_weights(a, b, first, last, step, left, right, L):
    """``int_a^b x^left (L-x)^right hat(x) dx`` for the two linear hats of one cell."""
    pl = left if (first and left) else 0.0
    pr = right if (last and right) else 0.0
    # the part of the factor not absorbed into the algebraic weight
    def rest(x):
        out = 1.0
        if left and not pl:
            out *= x ** left
        if right and not pr:
            out *= (L - x) ** right
        return out

    # the alg weight (x-a)^pl (b-x)^pr is the exact factor because a = 0 or b = L there
    kw = dict(weight="alg", wvar=(pl, pr)) if (pl or pr) else {}
    wl = quad(lambda x: rest(x) * (b - x) / step, a, b, epsabs=0.0, epsrel=1e-12, limit=200, **kw)[0]
    wr = quad(lambda x: rest(x) * (x - a) / step, a, b, epsabs=0.0, epsrel=1e-12, limit=200, **kw)[0]
    return wl, wr


def quadrature_weights(n: int, step: float, left: float = 0.0, right: float = 0.0) -> np.ndarray:
    """Gregory (end-corrected trapezoid) weights, or trapezoid with exact product
    weights next to singular ends."""
    return _cached_weights(int(n), float(step), float(left), float(right))


def _fft_convolve(a: GridDensity, b: GridDensity) -> GridDensity:
    """Nodal convolution with the Gregory rule on each ``[0, t_i]``.

    The weights depend only on the node index, so a common factor ``exp(-lam t)``
    passes through exactly and the result is tilt covariant.
    """
    av, bv = a.values, b.values
    n = av.size
    full = fftconvolve(av, bv)[:n]
    corr = np.empty(n)
    corr[:5] = -0.5 * (av[0] * bv[:5] + bv[0] * av[:5])
    # short intervals: Simpson (2 and 4 cells) and the 3/8 rule (3 cells)
    for i, w in SHORT_RULES.items():
        if i < n:
            prod = av[: i + 1] * bv[i::-1]
            corr[i] = float(np.dot(w, prod)) - float(np.sum(prod))
    if n > 5:
        i = np.arange(5, n)
        c = np.zeros(n - 5)
        for k, w in enumerate(GREGORY):
            c += (w - 1.0) * (av[k] * bv[i - k] + av[i - k] * bv[k])
        corr[5:] = c
    out = np.clip((full + corr) * a.step, 0.0, None)
    return GridDensity(a.step, out, a.log_scale + b.log_scale).rescaled()


def _singular_convolve(a: GridDensity, b: GridDensity) -> GridDensity:
    """Per-node algebraic-weight quadrature for factors singular at the origin."""
    if a.right or b.right:
        raise ValueError("convolution needs densities regular at the right end")
    pa, pb = a.left, b.left
    q = pa + pb + 1.0
    fa, fb = a.interpolator(), b.interpolator()
    t = a.nodes
    out = np.empty(a.size)
    with warnings.catch_warnings():
        # roundoff flags near the singular end; accuracy is set by the interpolant anyway
        warnings.simplefilter("ignore", IntegrationWarning)
        for i, ti in enumerate(t):
            if i == 0:
                continue
            f = lambda u: float(fa(u)) * float(fb(ti - u))
            val = quad(f, 0.0, ti, weight="alg", wvar=(pa, pb), epsabs=1e-14 * ti, epsrel=1e-10, limit=200)[0]
            out[i] = val / ti ** q if q < 0 else val
    origin = float(fa(0.0)) * float(fb(0.0)) * beta_fn(pa + 1.0, pb + 1.0)
    if q < 0:
        out[0] = origin
        res = GridDensity(a.step, np.clip(out, 0, None), a.log_scale + b.log_scale, left=q)
    else:
        out[0] = origin if q == 0 else 0.0
        res = GridDensity(a.step, np.clip(out, 0, None), a.log_scale + b.log_scale)
    return res.rescaled()


def convolve(a: GridDensity, b: GridDensity) -> GridDensity:
    """``(a * b)(t) = int_0^t a(s) b(t - s) ds`` at every node; exact restriction to the grid."""
    if a.size != b.size or a.step != b.step:
        raise ValueError("convolution needs densities on the same grid")
    if a.singular or b.singular:
        return _singular_convolve(a, b)
    return _fft_convolve(a, b)


def convolve_power(g: GridDensity, n: int, sigma_target: float | None = None,
                   resolution: float = 16.0) -> GridDensity:
    """``g^{*n}`` on the grid of ``g`` by repeated squaring.

    When ``sigma_target`` is given the grid must resolve it: ``step <= sigma_target / resolution``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if sigma_target is not None and g.step > sigma_target / resolution * (1 + 1e-12):
        raise ValueError(f"grid step {g.step:g} too coarse for target width {sigma_target:g}")
    result = None
    power = g.rescaled()
    k = n
    while True:
        if k & 1:
            result = power if result is None else convolve(result, power)
        k >>= 1
        if not k:
            break
        power = convolve(power, power)
    return result


def tilted_grid(g, lam: float, log_z: float, step: float, length: float = 1.0) -> GridDensity:
    """Sample ``h_lam = exp(-lam x) g(x) / z(lam)`` on ``[0, length]`` in the log domain.

    When the grid extends past 1 the value at the node ``x = 1`` is halved, so
    trapezoid sums see the jump of the density at the midpoint of its two limits.
    """
    m = int(round(length / step))
    t = step * np.arange(m + 1)
    inside = t <= 1.0 + 1e-12
    x = np.minimum(t, 1.0)
    left = g.edge_exponent
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if left:
            logv = g.log_smooth(x) - lam * x - log_z
        else:
            logv = g.logpdf(x) - lam * x - log_z
        v = np.where(inside, np.exp(logv), 0.0)
    v[~np.isfinite(v)] = 0.0
    if length > 1.0 + 1e-12:
        j = int(round(1.0 / step))
        if abs(j * step - 1.0) < 1e-9 * step:
            v[j] *= 0.5
    return GridDensity(step, v, 0.0, left=left)
