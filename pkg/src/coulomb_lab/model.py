"""Chain configurations, pair potential, external force fields, energy and gradient.

Positions are stored in descending order on ``[-L, 0]``: ``x[0]`` is the top
particle (pinnable at 0) and ``x[N]`` the bottom one (pinnable at ``-L``).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad


@dataclass(frozen=True)
class PotentialSpec:
    """Repulsive power potential ``V(u) = coupling * u**(-exponent)`` for ``u > 0``."""

    exponent: float = 1.0
    coupling: float = 1.0

    def __post_init__(self):
        if not (self.exponent > 0 and self.coupling > 0):
            raise ValueError("potential exponent and coupling must be positive")

    def value(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.coupling * u ** (-self.exponent)
        return np.where(u > 0, out, np.inf)

    def d1(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -self.exponent * self.coupling * u ** (-self.exponent - 1.0)

    def d2(self, u):
        u = np.asarray(u, dtype=float)
        b = self.exponent
        with np.errstate(divide="ignore", invalid="ignore"):
            return b * (b + 1.0) * self.coupling * u ** (-b - 2.0)


COULOMB = PotentialSpec(1.0, 1.0)


@dataclass(frozen=True)
class ForceField:
    """External force ``amplitude * F0(x)``.

    ``shape`` is one of ``constant``, ``tent``, ``monotone_table`` or ``custom``;
    ``params`` holds the shape parameters.  ``scaling = (c, gamma)`` describes a
    renormalized amplitude ``c * N**gamma`` used by :meth:`at_size`.
    """

    shape: str
    params: dict = field(default_factory=dict)
    amplitude: float = 1.0
    scaling: Optional[tuple] = None
    lower: float = -1.0

    def __post_init__(self):
        if self.shape not in ("constant", "tent", "monotone_table", "custom"):
            raise ValueError(f"unknown force shape {self.shape!r}")
        if self.amplitude < 0:
            raise ValueError("force amplitude must be nonnegative")
        if self.shape == "tent":
            a, b = self.params["a"], self.params["b_slope"]
            if not b > a > 0:
                raise ValueError("tent shape needs b_slope > a > 0")
        if self.shape == "monotone_table":
            xs = np.asarray(self.params["x"], dtype=float)
            ys = np.asarray(self.params["values"], dtype=float)
            if xs.ndim != 1 or xs.shape != ys.shape or np.any(np.diff(xs) <= 0):
                raise ValueError("table nodes must be strictly increasing and match values")
            if np.any(ys < 0):
                raise ValueError("table force must be nonnegative")
            d = np.diff(ys)
            if not (np.all(d >= 0) or np.all(d <= 0)):
                raise ValueError("table force must be monotone")

    # -- constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, a=1.0, amplitude=1.0, scaling=None):
        if a < 0:
            raise ValueError("constant force must be nonnegative")
        return cls("constant", {"a": float(a)}, amplitude, scaling)

    @classmethod
    def zero(cls):
        return cls.constant(0.0, 0.0)

    @classmethod
    def tent(cls, a=1.0, b_slope=2.0, center=0.0, amplitude=1.0, scaling=None):
        """Tent with peak ``a`` at ``center``: slope ``-2a`` above it and ``2*b_slope`` below."""
        return cls("tent", {"a": float(a), "b_slope": float(b_slope), "center": float(center)},
                   amplitude, scaling)

    @classmethod
    def table(cls, x, values, amplitude=1.0, scaling=None):
        return cls("monotone_table", {"x": tuple(map(float, x)), "values": tuple(map(float, values))},
                   amplitude, scaling)

    @classmethod
    def custom(cls, fn: Callable[[float], float], amplitude=1.0, scaling=None, derivative=None):
        return cls("custom", {"fn": fn, "derivative": derivative}, amplitude, scaling)

    # -- scaling --------------------------------------------------------------
    def renormalized(self, pot: PotentialSpec) -> float:
        return self.amplitude / pot.coupling

    def with_renormalized(self, value: float, pot: PotentialSpec) -> "ForceField":
        return replace(self, amplitude=float(value) * pot.coupling)

    def at_size(self, N: int, pot: PotentialSpec) -> "ForceField":
        """Field whose renormalized amplitude is ``c * N**gamma``."""
        if self.scaling is None:
            return self
        c, gamma = self.scaling
        return self.with_renormalized(c * float(N) ** gamma, pot)

    def on_interval(self, L: float) -> "ForceField":
        """Bind the lower integration limit ``-L`` used by the potential of the force."""
        return replace(self, lower=-float(L))

    # -- evaluation -----------------------------------------------------------
    def shape_value(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.shape == "constant":
            return np.full_like(x, p["a"])
        if self.shape == "tent":
            y = x - p["center"]
            return np.where(y >= 0, p["a"] - 2 * p["a"] * y, p["a"] + 2 * p["b_slope"] * y)
        if self.shape == "monotone_table":
            return np.interp(x, p["x"], p["values"])
        return np.vectorize(p["fn"], otypes=[float])(x)

    def shape_slope(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.shape == "constant":
            return np.zeros_like(x)
        if self.shape == "tent":
            y = x - p["center"]
            return np.where(y >= 0, -2 * p["a"], 2 * p["b_slope"])
        if self.shape == "monotone_table":
            xs, ys = np.asarray(p["x"]), np.asarray(p["values"])
            k = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
            s = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
            return np.where((x < xs[0]) | (x > xs[-1]), 0.0, s)
        if p.get("derivative") is not None:
            return np.vectorize(p["derivative"], otypes=[float])(x)
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self.shape_value(x + h) - self.shape_value(x - h)) / (2 * h)

    def __call__(self, x):
        return self.amplitude * self.shape_value(x)

    def shape_integral(self, x):
        """``int_{lower}^{x} F0(s) ds`` (closed form except for ``custom``)."""
        x = np.asarray(x, dtype=float)
        lo = self.lower
        p = self.params
        if self.shape == "constant":
            return p["a"] * (x - lo)
        if self.shape == "tent":
            return self._tent_antiderivative(x) - self._tent_antiderivative(np.asarray(lo))
        if self.shape == "monotone_table":
            return self._table_antiderivative(x) - self._table_antiderivative(np.asarray(lo))
        fn = p["fn"]
        out = [quad(fn, lo, xi, epsabs=0.0, epsrel=1e-10, limit=200)[0] for xi in np.ravel(x)]
        return np.reshape(out, x.shape)

    def _tent_antiderivative(self, x):
        p = self.params
        a, b, c = p["a"], p["b_slope"], p["center"]
        y = x - c
        return np.where(y >= 0, a * y - a * y * y, a * y + b * y * y)

    def _table_antiderivative(self, x):
        xs = np.asarray(self.params["x"])
        ys = np.asarray(self.params["values"])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))])
        xc = np.clip(x, xs[0], xs[-1])
        k = np.clip(np.searchsorted(xs, xc, side="right") - 1, 0, len(xs) - 2)
        dx = xc - xs[k]
        slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
        inside = cum[k] + ys[k] * dx + 0.5 * slope * dx * dx
        # constant extrapolation outside the table
        return inside + ys[0] * np.minimum(x - xs[0], 0.0) + ys[-1] * np.maximum(x - xs[-1], 0.0)

    def is_monotone_nonnegative(self) -> bool:
        return self.shape in ("constant", "monotone_table")


@dataclass(frozen=True)
class ChainConfig:
    """Ordered positions ``x_0 >= x_1 >= ... >= x_N`` on ``[-L, 0]``."""

    positions: np.ndarray
    L: float
    pinned_top: bool = False
    pinned_bottom: bool = False

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a chain needs at least two particles")
        if not self.L > 0:
            raise ValueError("interval length must be positive")

    @classmethod
    def uniform(cls, N: int, L: float) -> "ChainConfig":
        return cls(-L * np.arange(N + 1) / N, L, True, True)

    @classmethod
    def from_positions(cls, x, L: float) -> "ChainConfig":
        x = np.asarray(x, dtype=float)
        return cls(x, L, bool(x[0] == 0.0), bool(x[-1] == -L))

    @property
    def N(self) -> int:
        return self.positions.size - 1

    @property
    def spacings(self) -> np.ndarray:
        return self.positions[:-1] - self.positions[1:]

    def validate(self) -> "ChainConfig":
        x = self.positions
        if np.any(np.diff(x) >= 0):
            raise ValueError("positions must be strictly decreasing")
        if x[0] > 0 or x[-1] < -self.L:
            raise ValueError("positions must lie in [-L, 0]")
        if self.pinned_top and x[0] != 0.0:
            raise ValueError("top pin requires x_0 = 0")
        if self.pinned_bottom and x[-1] != -self.L:
            raise ValueError("bottom pin requires x_N = -L")
        return self


def _as_positions(config) -> np.ndarray:
    return config.positions if isinstance(config, ChainConfig) else np.asarray(config, dtype=float)


def eval_energy(config, pot: PotentialSpec, field: ForceField, L: Optional[float] = None) -> float:
    """Total energy: pair term over neighbours minus the work of the external force.

    Returns ``inf`` when two neighbours touch or cross, so line searches can
    reject such steps without an exception.
    """
    x = _as_positions(config)
    if L is None:
        L = config.L
    d = x[:-1] - x[1:]
    if np.any(d <= 0):
        return np.inf
    pair = float(np.sum(pot.value(d)))
    if field.amplitude == 0:
        return pair
    work = field.amplitude * float(np.sum(field.on_interval(L).shape_integral(x)))
    return pair - work


def eval_gradient(config, pot: PotentialSpec, field: ForceField) -> np.ndarray:
    """Partial derivatives of :func:`eval_energy` with respect to every position."""
    x = _as_positions(config)
    d = x[:-1] - x[1:]
    v1 = pot.d1(d)
    g = np.zeros_like(x)
    g[1:] -= v1
    g[:-1] += v1
    if field.amplitude != 0:
        g -= field(x)
    return g


def eval_hessian_bands(x, pot: PotentialSpec, field: ForceField):
    """Diagonal and first off-diagonal of the (tridiagonal) energy Hessian."""
    x = np.asarray(x, dtype=float)
    v2 = pot.d2(x[:-1] - x[1:])
    diag = np.zeros_like(x)
    diag[1:] += v2
    diag[:-1] += v2
    if field.amplitude != 0:
        diag -= field.amplitude * field.shape_slope(x)
    return diag, -v2
