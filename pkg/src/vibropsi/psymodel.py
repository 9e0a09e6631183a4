"""Weibull psychometric-function family, discrete parameter grid, and curve utilities.

The model family is

    psi(x) = gamma + (1 - delta - gamma) * (1 - 2**(-(x / a)**b))

with threshold ``a`` (mm), slope ``b``, guess rate ``gamma`` and a fixed
lapse ``delta``.  The estimation grid enumerates all (a, b, gamma)
combinations; delta is shared by every cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class _NotReached:
    """Sentinel: the requested recognition level is never met on the range."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NOT_REACHED"

    def __bool__(self):
        return False


NOT_REACHED = _NotReached()


class NonMonotoneCurveError(ValueError):
    """Sampled curve handed to an inversion is not nondecreasing."""


@dataclass(frozen=True)
class WeibullParams:
    """One candidate psychometric function."""

    a: float  # threshold, mm
    b: float  # slope
    gamma: float  # guess rate
    delta: float  # lapse

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"threshold a must be positive, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"slope b must be positive, got {self.b}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"guess rate must lie in (0, 1), got {self.gamma}")
        if not 0 <= self.delta < 1:
            raise ValueError(f"lapse must lie in [0, 1), got {self.delta}")
        if not self.gamma + self.delta < 1:
            raise ValueError(
                f"gamma + delta must stay below 1, got {self.gamma + self.delta}"
            )


def eval_weibull(params: WeibullParams, x):
    """Recognition rate of `params` at separation(s) ``x`` (mm, >= 0)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("separation must be nonnegative")
    span = 1.0 - params.delta - params.gamma
    with np.errstate(over="ignore"):
        val = params.gamma + span * (1.0 - 2.0 ** (-((arr / params.a) ** params.b)))
    if np.isscalar(x) or arr.ndim == 0:
        return float(val)
    return val


@dataclass(frozen=True)
class GridConfig:
    """Bounds and step counts for the estimation grid (defaults: 90,000 cells)."""

    a_min: float = 2.5
    a_max: float = 45.0
    a_count: int = 18
    b_min: float = 0.01
    b_max: float = 10.0
    b_count: int = 50
    b_spacing: str = "linear"  # "linear" or "log"
    gamma_min: float = 0.01
    gamma_max: float = 0.99
    gamma_count: int = 100
    delta: float = 0.02

    def __post_init__(self):
        if self.b_spacing not in ("linear", "log"):
            raise ValueError(f"unknown slope spacing {self.b_spacing!r}")
        for name in ("a", "b", "gamma"):
            lo = getattr(self, name + "_min")
            hi = getattr(self, name + "_max")
            n = getattr(self, name + "_count")
            if not (lo > 0 and hi > lo):
                raise ValueError(f"{name} bounds must satisfy 0 < min < max")
            if n < 2:
                raise ValueError(f"{name}_count must be >= 2")
        if self.gamma_max >= 1:
            raise ValueError("gamma upper bound must stay below 1")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        # note: gamma_max + delta may exceed 1 (the default grid's top guess
        # rates do); those cells have a slightly inverted curve and are kept
        # so the full 90,000-cell lattice matches the published bounds


@dataclass(frozen=True)
class ParameterGrid:
    """Discrete (a, b, gamma) lattice with a shared lapse."""

    a_values: np.ndarray
    b_values: np.ndarray
    gamma_values: np.ndarray
    delta: float

    def __post_init__(self):
        for name in ("a_values", "b_values", "gamma_values"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1 or arr.size < 1:
                raise ValueError(f"{name} must be a 1-D sequence")
            if not np.all(np.diff(arr) > 0):
                raise ValueError(f"{name} must be strictly increasing")
        if self.a_values[0] <= 0 or self.b_values[0] <= 0:
            raise ValueError("thresholds and slopes must be positive")
        if self.gamma_values[0] <= 0 or self.gamma_values[-1] >= 1:
            raise ValueError("guess rates must lie in (0, 1)")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")

    @property
    def shape(self) -> tuple:
        return (self.a_values.size, self.b_values.size, self.gamma_values.size)

    @property
    def size(self) -> int:
        return self.a_values.size * self.b_values.size * self.gamma_values.size

    def cell(self, i: int, j: int, k: int) -> WeibullParams:
        return WeibullParams(
            float(self.a_values[i]),
            float(self.b_values[j]),
            float(self.gamma_values[k]),
            self.delta,
        )

    def psi_field(self, x: float) -> np.ndarray:
        """psi(x) for every grid cell, shape (|a|, |b|, |gamma|)."""
        if x < 0:
            raise ValueError("separation must be nonnegative")
        a = self.a_values[:, None, None]
        b = self.b_values[None, :, None]
        g = self.gamma_values[None, None, :]
        with np.errstate(over="ignore"):
            core = 1.0 - 2.0 ** (-((x / a) ** b))
        return g + (1.0 - self.delta - g) * core


def build_grid(config: GridConfig | None = None) -> ParameterGrid:
    """Construct the parameter grid; the default config yields 90,000 cells."""
    cfg = config or GridConfig()
    a = np.linspace(cfg.a_min, cfg.a_max, cfg.a_count)
    if cfg.b_spacing == "log":
        b = np.geomspace(cfg.b_min, cfg.b_max, cfg.b_count)
    else:
        b = np.linspace(cfg.b_min, cfg.b_max, cfg.b_count)
    g = np.linspace(cfg.gamma_min, cfg.gamma_max, cfg.gamma_count)
    return ParameterGrid(a, b, g, cfg.delta)


@dataclass(frozen=True)
class CurveSamples:
    """A psychometric curve evaluated on a fixed separation grid."""

    x_values: np.ndarray
    y_values: np.ndarray
    se_values: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x_values, dtype=float)
        # absorb interpolation/rounding excursions just outside [0, 1]
        y = np.clip(np.asarray(self.y_values, dtype=float), 0.0, 1.0)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x_values and y_values must be matching 1-D arrays")
        if not np.all(np.diff(x) > 0):
            raise ValueError("x_values must be strictly increasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x_values", x)
        object.__setattr__(self, "y_values", y)
        if self.se_values is not None:
            se = np.asarray(self.se_values, dtype=float)
            if se.shape != x.shape:
                raise ValueError("se_values must match the x grid")
            se.setflags(write=False)
            object.__setattr__(self, "se_values", se)

    def interp(self, x) -> np.ndarray:
        """Piecewise-linear interpolation on the sampled grid."""
        return np.interp(x, self.x_values, self.y_values)


# exported curves are sampled on [0, 45] mm at 0.1 mm
EXPORT_X_GRID = np.round(np.arange(0, 451) * 0.1, 10)
EXPORT_X_GRID.setflags(write=False)


def _invert_weibull(params: WeibullParams, level: float, x_range) -> Union[float, _NotReached]:
    lo, hi = x_range
    if level <= params.gamma:
        return float(max(lo, 0.0))
    if level >= 1.0 - params.delta:
        return NOT_REACHED
    ratio = (1.0 - params.delta - params.gamma) / (1.0 - params.delta - level)
    x = params.a * math.log2(ratio) ** (1.0 / params.b)
    if x > hi:
        return NOT_REACHED
    return float(max(x, lo))


def _invert_samples(curve: CurveSamples, level: float) -> Union[float, _NotReached]:
    y = curve.y_values
    if np.any(np.diff(y) < -1e-9):
        raise NonMonotoneCurveError("cannot invert a non-monotone sampled curve")
    idx = np.argmax(y >= level)
    if y[idx] < level:
        return NOT_REACHED
    if idx == 0:
        return float(curve.x_values[0])
    x0, x1 = curve.x_values[idx - 1], curve.x_values[idx]
    y0, y1 = y[idx - 1], y[idx]
    if y1 == y0:
        return float(x1)
    return float(x0 + (level - y0) * (x1 - x0) / (y1 - y0))


def invert_curve(curve, level: float, x_range=(0.0, 45.0)):
    """Smallest separation at which the curve reaches ``level``.

    Accepts a :class:`WeibullParams` (closed-form inverse) or a sampled
    :class:`CurveSamples` (linear interpolation between samples).  Returns
    :data:`NOT_REACHED` when the level is never met on the range.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if isinstance(curve, WeibullParams):
        return _invert_weibull(curve, level, x_range)
    if isinstance(curve, CurveSamples):
        return _invert_samples(curve, level)
    raise TypeError(f"cannot invert {type(curve).__name__}")
