"""Trimmed maximum score objectives and the trimming schedule.

For windows with middle choice ``y_t``, switch ``d = y_{t+1} - y_{t-1}`` and
difference regressor ``chi_bar``::

    Q_n1(v) = (1/n) sum  y_t     * d * 1{z_t >  sigma} * 1{chi_bar'v > 0}
    Q_n2(v) = (1/n) sum (1 - y_t) * d * 1{z_t < -sigma} * 1{chi_bar'v > 0}
    Q_n(v)  = Q_n1(v) + Q_n2(v)

where ``n`` counts individuals, not windows.  Every term is ``-1/n``, ``0``
or ``+1/n`` so ``n * Q`` is an integer; the code accumulates integer counts
and divides once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .panel import Coefficients, WindowSet

__all__ = [
    "SIDES",
    "TrimSpec",
    "sigma_schedule",
    "qn1",
    "qn2",
    "qn",
    "Objective",
    "trim_spec_for",
]

SIDES = ("upper", "lower", "both")


@dataclass(frozen=True)
class TrimSpec:
    """Trimming threshold and which tail(s) of the special regressor to use.

    ``c`` is the schedule constant the threshold came from; it is kept only
    for provenance.
    """

    sigma_n: float
    side: str = "both"
    c: float = 1.0

    def __post_init__(self):
        side = str(self.side).lower()
        if side not in SIDES:
            raise DomainError(f"side must be one of {SIDES}, got {self.side!r}")
        object.__setattr__(self, "side", side)
        if not math.isfinite(self.sigma_n) or self.sigma_n < 0:
            raise DomainError(f"sigma_n must be finite and >= 0, got {self.sigma_n}")
        # both tails with sigma = 0 would let z = 0 sit in neither and mix the
        # two trims; require a strictly positive threshold
        if side == "both" and self.sigma_n <= 0:
            raise DomainError("side='both' requires sigma_n > 0")


def sigma_schedule(z_values, n: int, c: float = 1.0) -> float:
    """Trimming threshold ``c * std(z) * sqrt(log log n)``.

    ``std`` is the sample standard deviation (denominator ``len(z) - 1``).
    """
    if n < 16:
        raise DomainError(f"sigma schedule needs n >= 16, got {n}")
    z = np.asarray(z_values, dtype=float).reshape(-1)
    if z.size == 0:
        raise DomainError("sigma schedule needs at least one z value")
    sd = float(np.std(z, ddof=1)) if z.size > 1 else 0.0
    return c * sd * math.sqrt(math.log(math.log(n)))


def trim_spec_for(windows: WindowSet, c: float = 1.0, side: str = "both") -> TrimSpec:
    """Threshold from the schedule, pooling the middle-period z of all windows."""
    return TrimSpec(sigma_schedule(windows.z_mid, windows.n_individuals, c), side, c)


def _vec(theta) -> np.ndarray:
    if isinstance(theta, Coefficients):
        return theta.vector
    return np.asarray(theta, dtype=float)


def _side_weights(windows: WindowSet, sigma: float, side: str) -> np.ndarray:
    d = np.asarray(windows.d_switch, dtype=np.int64)
    upper = (windows.y_mid == 1) & (windows.z_mid > sigma)
    lower = (windows.y_mid == 0) & (windows.z_mid < -sigma)
    if side == "upper":
        keep = upper
    elif side == "lower":
        keep = lower
    else:
        keep = upper | lower
    return d * keep


def _value(windows: WindowSet, theta, weights) -> float:
    v = _vec(theta)
    hit = windows.chi_bar @ v > 0
    return int(weights[hit].sum()) / windows.n_individuals


def qn1(windows: WindowSet, theta, sigma: float) -> float:
    """Upper-tail objective: windows with ``y_t = 1`` and ``z_t > sigma``."""
    return _value(windows, theta, _side_weights(windows, sigma, "upper"))


def qn2(windows: WindowSet, theta, sigma: float) -> float:
    """Lower-tail objective: windows with ``y_t = 0`` and ``z_t < -sigma``."""
    return _value(windows, theta, _side_weights(windows, sigma, "lower"))


def qn(windows: WindowSet, theta, trim: TrimSpec) -> float:
    if trim.side == "upper":
        return qn1(windows, theta, trim.sigma_n)
    if trim.side == "lower":
        return qn2(windows, theta, trim.sigma_n)
    return qn1(windows, theta, trim.sigma_n) + qn2(windows, theta, trim.sigma_n)


class Objective:
    """Objective restricted to the windows that can contribute.

    Only untrimmed switcher windows carry a nonzero weight, so they are the
    only rows kept; evaluation of many parameter points is one matrix product.
    """

    def __init__(self, windows: WindowSet, trim: TrimSpec):
        weights = _side_weights(windows, trim.sigma_n, trim.side)
        keep = weights != 0
        self.chi = np.ascontiguousarray(windows.chi_bar[keep])
        self.weights = weights[keep].astype(np.int64)
        self.n = int(windows.n_individuals)
        self.trim = trim
        self.dim = windows.chi_bar.shape[1]

    @property
    def n_active(self) -> int:
        """Number of untrimmed switcher windows."""
        return len(self.weights)

    @property
    def upper_bound(self) -> float:
        return float((self.weights > 0).sum()) / self.n

    def counts(self, thetas) -> np.ndarray:
        """Integer ``n * Q`` for each row of ``thetas`` (shape (k, dim))."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.n_active == 0:
            return np.zeros(len(thetas), dtype=np.int64)
        hit = (self.chi @ thetas.T) > 0
        return self.weights @ hit

    def values(self, thetas) -> np.ndarray:
        return self.counts(thetas) / self.n

    def __call__(self, theta) -> float:
        return float(self.values(_vec(theta)[None, :])[0])
