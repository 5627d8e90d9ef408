"""The cost pair H_beta / L*_beta and its delta-scaled beta = 0 family.

``h`` is the gradient cost ``max(s^2, |s|^((beta+1)/beta))`` and ``lstar`` its
Legendre transform. For ``beta = 0`` the gradient cost is the hard constraint
``(s/delta)^2`` on ``|s| <= delta`` and ``+infinity`` outside.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_POSITIVE_BETA = 1e-6


class PositiveInfinity:
    """The value +infinity of the extended reals.

    Kept distinct from ``float("inf")`` so that infinite costs cannot leak
    into floating-point arithmetic unnoticed.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("concentrate.INF")

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self


INF = PositiveInfinity()


def is_finite(value) -> bool:
    return value is not INF


@dataclass(frozen=True)
class CostPair:
    """Cost pair ``(H_beta, L*_beta)``; ``delta`` only for ``beta == 0``."""

    beta: float
    delta: float | None = None

    def __post_init__(self):
        beta = float(self.beta)
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {beta}")
        if 0.0 < beta < MIN_POSITIVE_BETA:
            raise ValueError(f"beta in (0, {MIN_POSITIVE_BETA}) is numerically meaningless")
        object.__setattr__(self, "beta", beta)
        if beta == 0.0:
            delta = 1.0 if self.delta is None else float(self.delta)
            if not delta > 0.0:
                raise ValueError(f"delta must be positive, got {delta}")
            object.__setattr__(self, "delta", delta)
        elif self.delta is not None:
            raise ValueError("delta is only meaningful for beta = 0")

    @property
    def exponent(self) -> float:
        """Large-gradient exponent ``(beta+1)/beta`` of H (``inf`` at beta = 0)."""
        return np.inf if self.beta == 0.0 else (self.beta + 1.0) / self.beta


def h(cost: CostPair, s):
    """Gradient cost H at a scalar ``s``; returns a float or :data:`INF`."""
    s = float(s)
    if cost.beta == 0.0:
        if abs(s) > cost.delta:
            return INF
        return (s / cost.delta) ** 2
    a = abs(s)
    return max(a * a, a ** cost.exponent)


def h_array(cost: CostPair, s) -> np.ma.MaskedArray:
    """Vectorized :func:`h`; infinite entries are masked."""
    s = np.asarray(s, dtype=np.float64)
    a = np.abs(s)
    if cost.beta == 0.0:
        infinite = a > cost.delta
        vals = np.where(infinite, 0.0, (s / cost.delta) ** 2)
        return np.ma.masked_array(vals, mask=infinite)
    return np.ma.masked_array(np.maximum(a * a, a ** cost.exponent), mask=np.zeros(s.shape, bool))


def lstar(cost: CostPair, t):
    """Legendre transform L* of H; scalar in, float out; arrays vectorize."""
    t_arr = np.asarray(t, dtype=np.float64)
    a = np.abs(t_arr)
    beta = cost.beta
    if beta == 0.0:
        u = cost.delta * a
        out = np.where(u <= 2.0, 0.25 * u * u, u - 1.0)
    else:
        knee = cost.exponent
        out = np.where(
            a <= 2.0,
            0.25 * a * a,
            np.where(a <= knee, a - 1.0, (beta / (beta + 1.0) * a) ** (1.0 + beta) / beta),
        )
    return float(out) if np.ndim(t) == 0 else out


def dlstar(cost: CostPair, t):
    """Derivative of L*; continuous, so breakpoints take the shared value."""
    t_arr = np.asarray(t, dtype=np.float64)
    a = np.abs(t_arr)
    sg = np.sign(t_arr)
    beta = cost.beta
    if beta == 0.0:
        d = cost.delta
        u = d * a
        out = np.where(u <= 2.0, 0.5 * d * d * t_arr, d * sg)
    else:
        knee = cost.exponent
        out = np.where(
            a <= 2.0,
            0.5 * t_arr,
            np.where(a <= knee, sg, (beta / (beta + 1.0) * a) ** beta * sg),
        )
    return float(out) if np.ndim(t) == 0 else out


def conjugate_numeric(cost: CostPair, t: float, s_grid) -> float:
    """Brute-force ``sup_s {s t - H(s)}`` over a grid; infinite H is skipped."""
    s = np.asarray(s_grid, dtype=np.float64).ravel()
    if s.size < 2:
        raise ValueError("conjugate_numeric needs at least two grid points")
    hv = h_array(cost, s)
    vals = s * float(t) - hv
    if vals.count() == 0:
        raise ValueError("H is infinite on the whole grid")
    return float(vals.max())


def conjugate_grid(cost: CostPair, t: float, step: float = 1e-3) -> np.ndarray:
    """A grid wide enough to contain the maximizer of ``s t - H(s)``.

    The maximizer never exceeds ``max(1, |t|^beta)`` in absolute value; for
    ``beta = 0`` the effective domain is ``[-delta, delta]``. The grid
    contains 0 and +-1, where H has its kink and where the maximizer sits
    for every ``t`` in the middle branch of L*.
    """
    if cost.beta == 0.0:
        span = cost.delta
    else:
        span = min((abs(t) + 2.0) ** cost.beta + 1.0, 1e6)
    unit = 1.0 / np.ceil(1.0 / step)
    half = int(np.ceil(span / unit))
    return np.arange(-half, half + 1) * unit
