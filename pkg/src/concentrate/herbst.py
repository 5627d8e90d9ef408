"""Closed-form deviation bounds for convex functions and empirical comparisons.

For ``beta > 0``::

    P(phi >= E phi + t) <= exp(-(3/16) min(t^2 / (C A^2), t^(1+beta) / (C^beta B^(1+beta))))

with ``A = sup |grad phi|_2`` and ``B = sup |grad phi|_((beta+1)/beta)`` (or the
Lipschitz constants for the l_2 and l_(1+beta) norms). For ``beta = 0``::

    P(phi >= E phi + t) <= exp(-(1/4) min(t^2 / (C A^2), t / ((m + 3 sigma) Binf)))

with ``Binf = sup |grad phi|_inf`` (the l_1 Lipschitz constant).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

MODES = ("smooth", "lipschitz", "beta0")


@dataclass(frozen=True)
class ConcentrationBound:
    beta: float
    C: float
    mode: str
    A: float
    B: float | None = None
    Binf: float | None = None
    m_plus_3sigma: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")
        if not self.C > 0 or not self.A > 0:
            raise ValueError("C and A must be positive")
        if self.beta == 0:
            if self.mode == "smooth":
                raise ValueError("beta = 0 uses mode 'beta0' (or 'lipschitz' with Binf = L_1)")
            if not (self.Binf and self.Binf > 0 and self.m_plus_3sigma and self.m_plus_3sigma > 0):
                raise ValueError("beta = 0 needs positive Binf and m_plus_3sigma")
        else:
            if self.mode == "beta0":
                raise ValueError("mode 'beta0' requires beta = 0")
            if not (self.B and self.B > 0):
                raise ValueError("beta > 0 needs a positive B")

    def exponent_terms(self, t):
        """The two arguments of the minimum (quadratic and heavy-tail branch)."""
        t = np.asarray(t, float)
        quad = t * t / (self.C * self.A ** 2)
        if self.beta == 0:
            heavy = t / (self.m_plus_3sigma * self.Binf)
        else:
            heavy = t ** (1 + self.beta) / (self.C ** self.beta * self.B ** (1 + self.beta))
        return quad, heavy

    @property
    def prefactor(self) -> float:
        return 0.25 if self.beta == 0 else 3.0 / 16.0


def smooth_bound(beta, C, A, B):
    return ConcentrationBound(beta, C, "smooth", A, B=B)


def lipschitz_bound(beta, C, L2, L1plusbeta=None, L1=None, m_plus_3sigma=None):
    if beta == 0:
        return ConcentrationBound(0.0, C, "lipschitz", L2, Binf=L1, m_plus_3sigma=m_plus_3sigma)
    return ConcentrationBound(beta, C, "lipschitz", L2, B=L1plusbeta)


def beta0_bound(C, A, Binf, m_plus_3sigma):
    return ConcentrationBound(0.0, C, "beta0", A, Binf=Binf, m_plus_3sigma=m_plus_3sigma)


def log_tail_bound(bound: ConcentrationBound, t):
    t_arr = np.asarray(t, float)
    if np.any(t_arr < 0):
        raise ValueError("t must be nonnegative")
    quad, heavy = bound.exponent_terms(t_arr)
    out = -bound.prefactor * np.minimum(quad, heavy)
    return float(out) if np.ndim(t) == 0 else out


def tail_bound(bound: ConcentrationBound, t):
    """Upper bound on ``P(phi >= E phi + t)``; equals 1 at ``t = 0``."""
    out = np.exp(log_tail_bound(bound, t))
    return float(out) if np.ndim(t) == 0 else out


def crossover(bound: ConcentrationBound) -> float:
    """The ``t > 0`` where the two branches of the minimum coincide (``inf`` at beta = 1)."""
    if bound.beta == 1:
        return math.inf
    q1, h1 = bound.exponent_terms(1.0)
    # q1 t^2 = h1 t^p  =>  t = (h1 / q1)^(1/(2 - p))
    p = 1.0 + bound.beta
    return float((h1 / q1) ** (1.0 / (2.0 - p)))


def set_enlargement_bound(beta: float, C_prime: float, r: float) -> float:
    """``exp(-C' r)``, the bound on leaving the enlargement ``A + r^(1/2) B_2 + r^(1/(1+beta)) B_(1+beta)``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if not C_prime > 0:
        raise ValueError("C' must be positive")
    return math.exp(-C_prime * r)


def ball_decomposition(x, beta: float):
    """Split ``x = y + z`` with ``y`` on coordinates where ``x_i^2 < |x_i|^(1+beta)``.

    Ties (``|x_i| = 1``, and every coordinate when ``beta = 1``) go to ``z``.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    x = np.asarray(x, float)
    small = x * x < np.abs(x) ** (1.0 + beta)
    y = np.where(small, x, 0.0)
    z = np.where(small, 0.0, x)
    return y, z


def min_cost(x, beta: float) -> float:
    """``sum_i min(x_i^2, |x_i|^(1+beta))``."""
    x = np.asarray(x, float)
    return float(np.minimum(x * x, np.abs(x) ** (1.0 + beta)).sum())


@dataclass
class TailComparison:
    t: np.ndarray
    bound: np.ndarray
    empirical: np.ndarray
    band: np.ndarray
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {"violations": self.violations,
                "table": [{"t": float(a), "bound": float(b), "empirical_tail": float(c), "band_halfwidth": float(d)}
                          for a, b, c, d in zip(self.t, self.bound, self.empirical, self.band)]}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "bound", "empirical_tail", "band_halfwidth"])
            for row in zip(self.t, self.bound, self.empirical, self.band):
                w.writerow([f"{v:.17g}" for v in row])


def empirical_tail_compare(values, bound: ConcentrationBound, t_grid, mean: float | None = None) -> TailComparison:
    """Compare ``P(phi - mean >= t)`` from samples of ``phi(X)`` with the bound.

    A violation is a ``t`` where the empirical tail exceeds the bound by more
    than ``3 sqrt(p (1 - p) / N)`` with ``p`` the bound.
    """
    v = np.sort(np.asarray(values, float))
    n = v.size
    if n == 0:
        raise ValueError("no samples")
    centre = float(v.mean()) if mean is None else float(mean)
    t = np.asarray(t_grid, float)
    emp = (n - np.searchsorted(v, centre + t, side="left")) / n
    bd = np.asarray(tail_bound(bound, t), float).reshape(t.shape)
    band = 3.0 * np.sqrt(bd * (1.0 - bd) / n)
    viol = [float(x) for x in t[emp - bd > band]]
    return TailComparison(t, bd, emp, band, viol)
