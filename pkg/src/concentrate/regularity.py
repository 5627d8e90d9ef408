"""Tail-regularity certificates for the classes M_beta(m, sigma^(beta+1)).

A measure belongs to the class when, beyond +-m, each weighted tail integral
``nu_tail`` is at most ``sigma_pow`` times the corresponding tail. The checks
here evaluate that ratio on a grid, convert to and from the equivalent
"shift" condition ``mu([x + h/x^beta, inf)) <= alpha mu([x, inf))``, and
compute the derived constants used downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DensityUnavailableError, DivergenceError, FitError
from .measure import MeasureSpec, SampleBatch, nu_tail_estimate, nu_tail_grid

SLACK = 1e-9


@dataclass(frozen=True)
class GridConfig:
    points: int = 4096
    kind: str = "geometric"
    tail_level: float = 1e-10
    max_step_fraction: float = 0.01
    max_points: int = 400_000


@dataclass(frozen=True)
class ShiftCondition:
    h: float
    alpha: float
    m: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("shift h must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.m > 0:
            raise ValueError("m must be positive")


@dataclass
class TailGrid:
    magnitudes: np.ndarray
    kind: str
    censored_at: float | None = None

    def info(self) -> dict:
        mags = self.magnitudes
        steps = np.diff(mags)
        return {
            "min": float(mags[0]),
            "max": float(mags[-1]),
            "points": int(mags.size),
            "kind": self.kind,
            "max_step": float(steps.max()) if steps.size else 0.0,
        }


@dataclass
class RegularityCertificate:
    beta: float
    m: float
    sigma_pow: float
    grid: dict
    worst_ratio_plus: float
    worst_ratio_minus: float
    status: str
    witness: dict | None = None
    reason: str | None = None
    censored_at: float | None = None

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_dict(self) -> dict:
        out = {
            "beta": self.beta,
            "m": self.m,
            "sigma_pow": self.sigma_pow,
            "status": self.status,
            "worst_ratio_plus": _json_float(self.worst_ratio_plus),
            "worst_ratio_minus": _json_float(self.worst_ratio_minus),
            "grid": self.grid,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.reason is not None:
            out["reason"] = self.reason
        if self.censored_at is not None:
            out["censored_at"] = self.censored_at
        return out


def _json_float(v):
    return v if math.isfinite(v) else str(v)


def _side_magnitudes(spec: MeasureSpec, m: float, config: GridConfig, side: str) -> TailGrid:
    s = spec if side == "plus" else spec.reflected()
    censored = None
    if spec.family == "empirical":
        top = float(s.atoms()[0][-1])
        censored = top
        x_max = top
    else:
        x_max = float(s.isf(config.tail_level))
        sup = s.support_max()
        if math.isfinite(sup):
            x_max = min(x_max, sup)
    if not x_max > m:
        return TailGrid(np.array([m]), config.kind, censored)
    if config.kind == "geometric":
        # enough points that the widest step stays below max_step_fraction * m
        need = math.log(x_max / m) / math.log1p(config.max_step_fraction * m / x_max) + 1
        n = int(min(config.max_points, max(config.points, math.ceil(need))))
        mags = np.geomspace(m, x_max, n)
    elif config.kind == "uniform":
        need = (x_max - m) / (config.max_step_fraction * m) + 1
        n = int(min(config.max_points, max(config.points, math.ceil(need))))
        mags = np.linspace(m, x_max, n)
    else:
        raise ValueError(f"unknown grid kind {config.kind!r}")
    if s.is_atomic:
        jumps = s.atoms()[0]
        jumps = jumps[(jumps > m) & (jumps < x_max)]
        mags = np.unique(np.concatenate([mags, jumps]))
    return TailGrid(mags, config.kind, censored)


def tail_ratios(spec: MeasureSpec, beta: float, m: float, config: GridConfig = GridConfig()):
    """Per-side ``(grid, nu_tail / tail)`` on the checked grid.

    Raises :class:`DivergenceError` when a weighted tail is infinite.
    """
    out = {}
    for side in ("plus", "minus"):
        grid = _side_magnitudes(spec, m, config, side)
        s = spec if side == "plus" else spec.reflected()
        nu = nu_tail_grid(spec, beta, grid.magnitudes, side)
        tail = np.asarray(s.upper_tail(grid.magnitudes), float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(tail > 0, nu / np.where(tail > 0, tail, 1.0), np.where(nu > 0, np.inf, 0.0))
        out[side] = (grid, ratio)
    return out


def _divergence_probe(spec, beta, m):
    nu_tail_estimate(spec, beta, m, "plus")
    nu_tail_estimate(spec, beta, -m, "minus")


def _merged_grid_info(grids) -> dict:
    plus, minus = grids["plus"], grids["minus"]
    info = plus.info()
    minfo = minus.info()
    info["points"] = plus.magnitudes.size + minus.magnitudes.size
    info["max"] = max(info["max"], minfo["max"])
    info["max_step"] = max(info["max_step"], minfo["max_step"])
    info["sides"] = {"plus": plus.info(), "minus": minfo}
    return info


def check_membership(spec: MeasureSpec, beta: float, m: float, sigma_pow: float,
                     grid_config: GridConfig = GridConfig()) -> RegularityCertificate:
    """Check both weighted-tail inequalities on a grid beyond +-m."""
    if not m > 0:
        raise ValueError("m must be positive")
    try:
        _divergence_probe(spec, beta, m)
    except DivergenceError as exc:
        return RegularityCertificate(beta, m, sigma_pow, {"min": m, "max": m, "points": 0, "kind": grid_config.kind},
                                     math.inf, math.inf, "refuted",
                                     witness={"x": m if exc.side == "plus" else -m, "side": exc.side},
                                     reason="nu-tail infinite")
    ratios = tail_ratios(spec, beta, m, grid_config)
    worst = {}
    where = {}
    for side, (grid, r) in ratios.items():
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = r / sigma_pow if sigma_pow > 0 else np.where(r > 0, np.inf, 0.0)
        k = int(np.argmax(scaled))
        worst[side] = float(scaled[k])
        where[side] = float(grid.magnitudes[k])
    grids = {s: g for s, (g, _) in ratios.items()}
    censored = grids["plus"].censored_at
    if censored is not None:
        censored = max(censored, grids["minus"].censored_at)
    bad = [s for s in ("plus", "minus") if worst[s] > 1.0 + SLACK]
    if bad:
        side = max(bad, key=lambda s: worst[s])
        x = where[side] if side == "plus" else -where[side]
        return RegularityCertificate(beta, m, sigma_pow, _merged_grid_info(grids), worst["plus"], worst["minus"],
                                     "refuted", witness={"x": x, "side": side},
                                     reason="tail inequality violated", censored_at=censored)
    return RegularityCertificate(beta, m, sigma_pow, _merged_grid_info(grids), worst["plus"], worst["minus"],
                                 "certified", censored_at=censored)


def estimate_sigma(spec: MeasureSpec, beta: float, m: float, grid_config: GridConfig = GridConfig()) -> float:
    """Smallest ``sigma_pow`` certified on the grid; ``inf`` when no finite value exists."""
    try:
        _divergence_probe(spec, beta, m)
    except DivergenceError:
        return math.inf
    ratios = tail_ratios(spec, beta, m, grid_config)
    return float(max(np.max(r) for _, r in ratios.values()))


@dataclass
class ShiftResult:
    holds: bool
    worst_ratio: float
    witness: dict | None = None

    def to_dict(self):
        return {"holds": self.holds, "worst_ratio": self.worst_ratio, "witness": self.witness}


def check_shift_condition(spec: MeasureSpec, beta: float, cond: ShiftCondition,
                          grid_config: GridConfig = GridConfig()) -> ShiftResult:
    """Check ``mu([x + h/x^beta, inf)) <= alpha mu([x, inf))`` (and its mirror) for grid x > m."""
    worst, witness = 0.0, None
    for side in ("plus", "minus"):
        s = spec if side == "plus" else spec.reflected()
        mags = _side_magnitudes(spec, cond.m, grid_config, side).magnitudes
        mags = mags[mags > cond.m]
        if mags.size == 0:
            continue
        tail = np.asarray(s.upper_tail(mags), float)
        shifted = np.asarray(s.upper_tail(mags + cond.h / mags ** beta), float)
        live = tail > 0
        if not np.any(live):
            continue
        ratio = shifted[live] / tail[live]
        k = int(np.argmax(ratio))
        if ratio[k] > worst:
            worst = float(ratio[k])
            x = float(mags[live][k])
            witness = {"x": x if side == "plus" else -x, "side": side}
    holds = worst <= cond.alpha * (1 + SLACK)
    return ShiftResult(holds, worst, None if holds else witness)


def convert_conditions(direction: str, beta: float, m: float, sigma_pow: float | None = None,
                       h: float | None = None, alpha: float | None = None):
    """Translate between the tail-integral and shift forms of membership.

    ``i_to_ii`` returns a :class:`ShiftCondition` with ``h = 2 sigma_pow`` and
    ``alpha = 1/2``; ``ii_to_i`` returns ``sigma_pow = K/(1 - alpha)`` with
    ``K = h (1 + h/m^(beta+1))^beta``.
    """
    if direction == "i_to_ii":
        if sigma_pow is None or not sigma_pow > 0:
            raise ValueError("i_to_ii needs a positive sigma_pow")
        return ShiftCondition(h=2.0 * sigma_pow, alpha=0.5, m=m)
    if direction == "ii_to_i":
        cond = ShiftCondition(h=h, alpha=alpha, m=m)
        k = cond.h * (1.0 + cond.h / m ** (beta + 1)) ** beta
        return k / (1.0 - cond.alpha)
    raise ValueError(f"unknown direction {direction!r}")


def m_tilde(beta: float, m: float, sigma: float) -> float:
    """Shifted threshold beyond which weighted tails of unimodal-type functions are controlled."""
    if not 0 <= beta <= 1 or not m > 0 or sigma < 0:
        raise ValueError("need beta in [0,1], m > 0, sigma >= 0")
    a = max(m, (2 * beta) ** (1 / (beta + 1)) * sigma)
    return a + 2 * sigma ** (beta + 1) / a ** beta


@dataclass
class TailDecayReport:
    c1: float
    c2: float
    max_violation: float
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {"C1": self.c1, "C2": self.c2, "max_violation": self.max_violation, "violations": self.violations}


def tail_decay_check(batch: SampleBatch, beta: float, m: float, sigma: float, t_grid) -> TailDecayReport:
    """Fit ``P(|X| >= t) <= C1 exp(-t^(beta+1)/C2)`` to a sample.

    ``C2`` is pinned to its floor ``(beta+1) sigma^(beta+1)`` and ``C1`` is the
    smallest value dominating the empirical tail on ``t_grid``.
    """
    vals = np.sort(np.abs(np.asarray(batch.values, float)))
    if vals.size < 10_000:
        raise ValueError("tail_decay_check needs at least 10^4 samples")
    t = np.asarray(t_grid, float)
    c2 = (beta + 1) * sigma ** (beta + 1)
    if not c2 > 0:
        raise FitError("sigma must be positive to fit an envelope")
    emp = (vals.size - np.searchsorted(vals, t, side="left")) / vals.size
    live = emp > 0
    if not np.any(live):
        return TailDecayReport(0.0, c2, 0.0)
    log_c1 = float(np.max(np.log(emp[live]) + t[live] ** (beta + 1) / c2))
    if log_c1 > 700:
        raise FitError("empirical tail is not below any envelope with this C2")
    c1 = max(math.exp(log_c1), 1.0)
    bound = c1 * np.exp(-t ** (beta + 1) / c2)
    gap = emp - bound
    # C1 is attained where emp equals the envelope up to rounding
    viol = [float(x) for x in t[gap > 1e-12 * bound]]
    return TailDecayReport(c1, c2, float(gap.max()), viol)


def barthe_roberto_functional(spec: MeasureSpec, beta: float, y: float) -> float:
    """``mu([y,inf)) log(1/mu([y,inf))) (int_M^y n^-beta)^(1/beta)`` for ``y >= median``."""
    if not beta > 0:
        raise ValueError("the functional needs beta > 0")
    if not spec.has_density:
        raise DensityUnavailableError(f"{spec.label} has no density")
    med = spec.median()
    if y < med:
        raise ValueError(f"y must be at least the median {med}")
    tail = float(spec.upper_tail(y))
    if tail <= 0.0 or y == med:
        return 0.0
    bps = spec.breakpoints()
    bps = [b for b in bps if med < b < y]
    integral, _ = integrate.quad(lambda t: float(spec.density(t)) ** -beta, med, y,
                                 points=bps or None, limit=400, epsrel=1e-12)
    return tail * math.log(1.0 / tail) * integral ** (1.0 / beta)
