"""Monte Carlo and quadrature estimates for modified log-Sobolev inequalities.

Both sides of ``Ent e^phi <= C E G(grad phi) e^phi`` are estimated on product
samples, where ``G(v) = max(|v|_2^2, |v|_q^q)`` with ``q = (beta+1)/beta`` for
``beta > 0`` and ``G(v) = |v|_2^2`` for ``beta = 0`` (then every partial
derivative must stay below ``1/(2(m + 3 sigma))``).

Large values of phi are handled by shifting: with ``c = max phi`` over the
sample, ``Ent e^(phi) = e^c Ent e^(phi - c)`` and the right-hand side scales
the same way, so estimates are formed in shifted coordinates and rescaled.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .errors import DivergenceError, GradientRestrictionError, SpecError
from .measure import GENERATOR_NAME, MeasureSpec, nu_tail_estimate, sample_matrix

Z_CI = 3.0
LIGHT_FAMILIES = {"symmetric_exponential", "symmetric_weibull", "gaussian", "uniform", "two_point", "empirical"}


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class ConvexTestFunction:
    """A convex function on R^n with an explicit gradient.

    ``kind`` selects the formula; ``amplitude`` multiplies it. Gradients at
    kinks use a fixed valid subgradient (lowest-index maximizer for
    ``max_coordinate``, zero on the box for ``distance_to_box``).
    """

    kind: str
    n: int
    amplitude: float = 1.0
    scale: float = 1.0
    center: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown test function {self.kind!r}")
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if self.scale <= 0 or self.radius < 0:
            raise ValueError("scale must be positive and radius nonnegative")

    @property
    def name(self) -> str:
        return self.kind

    @property
    def label(self) -> str:
        return f"{self.kind}(n={self.n},a={self.amplitude:g})"

    def _arr(self, x):
        x = np.asarray(x, float)
        if x.ndim == 1:
            x = x.reshape(-1, self.n) if self.n > 1 else x[:, None]
        if x.shape[-1] != self.n:
            raise ValueError(f"expected points in R^{self.n}")
        return x

    def value(self, x) -> np.ndarray:
        x = self._arr(x)
        a = self.amplitude
        if self.kind == "linear":
            return a * x.sum(axis=1) / math.sqrt(self.n)
        if self.kind == "max_coordinate":
            return a * x.max(axis=1)
        if self.kind == "logsumexp":
            s = self.scale
            top = x.max(axis=1)
            return a * (top + s * np.log(np.exp((x - top[:, None]) / s).sum(axis=1)))
        if self.kind == "l2_norm_shifted":
            d = x - self.center
            return a * np.sqrt(1.0 + (d * d).sum(axis=1))
        excess = np.maximum(np.abs(x) - self.radius, 0.0)
        return a * np.sqrt((excess * excess).sum(axis=1))

    def gradient(self, x) -> np.ndarray:
        x = self._arr(x)
        a = self.amplitude
        if self.kind == "linear":
            return np.full(x.shape, a / math.sqrt(self.n))
        if self.kind == "max_coordinate":
            g = np.zeros(x.shape)
            g[np.arange(x.shape[0]), np.argmax(x, axis=1)] = a
            return g
        if self.kind == "logsumexp":
            e = np.exp((x - x.max(axis=1, keepdims=True)) / self.scale)
            return a * e / e.sum(axis=1, keepdims=True)
        if self.kind == "l2_norm_shifted":
            d = x - self.center
            return a * d / np.sqrt(1.0 + (d * d).sum(axis=1, keepdims=True))
        excess = np.maximum(np.abs(x) - self.radius, 0.0)
        dist = np.sqrt((excess * excess).sum(axis=1, keepdims=True))
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(dist > 0, a * np.sign(x) * excess / np.where(dist > 0, dist, 1.0), 0.0)
        return g

    def lipschitz(self, p: float) -> float:
        """Upper bound on ``sup |grad phi|_p`` (so phi is Lipschitz for the dual norm)."""
        a = abs(self.amplitude)
        if self.kind == "linear":
            per = a / math.sqrt(self.n)
            return per * (self.n ** (1.0 / p) if math.isfinite(p) else 1.0)
        if self.kind in ("l2_norm_shifted", "distance_to_box") and p < 2:
            # gradients lie in the l2 ball of radius a
            return a * self.n ** (1.0 / p - 0.5)
        # softmax gradients have unit l1 norm; a coordinate vector has every norm 1
        return a

    @property
    def lipschitz_l2(self) -> float:
        return self.lipschitz(2.0)

    def lipschitz_l1plusbeta(self, beta: float) -> float:
        """Lipschitz constant for the l_(1+beta) norm, i.e. ``sup |grad phi|_((beta+1)/beta)``."""
        if not 0 < beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        return self.lipschitz((beta + 1.0) / beta)

    @property
    def lipschitz_linf(self) -> float:
        return self.lipschitz(math.inf)

    def scaled(self, amplitude: float) -> "ConvexTestFunction":
        return ConvexTestFunction(self.kind, self.n, amplitude, self.scale, self.center, self.radius)

    def in_dimension(self, n: int) -> "ConvexTestFunction":
        return ConvexTestFunction(self.kind, n, self.amplitude, self.scale, self.center, self.radius)


_KINDS = ("linear", "max_coordinate", "logsumexp", "l2_norm_shifted", "distance_to_box")
CATALOG = _KINDS


def make_test_function(kind: str, n: int, amplitude: float = 1.0, **params) -> ConvexTestFunction:
    defaults = {"logsumexp": {"scale": 1.0}, "l2_norm_shifted": {"center": 0.5}, "distance_to_box": {"radius": 0.5}}
    kw = dict(defaults.get(kind, {}))
    kw.update(params)
    return ConvexTestFunction(kind, n, amplitude, **kw)


def catalog(n: int, amplitude: float = 1.0) -> list[ConvexTestFunction]:
    return [make_test_function(k, n, amplitude) for k in _KINDS]


def gradient_cost(grad: np.ndarray, beta: float) -> np.ndarray:
    """``max(|v|_2^2, |v|_q^q)`` row-wise (``|v|_2^2`` at beta = 0)."""
    sq = (grad * grad).sum(axis=1)
    if beta == 0:
        return sq
    q = (beta + 1.0) / beta
    return np.maximum(sq, (np.abs(grad) ** q).sum(axis=1))


def gradient_limit(m: float, sigma: float) -> float:
    """Largest admissible partial derivative in the beta = 0 inequality."""
    return 1.0 / (2.0 * (m + 3.0 * sigma))


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class Estimate:
    value: float
    halfwidth: float

    @property
    def lower(self) -> float:
        return self.value - self.halfwidth

    @property
    def upper(self) -> float:
        return self.value + self.halfwidth

    def to_dict(self):
        return {"value": self.value, "halfwidth": self.halfwidth}


@dataclass
class EntropyReport:
    lhs_entropy: Estimate
    rhs_functional: Estimate
    ratio: float
    n: int
    N: int
    seed: int
    beta: float
    spec_label: str
    function: str
    generator: str = GENERATOR_NAME

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = _json_float(self.ratio)
        return d


def _json_float(v):
    return v if math.isfinite(v) else str(v)


def _halfwidth(values: np.ndarray) -> float:
    n = values.size
    if n < 2:
        return math.inf
    return Z_CI * float(np.std(values, ddof=1)) / math.sqrt(n)


def require_exponential_moments(spec: MeasureSpec) -> None:
    """Reject measures for which Lipschitz exponentials may not be integrable."""
    if spec.family in LIGHT_FAMILIES:
        return
    try:
        nu_tail_estimate(spec, 0.0, abs(spec.median()) + 1.0, "plus")
        nu_tail_estimate(spec, 0.0, -abs(spec.median()) - 1.0, "minus")
    except DivergenceError as exc:
        raise SpecError(f"{spec.label}: exponential moments are not finite") from exc


def draw(spec: MeasureSpec, n: int, N: int, seed: int, stream: int = 0, workers: int = 1) -> np.ndarray:
    require_exponential_moments(spec)
    return sample_matrix(spec, N, n, seed, stream, workers)


def _entropy_terms(v: np.ndarray):
    c = float(v.max())
    u = v - c
    w = np.exp(u)
    wbar = float(w.mean())
    ent_s = float((u * w).mean()) - wbar * math.log(wbar)
    influence = u * w - (math.log(wbar) + 1.0) * w
    return c, w, ent_s, _halfwidth(influence)


def entropy_from_values(v) -> Estimate:
    """Plug-in ``Ent e^v`` with a delta-method halfwidth."""
    v = np.asarray(v, float)
    c, _, ent_s, hw = _entropy_terms(v)
    scale = math.exp(c)
    return Estimate(scale * ent_s, scale * hw)


def _check_restriction(grad, beta, limit):
    if beta != 0:
        return
    if limit is None:
        raise GradientRestrictionError("beta = 0 needs a gradient limit 1/(2(m+3 sigma))")
    worst = float(np.abs(grad).max()) if grad.size else 0.0
    if worst > limit * (1.0 + 1e-12):
        raise GradientRestrictionError(f"partial derivative {worst:.6g} exceeds {limit:.6g}")


def entropy_mc(spec: MeasureSpec, n: int, phi: ConvexTestFunction, N: int, seed: int,
               workers: int = 1, samples: np.ndarray | None = None) -> Estimate:
    x = draw(spec, n, N, seed, 0, workers) if samples is None else samples
    return entropy_from_values(phi.value(x))


def rhs_mc(spec: MeasureSpec, n: int, phi: ConvexTestFunction, beta: float, N: int, seed: int,
           gradient_bound: float | None = None, workers: int = 1,
           samples: np.ndarray | None = None) -> Estimate:
    """``E G(grad phi) e^phi`` on the same stream as :func:`entropy_mc`."""
    x = draw(spec, n, N, seed, 0, workers) if samples is None else samples
    grad = phi.gradient(x)
    _check_restriction(grad, beta, gradient_bound)
    v = phi.value(x)
    c = float(v.max())
    terms = gradient_cost(grad, beta) * np.exp(v - c)
    scale = math.exp(c)
    return Estimate(scale * float(terms.mean()), scale * _halfwidth(terms))


def conservative_ratio(lhs: Estimate, rhs: Estimate) -> float:
    den = rhs.lower
    if den <= 0:
        return 0.0 if lhs.upper <= 0 else math.inf
    return max(lhs.upper, 0.0) / den


def lsi_report(spec: MeasureSpec, n: int, phi: ConvexTestFunction, beta: float, N: int, seed: int,
               gradient_bound: float | None = None, workers: int = 1,
               samples: np.ndarray | None = None) -> EntropyReport:
    x = draw(spec, n, N, seed, 0, workers) if samples is None else samples
    lhs = entropy_mc(spec, n, phi, N, seed, samples=x)
    rhs = rhs_mc(spec, n, phi, beta, N, seed, gradient_bound, samples=x)
    return EntropyReport(lhs, rhs, conservative_ratio(lhs, rhs), n, int(x.shape[0]), seed, beta,
                         spec.label, phi.label)


def lsi_holds(report: EntropyReport, C: float) -> bool:
    """Conservative check ``lhs <= C rhs`` at the 3-sigma level."""
    return report.lhs_entropy.lower <= C * report.rhs_functional.upper


def symmetrized_functional(spec: MeasureSpec, n: int, phi: ConvexTestFunction, N: int, seed: int,
                           workers: int = 1) -> Estimate:
    """``(1/2) E (phi(X) - phi(Y)) (e^phi(X) - e^phi(Y))`` over independent pairs."""
    vx = phi.value(draw(spec, n, N, seed, 0, workers))
    vy = phi.value(draw(spec, n, N, seed, 1, workers))
    c = float(max(vx.max(), vy.max()))
    terms = 0.5 * (vx - vy) * (np.exp(vx - c) - np.exp(vy - c))
    scale = math.exp(c)
    return Estimate(scale * float(terms.mean()), scale * _halfwidth(terms))


@dataclass
class PoincareResult:
    holds: bool
    variance: Estimate
    rhs: Estimate

    def to_dict(self):
        return {"holds": self.holds, "variance": self.variance.to_dict(), "rhs": self.rhs.to_dict()}


def poincare_check(spec: MeasureSpec, n: int, phi: ConvexTestFunction, C: float, N: int, seed: int,
                   workers: int = 1, samples: np.ndarray | None = None) -> PoincareResult:
    """Compare ``Var phi`` with ``2 C E |grad phi|^2``."""
    x = draw(spec, n, N, seed, 0, workers) if samples is None else samples
    v = phi.value(x)
    g = phi.gradient(x)
    dev2 = (v - v.mean()) ** 2
    var = Estimate(float(dev2.sum() / (v.size - 1)), _halfwidth(dev2))
    sq = (g * g).sum(axis=1)
    rhs = Estimate(2.0 * C * float(sq.mean()), 2.0 * C * _halfwidth(sq))
    return PoincareResult(var.lower <= rhs.upper, var, rhs)


# ---------------------------------------------------------------------------
# one-dimensional quadrature


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def covariance_kernel_bound(spec: MeasureSpec, phi: ConvexTestFunction, x_grid) -> float:
    """``int int phi'(x) phi'(y) e^phi(y) P(X <= x^y) P(X >= x v y) dx dy`` on a grid.

    The product trapezoid rule is evaluated in O(N) with prefix sums; the
    kernel factorizes on each side of the diagonal.
    """
    if phi.n != 1:
        raise ValueError("covariance kernel bound is one-dimensional")
    x = np.asarray(x_grid, float)
    w = _trapezoid_weights(x)
    d = phi.gradient(x[:, None])[:, 0]
    e = np.exp(phi.value(x[:, None]))
    F = np.asarray(spec.lower_tail(x), float)
    S = np.asarray(spec.upper_tail(x), float)
    a = w * d  # x-factor
    b = w * d * e  # y-factor
    # sum_{i<=j} a_i F_i * b_j S_j  +  sum_{i>j} b_j F_j * a_i S_i
    left = np.cumsum(a * F)
    part1 = float(np.sum(b * S * left))
    right = np.cumsum((a * S)[::-1])[::-1]
    tail_after = np.concatenate([right[1:], [0.0]])
    part2 = float(np.sum(b * F * tail_after))
    return part1 + part2


def _quad_expect(spec: MeasureSpec, fn, lo, hi):
    if spec.is_atomic:
        locs, masses = spec.atoms()
        return float(np.sum(masses * fn(locs)))
    pts = [p for p in spec.breakpoints() if lo < p < hi]
    val, _ = integrate.quad(lambda t: fn(np.array([t]))[0] * float(spec.density(t)), lo, hi,
                            points=pts or None, limit=500, epsabs=0.0, epsrel=1e-11)
    return val


def quadrature_range(spec: MeasureSpec, depth: float = 1e-14) -> tuple[float, float]:
    lo, hi = float(spec.quantile(depth)), float(spec.isf(depth))
    return lo, hi


def entropy_quadrature(spec: MeasureSpec, phi: ConvexTestFunction, depth: float = 1e-14) -> float:
    """``Ent e^phi`` for a one-dimensional measure by adaptive quadrature."""
    if phi.n != 1:
        raise ValueError("quadrature entropy is one-dimensional")
    lo, hi = quadrature_range(spec, depth)
    f = lambda t: phi.value(t[:, None] if np.ndim(t) else np.array([[t]]))
    z = _quad_expect(spec, lambda t: np.exp(f(t)), lo, hi)
    zl = _quad_expect(spec, lambda t: f(t) * np.exp(f(t)), lo, hi)
    return zl - z * math.log(z)


def rhs_quadrature(spec: MeasureSpec, phi: ConvexTestFunction, beta: float, depth: float = 1e-14) -> float:
    if phi.n != 1:
        raise ValueError("quadrature is one-dimensional")
    lo, hi = quadrature_range(spec, depth)

    def fn(t):
        pts = t[:, None]
        return gradient_cost(phi.gradient(pts), beta) * np.exp(phi.value(pts))

    return _quad_expect(spec, fn, lo, hi)


# ---------------------------------------------------------------------------
# calibration battery


@dataclass(frozen=True)
class Section:
    """One-dimensional section ``x -> phi(x, fixed)`` of a test function."""

    base: ConvexTestFunction
    fixed: tuple = ()

    n = 1

    @property
    def label(self) -> str:
        return f"{self.base.label}|section"

    def _full(self, x):
        x = np.asarray(x, float).reshape(-1, 1)
        if not self.fixed:
            return x
        return np.hstack([x, np.broadcast_to(np.asarray(self.fixed, float), (x.shape[0], len(self.fixed)))])

    def value(self, x):
        return self.base.value(self._full(x))

    def gradient(self, x):
        return self.base.gradient(self._full(x))[:, :1]

    def scaled(self, amplitude: float) -> "Section":
        return Section(self.base.scaled(amplitude), self.fixed)

    def in_dimension(self, n: int) -> "Section":
        if n != 1:
            raise ValueError("a section is one-dimensional")
        return self


def sections(spec: MeasureSpec, phi: ConvexTestFunction, dims=(1, 2, 4, 16, 64)) -> list[Section]:
    """Sections of ``phi`` in each dimension with the other coordinates at evenly spaced quantiles."""
    out = []
    for d in dims:
        levels = (np.arange(1, d) - 0.5) / max(d - 1, 1)
        fixed = tuple(float(v) for v in np.atleast_1d(spec.quantile(levels))) if d > 1 else ()
        out.append(Section(phi.in_dimension(d), fixed))
    return out


@dataclass
class ConstantFit:
    C_hat: float
    reports: list = field(default_factory=list)

    def to_dict(self):
        return {"C_hat": self.C_hat, "reports": [r.to_dict() for r in self.reports]}


def fit_constant(spec: MeasureSpec, phi: ConvexTestFunction, beta: float, amplitudes, N: int, seed: int,
                 gradient_bound: float | None = None, workers: int = 1,
                 samples: np.ndarray | None = None, section_dims=(1, 2, 4, 16, 64)) -> ConstantFit:
    """Largest conservative ratio at n = 1 over amplitudes and one-dimensional sections of ``phi``.

    For product measures the n-dimensional inequality is assembled from
    one-dimensional inequalities applied to sections, so the battery uses
    sections of ``phi`` rather than only its one-dimensional restriction.
    """
    x = draw(spec, 1, N, seed, 0, workers) if samples is None else samples
    reports = []
    for sec in sections(spec, phi, section_dims):
        for a in amplitudes:
            reports.append(lsi_report(spec, 1, sec.scaled(a), beta, N, seed, gradient_bound, samples=x))
    return ConstantFit(max(r.ratio for r in reports), reports)


def dimension_sweep(spec: MeasureSpec, phi: ConvexTestFunction, beta: float, C: float, ns, amplitudes,
                    N: int, seed: int, gradient_bound: float | None = None, workers: int = 1,
                    sample_cache: dict | None = None):
    """Check the fitted inequality in each dimension; returns ``[(n, report, holds)]``."""
    out = []
    for n in ns:
        key = (spec.label, n, N, seed)
        if sample_cache is not None and key in sample_cache:
            x = sample_cache[key]
        else:
            x = draw(spec, n, N, seed, 0, workers)
            if sample_cache is not None:
                sample_cache[key] = x
        for a in amplitudes:
            f = phi.in_dimension(n).scaled(a)
            rep = lsi_report(spec, n, f, beta, N, seed, gradient_bound, samples=x)
            out.append((n, rep, lsi_holds(rep, C)))
    return out
