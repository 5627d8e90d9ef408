"""One-dimensional probability measures: tails, quantiles, densities, sampling.

Every measure is a :class:`MeasureSpec` (a family name, its parameters and a
label). Tails are *closed*: ``upper_tail(x) = mu([x, inf))`` and
``lower_tail(x) = mu((-inf, x])``, which is what the weighted tail integrals
``nu_tail`` need.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import DensityUnavailableError, DivergenceError, SpecError

GENERATOR_NAME = "numpy.PCG64(SeedSequence(seed, spawn_key=(stream, chunk)))"
CHUNK = 1 << 16
# relative depth of the quadrature cut-off: tail(T) <= TAIL_DEPTH * tail(x)
TAIL_DEPTH = 1e-13
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


# --------------------------------------------------------------------------
# families


class _Family:
    continuous = True
    has_density = True

    def breakpoints(self):
        return np.empty(0)

    def density(self, x):
        raise DensityUnavailableError(f"{type(self).__name__} has no density")

    def atoms(self):
        """(locations, masses) for purely atomic families, else None."""
        return None


class _SymExp(_Family):
    def __init__(self, rate):
        self.r = rate

    def upper(self, x):
        x = np.asarray(x, float)
        return np.where(x >= 0, 0.5 * np.exp(-self.r * np.abs(x)), 1.0 - 0.5 * np.exp(-self.r * np.abs(x)))

    def lower(self, x):
        return self.upper(-np.asarray(x, float))

    def isf(self, p):
        p = np.asarray(p, float)
        with np.errstate(divide="ignore"):
            return np.where(p <= 0.5, -np.log(2 * p), np.log(2 * (1 - p))) / self.r

    def lisf(self, p):
        return -self.isf(p)

    def density(self, x):
        return 0.5 * self.r * np.exp(-self.r * np.abs(np.asarray(x, float)))

    def breakpoints(self):
        return np.array([0.0])


class _SymWeibull(_Family):
    def __init__(self, p):
        self.p = p
        self.a = 1.0 / p
        self.norm = 2.0 * math.gamma(1.0 + 1.0 / p)

    def upper(self, x):
        x = np.asarray(x, float)
        q = 0.5 * special.gammaincc(self.a, np.abs(x) ** self.p)
        return np.where(x >= 0, q, 1.0 - q)

    def lower(self, x):
        return self.upper(-np.asarray(x, float))

    def isf(self, p):
        p = np.asarray(p, float)
        y = np.clip(2 * np.minimum(p, 1 - p), 0, 1)
        g = np.empty_like(y)
        # the lower inverse is faster and exact enough once 1 - y is representable
        deep = y < 0.5
        g[deep] = special.gammainccinv(self.a, y[deep])
        g[~deep] = special.gammaincinv(self.a, 1.0 - y[~deep])
        r = g ** (1.0 / self.p)
        return np.where(p <= 0.5, r, -r)

    def lisf(self, p):
        return -self.isf(p)

    def density(self, x):
        return np.exp(-np.abs(np.asarray(x, float)) ** self.p) / self.norm

    def breakpoints(self):
        return np.array([0.0])


class _Gaussian(_Family):
    def __init__(self, mean, stddev):
        self.mu = mean
        self.sd = stddev

    def upper(self, x):
        return special.ndtr(-(np.asarray(x, float) - self.mu) / self.sd)

    def lower(self, x):
        return special.ndtr((np.asarray(x, float) - self.mu) / self.sd)

    def isf(self, p):
        return self.mu - self.sd * special.ndtri(np.asarray(p, float))

    def lisf(self, p):
        return self.mu + self.sd * special.ndtri(np.asarray(p, float))

    def density(self, x):
        z = (np.asarray(x, float) - self.mu) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2 * math.pi))


class _Uniform(_Family):
    def __init__(self, a, b):
        self.a, self.b = a, b

    def upper(self, x):
        return np.clip((self.b - np.asarray(x, float)) / (self.b - self.a), 0.0, 1.0)

    def lower(self, x):
        return np.clip((np.asarray(x, float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def isf(self, p):
        return self.b - np.asarray(p, float) * (self.b - self.a)

    def lisf(self, p):
        return self.a + np.asarray(p, float) * (self.b - self.a)

    def density(self, x):
        x = np.asarray(x, float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def breakpoints(self):
        return np.array([self.a, self.b])


class _Atomic(_Family):
    """Finitely many atoms; shared by two-point and empirical measures."""

    continuous = False
    has_density = False

    def __init__(self, locs, masses):
        order = np.argsort(locs, kind="stable")
        self.locs = np.asarray(locs, float)[order]
        self.masses = np.asarray(masses, float)[order]
        # cum_upper[k] = mass of atoms with index >= k
        self.cum_upper = np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])
        self.cum_lower = np.concatenate([[0.0], np.cumsum(self.masses)])

    def upper(self, x):
        k = np.searchsorted(self.locs, np.asarray(x, float), side="left")
        return np.clip(self.cum_upper[k], 0.0, 1.0)

    def lower(self, x):
        k = np.searchsorted(self.locs, np.asarray(x, float), side="right")
        return np.clip(self.cum_lower[k], 0.0, 1.0)

    def isf(self, p):
        # largest atom whose closed upper tail is at least p
        p = np.asarray(p, float)
        k = np.searchsorted(-self.cum_upper[:-1], -p, side="right") - 1
        return self.locs[np.clip(k, 0, self.locs.size - 1)]

    def lisf(self, p):
        p = np.asarray(p, float)
        k = np.searchsorted(self.cum_lower[1:], p, side="left")
        return self.locs[np.clip(k, 0, self.locs.size - 1)]

    def breakpoints(self):
        return self.locs

    def atoms(self):
        return self.locs, self.masses


class _Empirical(_Atomic):
    def __init__(self, samples):
        s = np.sort(np.asarray(samples, float))
        self.n = s.size
        self.sorted = s
        super().__init__(s, np.full(s.size, 1.0 / s.size))

    def upper(self, x):
        k = np.searchsorted(self.sorted, np.asarray(x, float), side="left")
        return (self.n - k) / self.n

    def lower(self, x):
        return np.searchsorted(self.sorted, np.asarray(x, float), side="right") / self.n

    def isf(self, p):
        k = self.n - np.ceil(np.asarray(p, float) * self.n).astype(np.int64)
        return self.sorted[np.clip(k, 0, self.n - 1)]

    def lisf(self, p):
        k = np.ceil(np.asarray(p, float) * self.n).astype(np.int64) - 1
        return self.sorted[np.clip(k, 0, self.n - 1)]


class _Table(_Family):
    """Upper-tail table with log-linear (or log-log) interpolation.

    The last segment's rule extrapolates beyond the final knot. Symmetric
    tables start at ``x = 0`` with tail ``1/2`` and are mirrored; otherwise
    the first knot carries tail 1.
    """

    def __init__(self, xs, tails, interp, symmetric):
        self.x = np.asarray(xs, float)
        self.lt = np.log(np.asarray(tails, float))
        self.interp = interp
        self.symmetric = symmetric
        self.lx = np.log(np.where(self.x > 0, self.x, 1.0))
        self.loglog = np.zeros(self.x.size - 1, bool)
        if interp == "log-log":
            self.loglog = self.x[:-1] > 0
        dx = np.diff(self.x)
        dlx = np.diff(self.lx)
        self.slope = np.where(self.loglog, np.diff(self.lt) / np.where(self.loglog, dlx, 1.0), np.diff(self.lt) / dx)

    def _upper_right(self, x):
        # x >= x[0]
        k = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 2)
        ll = self.loglog[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(ll, np.log(np.where(x > 0, x, 1.0)) - self.lx[k], x - self.x[k])
        return np.exp(self.lt[k] + self.slope[k] * u)

    def upper(self, x):
        x = np.asarray(x, float)
        if self.symmetric:
            a = np.abs(x)
            r = self._upper_right(a)
            return np.where(x >= 0, r, 1.0 - r)
        return np.where(x < self.x[0], 1.0, self._upper_right(np.maximum(x, self.x[0])))

    def lower(self, x):
        x = np.asarray(x, float)
        if self.symmetric:
            return self.upper(-x)
        return 1.0 - self.upper(x)

    def _isf_right(self, p):
        lp = np.log(p)
        # knots have decreasing log-tail; find segment with lt[k] >= lp > lt[k+1]
        k = np.clip(np.searchsorted(-self.lt, -lp, side="right") - 1, 0, self.x.size - 2)
        u = (lp - self.lt[k]) / self.slope[k]
        return np.where(self.loglog[k], np.exp(self.lx[k] + u), self.x[k] + u)

    def isf(self, p):
        p = np.asarray(p, float)
        if self.symmetric:
            lo = np.minimum(p, 1 - p)
            r = self._isf_right(np.clip(lo, 1e-300, 0.5))
            return np.where(p <= 0.5, r, -r)
        return self._isf_right(np.clip(p, 1e-300, 1.0))

    def lisf(self, p):
        p = np.asarray(p, float)
        if self.symmetric:
            return -self.isf(p)
        return self.isf(1.0 - p)

    def density(self, x):
        x = np.asarray(x, float)
        a = np.abs(x) if self.symmetric else np.maximum(x, self.x[0])
        k = np.clip(np.searchsorted(self.x, a, side="right") - 1, 0, self.x.size - 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.where(self.loglog[k], -self.slope[k] / np.where(a > 0, a, 1.0), -self.slope[k])
        d = self._upper_right(a) * rate
        if not self.symmetric:
            d = np.where(x < self.x[0], 0.0, d)
        return d

    def breakpoints(self):
        if self.symmetric:
            return np.unique(np.concatenate([-self.x, self.x]))
        return self.x


class _Reflected(_Family):
    """Law of ``-X``."""

    def __init__(self, base):
        self.base = base
        self.continuous = base.continuous
        self.has_density = base.has_density

    def upper(self, x):
        return self.base.lower(-np.asarray(x, float))

    def lower(self, x):
        return self.base.upper(-np.asarray(x, float))

    def isf(self, p):
        return -self.base.lisf(p)

    def lisf(self, p):
        return -self.base.isf(p)

    def density(self, x):
        return self.base.density(-np.asarray(x, float))

    def breakpoints(self):
        return -self.base.breakpoints()[::-1]

    def atoms(self):
        a = self.base.atoms()
        if a is None:
            return None
        return -a[0][::-1], a[1][::-1]


# --------------------------------------------------------------------------
# spec record


def _positive(name, v):
    v = float(v)
    if not v > 0:
        raise SpecError(f"{name} must be positive, got {v}")
    return v


def _build_family(family, params):
    try:
        if family == "symmetric_exponential":
            return _SymExp(_positive("rate", params.get("rate", 1.0)))
        if family == "symmetric_weibull":
            p = float(params["p"])
            if p < 1:
                raise SpecError(f"weibull shape p must be >= 1, got {p}")
            return _SymWeibull(p)
        if family == "gaussian":
            return _Gaussian(float(params.get("mean", 0.0)), _positive("stddev", params.get("stddev", 1.0)))
        if family == "uniform":
            a, b = float(params["a"]), float(params["b"])
            if not a < b:
                raise SpecError(f"uniform needs a < b, got a={a}, b={b}")
            return _Uniform(a, b)
        if family == "two_point":
            x1, p1, x2 = float(params["x1"]), float(params["p1"]), float(params["x2"])
            if not 0 < p1 < 1:
                raise SpecError(f"two_point needs 0 < p1 < 1, got {p1}")
            if x1 == x2:
                raise SpecError("two_point atoms must differ")
            return _Atomic([x1, x2], [p1, 1 - p1])
        if family == "empirical":
            s = np.asarray(params["samples"], float)
            if s.size == 0:
                raise SpecError("empirical measure needs at least one sample")
            if not np.all(np.isfinite(s)):
                raise SpecError("empirical samples must be finite")
            return _Empirical(s)
        if family == "table":
            xs = np.asarray(params["x"], float)
            tails = np.asarray(params["tail"], float)
            interp = params.get("interp", "log-linear")
            symmetric = bool(params.get("symmetric", True))
            if xs.size < 2 or xs.size != tails.size:
                raise SpecError("table needs matching x and tail lists of length >= 2")
            if np.any(np.diff(xs) <= 0):
                raise SpecError("table x must be strictly increasing")
            if np.any(tails <= 0) or np.any(tails > 1) or np.any(np.diff(tails) >= 0):
                raise SpecError("table tails must lie in (0, 1] and strictly decrease")
            if interp not in ("log-linear", "log-log"):
                raise SpecError(f"unknown interpolation rule {interp!r}")
            if symmetric and (xs[0] != 0.0 or tails[0] != 0.5):
                raise SpecError("symmetric table must start at x=0 with tail 0.5")
            if not symmetric and tails[0] != 1.0:
                raise SpecError("one-sided table must start with tail 1")
            return _Table(xs, tails, interp, symmetric)
    except KeyError as exc:
        raise SpecError(f"{family}: missing parameter {exc.args[0]!r}") from None
    raise SpecError(f"unknown measure family {family!r}")


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """A one-dimensional probability measure given analytically or by data."""

    family: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_impl", _build_family(self.family, self.params))
        if not self.label:
            object.__setattr__(self, "label", self.family)

    # -- tails -----------------------------------------------------------
    def upper_tail(self, x):
        """``mu([x, inf))``."""
        return _scalarize(self._impl.upper(x), x)

    def lower_tail(self, x):
        """``mu((-inf, x])``."""
        return _scalarize(self._impl.lower(x), x)

    def isf(self, p):
        """Largest ``x`` with ``mu([x, inf)) >= p`` (inverse of the upper tail)."""
        return _scalarize(self._impl.isf(p), p)

    def quantile(self, q):
        """Left-continuous inverse of the distribution function."""
        qa = np.asarray(q, float)
        low = qa <= 0.5
        out = np.empty(qa.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[low] = self._impl.lisf(qa[low])
            out[~low] = self._impl.isf(1.0 - qa[~low])
        return _scalarize(out, q)

    def density(self, x):
        return _scalarize(self._impl.density(x), x)

    @property
    def has_density(self) -> bool:
        return self._impl.has_density

    @property
    def is_atomic(self) -> bool:
        return self._impl.atoms() is not None

    def atoms(self):
        return self._impl.atoms()

    def breakpoints(self) -> np.ndarray:
        return np.asarray(self._impl.breakpoints(), float)

    def median(self) -> float:
        return float(self.quantile(0.5))

    def support_max(self) -> float:
        """Largest point of the support (``inf`` when unbounded)."""
        if self.is_atomic:
            return float(self.atoms()[0][-1])
        if self.family == "uniform":
            return float(self.params["b"])
        return math.inf

    def reflected(self) -> "MeasureSpec":
        """Law of ``-X``."""
        out = object.__new__(MeasureSpec)
        object.__setattr__(out, "family", self.family)
        object.__setattr__(out, "params", self.params)
        object.__setattr__(out, "label", f"-({self.label})")
        object.__setattr__(out, "_impl", _Reflected(self._impl))
        return out

    def to_dict(self) -> dict:
        params = dict(self.params)
        if "samples" in params:
            params["samples"] = [float(v) for v in np.asarray(params["samples"]).tolist()]
        return {"family": self.family, "params": params, "label": self.label}


def _scalarize(out, like):
    if np.ndim(like) == 0:
        return float(out)
    return out


# convenience constructors

def symmetric_exponential(rate=1.0, label=None):
    return MeasureSpec("symmetric_exponential", {"rate": rate}, label or f"symexp({rate:g})")


def symmetric_weibull(p, label=None):
    return MeasureSpec("symmetric_weibull", {"p": p}, label or f"weibull({p:g})")


def gaussian(mean=0.0, stddev=1.0, label=None):
    return MeasureSpec("gaussian", {"mean": mean, "stddev": stddev}, label or f"gaussian({mean:g},{stddev:g})")


def uniform(a=0.0, b=1.0, label=None):
    return MeasureSpec("uniform", {"a": a, "b": b}, label or f"uniform({a:g},{b:g})")


def two_point(x1, p1, x2, label=None):
    return MeasureSpec("two_point", {"x1": x1, "p1": p1, "x2": x2}, label or f"two_point({x1:g},{p1:g},{x2:g})")


def empirical(samples, label="empirical"):
    return MeasureSpec("empirical", {"samples": np.sort(np.asarray(samples, float))}, label)


def tail_table(xs, tails, interp="log-linear", symmetric=True, label="table"):
    return MeasureSpec("table", {"x": list(map(float, xs)), "tail": list(map(float, tails)),
                                 "interp": interp, "symmetric": symmetric}, label)


def cauchy_table(x_max=1024.0):
    """Standard Cauchy upper tail tabulated on a doubling grid, power-law extrapolated."""
    xs = [0.0] + [2.0 ** k for k in range(-3, int(math.log2(x_max)) + 1)]
    tails = [0.5 - math.atan(x) / math.pi for x in xs]
    return tail_table(xs, tails, interp="log-log", symmetric=True, label="cauchy(table)")


# --------------------------------------------------------------------------
# spec files


def spec_from_dict(obj: dict, base_dir: Path | None = None) -> MeasureSpec:
    if not isinstance(obj, dict) or "family" not in obj:
        raise SpecError("measure spec must be a JSON object with a 'family' key")
    family = obj["family"]
    params = dict(obj.get("params", {}))
    if family == "empirical" and "samples" not in params:
        if "path" not in obj:
            raise SpecError("empirical spec needs 'path' or params.samples")
        path = Path(obj["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        params["samples"] = read_samples(path)
    return MeasureSpec(family, params, obj.get("label", ""))


def load_spec(path) -> MeasureSpec:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None
    return spec_from_dict(obj, path.parent)


def read_samples(path) -> np.ndarray:
    vals = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise SpecError(f"{path}:{lineno}: not a decimal float: {line!r}") from None
    if not vals:
        raise SpecError(f"{path}: no samples")
    return np.sort(np.asarray(vals))


def write_samples(path, values) -> None:
    Path(path).write_text("".join(f"{v:.17g}\n" for v in np.asarray(values, float)))


# --------------------------------------------------------------------------
# weighted tail integrals


class TailIntegral(NamedTuple):
    value: float
    abserr: float


def _power_integral(beta, a, b):
    return (b ** (beta + 1) - a ** (beta + 1)) / (beta + 1)


def _nu_plus_atomic(locs, masses, beta, x):
    # tail is a step function: integral is a finite sum
    sel = locs >= x
    return float(np.sum(masses[sel] * _power_integral(beta, x, locs[sel])))


def _nu_plus(impl, beta, x) -> TailIntegral:
    if x < 0:
        raise ValueError("nu_tail on the plus side needs x >= 0")
    atoms = impl.atoms()
    if atoms is not None:
        return TailIntegral(_nu_plus_atomic(atoms[0], atoms[1], beta, x), 0.0)
    tail_x = float(impl.upper(x))
    if tail_x == 0.0:
        return TailIntegral(0.0, 0.0)
    cut = max(float(impl.isf(max(TAIL_DEPTH * tail_x, 1e-300))), x)
    tail_cut = float(impl.upper(cut))
    remainder = 0.0
    if tail_cut > 0.0:
        # local power index of the tail at the cut-off
        eps = 1e-6
        ratio = float(impl.upper(cut * (1 + eps))) / tail_cut
        index = -math.log(ratio) / math.log1p(eps) if ratio > 0 else math.inf
        if index <= (beta + 1.0) * 1.01:
            raise DivergenceError(x=x, side="plus")
        remainder = tail_cut * cut ** (beta + 1) / (index - beta - 1)
    bps = impl.breakpoints()
    bps = bps[(bps > x) & (bps < cut)]
    edges = [x]
    if cut > 4 * max(x, 1e-12):
        lo = max(x, 1.0)
        if lo > x:
            edges.append(lo)
        while edges[-1] * 2 < cut:
            edges.append(edges[-1] * 2)
    edges.append(cut)
    edges = np.unique(np.concatenate([edges, bps]))
    total, err = 0.0, 0.0
    f = (lambda y: y ** beta * float(impl.upper(y))) if beta > 0 else (lambda y: float(impl.upper(y)))
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=400)
        total += v
        err += e
    return TailIntegral(total + remainder, err + 1e-3 * remainder)


def nu_tail_estimate(spec: MeasureSpec, beta: float, x: float, side: str = "plus") -> TailIntegral:
    """Weighted tail integral with its error bound.

    ``plus``: ``int_x^inf y^beta mu([y, inf)) dy`` for ``x >= 0``;
    ``minus``: ``int_-inf^x |y|^beta mu((-inf, y]) dy`` for ``x <= 0``.
    Raises :class:`DivergenceError` when the integral is infinite.
    """
    if side == "plus":
        return _nu_plus(spec._impl, beta, x)
    if side == "minus":
        try:
            return _nu_plus(_Reflected(spec._impl), beta, -x)
        except DivergenceError:
            raise DivergenceError(x=x, side="minus") from None
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def nu_tail(spec: MeasureSpec, beta: float, x: float, side: str = "plus") -> float:
    return nu_tail_estimate(spec, beta, x, side).value


def nu_tail_grid(spec: MeasureSpec, beta: float, xs, side: str = "plus") -> np.ndarray:
    """Vectorized ``nu_tail`` on an increasing grid of nonnegative abscissae.

    For ``side='minus'`` the grid holds the *magnitudes* ``|x|`` of the
    negative points. Cells are integrated by 16-point Gauss-Legendre (with
    the family's kinks inserted) and summed from the right.
    """
    impl = spec._impl if side == "plus" else _Reflected(spec._impl)
    xs = np.asarray(xs, float)
    if np.any(np.diff(xs) <= 0) or xs[0] < 0:
        raise ValueError("grid must be increasing and nonnegative")
    atoms = impl.atoms()
    if atoms is not None:
        locs, masses = atoms
        # sum over atoms >= x of w (a^{b+1} - x^{b+1})/(b+1)
        big = locs ** (beta + 1) * masses
        cum_big = np.concatenate([np.cumsum(big[::-1])[::-1], [0.0]])
        k = np.searchsorted(locs, xs, side="left")
        tail = np.concatenate([np.cumsum(masses[::-1])[::-1], [0.0]])[k]
        return np.maximum((cum_big[k] - xs ** (beta + 1) * tail) / (beta + 1), 0.0)
    bps = impl.breakpoints()
    bps = bps[(bps > xs[0]) & (bps < xs[-1])]
    fine = np.unique(np.concatenate([xs, bps]))
    a, b = fine[:-1], fine[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = impl.upper(nodes)
    if beta > 0:
        vals = vals * nodes ** beta
    cells = half * (vals @ _GL_WEIGHTS)
    last = _nu_plus(impl, beta, float(fine[-1])).value
    acc = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]]) + last
    idx = np.searchsorted(fine, xs)
    return acc[idx]


# --------------------------------------------------------------------------
# sampling


@dataclass
class SampleBatch:
    values: np.ndarray
    seed: int
    spec_label: str
    generator: str = GENERATOR_NAME

    def __len__(self):
        return self.values.size

    def to_text(self) -> str:
        return "".join(f"{v:.17g}\n" for v in self.values)


def _chunk_uniforms(seed, stream, chunk):
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(stream), int(chunk)))
    u = np.random.Generator(np.random.PCG64(ss)).random(CHUNK)
    # shift off zero: values lie in (0, 1)
    return u + 2.0 ** -54


def uniform_stream(count, seed, stream=0, workers=1) -> np.ndarray:
    """First ``count`` uniforms of the stream keyed by ``(seed, stream)``.

    Chunks are keyed by their index, so the output does not depend on
    ``workers``.
    """
    nchunks = -(-int(count) // CHUNK)
    if workers > 1 and nchunks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda k: _chunk_uniforms(seed, stream, k), range(nchunks)))
    else:
        parts = [_chunk_uniforms(seed, stream, k) for k in range(nchunks)]
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)[: int(count)]


def sample(spec: MeasureSpec, n: int, seed: int, stream: int = 0, workers: int = 1) -> SampleBatch:
    """``n`` inverse-CDF draws from the deterministic stream keyed by ``seed``."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    u = uniform_stream(n, seed, stream, workers)
    return SampleBatch(np.asarray(spec.quantile(u), float), int(seed), spec.label)


def sample_matrix(spec: MeasureSpec, rows: int, dim: int, seed: int, stream: int = 0, workers: int = 1) -> np.ndarray:
    """``rows`` independent draws of the product measure on ``R^dim``."""
    u = uniform_stream(rows * dim, seed, stream, workers)
    return np.asarray(spec.quantile(u), float).reshape(rows, dim)
