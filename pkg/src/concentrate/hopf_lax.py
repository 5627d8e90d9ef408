"""Grid Hopf-Lax semigroup, Hamilton-Jacobi residuals and transport checks.

``Q_t f(x) = min_y f(y) + t L*((x - y)/t)`` is computed exactly over grid
points ``y`` with a lower-envelope sweep: the kernel is convex, so the
leftmost minimizer is nondecreasing in ``x``. The cost is separable across
coordinates, so higher-dimensional grids are swept one axis at a time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, special

from . import kernels
from .cost import INF, CostPair, dlstar, lstar
from .measure import MeasureSpec

BOUNDARY_STEPS = 5


# ---------------------------------------------------------------------------
# grid functions


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("an axis needs at least two points")
        if not self.hi > self.lo:
            raise ValueError("axis maximum must exceed its minimum")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    def points(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.count)


class GridFunction:
    """Finite values on a product of uniform axes; immutable after construction."""

    def __init__(self, axes, values, boundary_active=None):
        self.axes = tuple(a if isinstance(a, Axis) else Axis(float(a[0]), float(a[1]), int(a[2])) for a in axes)
        vals = np.array(values, dtype=np.float64)
        shape = tuple(a.count for a in self.axes)
        if vals.shape != shape:
            raise ValueError(f"values have shape {vals.shape}, axes need {shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        vals.setflags(write=False)
        self.values = vals
        if boundary_active is not None:
            boundary_active = np.array(boundary_active, dtype=bool)
            boundary_active.setflags(write=False)
        self.boundary_active = boundary_active

    @classmethod
    def from_function(cls, fn, axes):
        axes = [a if isinstance(a, Axis) else Axis(float(a[0]), float(a[1]), int(a[2])) for a in axes]
        mesh = np.meshgrid(*[a.points() for a in axes], indexing="ij")
        return cls(axes, fn(*mesh))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def points(self, axis: int = 0) -> np.ndarray:
        return self.axes[axis].points()

    def header(self) -> dict:
        return {"axes": [[a.lo, a.hi, a.count] for a in self.axes]}

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w") as fh:
            fh.write("# " + json.dumps(self.header()) + "\n")
            for v in self.values.ravel():
                fh.write(f"{v:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        path = Path(path)
        with path.open() as fh:
            first = fh.readline()
            if not first.startswith("#"):
                raise ValueError(f"{path}: missing '# {{\"axes\": ...}}' header line")
            try:
                header = json.loads(first[1:])
                axes = [Axis(float(a[0]), float(a[1]), int(a[2])) for a in header["axes"]]
            except (json.JSONDecodeError, KeyError, TypeError, IndexError) as exc:
                raise ValueError(f"{path}: malformed header: {exc}") from exc
            vals = np.loadtxt(fh, dtype=np.float64, ndmin=1)
        shape = tuple(a.count for a in axes)
        if vals.size != int(np.prod(shape)):
            raise ValueError(f"{path}: expected {int(np.prod(shape))} values, found {vals.size}")
        return cls(axes, vals.reshape(shape))


def kernel_table(axis: Axis, t: float, cost: CostPair) -> np.ndarray:
    """``t L*(k h / t)`` for offsets ``k = -(n-1) .. n-1``."""
    offsets = np.arange(-(axis.count - 1), axis.count) * axis.step
    return t * np.asarray(lstar(cost, offsets / t), dtype=np.float64)


def _boundary_mask(arg: np.ndarray, count: int) -> np.ndarray:
    return (arg < BOUNDARY_STEPS) | (arg > count - 1 - BOUNDARY_STEPS)


def _sweep_axis(values: np.ndarray, axis_index: int, axis: Axis, t: float, cost: CostPair, envelope):
    moved = np.moveaxis(values, axis_index, -1)
    shape = moved.shape
    lines = np.ascontiguousarray(moved.reshape(-1, axis.count))
    out, arg = envelope(lines, kernel_table(axis, t, cost))
    own = np.arange(axis.count)
    # a minimizer near the edge only signals truncation if it moved towards the edge
    flagged = _boundary_mask(arg, axis.count) & (arg != own)
    out = np.moveaxis(out.reshape(shape), -1, axis_index)
    flagged = np.moveaxis(flagged.reshape(shape), -1, axis_index)
    return out, flagged


def infconv_1d(f: GridFunction, t: float, cost: CostPair, envelope=None) -> GridFunction:
    """Exact grid Hopf-Lax step in one dimension; ties go to the smallest ``y``."""
    if f.ndim != 1:
        raise ValueError("infconv_1d needs a one-dimensional grid function")
    return infconv_nd(f, t, cost, envelope=envelope)


def infconv_nd(f: GridFunction, t: float, cost: CostPair, order=None, envelope=None) -> GridFunction:
    """Sweep each axis in ``order`` (default ``0, 1, ...``)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if f.ndim > 3:
        raise ValueError("at most three dimensions are supported")
    envelope = kernels.lower_envelope if envelope is None else envelope
    order = tuple(range(f.ndim)) if order is None else tuple(order)
    if sorted(order) != list(range(f.ndim)):
        raise ValueError("order must be a permutation of the axes")
    vals = f.values
    flags = np.zeros(vals.shape, bool)
    for ax in order:
        vals, fl = _sweep_axis(vals, ax, f.axes[ax], t, cost, envelope)
        flags |= fl
    return GridFunction(f.axes, vals, flags)


def infconv_bruteforce(f: GridFunction, t: float, cost: CostPair, order=None) -> np.ndarray:
    """Joint minimum over all grid ``y``; sums are formed axis by axis in ``order``."""
    order = tuple(range(f.ndim)) if order is None else tuple(order)
    n = f.values.shape
    tables = [kernel_table(a, t, cost) for a in f.axes]
    out = np.empty(n)
    for idx in np.ndindex(*n):
        total = f.values
        for ax in order:
            i = idx[ax]
            seg = tables[ax][i - np.arange(n[ax]) + n[ax] - 1]
            shape = [1] * f.ndim
            shape[ax] = n[ax]
            total = total + seg.reshape(shape)
        out[idx] = total.min()
    return out


def envelope_bruteforce(f_lines: np.ndarray, c: np.ndarray):
    """O(N^2) reference for :func:`kernels.lower_envelope`."""
    f_lines = np.asarray(f_lines, float)
    n = f_lines.shape[1]
    i = np.arange(n)
    idx = i[:, None] - i[None, :] + n - 1
    totals = f_lines[:, None, :] + c[idx][None, :, :]
    arg = np.argmin(totals, axis=2)
    return np.take_along_axis(totals, arg[:, :, None], axis=2)[:, :, 0], arg


def is_discretely_convex(f: GridFunction, tol: float = 1e-12) -> bool:
    vals = f.values
    for ax in range(f.ndim):
        second = np.diff(vals, n=2, axis=ax)
        if second.size and second.min() < -tol * max(1.0, float(np.abs(vals).max())):
            return False
    return True


# ---------------------------------------------------------------------------
# Hamilton-Jacobi residual


@dataclass
class ResidualReport:
    max_residual: float
    per_t: list
    points_used: int
    kinks_excluded: int
    boundary_excluded: int

    def to_dict(self):
        return {"max_residual": self.max_residual, "per_t": self.per_t, "points_used": self.points_used,
                "kinks_excluded": self.kinks_excluded, "boundary_excluded": self.boundary_excluded}


def _hamiltonian(cost: CostPair, s: np.ndarray) -> np.ndarray:
    if cost.beta == 0:
        out = (s / cost.delta) ** 2
        return np.where(np.abs(s) <= cost.delta * (1 + 1e-12), out, np.inf)
    a = np.abs(s)
    return np.maximum(a * a, a ** cost.exponent)


def hj_residual(f: GridFunction, t_list, cost: CostPair, dt: float | None = None) -> ResidualReport:
    """Max of ``|d_t Q + H(d_x Q)|`` over grid points away from kinks and the boundary.

    Time derivatives are central differences over ``t +- dt`` (default one
    grid step); space derivatives are forward differences.
    """
    if f.ndim != 1:
        raise ValueError("hj_residual is one-dimensional")
    step = f.axes[0].step
    dt = step if dt is None else float(dt)
    thresh = math.sqrt(step)
    per_t, used, kinks, bnd = [], 0, 0, 0
    worst = 0.0
    for t in t_list:
        if not t > dt:
            raise ValueError("every t must exceed dt")
        q_lo = infconv_1d(f, t - dt, cost)
        q = infconv_1d(f, t, cost)
        q_hi = infconv_1d(f, t + dt, cost)
        v = q.values
        dq_t = (q_hi.values - q_lo.values) / (2 * dt)
        right = np.empty_like(v)
        left = np.empty_like(v)
        right[:-1] = np.diff(v) / step
        left[1:] = np.diff(v) / step
        interior = np.zeros(v.size, bool)
        interior[1:-1] = True
        kink = interior & (np.abs(right - left) > thresh)
        flagged = np.zeros(v.size, bool)
        for g in (q_lo, q, q_hi):
            flagged |= g.boundary_active
        # forward differences at i read i+1, so a flag there also spoils i
        flagged[:-1] |= flagged[1:]
        keep = interior & ~kink & ~flagged
        res = np.abs(dq_t + _hamiltonian(cost, right))[keep]
        m = float(res.max()) if res.size else 0.0
        per_t.append({"t": float(t), "max_residual": m, "points": int(keep.sum())})
        worst = max(worst, m)
        used += int(keep.sum())
        kinks += int(kink.sum())
        bnd += int((interior & flagged).sum())
    return ResidualReport(worst, per_t, used, kinks, bnd)


# ---------------------------------------------------------------------------
# hypercontractivity


@dataclass(frozen=True)
class Schedule:
    """Exponent curve ``k(t)`` along which ``|| e^(Q_t phi) ||_k(t)`` is nonincreasing.

    For ``beta > 0``: ``1 + (t - t0)/B`` up to ``t0`` and
    ``(1 + (t - t0)/(B beta))^beta`` after. For ``beta = 0``:
    ``min(1 + (t - t0)/B, 1)``; ``prefactor=True`` multiplies that by ``1/B``.
    """

    beta: float
    B: float
    t0: float
    delta: float | None = None
    prefactor: bool = False

    def __post_init__(self):
        if not self.B > 0:
            raise ValueError("B must be positive")
        if not 0 <= self.t0 <= self.B:
            raise ValueError("t0 must lie in [0, B]")
        if self.beta == 0 and self.delta is None:
            object.__setattr__(self, "delta", 1.0)
        if self.prefactor and self.beta != 0:
            raise ValueError("the 1/B prefactor only applies to beta = 0")

    @property
    def cost(self) -> CostPair:
        return CostPair(self.beta, self.delta if self.beta == 0 else None)

    def k(self, t):
        t = np.asarray(t, float)
        lin = 1.0 + (t - self.t0) / self.B
        if self.beta == 0:
            out = np.minimum(lin, 1.0)
            if self.prefactor:
                out = out / self.B
        else:
            late = np.power(np.maximum(1.0 + (t - self.t0) / (self.B * self.beta), 0.0), self.beta)
            out = np.where(t <= self.t0, lin, late)
        return float(out) if out.ndim == 0 else out


def grid_masses(spec: MeasureSpec, axis: Axis) -> np.ndarray:
    """Probabilities of the grid cells; the end cells absorb the tails."""
    x = axis.points()
    edges = (x[:-1] + x[1:]) / 2
    cdf = np.concatenate([[0.0], np.asarray(spec.lower_tail(edges), float), [1.0]])
    p = np.diff(cdf)
    return p / p.sum()


def log_norm(values: np.ndarray, masses: np.ndarray, k: float) -> float:
    """``log || e^v ||_k`` under the discrete law ``masses``; ``k = 0`` is the geometric mean."""
    if k == 0:
        return float(np.dot(masses, values))
    live = masses > 0
    return float(special.logsumexp(k * values[live], b=masses[live])) / k


@dataclass
class HypercontractivityReport:
    margins: list
    min_margin: float
    boundary_active: bool

    def to_dict(self):
        return {"margins": self.margins, "min_margin": self.min_margin, "boundary_active": self.boundary_active}


def hypercontractivity_check(spec: MeasureSpec, phi: GridFunction, schedule: Schedule, t_list) -> HypercontractivityReport:
    """``log ||e^phi||_k(0) - log ||e^(Q_t phi)||_k(t)`` for each ``t`` under the grid law of ``spec``."""
    if phi.ndim != 1:
        raise ValueError("hypercontractivity_check is one-dimensional")
    k0 = schedule.k(0.0)
    if k0 < 0:
        raise ValueError("k(0) must be nonnegative")
    p = grid_masses(spec, phi.axes[0])
    rhs = log_norm(phi.values, p, k0)
    cost = schedule.cost
    margins, boundary = [], False
    for t in t_list:
        kt = schedule.k(t)
        if kt < 0:
            raise ValueError(f"k({t}) is negative")
        q = infconv_1d(phi, t, cost)
        boundary |= bool(np.any(q.boundary_active & (p > 1e-300)))
        margins.append({"t": float(t), "k": kt, "margin": rhs - log_norm(q.values, p, kt)})
    return HypercontractivityReport(margins, min(m["margin"] for m in margins), boundary)


def dual_transport_check(spec: MeasureSpec, phi: GridFunction, b: float, cost: CostPair) -> float:
    """``(int e^(Q_1 phi / b) dmu)^b e^(-int phi dmu)`` under the grid law of ``spec``."""
    if phi.ndim != 1:
        raise ValueError("dual_transport_check is one-dimensional")
    if not b > 0:
        raise ValueError("b must be positive")
    p = grid_masses(spec, phi.axes[0])
    q = infconv_1d(phi, 1.0, cost)
    return math.exp(log_norm(q.values, p, 1.0 / b) - float(np.dot(p, phi.values)))


def grid_lsi_ratio(spec: MeasureSpec, psi: GridFunction, cost: CostPair) -> float:
    """``Ent e^psi / E H(psi') e^psi`` under the grid law, with central-difference slopes."""
    x = psi.points(0)
    p = grid_masses(spec, psi.axes[0])
    v = psi.values
    slope = np.gradient(v, x)
    c = float(v.max())
    w = np.exp(v - c)
    z = float(np.dot(p, w))
    ent = float(np.dot(p, (v - c) * w)) - z * math.log(z)
    rhs = float(np.dot(p, _hamiltonian(cost, slope) * w))
    if rhs <= 0:
        return 0.0 if ent <= 1e-300 else math.inf
    return ent / rhs


# ---------------------------------------------------------------------------
# one-dimensional catalog for the semigroup checks


def catalog_1d(axis: Axis, amplitude: float) -> dict[str, GridFunction]:
    """Convex, Lipschitz, bounded-below functions with slopes at most ``amplitude``."""
    a = amplitude
    fns = {
        "abs": lambda x: a * np.abs(x),
        "hinge": lambda x: a * np.maximum(x - 1.0, 0.0),
        "smooth_abs": lambda x: a * np.sqrt(1.0 + x * x),
        "distance_to_interval": lambda x: a * np.maximum(np.abs(x) - 1.0, 0.0),
        "softplus": lambda x: a * np.logaddexp(0.0, x),
    }
    return {k: GridFunction.from_function(fn, [axis]) for k, fn in fns.items()}


def barycentric_relaxation(f: GridFunction, lam: float, cost: CostPair, theta_points: int = 2001) -> np.ndarray:
    """``inf_p int f dp + lam L*(x - bary p)`` over laws on at most two grid points."""
    if f.ndim != 1:
        raise ValueError("one-dimensional only")
    y = f.points(0)
    v = f.values
    th = np.linspace(0.0, 1.0, theta_points)
    j, k = np.triu_indices(y.size)
    mean_f = th[None, :] * v[j, None] + (1 - th[None, :]) * v[k, None]
    bary = th[None, :] * y[j, None] + (1 - th[None, :]) * y[k, None]
    out = np.empty(y.size)
    for i, x in enumerate(y):
        out[i] = float(np.min(mean_f + lam * np.asarray(lstar(cost, x - bary), float)))
    return out


# ---------------------------------------------------------------------------
# discrete transport


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: tuple

    def __post_init__(self):
        locs = [float(a[0]) for a in self.atoms]
        masses = [float(a[1]) for a in self.atoms]
        if not locs:
            raise ValueError("a discrete measure needs at least one atom")
        if any(not 0 < m <= 1 for m in masses):
            raise ValueError("masses must lie in (0, 1]")
        if abs(sum(masses) - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {sum(masses)}, not 1")
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")
        object.__setattr__(self, "atoms", tuple(sorted(zip(locs, masses))))

    @property
    def locations(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    def __len__(self):
        return len(self.atoms)

    def to_dict(self):
        return {"atoms": [list(a) for a in self.atoms]}


def _check_small(*measures):
    for m in measures:
        if len(m) > 4:
            raise ValueError("transport operations support at most 4 atoms")


def transport_objective(pi: np.ndarray, mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostPair) -> float:
    """``sum_x nu(x) L*(x - bary p_x)`` for the coupling ``pi`` (rows: nu, columns: mu)."""
    x, wn = nu.locations, nu.masses
    y = mu.locations
    bary = (pi @ y) / wn
    return float(np.dot(wn, lstar(cost, x - bary)))


@dataclass
class WeakTransportResult:
    value: float
    coupling: np.ndarray
    status: str
    starts: int

    def to_dict(self):
        return {"value": self.value, "coupling": self.coupling.tolist(), "status": self.status, "starts": self.starts}


def _couplings(nu, mu, rng, count):
    a, b = nu.masses, mu.masses
    yield np.outer(a, b)
    # north-west corner rule
    nw = np.zeros((len(a), len(b)))
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while i < len(a) and j < len(b):
        m = min(ra[i], rb[j])
        nw[i, j] = m
        ra[i] -= m
        rb[j] -= m
        if ra[i] <= 1e-15:
            i += 1
        else:
            j += 1
    yield nw
    for _ in range(count):
        k = rng.random((len(a), len(b))) + 1e-3
        for _ in range(200):  # Sinkhorn scaling to the marginals
            k *= (a / k.sum(axis=1))[:, None]
            k *= (b / k.sum(axis=0))[None, :]
        yield k


def weak_transport_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostPair,
                            starts: int = 4, seed: int = 0) -> WeakTransportResult:
    """Weak transport cost from ``nu`` to ``mu`` by multi-start SLSQP over couplings.

    The objective is convex in the coupling and the feasible set is a
    polytope, so every local minimizer is global; the starts guard against
    solver stalls.
    """
    _check_small(mu, nu)
    kn, km = len(nu), len(mu)
    if kn == 1 or km == 1:
        pi = np.outer(nu.masses, mu.masses)
        return WeakTransportResult(transport_objective(pi, mu, nu, cost), pi, "closed form", 0)
    a, b = nu.masses, mu.masses
    x, y = nu.locations, mu.locations

    def fun(z):
        pi = z.reshape(kn, km)
        return transport_objective(pi, mu, nu, cost)

    def jac(z):
        pi = z.reshape(kn, km)
        d = x - (pi @ y) / a
        g = -np.asarray(dlstar(cost, d), float)[:, None] * y[None, :]
        return g.ravel()

    rows = np.kron(np.eye(kn), np.ones(km))
    cols = np.kron(np.ones(kn), np.eye(km))
    A = np.vstack([rows, cols[:-1]])
    rhs = np.concatenate([a, b[:-1]])
    cons = {"type": "eq", "fun": lambda z: A @ z - rhs, "jac": lambda z: A}
    bounds = [(0.0, min(a[i], b[j])) for i in range(kn) for j in range(km)]
    rng = np.random.default_rng(seed)
    best, best_pi, status = math.inf, None, "no start converged"
    for start in _couplings(nu, mu, rng, max(starts - 2, 0)):
        res = optimize.minimize(fun, start.ravel(), jac=jac, bounds=bounds, constraints=[cons],
                                method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        z = np.clip(res.x, 0.0, None)
        pi = _project_coupling(z.reshape(kn, km), a, b)
        val = transport_objective(pi, mu, nu, cost)
        if val < best:
            best, best_pi, status = val, pi, res.message if isinstance(res.message, str) else str(res.message)
    return WeakTransportResult(max(best, 0.0), best_pi, status, starts)


def _project_coupling(pi, a, b):
    pi = np.maximum(pi, 0.0)
    for _ in range(50):
        pi *= (a / np.maximum(pi.sum(axis=1), 1e-300))[:, None]
        pi *= (b / np.maximum(pi.sum(axis=0), 1e-300))[None, :]
    return pi


def weak_transport_grid_search(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: CostPair,
                               step: float = 1e-3, coarse: float = 0.02) -> float:
    """Reference value: coarse grid over the free coupling entries, then a 1e-3 grid around the best.

    The coupling is determined by its top-left ``(k_nu - 1) x (k_mu - 1)`` block.
    """
    _check_small(mu, nu)
    a, b = nu.masses, mu.masses
    kn, km = len(a), len(b)
    if kn == 1 or km == 1:
        return transport_objective(np.outer(a, b), mu, nu, cost)
    free = (kn - 1) * (km - 1)
    ub = np.array([min(a[i], b[j]) for i in range(kn - 1) for j in range(km - 1)])

    def evaluate(block):  # block: (M, free)
        M = block.shape[0]
        pi = np.zeros((M, kn, km))
        pi[:, :-1, :-1] = block.reshape(M, kn - 1, km - 1)
        pi[:, :-1, -1] = a[:-1] - pi[:, :-1, :-1].sum(axis=2)
        pi[:, -1, :] = b - pi[:, :-1, :].sum(axis=1)
        ok = np.all(pi >= -1e-12, axis=(1, 2))
        bary = np.einsum("mij,j->mi", pi, mu.locations) / a
        val = (np.asarray(lstar(cost, nu.locations[None, :] - bary), float) * a).sum(axis=1)
        return np.where(ok, val, np.inf)

    def search(lo, hi, h):
        # the upper bound is kept on each axis so corner couplings are always tried
        axes = [np.unique(np.append(np.arange(l, u + h / 2, h), u)) for l, u in zip(lo, hi)]
        best_v, best_x = math.inf, None
        for block in _mesh_chunks(axes):
            vals = evaluate(block)
            k = int(np.argmin(vals))
            if vals[k] < best_v:
                best_v, best_x = float(vals[k]), block[k]
        return best_v, best_x

    v, x0 = search(np.zeros(free), ub, coarse)
    while x0 is None and coarse > step:
        # a thin feasible set can fall between coarse grid points
        coarse /= 2
        v, x0 = search(np.zeros(free), ub, coarse)
    if x0 is None:
        raise ValueError("grid search found no feasible coupling; reduce step")
    lo = np.maximum(x0 - coarse, 0.0)
    hi = np.minimum(x0 + coarse, ub)
    v2, _ = search(lo, hi, step)
    return min(v, v2)


def _mesh_chunks(axes, chunk=1 << 20):
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), sizes)
        yield np.stack([axes[d][idx[d]] for d in range(len(axes))], axis=1)


def relative_entropy_discrete(nu: DiscreteMeasure, mu: DiscreteMeasure):
    """``H(nu | mu)``; :data:`INF` when ``nu`` charges a point ``mu`` does not."""
    mu_map = dict(mu.atoms)
    total = 0.0
    for x, p in nu.atoms:
        q = mu_map.get(x)
        if q is None:
            return INF
        total += p * math.log(p / q)
    return max(total, 0.0)


def transport_inequality_holds(T: float, b: float, H) -> bool:
    return H is INF or T <= b * H + 1e-12


# ---------------------------------------------------------------------------
# fitted constant for discrete measures


def dual_value_on_atoms(mu: DiscreteMeasure, atom_values: np.ndarray, b: float, cost: CostPair,
                        step: float = 1e-3) -> float:
    """Dual left-hand side for the convex piecewise-linear interpolation of ``atom_values``.

    The interpolant is taken as ``+inf`` outside the hull of the atoms; among
    convex functions with the given atom values it is the largest, hence the
    most demanding for the dual inequality.
    """
    q = _q1_on_atoms(mu, atom_values, cost, step)
    w = mu.masses
    return math.exp(b * float(special.logsumexp(q / b, b=w)) - float(np.dot(w, atom_values)))


def _q1_on_atoms(mu, atom_values, cost, step):
    y = mu.locations
    if len(y) == 1:
        return np.asarray(atom_values, float)
    count = int(round((y[-1] - y[0]) / step)) + 1
    axis = Axis(float(y[0]), float(y[-1]), count)
    grid = axis.points()
    f = GridFunction([axis], np.interp(grid, y, atom_values))
    q = infconv_1d(f, 1.0, cost).values
    idx = np.rint((y - y[0]) / axis.step).astype(int)
    return q[idx]


def _b_min(mu, atom_values, cost, step):
    q = _q1_on_atoms(mu, atom_values, cost, step)
    w = mu.masses
    mean_phi = float(np.dot(w, atom_values))

    top = float(q.max())
    gap = q - top

    def excess(log_b):
        # b log E e^(q/b), shifted by max q for stability
        b = math.exp(log_b)
        return top + b * math.log(float(np.dot(w, np.exp(gap / b)))) - mean_phi

    lo, hi = -20.0, 20.0
    if excess(lo) <= 0:
        return 0.0
    if excess(hi) > 0:
        return math.inf
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return math.exp(hi)


@dataclass
class DualFit:
    b: float
    witness: list = field(default_factory=list)


def fit_dual_constant(mu: DiscreteMeasure, cost: CostPair, slope_max: float = 8.0, slope_points: int = 30,
                      step: float = 1e-3) -> DualFit:
    """Smallest ``b`` for which the dual inequality holds over convex atom-value vectors.

    Vectors are parametrized by the slopes between consecutive atoms
    (nondecreasing, so the interpolant is convex). Slopes run over a
    symmetric geometric grid, dense near zero where the worst cases sit for
    nearby atoms, and the worst grid point is refined by Nelder-Mead.
    """
    _check_small(mu)
    y = mu.locations
    k = len(y)
    if k == 1:
        return DualFit(0.0, [0.0])
    gaps = np.diff(y)
    pos = np.geomspace(1e-3, slope_max, slope_points)
    grid = np.concatenate([-pos[::-1], [0.0], pos])

    def values(slopes):
        return np.concatenate([[0.0], np.cumsum(np.asarray(slopes) * gaps)])

    def score(slopes):
        s = np.asarray(slopes)
        if np.any(np.diff(s) < 0):
            return 0.0
        b = _b_min(mu, values(s), cost, step)
        return b if math.isfinite(b) else 0.0

    best, best_s = 0.0, None
    for combo in np.array(np.meshgrid(*[grid] * (k - 1), indexing="ij")).reshape(k - 1, -1).T:
        if np.any(np.diff(combo) < 0):
            continue
        val = score(combo)
        if val > best:
            best, best_s = val, combo
    if best_s is not None:
        res = optimize.minimize(lambda s: -score(s), best_s, method="Nelder-Mead",
                                options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400})
        if -res.fun > best:
            best, best_s = float(-res.fun), res.x
    return DualFit(best, [] if best_s is None else list(map(float, values(best_s))))
