import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concentrate.cost import INF, CostPair, h, lstar
from concentrate.hopf_lax import (Axis, DiscreteMeasure, GridFunction, Schedule, barycentric_relaxation, catalog_1d,
                                  dual_transport_check, dual_value_on_atoms, fit_dual_constant, grid_lsi_ratio,
                                  grid_masses, hj_residual, hypercontractivity_check, infconv_1d, infconv_bruteforce,
                                  infconv_nd, is_discretely_convex, kernel_table, log_norm, relative_entropy_discrete,
                                  transport_inequality_holds, transport_objective, weak_transport_discrete,
                                  weak_transport_grid_search)
from concentrate.measure import gaussian, symmetric_exponential

COSTS = [CostPair(1.0), CostPair(0.5), CostPair(0.25), CostPair(0.0, 1.0), CostPair(0.0, 0.5)]
SYMEXP = symmetric_exponential(1.0)


def random_convex(rng, axis, scale=1.0):
    """Random convex grid function: cumulative sums of sorted slopes."""
    slopes = np.sort(rng.normal(0, scale, axis.count - 1))
    vals = np.concatenate([[0.0], np.cumsum(slopes * axis.step)]) + rng.normal()
    return GridFunction([axis], vals)


def test_zero_function_stays_zero():
    ax = Axis(-2, 2, 41)
    for cost in COSTS:
        q = infconv_1d(GridFunction([ax], np.zeros(41)), 0.7, cost)
        assert np.all(q.values == 0.0)
    q2 = infconv_nd(GridFunction([ax, ax], np.zeros((41, 41))), 0.7, CostPair(1.0))
    assert np.all(q2.values == 0.0)


@pytest.mark.parametrize("beta", [1.0, 0.5, 0.25])
def test_linear_function_closed_form(beta):
    cost = CostPair(beta)
    ax = Axis(-40, 40, 8001)
    a, t = 0.7, 1.5
    f = GridFunction.from_function(lambda x: a * x, [ax])
    q = infconv_1d(f, t, cost)
    x = ax.points()
    interior = np.abs(x) < 20
    # the grid minimizer is at x - t L*'^{-1}(a); the exact value is a x - t H(a)
    assert np.max(np.abs(q.values[interior] - (a * x[interior] - t * h(cost, a)))) <= 1e-9


def test_matches_bruteforce_1d():
    rng = np.random.default_rng(0)
    for k in range(30):
        ax = Axis(-3, 3, int(rng.integers(2, 200)))
        cost = COSTS[k % len(COSTS)]
        f = GridFunction([ax], rng.normal(size=ax.count) * 2)
        t = float(rng.uniform(0.1, 3))
        assert np.array_equal(infconv_1d(f, t, cost).values, infconv_bruteforce(f, t, cost))


def test_matches_bruteforce_3d():
    rng = np.random.default_rng(1)
    axes = [Axis(-1, 1, 7), Axis(-2, 1, 6), Axis(0, 2, 5)]
    f = GridFunction(axes, rng.normal(size=(7, 6, 5)))
    assert np.array_equal(infconv_nd(f, 0.8, CostPair(0.5)).values, infconv_bruteforce(f, 0.8, CostPair(0.5)))


def test_axis_order_agrees_to_rounding():
    rng = np.random.default_rng(2)
    ax = Axis(-2, 2, 32)
    f = GridFunction([ax, ax], rng.normal(size=(32, 32)))
    a = infconv_nd(f, 1.0, CostPair(0.5), order=(0, 1)).values
    b = infconv_nd(f, 1.0, CostPair(0.5), order=(1, 0)).values
    assert np.max(np.abs(a - b)) <= 1e-12
    assert np.array_equal(b, infconv_bruteforce(f, 1.0, CostPair(0.5), order=(1, 0)))


def test_kernel_table_is_even_and_zero_at_center():
    ax = Axis(0, 1, 11)
    c = kernel_table(ax, 0.5, CostPair(0.5))
    assert c.size == 21 and c[10] == 0.0
    assert np.array_equal(c, c[::-1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(COSTS), st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_semigroup_below_phi_and_decreasing_in_t(seed, cost, t1, t2):
    rng = np.random.default_rng(seed)
    f = random_convex(rng, Axis(-3, 3, 64))
    lo, hi = min(t1, t2), max(t1, t2)
    q_lo = infconv_1d(f, lo, cost).values
    q_hi = infconv_1d(f, hi, cost).values
    assert np.all(q_lo <= f.values)
    assert np.all(q_hi <= q_lo + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(COSTS), st.floats(0.05, 3.0))
def test_semigroup_preserves_convexity(seed, cost, t):
    rng = np.random.default_rng(seed)
    f = random_convex(rng, Axis(-3, 3, 64))
    assert is_discretely_convex(f)
    assert is_discretely_convex(infconv_1d(f, t, cost), tol=1e-10)


def test_convexity_check_detects_concavity():
    ax = Axis(-1, 1, 21)
    assert not is_discretely_convex(GridFunction.from_function(lambda x: -x * x, [ax]))


def test_relaxation_matches_semigroup_on_convex_inputs():
    # R^1 f = Q_1 f for convex f; on a grid the relaxation lets the barycenter move
    # inside a cell, so it may undercut the grid minimum by at most
    # (max L*'') / 2 * (h / 2)^2 = h^2 / 16
    rng = np.random.default_rng(3)
    for cost in (CostPair(1.0), CostPair(0.5)):
        for _ in range(4):
            ax = Axis(-2, 2, 16)
            f = random_convex(rng, ax)
            q = infconv_1d(f, 1.0, cost).values
            r = barycentric_relaxation(f, 1.0, cost)
            assert np.all(r <= q + 1e-12)
            assert np.all(q - r <= ax.step ** 2 / 16 + 1e-12)


def test_relaxation_gap_vanishes_with_finer_grid():
    cost = CostPair(1.0)
    gaps = []
    for count in (9, 17, 33):
        ax = Axis(-2, 2, count)
        f = GridFunction.from_function(lambda x: np.abs(x - 0.3) + 0.5 * x * x, [ax])
        gaps.append(float(np.max(infconv_1d(f, 1.0, cost).values - barycentric_relaxation(f, 1.0, cost))))
    assert gaps[2] <= gaps[0] / 8


def test_grid_function_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    f = GridFunction([Axis(-1, 1, 5), Axis(0, 3, 4)], rng.normal(size=(5, 4)))
    f.to_csv(tmp_path / "f.csv")
    g = GridFunction.from_csv(tmp_path / "f.csv")
    assert g.axes == f.axes and np.array_equal(g.values, f.values)
    (tmp_path / "bad.csv").write_text("1\n2\n")
    with pytest.raises(ValueError):
        GridFunction.from_csv(tmp_path / "bad.csv")
    (tmp_path / "short.csv").write_text('# {"axes": [[0, 1, 3]]}\n1\n2\n')
    with pytest.raises(ValueError):
        GridFunction.from_csv(tmp_path / "short.csv")


def test_grid_function_rejects_bad_values():
    with pytest.raises(ValueError):
        GridFunction([Axis(0, 1, 3)], [0.0, np.inf, 1.0])
    with pytest.raises(ValueError):
        GridFunction([Axis(0, 1, 3)], [0.0, 1.0])
    f = GridFunction([Axis(0, 1, 3)], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_boundary_flags_raised_when_minimizer_hits_the_edge():
    ax = Axis(0, 1, 101)
    f = GridFunction.from_function(lambda x: -10 * x, [ax])  # slope pulls minimizers to the right edge
    q = infconv_1d(f, 1.0, CostPair(1.0))
    assert q.boundary_active.any()
    g = GridFunction.from_function(lambda x: (x - 0.5) ** 2, [ax])
    assert not infconv_1d(g, 0.1, CostPair(1.0)).boundary_active.any()


def test_hj_residual_examples():
    ax = Axis(-4, 4, 801)
    zero = GridFunction([ax], np.zeros(801))
    assert hj_residual(zero, [0.5, 1.0], CostPair(1.0)).max_residual == 0.0
    lin = GridFunction.from_function(lambda x: 0.5 * x, [ax])
    for cost in (CostPair(1.0), CostPair(0.5), CostPair(0.0, 1.0)):
        assert hj_residual(lin, [0.5, 1.0], cost).max_residual <= 1e-8


def test_hj_residual_of_abs_is_first_order():
    ax = Axis(-4, 4, 801)
    f = GridFunction.from_function(np.abs, [ax])
    rep = hj_residual(f, [0.5, 1.0], CostPair(1.0))
    assert rep.points_used > 700
    assert rep.max_residual <= 10 * ax.step


def test_hj_residual_excludes_slope_jumps():
    ax = Axis(-4, 4, 801)
    # a concave corner survives the semigroup: Q_t(-|x|) = -|x| - t
    f = GridFunction.from_function(lambda x: -np.abs(x), [ax])
    rep = hj_residual(f, [0.5], CostPair(1.0))
    assert rep.kinks_excluded >= 1
    assert rep.max_residual <= 1e-9


def test_schedule_endpoints():
    for t0 in (0.0, 0.7, 2.0):
        s = Schedule(0.0, 2.0, t0)
        assert s.k(t0) == 1.0
        assert s.k(0.0) == 1.0 - t0 / 2.0
        assert s.k(t0 + 5.0) == 1.0
        p = Schedule(0.0, 2.0, t0, prefactor=True)
        assert p.k(t0) == 0.5
    s = Schedule(0.5, 2.0, 1.0)
    assert s.k(1.0) == 1.0 and s.k(0.0) == 0.5
    assert s.k(3.0) == pytest.approx((1 + 2.0 / 1.0) ** 0.5)
    with pytest.raises(ValueError):
        Schedule(0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        Schedule(0.5, 1.0, 0.5, prefactor=True)


def test_grid_masses_sum_to_one_and_match_law():
    ax = Axis(-10, 10, 2001)
    p = grid_masses(gaussian(), ax)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert float(np.dot(p, ax.points() ** 2)) == pytest.approx(1.0, abs=1e-4)


def test_log_norm_limits():
    rng = np.random.default_rng(5)
    v = rng.normal(size=50)
    p = np.full(50, 1 / 50)
    assert log_norm(v, p, 0.0) == pytest.approx(v.mean())
    assert log_norm(v, p, 1e-8) == pytest.approx(v.mean(), abs=1e-6)
    assert log_norm(v, p, 1.0) == pytest.approx(math.log(np.exp(v).mean()))


def test_hypercontractivity_small_time_margin_vanishes():
    ax = Axis(-20, 20, 4001)
    phi = catalog_1d(ax, 0.2)["smooth_abs"]
    rep = hypercontractivity_check(SYMEXP, phi, Schedule(0.0, 2.0, 1.0), [1e-5])
    assert abs(rep.min_margin) <= 1e-5


def test_dual_transport_examples():
    ax = Axis(-20, 20, 4001)
    cost = CostPair(0.0, 1.0)
    const = GridFunction([ax], np.full(4001, 3.0))
    assert dual_transport_check(SYMEXP, const, 2.0, cost) == pytest.approx(1.0, abs=1e-12)
    phi = GridFunction.from_function(lambda x: 0.2 * np.abs(x), [ax])
    big_b = dual_transport_check(SYMEXP, phi, 1e6, cost)
    p = grid_masses(SYMEXP, ax)
    q = infconv_1d(phi, 1.0, cost).values
    assert big_b <= 1.0
    assert big_b == pytest.approx(math.exp(float(np.dot(p, q - phi.values))), rel=1e-5)


def test_grid_lsi_ratio_gaussian_linear():
    # under the gaussian law H = s^2 and psi = a x give Ent / E H e^psi = 1/2
    ax = Axis(-12, 12, 24001)
    psi = GridFunction.from_function(lambda x: 0.5 * x, [ax])
    assert grid_lsi_ratio(gaussian(), psi, CostPair(1.0)) == pytest.approx(0.5, rel=1e-3)


def test_weak_transport_examples():
    mu = DiscreteMeasure(((0.0, 0.5), (1.0, 0.5)))
    assert weak_transport_discrete(mu, mu, CostPair(1.0)).value <= 1e-10
    res = weak_transport_discrete(mu, DiscreteMeasure(((0.0, 1.0),)), CostPair(1.0))
    assert res.value == pytest.approx(1 / 16, abs=1e-15)


def test_weak_transport_three_atoms_against_grid_search():
    mu = DiscreteMeasure(((-0.5, 0.2), (0.1, 0.5), (0.9, 0.3)))
    nu = DiscreteMeasure(((-0.5, 0.6), (0.9, 0.4)))
    cost = CostPair(1.0)
    a = weak_transport_discrete(mu, nu, cost).value
    b = weak_transport_grid_search(mu, nu, cost)
    assert abs(a - b) <= 1e-3
    assert a <= b + 1e-9


def test_grid_search_handles_thin_feasible_sets():
    # the free coupling entry is confined to [0.985, 0.99], between coarse grid points
    mu = DiscreteMeasure(((0.0, 0.995), (1.0, 0.005)))
    nu = DiscreteMeasure(((0.0, 0.99), (1.0, 0.01)))
    cost = CostPair(1.0)
    b = weak_transport_grid_search(mu, nu, cost)
    assert math.isfinite(b)
    assert abs(weak_transport_discrete(mu, nu, cost).value - b) <= 1e-3


def test_transport_objective_of_product_coupling():
    mu = DiscreteMeasure(((0.0, 0.5), (2.0, 0.5)))
    nu = DiscreteMeasure(((0.0, 0.5), (2.0, 0.5)))
    pi = np.outer(nu.masses, mu.masses)
    # every row has barycenter 1
    assert transport_objective(pi, mu, nu, CostPair(1.0)) == pytest.approx(lstar(CostPair(1.0), 1.0))


def test_relative_entropy():
    mu = DiscreteMeasure(((0.0, 0.5), (1.0, 0.5)))
    assert relative_entropy_discrete(DiscreteMeasure(((0.0, 1.0),)), mu) == pytest.approx(math.log(2))
    assert relative_entropy_discrete(mu, mu) == 0.0
    assert relative_entropy_discrete(DiscreteMeasure(((3.0, 1.0),)), mu) is INF
    assert transport_inequality_holds(5.0, 0.1, INF)


def test_discrete_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure(((0.0, 0.5), (1.0, 0.4)))
    with pytest.raises(ValueError):
        DiscreteMeasure(((0.0, 0.5), (0.0, 0.5)))
    with pytest.raises(ValueError):
        DiscreteMeasure(())


def test_fitted_dual_constant_is_tight():
    mu = DiscreteMeasure(((0.0, 0.5), (1.0, 0.5)))
    cost = CostPair(1.0)
    fit = fit_dual_constant(mu, cost)
    assert 0 < fit.b < math.inf
    vals = np.array(fit.witness)
    assert dual_value_on_atoms(mu, vals, fit.b * 1.001, cost) <= 1.0 + 1e-9
    assert dual_value_on_atoms(mu, vals, fit.b * 0.9, cost) > 1.0


def test_single_atom_dual_constant_is_zero():
    assert fit_dual_constant(DiscreteMeasure(((0.3, 1.0),)), CostPair(1.0)).b == 0.0
