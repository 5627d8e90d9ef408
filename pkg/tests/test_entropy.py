import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concentrate import entropy
from concentrate.entropy import (CATALOG, ConvexTestFunction, Estimate, covariance_kernel_bound, dimension_sweep,
                                 entropy_from_values, entropy_mc, entropy_quadrature, fit_constant, gradient_cost,
                                 gradient_limit, lsi_holds, lsi_report, make_test_function, poincare_check, rhs_mc,
                                 rhs_quadrature, sections, symmetrized_functional)
from concentrate.errors import GradientRestrictionError, SpecError
from concentrate.measure import cauchy_table, gaussian, symmetric_exponential, symmetric_weibull, two_point, uniform

SYMEXP = symmetric_exponential(1.0)
N = 200_000


def joint_ok(est: Estimate, exact: float) -> bool:
    return abs(est.value - exact) <= est.halfwidth


def test_constant_function_has_zero_entropy_and_rhs():
    phi = make_test_function("linear", 3, amplitude=0.0)
    assert abs(entropy_mc(gaussian(), 3, phi, 10_000, 1).value) <= 1e-15
    assert rhs_mc(gaussian(), 3, phi, 1.0, 10_000, 1).value == 0.0
    assert symmetrized_functional(gaussian(), 3, phi, 10_000, 1).value == 0.0
    res = poincare_check(gaussian(), 3, phi, 1.0, 10_000, 1)
    assert res.holds and res.variance.value == 0.0 and res.rhs.value == 0.0


def test_entropy_of_shifted_constant_is_zero():
    est = entropy_from_values(np.full(1000, 5.0))
    assert abs(est.value) <= 1e-12 and est.halfwidth == 0.0


@pytest.mark.parametrize("lam", [0.25, 0.5])
def test_gaussian_linear_closed_form(lam):
    phi = make_test_function("linear", 1, lam)
    lhs = entropy_mc(gaussian(), 1, phi, N, 3)
    rhs = rhs_mc(gaussian(), 1, phi, 1.0, N, 3)
    assert joint_ok(lhs, lam ** 2 / 2 * math.exp(lam ** 2 / 2))
    assert joint_ok(rhs, lam ** 2 * math.exp(lam ** 2 / 2))


def test_two_point_entropy_closed_form():
    spec = two_point(0.0, 0.5, 1.0)
    phi = make_test_function("linear", 1, 1.0)
    exact = math.e / 2 - (1 + math.e) / 2 * math.log((1 + math.e) / 2)
    assert joint_ok(entropy_mc(spec, 1, phi, N, 4), exact)
    assert abs(entropy_quadrature(spec, phi) - exact) <= 1e-14


def test_two_point_symmetrized_closed_form():
    spec = two_point(0.0, 0.5, 1.0)
    phi = make_test_function("linear", 1, 1.0)
    assert joint_ok(symmetrized_functional(spec, 1, phi, N, 4), (math.e - 1) / 4)


def test_quadrature_matches_gaussian_closed_form():
    for lam in (0.25, 0.5, 1.0):
        phi = make_test_function("linear", 1, lam)
        assert entropy_quadrature(gaussian(), phi) == pytest.approx(lam ** 2 / 2 * math.exp(lam ** 2 / 2), rel=1e-9)
        assert rhs_quadrature(gaussian(), phi, 1.0) == pytest.approx(lam ** 2 * math.exp(lam ** 2 / 2), rel=1e-9)


def test_monte_carlo_agrees_with_quadrature():
    for spec in (SYMEXP, symmetric_weibull(1.5), uniform(-1, 1)):
        for kind in CATALOG:
            phi = make_test_function(kind, 1, 0.4)
            lhs = entropy_mc(spec, 1, phi, N, 8)
            assert abs(lhs.value - entropy_quadrature(spec, phi)) <= lhs.halfwidth + 1e-9


def test_exponential_max_coordinate_rhs_is_positive_and_seed_stable():
    lim = gradient_limit(1.0, 1.0)
    phi = make_test_function("max_coordinate", 16, lim)
    a = rhs_mc(SYMEXP, 16, phi, 0.0, 50_000, 1, gradient_bound=lim)
    b = rhs_mc(SYMEXP, 16, phi, 0.0, 50_000, 2, gradient_bound=lim)
    assert a.value > 0 and b.value > 0
    assert abs(a.value - b.value) <= a.halfwidth + b.halfwidth


def test_beta0_gradient_restriction_enforced():
    phi = make_test_function("linear", 1, 1.0)
    with pytest.raises(GradientRestrictionError):
        rhs_mc(SYMEXP, 1, phi, 0.0, 1000, 1)
    with pytest.raises(GradientRestrictionError):
        rhs_mc(SYMEXP, 1, phi, 0.0, 1000, 1, gradient_bound=gradient_limit(1.0, 1.0))
    assert gradient_limit(1.0, 1.0) == 0.125


def test_heavy_tailed_spec_rejected():
    phi = make_test_function("linear", 1, 0.1)
    with pytest.raises(SpecError):
        entropy_mc(cauchy_table(), 1, phi, 100, 1)


def test_reports_bit_identical_for_same_inputs():
    phi = make_test_function("logsumexp", 4, 0.5)
    a = lsi_report(gaussian(), 4, phi, 0.5, 20_000, 9)
    b = lsi_report(gaussian(), 4, phi, 0.5, 20_000, 9)
    assert a.to_dict() == b.to_dict()
    c = lsi_report(gaussian(), 4, phi, 0.5, 20_000, 9, workers=3)
    assert c.to_dict() == a.to_dict()


def test_symmetrized_dominates_entropy():
    for spec in (SYMEXP, gaussian(), symmetric_weibull(1.5)):
        for kind in CATALOG:
            phi = make_test_function(kind, 4, 0.3)
            ent = entropy_mc(spec, 4, phi, 50_000, 2)
            sym = symmetrized_functional(spec, 4, phi, 50_000, 2)
            assert sym.upper >= ent.lower


def test_entropy_nonnegative_within_ci():
    for kind in CATALOG:
        est = entropy_mc(uniform(-1, 1), 2, make_test_function(kind, 2, 0.05), 20_000, 5)
        assert est.upper >= 0


def test_poincare_examples():
    phi = make_test_function("linear", 1, 1.0)
    res = poincare_check(gaussian(), 1, phi, 0.5, N, 3)
    assert res.holds
    assert res.rhs.value == pytest.approx(1.0)
    assert abs(res.variance.value - 1.0) <= res.variance.halfwidth


def test_poincare_exponential_max_with_fitted_constant():
    lim = gradient_limit(1.0, 1.0)
    phi = make_test_function("max_coordinate", 1)
    fit = fit_constant(SYMEXP, phi, 0.0, [lim / 4, lim / 2, lim], 100_000, 1, gradient_bound=lim)
    res = poincare_check(SYMEXP, 32, phi.in_dimension(32).scaled(lim), fit.C_hat, 100_000, 1)
    assert res.holds


def test_covariance_kernel_examples():
    grid = np.linspace(-40, 40, 40_001)
    const = make_test_function("linear", 1, 0.0)
    assert covariance_kernel_bound(SYMEXP, const, grid) == 0.0
    phi = make_test_function("linear", 1, 0.3)
    coarse = covariance_kernel_bound(SYMEXP, phi, grid)
    fine = covariance_kernel_bound(SYMEXP, phi, np.linspace(-40, 40, 80_001))
    assert abs(fine - coarse) <= 1e-4 * fine
    assert fine >= entropy_quadrature(SYMEXP, phi)


def test_covariance_kernel_equals_symmetrized_functional_in_one_dimension():
    # for n = 1 both are the same double integral (integration by parts)
    phi = make_test_function("l2_norm_shifted", 1, 0.5)
    kernel = covariance_kernel_bound(gaussian(), phi, np.linspace(-12, 12, 40_001))
    sym = symmetrized_functional(gaussian(), 1, phi, N, 6)
    assert abs(sym.value - kernel) <= sym.halfwidth


def test_sections_fix_other_coordinates_at_quantiles():
    phi = make_test_function("l2_norm_shifted", 1)
    secs = sections(gaussian(), phi, dims=(1, 3))
    assert secs[0].fixed == ()
    assert len(secs[1].fixed) == 2
    assert secs[1].fixed[0] == pytest.approx(float(gaussian().quantile(0.25)))
    x = np.array([0.3, -1.0])
    full = np.column_stack([x, np.full(2, secs[1].fixed[0]), np.full(2, secs[1].fixed[1])])
    assert np.array_equal(secs[1].value(x), phi.in_dimension(3).value(full))
    assert np.array_equal(secs[1].gradient(x), phi.in_dimension(3).gradient(full)[:, :1])


def test_fit_then_sweep_holds_for_gaussian_linear():
    phi = make_test_function("linear", 1)
    fit = fit_constant(gaussian(), phi, 1.0, [0.25, 0.5], 50_000, 7)
    assert 0.4 < fit.C_hat < 1.0
    sweep = dimension_sweep(gaussian(), phi, 1.0, fit.C_hat, [2, 4], [0.25, 0.5], 50_000, 7)
    assert all(ok for _, _, ok in sweep)


def test_lsi_holds_is_conservative():
    rep = lsi_report(gaussian(), 1, make_test_function("linear", 1, 0.5), 1.0, 20_000, 1)
    assert lsi_holds(rep, rep.lhs_entropy.lower / rep.rhs_functional.upper)
    assert not lsi_holds(rep, 0.5 * rep.lhs_entropy.lower / rep.rhs_functional.upper)


def test_gradient_cost_branches():
    g = np.array([[0.5, 0.0], [3.0, 0.0]])
    assert np.allclose(gradient_cost(g, 1.0), [0.25, 9.0])
    assert np.allclose(gradient_cost(g, 0.5), [0.25, 27.0])
    assert np.allclose(gradient_cost(g, 0.0), [0.25, 9.0])


vectors = st.lists(st.floats(-5, 5), min_size=3, max_size=3)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(CATALOG), vectors, vectors, st.floats(0, 1))
def test_catalog_functions_are_convex(kind, a, b, lam):
    phi = make_test_function(kind, 3, 0.7)
    a, b = np.array(a), np.array(b)
    mid = lam * a + (1 - lam) * b
    va, vb, vm = phi.value(np.stack([a, b, mid]))
    assert vm <= lam * va + (1 - lam) * vb + 1e-12 * (1 + abs(va) + abs(vb))


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(CATALOG), vectors, vectors)
def test_catalog_gradients_are_subgradients(kind, a, b):
    phi = make_test_function(kind, 3, 0.7)
    a, b = np.array(a), np.array(b)
    va, vb = phi.value(np.stack([a, b]))
    g = phi.gradient(a[None, :])[0]
    assert vb >= va + g @ (b - a) - 1e-9 * (1 + abs(va) + abs(vb))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(CATALOG), st.integers(1, 6), st.sampled_from([0.25, 0.5, 1.0]))
def test_lipschitz_constants_bound_sampled_gradients(kind, n, beta):
    phi = make_test_function(kind, n, 1.3)
    x = np.random.default_rng(n).normal(scale=3, size=(500, n))
    g = phi.gradient(x)
    q = (beta + 1) / beta
    assert np.all(np.sqrt((g * g).sum(axis=1)) <= phi.lipschitz_l2 * (1 + 1e-12))
    assert np.all((np.abs(g) ** q).sum(axis=1) ** (1 / q) <= phi.lipschitz_l1plusbeta(beta) * (1 + 1e-12))
    assert np.all(np.abs(g).max(axis=1) <= phi.lipschitz_linf * (1 + 1e-12))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        ConvexTestFunction("sine", 1)
    with pytest.raises(ValueError):
        make_test_function("linear", 0)


def test_module_exposes_catalog():
    assert set(entropy.CATALOG) == {"linear", "max_coordinate", "logsumexp", "l2_norm_shifted", "distance_to_box"}
    assert [f.kind for f in entropy.catalog(2)] == list(entropy.CATALOG)
