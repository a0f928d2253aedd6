import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustfolio.errors import ArbitrageDetected, DomainError
from robustfolio.market import one_period_market
from robustfolio.measures import MeasureVector, is_martingale_measure, prior_set
from robustfolio.solver import (
    reconcile_duality,
    saddle_gap,
    solve_dual,
    solve_robust,
    solve_single_prior,
    y_bracket,
)
from robustfolio.theorem import Caps, random_instance
from robustfolio.utility import UtilityFunction

from conftest import UTILITIES, closed_form_value

SMALL = Caps(leaves=4, assets=2, vertices=3, depth=2)


def _instance(seed, **kw):
    return random_instance(np.random.default_rng([31, seed]), SMALL, **kw)


# -- single prior ------------------------------------------------------------------

def test_single_prior_at_emm(binary, log_u):
    plan = solve_single_prior(binary, [0.5, 0.5], log_u, 1.0)
    assert plan.holdings.ravel()[0] == pytest.approx(0.0, abs=1e-10)
    assert plan.value == pytest.approx(0.0, abs=1e-12)


def test_single_prior_closed_form(binary, log_u):
    plan = solve_single_prior(binary, [0.6, 0.4], log_u, 1.0)
    assert plan.holdings.ravel()[0] == pytest.approx(0.2, abs=1e-9)
    np.testing.assert_allclose(plan.terminal_wealth, [1.2, 0.8], atol=1e-9)
    assert plan.value == pytest.approx(closed_form_value(), abs=1e-12)
    assert plan.foc_residual < 1e-9


def test_single_prior_flat(flat):
    u = UtilityFunction("power", 0.5)
    plan = solve_single_prior(flat, [0.3, 0.7], u, 2.0)
    assert plan.method == "degenerate"
    assert np.all(plan.holdings == 0)
    assert plan.value == pytest.approx(float(u(2.0)))


def test_single_prior_arbitrage():
    with pytest.raises(ArbitrageDetected):
        solve_single_prior(one_period_market([1.0], [[2.0], [3.0]]), [0.5, 0.5],
                           UtilityFunction("log"), 1.0)


def test_single_prior_needs_full_support(binary, log_u):
    with pytest.raises(DomainError):
        solve_single_prior(binary, [1.0, 0.0], log_u, 1.0)
    with pytest.raises(DomainError):
        solve_single_prior(binary, [0.5, 0.5], log_u, -1.0)


@pytest.mark.parametrize("u", UTILITIES, ids=str)
def test_single_prior_two_period(two_period, u):
    plan = solve_single_prior(two_period, [0.36, 0.24, 0.24, 0.16], u, 1.0)
    assert plan.foc_residual < 1e-6
    assert np.all(plan.terminal_wealth > 0)


# -- robust ------------------------------------------------------------------------

def test_robust_emm_in_hull(binary, log_u):
    plan = solve_robust(binary, prior_set([[0.6, 0.4], [0.4, 0.6]]), log_u, 1.0)
    assert plan.holdings.ravel()[0] == pytest.approx(0.0, abs=1e-8)
    assert plan.value == pytest.approx(0.0, abs=1e-10)
    assert is_martingale_measure(plan.worst_case_prior, binary)


def test_robust_singleton_matches_single(binary, log_u):
    a = solve_robust(binary, prior_set([[0.6, 0.4]]), log_u, 1.0)
    b = solve_single_prior(binary, [0.6, 0.4], log_u, 1.0)
    np.testing.assert_array_equal(a.holdings, b.holdings)
    assert a.value == b.value


def test_robust_no_emm(binary, log_u):
    priors = prior_set([[0.7, 0.3], [0.6, 0.4]])
    plan = solve_robust(binary, priors, log_u, 1.0)
    assert plan.holdings.ravel()[0] == pytest.approx(0.2, abs=1e-8)
    assert plan.value == pytest.approx(closed_form_value(), abs=1e-10)
    np.testing.assert_allclose(plan.worst_case_prior.weights, [0.6, 0.4], atol=1e-9)
    assert saddle_gap(binary, priors, log_u, 1.0, plan) <= 1e-4


def test_robust_names_arbitrage_vertex():
    m3 = one_period_market([1.0], [[2.0], [0.0], [3.0]])
    priors = prior_set([[0.2, 0.3, 0.5], [0.3, 0.3, 0.4]])
    solve_robust(m3, priors, UtilityFunction("log"), 1.0)        # fine: full support
    with pytest.raises(ArbitrageDetected):
        solve_robust(one_period_market([1.0], [[2.0], [3.0]]), prior_set([[0.5, 0.5], [0.4, 0.6]]),
                     UtilityFunction("log"), 1.0)


def test_robust_supergradient_method_close_to_barrier(binary, log_u):
    priors = prior_set([[0.7, 0.3], [0.6, 0.4]])
    sg = solve_robust(binary, priors, log_u, 1.0, method="supergradient")
    br = solve_robust(binary, priors, log_u, 1.0)
    assert sg.value <= br.value + 1e-12
    assert sg.value == pytest.approx(br.value, abs=1e-4)
    with pytest.raises(DomainError):
        solve_robust(binary, priors, log_u, 1.0, method="simplex")


def test_saddle_gap_examples(binary, log_u):
    priors = prior_set([[0.6, 0.4], [0.4, 0.6]])
    plan = solve_robust(binary, priors, log_u, 1.0)
    assert saddle_gap(binary, priors, log_u, 1.0, plan) <= 1e-10
    single = prior_set([[0.6, 0.4]])
    assert saddle_gap(binary, single, log_u, 1.0, solve_robust(binary, single, log_u, 1.0)) == 0.0


def test_two_period_robust_riskless(two_period):
    priors = prior_set([[0.36, 0.24, 0.24, 0.16], [0.14, 0.26, 0.26, 0.34]])
    u = UtilityFunction("log")
    plan = solve_robust(two_period, priors, u, 1.0)
    np.testing.assert_allclose(plan.terminal_wealth, 1.0, atol=1e-9)
    assert saddle_gap(two_period, priors, u, 1.0, plan) <= 1e-9


# -- properties on random instances ---------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_value_increasing_in_wealth(seed):
    inst = _instance(seed)
    vals = [solve_robust(inst.market, inst.priors, inst.utility, x).value for x in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.2, 1.0), st.floats(1.0, 5.0))
def test_value_concave_in_wealth(seed, x1, x2):
    inst = _instance(seed)
    f = lambda x: solve_robust(inst.market, inst.priors, inst.utility, x).value
    assert f(0.5 * (x1 + x2)) >= 0.5 * (f(x1) + f(x2)) - 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_robust_below_single_and_saddle(seed):
    inst = _instance(seed)
    plan = solve_robust(inst.market, inst.priors, inst.utility, inst.x)
    singles = [solve_single_prior(inst.market, v, inst.utility, inst.x).value
               for v in inst.priors.vertices]
    assert plan.value <= min(singles) + 1e-6
    assert saddle_gap(inst.market, inst.priors, inst.utility, inst.x, plan) <= 1e-4
    # first-order condition under the reported worst-case mixture
    assert plan.foc_residual < 1e-4
    # value is the minimum over vertices of the expected utility
    assert plan.value == pytest.approx(float(np.min(plan.vertex_values)), abs=1e-9)


# -- dual and reconciliation ---------------------------------------------------------

def test_dual_closed_form(binary, log_u):
    p = np.array([0.6, 0.4])
    sol = solve_dual(binary, p, log_u, 1.0)
    np.testing.assert_allclose(sol.measure.weights, [0.5, 0.5], atol=1e-10)
    assert sol.value == pytest.approx(-1.0 + float(p @ np.log(p / 0.5)), abs=1e-12)
    assert sol.gap <= 1e-8


@pytest.mark.parametrize("u", UTILITIES, ids=str)
@pytest.mark.parametrize("y", [0.3, 1.0, 4.0])
def test_dual_at_emm_reference(u, y):
    m3 = one_period_market([1.0], [[3.0], [0.0], [1.0]])
    P = np.array([0.2, 0.4, 0.4])            # 2 q1 = q2: an EMM
    sol = solve_dual(m3, P, u, y)
    np.testing.assert_allclose(sol.measure.weights, P, atol=1e-7)
    assert sol.value == pytest.approx(float(u.conjugate(y)), rel=1e-10, abs=1e-12)


def test_dual_flat_market(flat, log_u):
    sol = solve_dual(flat, [0.3, 0.7], log_u, 1.0)
    np.testing.assert_allclose(sol.measure.weights, [0.3, 0.7], atol=1e-8)
    assert sol.value == pytest.approx(-1.0, abs=1e-12)


def test_dual_rejects_bad_inputs(binary, log_u):
    with pytest.raises(DomainError):
        solve_dual(binary, [0.5, 0.5], log_u, 0.0)
    with pytest.raises(ArbitrageDetected):
        solve_dual(one_period_market([1.0], [[2.0], [3.0]]), [0.5, 0.5], log_u, 1.0)


def test_reconcile_closed_form(binary, log_u):
    rep = reconcile_duality(binary, [0.6, 0.4], log_u, 1.0)
    assert rep.ok
    assert rep.y_star == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(rep.terminal_wealth, [1.2, 0.8], atol=1e-9)
    np.testing.assert_allclose(rep.dual_terminal, [0.5 / 0.6, 0.5 / 0.4], rtol=1e-6)


@pytest.mark.parametrize("u", UTILITIES, ids=str)
def test_reconcile_at_emm(binary, u):
    rep = reconcile_duality(binary, [0.5, 0.5], u, 1.5)
    assert rep.ok
    np.testing.assert_allclose(rep.terminal_wealth, 1.5, atol=1e-9)
    np.testing.assert_allclose(rep.dual_terminal, float(u.d1(1.5)), rtol=1e-6)


def test_reconcile_flat(flat, log_u):
    rep = reconcile_duality(flat, [0.3, 0.7], log_u, 2.0)
    assert rep.ok and rep.y_star == pytest.approx(0.5, rel=1e-6)


@pytest.mark.parametrize("u", UTILITIES, ids=str)
def test_reconcile_two_period(two_period, u):
    rep = reconcile_duality(two_period, [0.36, 0.24, 0.24, 0.16], u, 1.0)
    assert rep.ok


def test_y_bracket_contains_marginal(log_u):
    lo, hi = y_bracket(log_u, 2.0)
    assert lo < log_u.d1(2.0) < hi
