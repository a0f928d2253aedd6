import math

import numpy as np
import pytest

from robustfolio.errors import DomainError, GridGuardExceeded, TooLarge
from robustfolio.market import one_period_market
from robustfolio.measures import MeasureVector, is_martingale_measure, prior_set
from robustfolio.oracle import (
    GridSpec,
    brute_force_no_betting,
    brute_force_optimal,
    default_grid,
    enumerate_emm_vertices,
)
from robustfolio.solver import solve_robust
from robustfolio.theorem import Caps, dow_werlang_priors, random_instance
from robustfolio.utility import UtilityFunction

from conftest import closed_form_value


def oracle_instance(i):
    """Instances inside the oracle's reach: <= 2 holding coordinates per node, <= 3 nodes."""
    caps = Caps(leaves=4, assets=2, vertices=3, depth=1) if i % 2 == 0 else \
        Caps(leaves=4, assets=1, vertices=3, depth=2)
    return random_instance(np.random.default_rng([6, i]), caps)


def test_grid_guard():
    with pytest.raises(GridGuardExceeded):
        GridSpec((0,) * 3, (1,) * 3, (300,) * 3)
    with pytest.raises(DomainError):
        GridSpec((0.0,), (1.0,), (1,))
    with pytest.raises(DomainError):
        GridSpec((0.0,), (math.inf,), (5,))
    g = GridSpec((0.0, -1.0), (1.0, 1.0), (11, 21))
    assert g.points == 231
    np.testing.assert_allclose(g.cell, [0.1, 0.1])


def test_oracle_closed_form(binary, log_u):
    res = brute_force_optimal(binary, prior_set([[0.6, 0.4]]), log_u, 1.0)
    assert res.holdings.ravel()[0] == pytest.approx(0.2, abs=1e-4)
    assert res.value == pytest.approx(closed_form_value(), abs=1e-8)
    assert res.value <= closed_form_value() + 1e-15


def test_oracle_emm_in_hull(binary, log_u):
    res = brute_force_optimal(binary, prior_set([[0.6, 0.4], [0.4, 0.6]]), log_u, 1.0)
    assert res.holdings.ravel()[0] == pytest.approx(0.0, abs=1e-4)
    assert res.value == pytest.approx(0.0, abs=1e-8)


def test_oracle_flat(flat):
    u = UtilityFunction("power", 0.5)
    res = brute_force_optimal(flat, prior_set([[0.3, 0.7]]), u, 2.0)
    assert res.value == float(u(2.0))


def test_default_grid_contains_admissible_set(binary):
    g = default_grid(binary, 1.0)
    # x + H dS >= 0 on both leaves: H in [-1, 1]; padded by 10%
    assert g.lower[0] == pytest.approx(-1.2) and g.upper[0] == pytest.approx(1.2)


def test_oracle_rejects_bad_inputs(binary, log_u):
    with pytest.raises(DomainError):
        brute_force_optimal(binary, prior_set([[0.6, 0.4]]), log_u, 0.0)
    with pytest.raises(DomainError):
        brute_force_optimal(binary, prior_set([[0.6, 0.4]]), log_u, 1.0,
                            GridSpec((0, 0), (1, 1), (5, 5)))


@pytest.mark.parametrize("i", range(20))
def test_oracle_agrees_with_solver(i):
    inst = oracle_instance(i)
    plan = solve_robust(inst.market, inst.priors, inst.utility, inst.x)
    res = brute_force_optimal(inst.market, inst.priors, inst.utility, inst.x)
    assert res.value <= plan.value + 1e-9          # the grid is a lower bound
    assert abs(plan.value - res.value) <= 1e-4


def test_no_betting_sweep_dow_werlang():
    priors = dow_werlang_priors(0.3, 0.4)
    prices = np.round(np.arange(1.0, 2.0 + 1e-9, 0.05), 10)
    interval, mask = brute_force_no_betting(priors, [2.0, 1.0], prices)
    assert interval[0] == pytest.approx(1.3, abs=0.05)
    assert interval[1] == pytest.approx(1.6, abs=0.05)
    assert not mask[0] and not mask[-1]       # endpoints of the payoff range


def test_no_betting_sweep_singleton():
    prices = np.round(np.arange(0.5, 1.51, 0.1), 10)
    interval, mask = brute_force_no_betting(prior_set([[0.5, 0.5]]), [2.0, 0.0], prices)
    assert mask.sum() == 1 and interval == pytest.approx((1.0, 1.0))


def test_no_betting_sweep_outside_range():
    interval, mask = brute_force_no_betting(prior_set([[0.5, 0.5]]), [2.0, 1.0], [0.5, 2.5, 3.0])
    assert interval is None and not mask.any()


def test_emm_vertices_binary(binary):
    verts = enumerate_emm_vertices(binary)
    assert len(verts) == 1
    np.testing.assert_allclose(verts[0].weights, [0.5, 0.5])


def test_emm_vertices_three_states():
    m3 = one_period_market([1.0], [[3.0], [0.0], [1.0]])
    verts = sorted((tuple(np.round(v.weights, 12)) for v in enumerate_emm_vertices(m3)))
    assert verts == sorted([(round(1 / 3, 12), round(2 / 3, 12), 0.0), (0.0, 0.0, 1.0)])


def test_emm_vertices_arbitrage():
    assert enumerate_emm_vertices(one_period_market([1.0], [[2.0], [3.0]])) == []


def test_emm_vertices_limits(two_period):
    with pytest.raises(DomainError):
        enumerate_emm_vertices(two_period)
    with pytest.raises(TooLarge):
        enumerate_emm_vertices(one_period_market([1.0], [[float(k)] for k in range(7)]))


def test_emm_vertex_mixtures_are_martingale():
    rng = np.random.default_rng(12)
    m = one_period_market([1.0, 2.0], [[0.5, 3.0], [2.0, 1.0], [1.5, 2.5], [0.8, 1.2], [1.0, 2.2]])
    verts = enumerate_emm_vertices(m)
    assert len(verts) >= 2
    for v in verts:
        assert is_martingale_measure(v, m)
    V = np.array([v.weights for v in verts])
    for _ in range(100):
        lam = rng.dirichlet(np.ones(len(verts)))
        assert is_martingale_measure(MeasureVector.normalized(lam @ V), m)
