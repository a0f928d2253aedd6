import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from robustfolio.errors import BracketNotConvex, DomainError, InfeasibleStart
from robustfolio.numerics import (
    LinearProgram,
    SolverConfig,
    frank_wolfe,
    minimize_scalar_convex,
    solve_lp,
    supergradient_minimax,
)


# -- LP ------------------------------------------------------------------------

def test_lp_box():
    res = solve_lp(LinearProgram(c=[1.0], A_ub=[[1.0]], b_ub=[1.0], maximize=True))
    assert res.status == "optimal"
    assert res.x[0] == pytest.approx(1.0)


def test_lp_unbounded():
    assert solve_lp(LinearProgram(c=[1.0], maximize=True)).status == "unbounded"


def test_lp_infeasible():
    lp = LinearProgram(c=[1.0], A_ub=[[1.0]], b_ub=[-1.0])
    assert solve_lp(lp).status == "infeasible"


def test_lp_emm_slack():
    # variables (q1, q2, delta); q_i - delta >= 0
    lp = LinearProgram(c=[0, 0, 1], A_eq=[[1, -1, 0], [1, 1, 0]], b_eq=[0, 1],
                       A_ub=[[-1, 0, 1], [0, -1, 1]], b_ub=[0, 0],
                       bounds=[(0, np.inf), (0, np.inf), (-np.inf, np.inf)], maximize=True)
    res = solve_lp(lp)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(0.5)
    np.testing.assert_allclose(res.x[:2], [0.5, 0.5])


def test_lp_beale_cycling_example():
    # cycles under the textbook largest-coefficient rule; Bland's rule terminates
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    res = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=[0, 0, 1]))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-0.05)
    np.testing.assert_allclose(res.x, [0.04, 0, 1, 0], atol=1e-12)


def test_lp_free_and_upper_bounded_variables():
    lp = LinearProgram(c=[1, 1], A_eq=[[1, -1]], b_eq=[0.5],
                       bounds=[(-np.inf, 2.0), (-1.0, np.inf)], maximize=True)
    res = solve_lp(lp)
    assert res.objective == pytest.approx(3.5)
    np.testing.assert_allclose(res.x, [2.0, 1.5])


def test_lp_rejects_bad_shapes():
    with pytest.raises(DomainError):
        LinearProgram(c=[1, 2], A_ub=[[1.0]], b_ub=[1.0])
    with pytest.raises(DomainError):
        LinearProgram(c=[1.0], bounds=[(2.0, 1.0)])


@st.composite
def random_lp(draw):
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    A = rng.integers(-3, 4, (m, n)).astype(float)
    b = rng.integers(0, 5, m).astype(float)           # x = 0 is feasible
    c = rng.integers(-3, 4, n).astype(float)
    eq = draw(st.booleans())
    return A, b, c, eq


@settings(max_examples=150, deadline=None)
@given(random_lp())
def test_lp_matches_scipy(case):
    A, b, c, eq = case
    bounds = [(0, 10)] * c.size
    if eq:
        Aeq, beq = A[:1], A[:1] @ np.full(c.size, 0.5)
        ours = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b + 10 * np.abs(A).sum(1),
                                      A_eq=Aeq, b_eq=beq, bounds=bounds))
        ref = linprog(c, A_ub=A, b_ub=b + 10 * np.abs(A).sum(1), A_eq=Aeq, b_eq=beq,
                      bounds=bounds, method="highs")
    else:
        ours = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b, bounds=bounds))
        ref = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    assert ref.status == 0 and ours.status == "optimal"
    assert ours.objective == pytest.approx(ref.fun, abs=1e-8)
    lp_A = A @ ours.x
    assert np.all(lp_A <= (b + (10 * np.abs(A).sum(1) if eq else 0)) + 1e-8)
    assert np.all(ours.x >= -1e-10) and np.all(ours.x <= 10 + 1e-10)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31))
def test_lp_weak_duality(seed):
    # max c.x, A x <= b, x >= 0 with c built from a dual-feasible y:
    # A^T y >= c, y >= 0 so b.y bounds the primal objective
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    A = rng.uniform(0.1, 2.0, (m, n))
    b = rng.uniform(0.5, 3.0, m)
    y = rng.uniform(0.0, 2.0, m)
    c = A.T @ y - rng.uniform(0.0, 1.0, n)
    res = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b, maximize=True))
    assert res.status == "optimal"
    assert res.objective <= b @ y + 1e-9


# -- Frank-Wolfe -----------------------------------------------------------------

def _simplex_lmo(g):
    s = np.zeros_like(g)
    s[int(np.argmin(g))] = 1.0
    return s


def test_fw_projection_interior():
    c = np.array([0.2, 0.5, 0.3])
    cfg = SolverConfig(tolerance=1e-12, max_iterations=5000)
    res = frank_wolfe(lambda q: 2 * (q - c), _simplex_lmo, np.ones(3) / 3, cfg,
                      f=lambda q: float(np.sum((q - c) ** 2)))
    np.testing.assert_allclose(res.point, c, atol=1e-6)


def test_fw_singleton_polytope():
    from robustfolio.utility import UtilityFunction
    V = UtilityFunction("log").conjugate
    p, y = np.array([0.3, 0.7]), 1.0
    q_star = np.array([0.5, 0.5])    # the only EMM of the up/down market
    res = frank_wolfe(lambda q: y * (-1.0 / (y * q / p)), lambda g: q_star, q_star,
                      f=lambda q: float(p @ V(y * q / p)))
    np.testing.assert_allclose(res.point, q_star)
    assert res.gap == 0.0


def test_fw_linear_objective():
    g = np.array([3.0, -1.0, 2.0])
    calls = []

    def lmo(v):
        calls.append(1)
        return _simplex_lmo(v)
    res = frank_wolfe(lambda q: g, lmo, np.array([0.0, 1.0, 0.0]), f=lambda q: float(g @ q))
    assert res.gap == 0.0 and len(calls) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_fw_gap_monotone(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.1 * np.eye(n)
    c = rng.normal(size=n)
    cfg = SolverConfig(tolerance=1e-10, max_iterations=60)
    res = frank_wolfe(lambda q: Q @ q + c, _simplex_lmo, np.ones(n) / n, cfg,
                      f=lambda q: float(0.5 * q @ Q @ q + c @ q))
    h = np.array(res.gap_history)
    assert np.all(h >= 0) and np.all(np.diff(h) <= 0)


# -- supergradient minimax -------------------------------------------------------

def _piece(a, sign=1.0):
    def f(h):
        H = sign * h[0]
        val = a * math.log(1 + H) + (1 - a) * math.log(1 - H)
        return val, np.array([sign * (a / (1 + H) - (1 - a) / (1 - H))])
    return f


def _interior(h):
    return abs(h[0]) < 1


def test_supergradient_single_log():
    res = supergradient_minimax([_piece(0.6)], _interior, [0.0])
    assert res.point[0] == pytest.approx(0.2, abs=1e-3)
    assert res.value == pytest.approx(0.6 * math.log(1.2) + 0.4 * math.log(0.8), abs=1e-6)


def test_supergradient_symmetric_pair():
    res = supergradient_minimax([_piece(0.6), _piece(0.6, -1.0)], _interior, [0.3])
    assert res.point[0] == pytest.approx(0.0, abs=1e-3)


def test_supergradient_quadratic():
    res = supergradient_minimax([lambda h: (-h[0] ** 2, np.array([-2 * h[0]]))],
                                lambda h: True, [1.0])
    assert res.point[0] == pytest.approx(0.0, abs=1e-3)


def test_supergradient_rejects_inadmissible_start():
    with pytest.raises(InfeasibleStart):
        supergradient_minimax([_piece(0.6)], _interior, [1.5])


# -- golden section ----------------------------------------------------------------

def test_golden_log_plus_linear():
    res = minimize_scalar_convex(lambda y: -math.log(y) + y, (0.1, 10.0))
    assert res.argmin == pytest.approx(1.0, abs=1e-6)
    assert res.value == pytest.approx(1.0, abs=1e-12)


def test_golden_quadratic():
    assert minimize_scalar_convex(lambda y: (y - 2) ** 2, (0.0, 5.0)).argmin == pytest.approx(2.0, abs=1e-6)


def test_golden_boundary():
    assert minimize_scalar_convex(lambda y: y, (1.0, 2.0)).argmin == 1.0


def test_golden_rejects_concave():
    with pytest.raises(BracketNotConvex):
        minimize_scalar_convex(lambda y: -(y - 1.5) ** 2, (1.0, 2.0))


def test_golden_rejects_empty_bracket():
    with pytest.raises(DomainError):
        minimize_scalar_convex(lambda y: y, (2.0, 1.0))


def test_solver_config_round_trip():
    cfg = SolverConfig(tolerance=1e-7, seed=3)
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(DomainError):
        SolverConfig.from_dict({"tolerence": 1e-3})
    with pytest.raises(DomainError):
        SolverConfig(tolerance=0.0)
