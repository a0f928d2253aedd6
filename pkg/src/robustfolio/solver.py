"""Primal and dual portfolio problems, single-prior and robust.

The admissible terminal gains of a finite tree form the linear space
``range(terminal_gains)``.  Every solve works in an orthonormal basis ``B``
of that space, so redundant assets never make the problem singular; holdings
are recovered as the minimum-norm preimage of the optimal gain vector.
Arbitrage-freeness (an equivalent martingale measure for each prior) makes
every admissible terminal wealth nonnegative at intermediate nodes as well,
so positivity of terminal wealth is the only constraint the solvers track.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    ArbitrageDetected,
    DomainError,
    DualityGapExceeded,
    IterationCapExceeded,
    SolverError,
    SolverFailure,
)
from .market import FiniteMarket, Portfolio, wealth_process
from .measures import MeasureVector, PriorSet, find_emm, martingale_matrix
from .numerics import (
    LinearProgram,
    SolverConfig,
    eu_maximize,
    eu_minimax_barrier,
    eu_supergradient,
    frank_wolfe,
    minimize_scalar_convex,
    solve_lp,
)
from .numerics.config import DEFAULT
from .utility import validate_assumptions

FOC_TOL = 1e-6
TIE_TOL = 1e-9


@dataclass
class OptimalPlan:
    portfolio: Portfolio
    terminal_wealth: np.ndarray
    value: float
    worst_case_prior: MeasureVector
    worst_case_weights: np.ndarray
    vertex_values: np.ndarray
    foc_residual: float
    method: str
    iterations: int = 0
    dual_measure: MeasureVector | None = None
    dual_value: float | None = None
    y: float | None = None

    @property
    def holdings(self) -> np.ndarray:
        return self.portfolio.holdings


@dataclass
class DualSolution:
    measure: MeasureVector
    value: float
    gap: float
    iterations: int


@dataclass
class DualityReport:
    primal_value: float
    y_star: float
    dual_value: float
    duality_gap: float
    wealth_error: float
    product_error: float
    node_product_error: float
    dual_measure: MeasureVector
    terminal_wealth: np.ndarray
    dual_terminal: np.ndarray
    gap_ok: bool
    wealth_ok: bool
    product_ok: bool

    @property
    def ok(self) -> bool:
        return self.gap_ok and self.wealth_ok and self.product_ok


# -- helpers -------------------------------------------------------------------

@dataclass(frozen=True)
class _Reduction:
    B: np.ndarray        # (L, r) orthonormal basis of attainable gains
    to_h: np.ndarray     # (n, r) maps basis coordinates to min-norm holdings


def _reduce(market: FiniteMarket) -> _Reduction:
    G = market.terminal_gains
    if not np.any(G):
        return _Reduction(np.zeros((G.shape[0], 0)), np.zeros((G.shape[1], 0)))
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    r = int(np.sum(s > s[0] * max(G.shape) * 1e-12))
    return _Reduction(np.ascontiguousarray(U[:, :r]), Vt[:r].T / s[:r])


@lru_cache(maxsize=64)
def _assumptions_ok(u) -> bool:
    return validate_assumptions(u).ok


def _check_inputs(market: FiniteMarket, priors: PriorSet, u, x: float) -> None:
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"initial wealth must be positive, got {x!r}")
    if priors.n_states != market.n_leaves:
        raise DomainError(f"priors have {priors.n_states} states, market has "
                          f"{market.n_leaves} leaves")
    if len(priors.support) != market.n_leaves:
        raise DomainError("portfolio solvers need priors with full support on the leaves")
    try:
        ok = _assumptions_ok(u)
    except TypeError:  # unhashable custom utility
        ok = validate_assumptions(u).ok
    if not ok:
        raise DomainError(f"utility {u!r} fails the standing assumptions")


def arbitrage_gate(market: FiniteMarket, priors: PriorSet, cfg: SolverConfig = DEFAULT) -> None:
    """Raise ArbitrageDetected unless every vertex admits an equivalent martingale measure."""
    checked: dict[frozenset, bool] = {}
    for i, v in enumerate(priors.vertices):
        supp = v.support
        if supp not in checked:
            checked[supp] = find_emm(market, supp, cfg) is not None
        if not checked[supp]:
            raise ArbitrageDetected(
                f"prior vertex {i} admits no equivalent martingale measure "
                f"(market has arbitrage on its support)", vertex=i)


def _as_priors(P) -> PriorSet:
    if isinstance(P, PriorSet):
        return P
    if isinstance(P, MeasureVector):
        return PriorSet((P,))
    return PriorSet((MeasureVector(P),))


def _plan(market, priors, u, x, red: _Reduction, w, weights, method, iterations) -> OptimalPlan:
    V = priors.matrix
    z = red.B @ w if w.size else np.zeros(market.n_leaves)
    X = x + z
    h = red.to_h @ w if w.size else np.zeros(market.terminal_gains.shape[1])
    vals = V @ np.asarray(u(X), dtype=float)
    value = float(vals.min())
    mix = MeasureVector.normalized(weights @ V)
    # stationarity of the worst-case mixture along every tradable direction
    G = market.terminal_gains
    foc = G.T @ (mix.weights * np.asarray(u.d1(X), dtype=float)) if G.size else np.zeros(0)
    return OptimalPlan(
        portfolio=Portfolio.from_vector(market, x, h),
        terminal_wealth=X,
        value=value,
        worst_case_prior=mix,
        worst_case_weights=np.asarray(weights, dtype=float),
        vertex_values=vals,
        foc_residual=float(np.max(np.abs(foc), initial=0.0)),
        method=method,
        iterations=iterations,
    )


# -- primal --------------------------------------------------------------------

def solve_single_prior(market: FiniteMarket, P, u, x: float,
                       cfg: SolverConfig = DEFAULT) -> OptimalPlan:
    """max over admissible X of E_P[U(X_T)] (damped Newton in gain space)."""
    priors = _as_priors(P)
    if len(priors) != 1:
        raise DomainError("single-prior solve needs exactly one measure")
    _check_inputs(market, priors, u, x)
    arbitrage_gate(market, priors, cfg)
    red = _reduce(market)
    if red.B.shape[1] == 0:
        return _plan(market, priors, u, x, red, np.zeros(0), np.ones(1), "degenerate", 0)
    res = eu_maximize(red.B, priors.matrix[0], u, x)
    plan = _plan(market, priors, u, x, red, res.point, np.ones(1), "newton", res.iterations)
    if plan.foc_residual > FOC_TOL * max(1.0, float(u.d1(x))):
        raise SolverFailure(f"first-order residual {plan.foc_residual:.3g} after Newton")
    return plan


def solve_robust(market: FiniteMarket, priors: PriorSet, u, x: float,
                 cfg: SolverConfig = DEFAULT, method: str = "barrier") -> OptimalPlan:
    """max over admissible X of min over prior vertices of E_P[U(X_T)].

    Expected utility is affine in P, so the infimum over the polytope is a
    minimum over its vertices.  The supergradient ascent (compiled kernel)
    supplies a start; ``method="barrier"`` then polishes it by interior-point
    Newton on the epigraph form, whose multipliers give the worst-case
    mixture.  ``method="supergradient"`` stops after the ascent.
    """
    priors = _as_priors(priors)
    if len(priors) == 1:
        return solve_single_prior(market, priors, u, x, cfg)
    _check_inputs(market, priors, u, x)
    arbitrage_gate(market, priors, cfg)
    red = _reduce(market)
    V = priors.matrix
    m = V.shape[0]
    if red.B.shape[1] == 0:
        return _plan(market, priors, u, x, red, np.zeros(0), np.full(m, 1.0 / m), "degenerate", 0)

    sg = eu_supergradient(red.B, V, u, x, None, cfg)
    if method == "supergradient":
        X = x + red.B @ sg.point
        vals = V @ np.asarray(u(X), dtype=float)
        active = vals <= vals.min() + TIE_TOL
        weights = active / active.sum()
        return _plan(market, priors, u, x, red, sg.point, weights, "supergradient", sg.iterations)
    if method != "barrier":
        raise DomainError(f"unknown method {method!r}")

    res = eu_minimax_barrier(red.B, V, u, x, w0=sg.point)
    if res.value < sg.value - 1e-10 * max(1.0, abs(sg.value)):
        raise SolverFailure(f"barrier polish ({res.value!r}) fell below its supergradient "
                            f"start ({sg.value!r})")
    w, value = res.point, res.value
    weights = _tie_mixture(red.B, V, u, x + red.B @ w, res.weights)
    w, weights = _saddle_polish(red.B, V, u, x, w, value, weights)
    return _plan(market, priors, u, x, red, w, weights, "barrier",
                 sg.iterations + res.iterations)


def _saddle_polish(B, V, u, x, w, value, weights, rounds: int = 3):
    """Re-solve the single-prior problem under the worst-case mixture.

    If the mixture's optimiser is no worse for the robust objective it is a
    saddle point and replaces the barrier iterate.  This matters when a
    binding vertex carries zero weight (no strict complementarity): the
    barrier path then approaches the optimum only like sqrt(mu).
    """
    for _ in range(rounds):
        try:
            cand = eu_maximize(B, weights @ V, u, x, w0=w)
        except SolverError:
            break
        vals = V @ np.asarray(u(x + B @ cand.point), dtype=float)
        vc = float(vals.min())
        if vc < value - 1e-13 * max(1.0, abs(value)):
            break
        step = float(np.max(np.abs(cand.point - w), initial=0.0))
        w, value = cand.point, max(value, vc)
        weights = _tie_mixture(B, V, u, x + B @ w, weights)
        if step <= 1e-15 * max(1.0, float(np.max(np.abs(w), initial=0.0))):
            break
    return w, weights


def _tie_mixture(B, V, u, X, fallback):
    """Weights on the vertices tied at the minimum (within TIE_TOL) whose
    mixed gradient is smallest: the minimum-norm point of the convex hull of
    the active gradients, found by enumerating supports.

    Barrier multipliers mu / (f_i - t) identify the same mixture in exact
    arithmetic, but when several expectations coincide the slacks sit at
    roundoff level and the ratio loses digits.
    """
    vals = V @ np.asarray(u(X), dtype=float)
    active = np.flatnonzero(vals <= vals.min() + TIE_TOL * max(1.0, abs(vals.min())))
    if active.size == 1:
        out = np.zeros(V.shape[0])
        out[active[0]] = 1.0
        return out
    grads = (V[active] * np.asarray(u.d1(X), dtype=float)) @ B   # (k, r)
    best, best_norm = None, np.inf
    k = active.size
    for mask in range(1, 1 << k):
        S = [i for i in range(k) if mask >> i & 1]
        Gs = grads[S]
        n = len(S)
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = Gs @ Gs.T
        K[:n, n] = K[n, :n] = 1.0
        rhs = np.zeros(n + 1)
        rhs[n] = 1.0
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0][:n]
        if np.any(sol < -1e-12):
            continue
        sol = np.clip(sol, 0.0, None)
        sol /= sol.sum()
        nrm = float(np.linalg.norm(sol @ Gs))
        if nrm < best_norm:
            best_norm, best = nrm, (S, sol)
    if best is None:
        return fallback
    out = np.zeros(V.shape[0])
    out[active[best[0]]] = best[1]
    return out


def saddle_gap(market: FiniteMarket, priors: PriorSet, u, x: float, plan: OptimalPlan,
               cfg: SolverConfig = DEFAULT) -> float:
    """sup_X E_Pbar[U(X_T)] - plan.value for the reported worst-case mixture Pbar.

    Weak duality makes this nonnegative, and it upper-bounds
    inf_P sup_X - sup_X inf_P; a value near zero certifies the saddle point.
    """
    inner = solve_single_prior(market, plan.worst_case_prior, u, x, cfg)
    return max(0.0, inner.value - plan.value)


# -- dual ----------------------------------------------------------------------

def _null_space(C: np.ndarray) -> np.ndarray:
    if C.size == 0:
        return np.eye(C.shape[1])
    _, s, Vt = np.linalg.svd(C)
    rank = int(np.sum(s > s[0] * max(C.shape) * 1e-12)) if s.size else 0
    return Vt[rank:].T


def _dual_objective(p, u, y):
    def F(q):
        if np.any(q <= 0):
            return np.inf
        return float(p @ np.asarray(u.conjugate(y * q / p), dtype=float))

    def grad(q):
        return y * np.asarray(u.conjugate_d1(y * np.maximum(q, 1e-300) / p), dtype=float)

    def hess_diag(q):
        return y * y * np.asarray(u.conjugate_d2(y * q / p), dtype=float) / p

    return F, grad, hess_diag


def _emm_lmo(market: FiniteMarket, cfg: SolverConfig):
    A = martingale_matrix(market)
    L = market.n_leaves
    A_eq = np.vstack([A, np.ones((1, L))])
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[-1] = 1.0

    def lmo(g):
        res = solve_lp(LinearProgram(g, A_eq, b_eq), cfg)
        if res.status != "optimal":
            raise SolverFailure(f"martingale polytope LMO returned {res.status}")
        return res.x

    return lmo, A_eq


def solve_dual(market: FiniteMarket, P, u, y: float, cfg: SolverConfig = DEFAULT,
               start: MeasureVector | None = None, fw_iterations: int = 50) -> DualSolution:
    """min over martingale measures Q ~ P of E_P[V(y dQ/dP)].

    Frank-Wolfe over the martingale polytope (each linear step is one LP),
    finished by Newton in the polytope's affine hull (the minimiser is
    strictly positive, hence relatively interior).  The final Frank-Wolfe gap
    is recomputed at the returned point.
    """
    priors = _as_priors(P)
    if len(priors) != 1:
        raise DomainError("dual solve needs exactly one reference measure")
    if not (y > 0 and math.isfinite(y)):
        raise DomainError(f"dual variable must be positive, got {y!r}")
    p = priors.matrix[0]
    if np.any(p <= 0):
        raise DomainError("dual solve needs a reference measure with full support")
    if start is None:
        start = find_emm(market, None, cfg)
        if start is None:
            raise ArbitrageDetected("reference measure admits no equivalent martingale measure",
                                    vertex=0)
    F, grad, hdiag = _dual_objective(p, u, y)
    lmo, C = _emm_lmo(market, cfg)

    fw = frank_wolfe(grad, lmo, start.weights, SolverConfig(tolerance=1e-8), f=F,
                     max_iterations=fw_iterations)
    q = fw.point

    N = _null_space(C)
    if N.shape[1]:
        fq = F(q)
        for _ in range(100):
            g = N.T @ grad(q)
            H = (N.T * hdiag(q)) @ N
            d = -np.linalg.solve(H, g)
            dec = -float(g @ d)
            if dec <= 1e-30 * max(1.0, abs(fq)):
                break
            t = 1.0
            while t > 1e-20:
                qt = q + t * (N @ d)
                ft = F(qt)
                if ft <= fq - 0.25 * t * dec:
                    break
                t *= 0.5
            if t <= 1e-20:
                break
            q, fq = qt, ft
            if dec < 1e-26 * max(1.0, abs(fq)):
                break
    g = grad(q)
    gap = max(0.0, float(g @ (q - lmo(g))))
    scale = max(1.0, float(np.max(np.abs(g))))
    if gap > 1e-8 * scale:
        raise IterationCapExceeded(f"dual Frank-Wolfe gap {gap:.3g} above 1e-8", best=q)
    Q = MeasureVector.normalized(q)
    return DualSolution(Q, F(Q.weights), gap, fw.iterations)


def y_bracket(u, x: float) -> tuple[float, float]:
    return 1e-6 * float(u.d1(x * 1e3)), 1e6 * float(u.d1(x * 1e-3))


def reconcile_duality(market: FiniteMarket, P, u, x: float,
                      cfg: SolverConfig = DEFAULT) -> DualityReport:
    """Check u(x) = min_y v(y) + x y, X_T = I(y* dQ*/dP) and that X Y is a
    P-martingale (at every node) for the primal and dual optimisers."""
    priors = _as_priors(P)
    plan = solve_single_prior(market, priors, u, x, cfg)
    p = priors.matrix[0]

    warm = {"q": None}

    def dual_at(y):
        sol = solve_dual(market, priors, u, y, cfg, start=warm["q"])
        warm["q"] = sol.measure
        return sol

    def objective(s):
        y = math.exp(s)
        return dual_at(y).value + x * y

    lo, hi = y_bracket(u, x)
    res = minimize_scalar_convex(objective, (math.log(lo), math.log(hi)),
                                 SolverConfig(tolerance=1e-12, max_iterations=500))
    y_star = math.exp(res.argmin)
    dual = dual_at(y_star)
    q = dual.measure.weights
    v = dual.value
    u_val = plan.value
    gap = abs(u_val - (v + x * y_star))

    X = plan.terminal_wealth
    Y = y_star * q / p
    wealth_err = float(np.max(np.abs(X - np.asarray(u.inverse_marginal(Y)))))
    prod = float(p @ (X * Y))
    prod_err = abs(prod - x * y_star)

    # X Y as a P-martingale on the tree: E_P[X_T Y_T | n] = X_n Y_n
    tree = market.tree
    Xn = wealth_process(market, plan.portfolio).values
    node_err = 0.0
    for n in tree.internal:
        below = list(tree.leaves_below[n])
        Pn = p[below].sum()
        Yn = y_star * q[below].sum() / Pn
        lhs = float(p[below] @ (X[below] * Y[below])) / Pn
        node_err = max(node_err, abs(lhs - Xn[n] * Yn) / max(1e-300, abs(Xn[n] * Yn)))

    report = DualityReport(
        primal_value=u_val, y_star=y_star, dual_value=v, duality_gap=gap,
        wealth_error=wealth_err, product_error=prod_err, node_product_error=node_err,
        dual_measure=dual.measure, terminal_wealth=X, dual_terminal=Y,
        gap_ok=gap <= 1e-5 * (1.0 + abs(u_val)),
        wealth_ok=wealth_err <= 1e-5 * x,
        product_ok=prod_err <= 1e-6 * x * y_star and node_err <= 1e-6,
    )
    if not report.gap_ok:
        raise DualityGapExceeded("primal and dual values disagree", u_val, v + x * y_star)
    return report
