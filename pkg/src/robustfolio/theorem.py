"""Riskless-optimality detection, its three-way verification against the
martingale-measure LPs, and no-betting price sets.

The robust investor's optimal terminal wealth is constant exactly when the
prior polytope meets the set of equivalent martingale measures.
``theorem_check`` decides both sides independently (one by optimisation, one
by linear programming) and reports whether they agree;
``randomized_verification`` runs that comparison on generated instances
that exercise both branches.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, EmptyCore, RobustfolioError
from .market import (
    FiniteMarket,
    build_market,
    market_from_dict,
    market_to_dict,
    one_period_market,
    tree_from_branching,
)
from .measures import (
    MeasureVector,
    PriorSet,
    priors_contain_emm,
    priors_contain_supermartingale,
    priors_from_dict,
)
from .numerics import LinearProgram, SolverConfig, solve_lp
from .numerics.config import DEFAULT
from .solver import OptimalPlan, solve_robust
from .utility import UtilityFunction, utility_from_dict

DETECT_TOL = 1e-6


# -- detection -----------------------------------------------------------------

def is_riskless(plan: OptimalPlan, u, x: float, tol: float = DETECT_TOL) -> bool:
    X = plan.terminal_wealth
    flat = float(X.max() - X.min()) <= tol * x
    return bool(flat and plan.value >= float(u(x)) - tol)


def detect_riskless_optimal(market: FiniteMarket, priors: PriorSet, u, x: float,
                            tol: float = DETECT_TOL, cfg: SolverConfig = DEFAULT) -> bool:
    """True iff the robust optimum keeps terminal wealth flat (within tol * x)
    and its value does not exceed U(x) by more than tol.

    Value is the discriminator that survives redundant assets: holdings may be
    nonzero while the terminal wealth is still constant.
    """
    return is_riskless(solve_robust(market, priors, u, x, cfg), u, x, tol)


@dataclass
class VerificationReport:
    market_id: str
    detector_riskless: bool
    smm_in_priors: bool
    emm_in_priors: bool
    value: float
    u_of_x: float
    wealth_spread: float
    emm_certificate: dict | None = None
    smm_certificate: dict | None = None

    @property
    def agreement(self) -> bool:
        return self.detector_riskless == self.emm_in_priors == self.smm_in_priors

    def to_dict(self) -> dict:
        return {
            "market_id": self.market_id,
            "detector_riskless": self.detector_riskless,
            "smm_in_priors": self.smm_in_priors,
            "emm_in_priors": self.emm_in_priors,
            "agreement": self.agreement,
            "value": self.value,
            "u_of_x": self.u_of_x,
            "wealth_spread": self.wealth_spread,
            "emm_certificate": self.emm_certificate,
            "smm_certificate": self.smm_certificate,
        }


def _cert_dict(cert) -> dict | None:
    if cert is None:
        return None
    out = {"measure": cert.measure.weights.tolist(), "mixture": cert.mixture.tolist(),
           "delta": cert.delta}
    if cert.multipliers is not None:
        out["multipliers"] = cert.multipliers.tolist()
    return out


def theorem_check(market: FiniteMarket, priors: PriorSet, u, x: float,
                  tol: float = DETECT_TOL, cfg: SolverConfig = DEFAULT,
                  market_id: str = "") -> VerificationReport:
    """Run the detector and both LP feasibility checks; disagreement is reported, not raised."""
    plan = solve_robust(market, priors, u, x, cfg)
    emm = priors_contain_emm(priors, market, cfg)
    smm = priors_contain_supermartingale(priors, market, x, cfg)
    X = plan.terminal_wealth
    return VerificationReport(
        market_id=market_id,
        detector_riskless=is_riskless(plan, u, x, tol),
        smm_in_priors=smm is not None,
        emm_in_priors=emm is not None,
        value=plan.value,
        u_of_x=float(u(x)),
        wealth_spread=float(X.max() - X.min()),
        emm_certificate=_cert_dict(emm),
        smm_certificate=_cert_dict(smm),
    )


# -- no-betting prices -----------------------------------------------------------

@dataclass
class NoBettingSet:
    points: np.ndarray                     # (m, N): E_v[A] per prior vertex
    interval: tuple[float, float] | None   # single-asset case

    def contains(self, price, tol: float = 1e-8) -> bool:
        """Whether ``price`` lies in the convex hull of ``points`` (up to tol)."""
        p = np.atleast_1d(np.asarray(price, dtype=float))
        if p.size != self.points.shape[1]:
            raise DimensionMismatch(f"price has {p.size} entries, set lives in "
                                    f"dimension {self.points.shape[1]}")
        if self.interval is not None:
            return bool(self.interval[0] - tol <= p[0] <= self.interval[1] + tol)
        # min ||points^T lam - p||_1 over the simplex
        m, N = self.points.shape
        c = np.concatenate([np.zeros(m), np.ones(2 * N)])
        A_eq = np.zeros((N + 1, m + 2 * N))
        A_eq[:N, :m] = self.points.T
        A_eq[:N, m:m + N] = np.eye(N)
        A_eq[:N, m + N:] = -np.eye(N)
        A_eq[N, :m] = 1.0
        res = solve_lp(LinearProgram(c, A_eq, np.append(p, 1.0)))
        return bool(res.status == "optimal" and res.objective <= tol)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(),
                "interval": None if self.interval is None else list(self.interval)}


def no_betting_set(priors: PriorSet, payoffs) -> NoBettingSet:
    """Prices at which holding no risky asset is optimal: {E_P[A] : P in priors}."""
    A = np.asarray(payoffs, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[0] != priors.n_states:
        raise DimensionMismatch(f"payoffs have {A.shape[0]} states, priors have "
                                f"{priors.n_states}")
    pts = priors.matrix @ A
    interval = (float(pts[:, 0].min()), float(pts[:, 0].max())) if A.shape[1] == 1 else None
    return NoBettingSet(pts, interval)


def dow_werlang_priors(pi: float, pi_prime: float) -> PriorSet:
    """Two-outcome prior polytope with P(high) ranging over [pi, 1 - pi_prime]."""
    _check_capacity(pi, pi_prime)
    return PriorSet((MeasureVector([pi, 1.0 - pi]),
                     MeasureVector([1.0 - pi_prime, pi_prime])))


def _check_capacity(pi, pi_prime):
    for name, v in (("pi", pi), ("pi_prime", pi_prime)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {v!r}")
    if pi + pi_prime > 1.0:
        raise EmptyCore(f"pi + pi_prime = {pi + pi_prime!r} exceeds 1; the core is empty")


def dow_werlang_interval(pi: float, pi_prime: float, high: float, low: float
                         ) -> tuple[float, float]:
    """No-betting price interval for a two-outcome asset paying ``high`` or ``low``
    when the probability of ``high`` is only known to lie in [pi, 1 - pi_prime]."""
    _check_capacity(pi, pi_prime)
    if not high > low:
        raise DomainError(f"need high > low, got {high!r} <= {low!r}")
    return pi * high + (1.0 - pi) * low, (1.0 - pi_prime) * high + pi_prime * low


def betting_market(price, payoffs) -> FiniteMarket:
    """One-period market buying payoff ``A`` (per leaf) at ``price`` today."""
    A = np.asarray(payoffs, dtype=float)
    return one_period_market(np.atleast_1d(price), A)


# -- random instances ------------------------------------------------------------

@dataclass(frozen=True)
class Caps:
    leaves: int = 6
    assets: int = 3
    vertices: int = 5
    depth: int = 2

    def __post_init__(self):
        if not (2 <= self.leaves <= 6 and 1 <= self.assets <= 3
                and 1 <= self.vertices <= 5 and 1 <= self.depth <= 2):
            raise DomainError("caps must satisfy 2 <= leaves <= 6, assets <= 3, "
                              "vertices <= 5, depth <= 2")


@dataclass
class Instance:
    market: FiniteMarket
    priors: PriorSet
    utility: UtilityFunction
    x: float
    planted_emm: bool | None = None
    label: str = ""

    def to_dict(self) -> dict:
        return {"label": self.label, "market": market_to_dict(self.market),
                "priors": self.priors.to_dict(), "utility": self.utility.to_dict(),
                "x": self.x, "planted_emm": self.planted_emm}

    @classmethod
    def from_dict(cls, doc) -> "Instance":
        return cls(market_from_dict(doc["market"]), priors_from_dict(doc["priors"]),
                   utility_from_dict(doc["utility"]), float(doc["x"]),
                   doc.get("planted_emm"), doc.get("label", ""))


_UTILITIES = (("log", None), ("power", 0.5), ("power", 0.3), ("power", -1.0))


def _branching(rng, caps: Caps):
    depth = int(rng.integers(1, caps.depth + 1))
    if depth == 1:
        return [[int(rng.integers(2, caps.leaves + 1))]]
    options = []
    for k1 in range(2, caps.leaves // 2 + 1):
        for counts in np.ndindex(*(caps.leaves,) * k1):
            c = [v + 2 for v in counts]
            if sum(c) <= caps.leaves and all(v <= caps.leaves for v in c):
                options.append([[k1], c])
    if not options:
        return [[int(rng.integers(2, caps.leaves + 1))]]
    return options[int(rng.integers(len(options)))]


def random_market(rng, caps: Caps = Caps(), q0=None):
    """Positive prices that are a martingale under a random full-support q0.

    Returns (market, q0).  Every node's returns are centred under q0, so the
    market is arbitrage-free and q0 is one of its martingale measures.
    """
    branching = _branching(rng, caps)
    nodes = tree_from_branching(branching)
    n = len(nodes)
    children: list[list[int]] = [[] for _ in range(n)]
    for nd in nodes[1:]:
        children[nd["parent"]].append(nd["id"])
    leaves = [i for i in range(n) if not children[i]]
    if q0 is None:
        q0 = rng.dirichlet(np.full(len(leaves), 2.0))
        q0 = 0.8 * q0 + 0.2 / len(leaves)
    mass = np.zeros(n)
    for pos, leaf in enumerate(leaves):
        mass[leaf] = q0[pos]
    for i in reversed(range(n)):
        for c in children[i]:
            mass[i] += mass[c]
    d = int(rng.integers(1, caps.assets + 1))
    prices = np.zeros((n, d))
    prices[0] = rng.uniform(0.5, 2.0, d)
    for i in range(n):
        ch = children[i]
        if not ch:
            continue
        e = rng.uniform(-0.4, 0.4, (len(ch), d))
        w = mass[ch] / mass[i]
        e -= w @ e
        for k, c in enumerate(ch):
            prices[c] = prices[i] * (1.0 + e[k])
    for i, nd in enumerate(nodes):
        nd["prices"] = prices[i].tolist()
    return build_market(nodes, assets=d, steps=len(branching)), np.asarray(q0)


def _hull_around(rng, q0, m):
    """m full-support vertices whose convex hull contains q0."""
    L = q0.size
    if m == 1:
        return [q0.copy()]
    R = rng.dirichlet(np.ones(L), m)
    lam = rng.dirichlet(np.ones(m))
    D = R - lam @ R            # lam-weighted mean zero, so q0 = lam @ V
    scale = np.max(-D / q0, initial=0.0)
    t = 0.9 / scale if scale > 0 else 1.0
    return [q0 + t * d for d in D]


def _separated(rng, market, q0, m):
    """m full-support vertices whose hull is strictly separated from every
    martingale measure: each gives the gain G h an expectation >= margin."""
    G = market.terminal_gains
    h = rng.normal(size=G.shape[1])
    g = G @ h
    spread = float(g.max() - g.min())
    margin = min(0.02 * spread, 0.5 * float(g.max()))
    out = []
    for _ in range(m):
        base = 0.5 * q0 + 0.5 * rng.dirichlet(np.ones(q0.size))
        z = g / spread
        theta = 0.0
        v = base
        while v @ g < margin:
            theta += 0.25
            v = base * np.exp(theta * z)
            v /= v.sum()
        out.append(v)
    return out


def random_instance(rng, caps: Caps = Caps(), plant: bool | None = None,
                    singleton: bool = False, label: str = "") -> Instance:
    """Random arbitrage-free market and prior polytope.

    With ``plant=True`` the polytope contains an equivalent martingale
    measure; with ``plant=False`` it is separated from all of them by a
    trading strategy; ``None`` flips a fair coin.
    """
    market, q0 = random_market(rng, caps)
    while not np.any(market.terminal_gains):
        market, q0 = random_market(rng, caps)
    if plant is None:
        plant = bool(rng.integers(2))
    m = 1 if singleton else int(rng.integers(1, caps.vertices + 1))
    verts = _hull_around(rng, q0, m) if plant else _separated(rng, market, q0, m)
    verts = [v / v.sum() for v in verts]
    family, alpha = _UTILITIES[int(rng.integers(len(_UTILITIES)))]
    u = UtilityFunction(family, alpha)
    x = float(np.round(rng.uniform(0.5, 2.0), 6))
    return Instance(market, PriorSet(tuple(MeasureVector(v) for v in verts)), u, x, plant, label)


# -- randomized harness ------------------------------------------------------------

@dataclass
class AggregateReport:
    seed: int
    trials: int
    agreements: int
    planted: int
    detector_true: int
    disagreements: list[dict] = field(default_factory=list)

    @property
    def agreement_rate(self) -> float:
        return 1.0 if self.trials == 0 else self.agreements / self.trials

    def to_dict(self) -> dict:
        return {"seed": self.seed, "trials": self.trials, "agreements": self.agreements,
                "agreement_rate": self.agreement_rate, "planted": self.planted,
                "detector_true": self.detector_true, "disagreements": self.disagreements}


def run_trial(seed: int, index: int, caps: Caps = Caps(), singleton: bool = False,
              tol: float = DETECT_TOL, cfg: SolverConfig = DEFAULT):
    """One deterministic trial; returns (instance, report or None, error text or None)."""
    rng = np.random.default_rng([seed, index])
    inst = random_instance(rng, caps, singleton=singleton, label=f"seed{seed}-trial{index}")
    try:
        rep = theorem_check(inst.market, inst.priors, inst.utility, inst.x, tol, cfg,
                            market_id=inst.label)
        return inst, rep, None
    except RobustfolioError as exc:
        return inst, None, f"{type(exc).__name__}: {exc}"


def randomized_verification(seed: int, trials: int, caps: Caps = Caps(),
                            singleton: bool = False, tol: float = DETECT_TOL,
                            cfg: SolverConfig = DEFAULT, dump_dir: str | None = None,
                            extra: Sequence[Instance] = ()) -> AggregateReport:
    """Three-way agreement rate over ``trials`` generated instances (plus ``extra``).

    Solver errors count as disagreements.  Each disagreement is kept as a
    replayable instance document and, with ``dump_dir``, written to its own
    file.
    """
    agg = AggregateReport(seed, 0, 0, 0, 0)
    jobs: list[tuple[Instance, Any, Any]] = [run_trial(seed, i, caps, singleton, tol, cfg)
                                             for i in range(trials)]
    for inst in extra:
        try:
            rep = theorem_check(inst.market, inst.priors, inst.utility, inst.x, tol, cfg,
                                market_id=inst.label)
            jobs.append((inst, rep, None))
        except RobustfolioError as exc:
            jobs.append((inst, None, f"{type(exc).__name__}: {exc}"))
    for inst, rep, err in jobs:
        agg.trials += 1
        agg.planted += bool(inst.planted_emm)
        if rep is not None and rep.detector_riskless:
            agg.detector_true += 1
        if rep is not None and rep.agreement:
            agg.agreements += 1
            continue
        doc = inst.to_dict()
        doc["report"] = None if rep is None else rep.to_dict()
        doc["error"] = err
        agg.disagreements.append(doc)
        if dump_dir:
            os.makedirs(dump_dir, exist_ok=True)
            path = os.path.join(dump_dir, f"{inst.label or len(agg.disagreements)}.json")
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2)
    return agg
