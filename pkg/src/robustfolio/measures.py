"""Probability vectors on terminal states, prior polytopes, and
(super)martingale-measure feasibility as linear programs.

On a finite tree a measure ``q`` is a martingale measure iff
``terminal_gains.T @ q == 0`` (one row per internal node and asset); local
and true martingales coincide.  Equivalence to a prior reduces to equality
of supports, and strict positivity on the support is decided by the LP slack
``delta > DELTA_MIN``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch, DomainError, LPNumericalFailure, SupportMismatch
from .market import FiniteMarket
from .numerics import LinearProgram, SolverConfig, solve_lp
from .numerics.config import DEFAULT

SUM_TOL = 1e-12
DELTA_MIN = 1e-9
MARTINGALE_TOL = 1e-9


@dataclass(frozen=True)
class MeasureVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise DomainError("measure needs finite weights")
        if np.any(w < 0):
            raise DomainError(f"negative weight in measure {w.tolist()}")
        if abs(w.sum() - 1.0) > SUM_TOL * max(1, w.size):
            raise DomainError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, w) -> "MeasureVector":
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        return cls(w / w.sum())

    @property
    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.weights > 0))

    @property
    def size(self) -> int:
        return self.weights.size

    def density(self, reference: "MeasureVector") -> np.ndarray:
        """Pointwise ratio dQ/dP on the reference support (0 elsewhere)."""
        p = reference.weights
        out = np.zeros_like(p)
        mask = p > 0
        out[mask] = self.weights[mask] / p[mask]
        return out

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class PriorSet:
    vertices: tuple[MeasureVector, ...]

    def __post_init__(self):
        verts = tuple(v if isinstance(v, MeasureVector) else MeasureVector(v)
                      for v in self.vertices)
        if not verts:
            raise DomainError("prior set needs at least one vertex")
        sizes = {v.size for v in verts}
        if len(sizes) != 1:
            raise DimensionMismatch(f"vertices have differing lengths {sorted(sizes)}")
        supp = verts[0].support
        for i, v in enumerate(verts[1:], start=1):
            if v.support != supp:
                raise SupportMismatch(f"vertex {i} support {sorted(v.support)} differs from "
                                      f"vertex 0 support {sorted(supp)}")
        object.__setattr__(self, "vertices", verts)

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([v.weights for v in self.vertices])

    @property
    def support(self) -> frozenset[int]:
        return self.vertices[0].support

    @property
    def n_states(self) -> int:
        return self.vertices[0].size

    def __len__(self):
        return len(self.vertices)

    def mixture(self, lam) -> MeasureVector:
        lam = np.asarray(lam, dtype=float)
        return MeasureVector.normalized(lam @ self.matrix)

    def to_dict(self) -> dict:
        return {"vertices": [[float(w) for w in v.weights] for v in self.vertices]}


def prior_set(vertices: Iterable) -> PriorSet:
    return PriorSet(tuple(MeasureVector(v) for v in vertices))


def priors_from_dict(doc: Mapping[str, Any]) -> PriorSet:
    return prior_set(doc["vertices"])


def _weights(q) -> np.ndarray:
    return q.weights if isinstance(q, MeasureVector) else np.asarray(q, dtype=float)


def _check_states(n: int, market: FiniteMarket, what: str = "measure") -> None:
    if n != market.n_leaves:
        raise DimensionMismatch(f"{what} has {n} states, market has {market.n_leaves} leaves")


def martingale_matrix(market: FiniteMarket) -> np.ndarray:
    """Rows (internal node, asset); ``A @ q == 0`` is the martingale system."""
    return market.terminal_gains.T


# -- pointwise predicates ------------------------------------------------------

def is_martingale_measure(q, market: FiniteMarket, tol: float = MARTINGALE_TOL) -> bool:
    """E_q[S_{t+1} | n] == S_t(n) at every internal node n of positive q-mass."""
    w = _weights(q)
    _check_states(w.size, market)
    tree = market.tree
    for n in tree.internal:
        below = list(tree.leaves_below[n])
        mass = w[below].sum()
        if mass <= 0:
            continue
        cond = np.zeros(market.n_assets)
        for child in tree.children[n]:
            cm = w[list(tree.leaves_below[child])].sum()
            cond += cm * market.prices[child]
        if np.any(np.abs(cond / mass - market.prices[n]) > tol):
            return False
    return True


def is_supermartingale_measure(q, market: FiniteMarket, x: float,
                               cfg: SolverConfig = DEFAULT) -> bool:
    """E_q[X_T] <= x for every admissible wealth process from x.

    Evaluated exactly as the LP  sup { E_q[G h] : x + G_nodes h >= 0 }: the
    measure qualifies iff that supremum is finite and at most 1e-9.
    """
    if not x > 0:
        raise DomainError(f"initial wealth must be positive, got {x!r}")
    w = _weights(q)
    _check_states(w.size, market)
    c = market.terminal_gains.T @ w
    if not np.any(c):
        return True
    Gn = market.node_gains
    n = Gn.shape[1]
    lp = LinearProgram(c=c, A_ub=-Gn, b_ub=np.full(Gn.shape[0], float(x)),
                       bounds=[(-np.inf, np.inf)] * n, maximize=True)
    res = solve_lp(lp, cfg)
    if res.status == "unbounded":
        return False
    if res.status != "optimal":
        raise LPNumericalFailure(f"admissible set reported {res.status}; h = 0 is always feasible")
    return res.objective <= 1e-9


# -- LP searches ----------------------------------------------------------------

@dataclass
class Certificate:
    measure: MeasureVector
    mixture: np.ndarray | None
    delta: float
    multipliers: np.ndarray | None = None  # dual weights on admissibility rows


def _support_list(support, L) -> list[int]:
    s = sorted(int(i) for i in support)
    if not s:
        raise DomainError("support must be nonempty")
    if s[0] < 0 or s[-1] >= L:
        raise DimensionMismatch(f"support {s} outside 0..{L - 1}")
    return s


def find_emm(market: FiniteMarket, support=None, cfg: SolverConfig = DEFAULT
             ) -> MeasureVector | None:
    """Martingale measure positive exactly on ``support`` (default: all leaves).

    Solves max delta s.t. A q = 0, sum q = 1, q >= delta on the support and
    q = 0 off it.  Returns None when the optimum is at most ``DELTA_MIN``.
    """
    L = market.n_leaves
    supp = _support_list(range(L) if support is None else support, L)
    A = martingale_matrix(market)
    k = A.shape[0]
    A_eq = np.zeros((k + 1, L + 1))
    A_eq[:k, :L] = A
    A_eq[k, :L] = 1.0
    b_eq = np.zeros(k + 1)
    b_eq[k] = 1.0
    A_ub = np.zeros((len(supp), L + 1))
    for r, s in enumerate(supp):
        A_ub[r, s] = -1.0
        A_ub[r, L] = 1.0
    on = set(supp)
    bounds = [(0.0, 1.0) if i in on else (0.0, 0.0) for i in range(L)] + [(0.0, 1.0)]
    c = np.zeros(L + 1)
    c[L] = 1.0
    res = solve_lp(LinearProgram(c, A_eq, b_eq, A_ub, np.zeros(len(supp)), bounds, True), cfg)
    if res.status != "optimal" or res.objective <= DELTA_MIN:
        return None
    q = np.clip(res.x[:L], 0.0, None)
    return MeasureVector(q / q.sum())


def _mixture_lp(priors: PriorSet, market: FiniteMarket, extra_cols: np.ndarray | None,
                extra_ub: tuple[np.ndarray, float] | None, cfg: SolverConfig):
    """max delta over lambda in the simplex with q = V^T lambda.

    ``extra_cols`` appends nonnegative variables entering the martingale rows
    (used by the supermartingale dual); ``extra_ub`` adds one row on them.
    """
    _check_states(priors.n_states, market, "prior set")
    V = priors.matrix                      # (m, L)
    m, L = V.shape
    A = martingale_matrix(market) @ V.T    # (k, m)
    k = A.shape[0]
    e = 0 if extra_cols is None else extra_cols.shape[1]
    nv = m + e + 1
    A_eq = np.zeros((k + 1, nv))
    A_eq[:k, :m] = A
    if e:
        A_eq[:k, m:m + e] = extra_cols
    A_eq[k, :m] = 1.0
    b_eq = np.zeros(k + 1)
    b_eq[k] = 1.0
    supp = sorted(priors.support)
    rows = []
    for s in supp:
        row = np.zeros(nv)
        row[:m] = -V[:, s]
        row[-1] = 1.0
        rows.append(row)
    b_ub = [0.0] * len(supp)
    if extra_ub is not None:
        row = np.zeros(nv)
        row[m:m + e] = extra_ub[0]
        rows.append(row)
        b_ub.append(extra_ub[1])
    c = np.zeros(nv)
    c[-1] = 1.0
    bounds = [(0.0, np.inf)] * (m + e) + [(0.0, 1.0)]
    res = solve_lp(LinearProgram(c, A_eq, b_eq, np.array(rows), np.array(b_ub), bounds, True), cfg)
    if res.status != "optimal" or res.objective <= DELTA_MIN:
        return None
    lam = np.clip(res.x[:m], 0.0, None)
    lam /= lam.sum()
    q = MeasureVector.normalized(lam @ V)
    return Certificate(q, lam, float(res.objective),
                       None if not e else res.x[m:m + e].copy())


def priors_contain_emm(priors: PriorSet, market: FiniteMarket,
                       cfg: SolverConfig = DEFAULT) -> Certificate | None:
    """Certificate (q, lambda) of an equivalent martingale measure in the hull."""
    return _mixture_lp(priors, market, None, None, cfg)


def priors_contain_supermartingale(priors: PriorSet, market: FiniteMarket, x: float,
                                   cfg: SolverConfig = DEFAULT) -> Certificate | None:
    """Certificate of a measure q in the hull with E_q[X_T] <= x on all of X(x).

    By LP duality, sup {q . G h : x + G_nodes h >= 0} <= 0 iff some mu >= 0
    has G_nodes^T mu + G^T q = 0 and x * sum(mu) <= 0; mu is returned as
    ``multipliers``.  (With x > 0 this forces mu = 0, i.e. the martingale
    system, which is the finite-space content of S = M.)
    """
    if not x > 0:
        raise DomainError(f"initial wealth must be positive, got {x!r}")
    Gn = market.node_gains
    return _mixture_lp(priors, market, Gn.T.copy(), (np.full(Gn.shape[0], float(x)), 0.0), cfg)
