"""Brute-force ground truth for small instances.

Nothing here calls the optimisers in ``numerics`` or ``solver``: the grid
search only evaluates expected utilities (in the compiled ``grid_scan``
kernel), and the vertex enumeration solves square linear systems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, GridGuardExceeded, TooLarge
from .market import FiniteMarket, one_period_market
from .measures import MeasureVector, PriorSet, is_martingale_measure, martingale_matrix

GRID_GUARD = 10_000_000
PAD = 0.10


@dataclass(frozen=True)
class GridSpec:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]
    refinements: int = 6
    window: int = 3       # refined box half-width, in cells of the previous level

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        res = tuple(int(v) for v in self.resolution)
        if not (len(lo) == len(hi) == len(res)):
            raise DomainError("grid bounds and resolution differ in length")
        if any(r < 2 for r in res):
            raise DomainError("grid resolution must be at least 2 per dimension")
        if not all(math.isfinite(a) and math.isfinite(b) and a <= b for a, b in zip(lo, hi)):
            raise DomainError("grid bounds must be finite with lower <= upper")
        if self.refinements < 0 or self.window < 1:
            raise DomainError("refinements must be >= 0 and window >= 1")
        if self.points > GRID_GUARD:
            raise GridGuardExceeded(f"{self.points} grid points exceed the {GRID_GUARD} guard")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "resolution", res)

    @property
    def points(self) -> int:
        return int(np.prod(self.resolution, dtype=np.int64))

    @property
    def cell(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.resolution) - 1)


@dataclass
class OracleResult:
    holdings: np.ndarray     # (internal nodes, assets)
    value: float
    evaluations: int
    cell: np.ndarray         # finest cell widths


def _admissible_box(market: FiniteMarket, x: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Bounding box of {h : x + node_gains h >= 0} from its vertices, or None
    when that polytope is unbounded."""
    Gn = market.node_gains
    rows = Gn[np.any(Gn != 0, axis=1)]
    k = Gn.shape[1]
    if rows.shape[0] < k or np.linalg.matrix_rank(rows) < k:
        return None
    verts = []
    for S in itertools.combinations(range(rows.shape[0]), k):
        A = rows[list(S)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        h = np.linalg.solve(A, np.full(k, -x))
        if np.all(x + rows @ h >= -1e-9 * x):
            verts.append(h)
    if not verts:
        return None
    V = np.array(verts)
    return V.min(axis=0), V.max(axis=0)


def default_grid(market: FiniteMarket, x: float, resolution: int = 41,
                 refinements: int = 6) -> GridSpec:
    """Box containing every admissible holding, padded by 10%.

    When the admissible set is unbounded (redundant assets) each coordinate
    is capped at x / min |price change| of its asset instead, which still
    covers every attainable terminal wealth.
    """
    k = market.node_gains.shape[1]
    box = _admissible_box(market, x)
    if box is None:
        d = market.n_assets
        tree = market.tree
        moves = np.vstack([market.prices[c] - market.prices[n]
                           for n in tree.internal for c in tree.children[n]])
        half = np.empty(d)
        for a in range(d):
            nz = np.abs(moves[:, a])[np.abs(moves[:, a]) > 0]
            half[a] = x / nz.min() if nz.size else x
        half = np.tile(half, len(tree.internal))
        lo, hi = -half, half
    else:
        lo, hi = box
    width = hi - lo
    pad = PAD * np.where(width > 0, width, x)
    return GridSpec(tuple(lo - pad), tuple(hi + pad), (resolution,) * k, refinements)


def _scan(Gn, Gl, P, u, x, lo, hi, npts):
    return _kernels.grid_scan(Gn, Gl, P, u.code, float(u.param), float(x),
                              np.ascontiguousarray(lo, dtype=float),
                              np.ascontiguousarray(hi, dtype=float),
                              np.ascontiguousarray(npts, dtype=np.int64))


def brute_force_optimal(market: FiniteMarket, priors: PriorSet, u, x: float,
                        grid: GridSpec | None = None) -> OracleResult:
    """Grid maximum of min over vertices of expected utility.

    After the coarse scan each refinement re-centres a box of ``window`` cells
    around the incumbent and rescans it at the same resolution, re-centring
    again (without shrinking) while the incumbent sits on the box edge.  The
    result is a lower bound on the true robust value.
    """
    if u.code < 0:
        raise DomainError("the grid oracle evaluates the closed-form utility families only")
    if not x > 0:
        raise DomainError(f"initial wealth must be positive, got {x!r}")
    if priors.n_states != market.n_leaves:
        raise DomainError("prior set and market disagree on the number of leaves")
    grid = grid or default_grid(market, x)
    Gn = np.ascontiguousarray(market.node_gains, dtype=float)
    Gl = np.ascontiguousarray(market.terminal_gains, dtype=float)
    P = np.ascontiguousarray(priors.matrix, dtype=float)
    npts = np.array(grid.resolution, dtype=np.int64)
    if Gn.shape[1] != npts.size:
        raise DomainError(f"grid has {npts.size} dimensions, market needs {Gn.shape[1]}")
    lo, hi = np.array(grid.lower), np.array(grid.upper)
    h, best, count = _scan(Gn, Gl, P, u, x, lo, hi, npts)
    if not np.isfinite(best):
        raise DomainError("no admissible grid point with finite utility")
    cell = (hi - lo) / (npts - 1)
    for _ in range(grid.refinements):
        half = grid.window * cell
        for _ in range(50):
            lo, hi = h - half, h + half
            h2, v2, c2 = _scan(Gn, Gl, P, u, x, lo, hi, npts)
            count += c2
            moved = v2 > best
            if moved:
                h, best = h2, v2
            inner = (np.abs(h - (lo + hi) / 2) < half * (1 - 1e-9)) | (half == 0)
            if not moved or np.all(inner):
                break
        cell = 2 * half / (npts - 1)
    return OracleResult(np.asarray(h).reshape(market.holdings_shape), float(best), count, cell)


def brute_force_no_betting(priors: PriorSet, payoffs, price_grid, u=None, x: float = 1.0,
                           tol: float = 1e-6, resolution: int = 81
                           ) -> tuple[tuple[float, float] | None, np.ndarray]:
    """Mark each price at which the grid-optimal robust value is within tol of U(x).

    Prices outside the open range of the payoff are never marked (the market
    would admit arbitrage).  Returns (marked interval or None, marked mask).
    """
    from .utility import UtilityFunction

    u = u or UtilityFunction("log")
    A = np.asarray(payoffs, dtype=float).ravel()
    prices = np.asarray(price_grid, dtype=float).ravel()
    marked = np.zeros(prices.size, dtype=bool)
    ux = float(u(x))
    for i, p in enumerate(prices):
        if not (A.min() < p < A.max()):
            continue
        market = one_period_market([p], A)
        res = brute_force_optimal(market, priors, u, x, default_grid(market, x, resolution))
        marked[i] = res.value <= ux + tol
    if not marked.any():
        return None, marked
    sel = prices[marked]
    return (float(sel.min()), float(sel.max())), marked


def enumerate_emm_vertices(market: FiniteMarket, max_leaves: int = 6) -> list[MeasureVector]:
    """Vertices of {q >= 0 : sum q = 1, q is a martingale measure} by basis enumeration."""
    if market.tree.steps != 1:
        raise DomainError("vertex enumeration is implemented for one-period markets")
    L = market.n_leaves
    if L > max_leaves:
        raise TooLarge(f"{L} leaves exceed the enumeration cap of {max_leaves}")
    C = np.vstack([martingale_matrix(market), np.ones((1, L))])
    b = np.zeros(C.shape[0])
    b[-1] = 1.0
    rank = np.linalg.matrix_rank(C)
    found: list[np.ndarray] = []
    for S in itertools.combinations(range(L), rank):
        Cs = C[:, list(S)]
        if np.linalg.matrix_rank(Cs) < rank:
            continue
        qs, *_ = np.linalg.lstsq(Cs, b, rcond=None)
        if np.max(np.abs(Cs @ qs - b)) > 1e-10 or np.any(qs < -1e-12):
            continue
        q = np.zeros(L)
        q[list(S)] = np.clip(qs, 0.0, None)
        q /= q.sum()
        if any(np.max(np.abs(q - f)) <= 1e-10 for f in found):
            continue
        if is_martingale_measure(q, market):
            found.append(q)
    return [MeasureVector(q) for q in found]

