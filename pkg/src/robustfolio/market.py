"""Finite event-tree markets, portfolios and wealth processes.

Prices are quoted in units of the riskless asset, so the riskless asset is
implicit (constant 1) and never appears as a column.  A one-period market is
simply a tree of depth 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CyclicNodeGraph,
    DimensionMismatch,
    MarketError,
    MissingPrice,
    UnevenLeafDepth,
)

ADMISSIBILITY_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EventTree:
    """Rooted tree with all leaves at depth ``steps``.

    Nodes are indexed ``0..n-1`` in the order they were declared; ``ids``
    keeps the caller's labels for error messages and output.
    """

    ids: tuple
    parent: tuple[int | None, ...]
    children: tuple[tuple[int, ...], ...]
    depth: tuple[int, ...]
    steps: int

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return self.parent.index(None)

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(i for i, ch in enumerate(self.children) if not ch)

    @cached_property
    def internal(self) -> tuple[int, ...]:
        return tuple(i for i, ch in enumerate(self.children) if ch)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def path(self, node: int) -> list[int]:
        """Nodes from the root down to ``node`` inclusive."""
        out = [node]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out[::-1]

    @cached_property
    def leaves_below(self) -> tuple[tuple[int, ...], ...]:
        """Per node, positions (in ``leaves`` order) of the leaves beneath it."""
        below: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for pos, leaf in enumerate(self.leaves):
            for n in self.path(leaf):
                below[n].append(pos)
        return tuple(tuple(b) for b in below)


@dataclass(frozen=True)
class FiniteMarket:
    tree: EventTree
    prices: np.ndarray  # (n_nodes, d)

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    @property
    def n_leaves(self) -> int:
        return self.tree.n_leaves

    @property
    def holdings_shape(self) -> tuple[int, int]:
        return (len(self.tree.internal), self.n_assets)

    @cached_property
    def node_gains(self) -> np.ndarray:
        """Linear map from stacked holdings to wealth-minus-x at every node.

        Row ``n`` is the gain accumulated on the way from the root to node
        ``n``; columns are ordered (internal node, asset) row-major, matching
        ``Portfolio.holdings.ravel()``.
        """
        tree = self.tree
        slot = {k: j for j, k in enumerate(tree.internal)}
        d = self.n_assets
        G = np.zeros((tree.n_nodes, len(tree.internal) * d))
        for n in range(tree.n_nodes):
            path = tree.path(n)
            for a, b in zip(path[:-1], path[1:]):
                j = slot[a]
                G[n, j * d:(j + 1) * d] += self.prices[b] - self.prices[a]
        G.setflags(write=False)
        return G

    @cached_property
    def terminal_gains(self) -> np.ndarray:
        """Rows of ``node_gains`` for the leaves, in leaf order."""
        G = self.node_gains[list(self.tree.leaves)]
        G.setflags(write=False)
        return G

    @cached_property
    def is_degenerate(self) -> bool:
        """True when no price ever moves, so every portfolio is riskless."""
        return not np.any(self.terminal_gains)

    def leaf_prices(self) -> np.ndarray:
        return self.prices[list(self.tree.leaves)]


@dataclass(frozen=True)
class Portfolio:
    x: float
    holdings: np.ndarray = field()  # (n_internal, d)

    def __post_init__(self):
        if not (self.x > 0 and np.isfinite(self.x)):
            raise DimensionMismatch(f"initial wealth must be positive, got {self.x!r}")
        object.__setattr__(self, "holdings", _frozen(np.atleast_2d(self.holdings)))

    @classmethod
    def riskless(cls, market: FiniteMarket, x: float) -> "Portfolio":
        return cls(x, np.zeros(market.holdings_shape))

    @classmethod
    def from_vector(cls, market: FiniteMarket, x: float, h) -> "Portfolio":
        return cls(x, np.asarray(h, dtype=float).reshape(market.holdings_shape))


@dataclass(frozen=True)
class WealthProcess:
    values: np.ndarray  # per node

    def terminal(self, market: FiniteMarket) -> np.ndarray:
        return self.values[list(market.tree.leaves)]


# -- construction -------------------------------------------------------------

def build_tree(nodes: Sequence[Mapping[str, Any]], steps: int | None = None) -> EventTree:
    ids = [nd["id"] for nd in nodes]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise MarketError("duplicate node id", dup)
    index = {nid: i for i, nid in enumerate(ids)}

    parent: list[int | None] = []
    for nd in nodes:
        p = nd.get("parent")
        if p is None:
            parent.append(None)
        elif p not in index:
            raise MarketError(f"unknown parent {p!r}", nd["id"])
        else:
            parent.append(index[p])
    roots = [ids[i] for i, p in enumerate(parent) if p is None]
    if len(roots) != 1:
        if not roots:
            raise CyclicNodeGraph("no root: every node has a parent", ids[0] if ids else None)
        raise MarketError(f"expected exactly one root, found {roots!r}", roots[1])

    depth: list[int | None] = [None] * len(ids)
    for i in range(len(ids)):
        seen = []
        j: int | None = i
        while j is not None and depth[j] is None:
            if j in seen:
                raise CyclicNodeGraph("parent chain loops", ids[j])
            seen.append(j)
            j = parent[j]
        base = -1 if j is None else depth[j]
        for k in reversed(seen):
            base += 1
            depth[k] = base

    children: list[list[int]] = [[] for _ in ids]
    for i, p in enumerate(parent):
        if p is not None:
            children[p].append(i)

    leaf_depths = {depth[i] for i, ch in enumerate(children) if not ch}
    T = max(leaf_depths)
    for i, ch in enumerate(children):
        if not ch and depth[i] != T:
            raise UnevenLeafDepth(f"leaf at depth {depth[i]}, expected {T}", ids[i])
    if steps is not None and steps != T:
        bad = next(ids[i] for i, ch in enumerate(children) if not ch)
        raise UnevenLeafDepth(f"declared steps={steps} but leaves sit at depth {T}", bad)
    if T < 1:
        raise MarketError("tree has no trading step", ids[0])

    return EventTree(
        ids=tuple(ids),
        parent=tuple(parent),
        children=tuple(tuple(c) for c in children),
        depth=tuple(depth),  # type: ignore[arg-type]
        steps=T,
    )


def build_market(nodes: Sequence[Mapping[str, Any]], assets: int | None = None,
                 steps: int | None = None) -> FiniteMarket:
    """Validate a node list (``id``, ``parent``, ``prices``) into a market."""
    tree = build_tree(nodes, steps)
    d = assets
    rows = []
    for nd in nodes:
        p = nd.get("prices")
        if p is None:
            raise MissingPrice("no price vector", nd["id"])
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if d is None:
            d = p.size
        if p.size != d:
            raise MissingPrice(f"expected {d} prices, got {p.size}", nd["id"])
        if not np.all(np.isfinite(p)):
            raise MissingPrice("non-finite price", nd["id"])
        if np.any(p < 0):
            raise MarketError("negative price", nd["id"])
        rows.append(p)
    if not d:
        raise MissingPrice("market has no risky asset", tree.ids[0])
    return FiniteMarket(tree, _frozen(np.vstack(rows)))


def one_period_market(s0, leaf_prices) -> FiniteMarket:
    """Depth-1 market: root price vector ``s0``; one row per leaf."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    leaf_prices = np.asarray(leaf_prices, dtype=float)
    if leaf_prices.ndim == 1:
        leaf_prices = leaf_prices[:, None]
    nodes = [{"id": 0, "parent": None, "prices": s0}]
    nodes += [{"id": i + 1, "parent": 0, "prices": row} for i, row in enumerate(leaf_prices)]
    return build_market(nodes, assets=s0.size, steps=1)


def market_from_dict(doc: Mapping[str, Any]) -> FiniteMarket:
    return build_market(doc["nodes"], assets=doc.get("assets"), steps=doc.get("steps"))


def market_to_dict(market: FiniteMarket) -> dict:
    tree = market.tree
    nodes = []
    for i, nid in enumerate(tree.ids):
        p = tree.parent[i]
        nodes.append({
            "id": nid,
            "parent": None if p is None else tree.ids[p],
            "prices": [float(v) for v in market.prices[i]],
        })
    return {"steps": tree.steps, "assets": market.n_assets, "nodes": nodes}


# -- wealth -------------------------------------------------------------------

def _check_dims(market: FiniteMarket, portfolio: Portfolio) -> None:
    if portfolio.holdings.shape != market.holdings_shape:
        raise DimensionMismatch(
            f"holdings shape {portfolio.holdings.shape} does not match market "
            f"{market.holdings_shape} (internal nodes x assets)")


def wealth_process(market: FiniteMarket, portfolio: Portfolio) -> WealthProcess:
    """Self-financing wealth at every node: x plus accumulated H . dS."""
    _check_dims(market, portfolio)
    tree = market.tree
    slot = {k: j for j, k in enumerate(tree.internal)}
    values = np.empty(tree.n_nodes)
    order = sorted(range(tree.n_nodes), key=tree.depth.__getitem__)
    for n in order:
        p = tree.parent[n]
        if p is None:
            values[n] = portfolio.x
        else:
            dS = market.prices[n] - market.prices[p]
            values[n] = values[p] + portfolio.holdings[slot[p]] @ dS
    values.setflags(write=False)
    return WealthProcess(values)


def is_admissible(market: FiniteMarket, portfolio: Portfolio) -> bool:
    """Wealth nonnegative at every node (zero allowed, up to roundoff)."""
    return bool(np.all(wealth_process(market, portfolio).values >= -ADMISSIBILITY_TOL))


def tree_from_branching(branching: Iterable[Sequence[int]]) -> list[dict]:
    """Skeleton node list (no prices) from per-level child counts.

    ``branching[t][k]`` is the number of children of the ``k``-th node at
    depth ``t``.  Used by the random instance generators.
    """
    nodes = [{"id": 0, "parent": None}]
    level = [0]
    for counts in branching:
        if len(counts) != len(level):
            raise MarketError("branching spec does not match level width")
        nxt = []
        for parent, c in zip(level, counts):
            for _ in range(c):
                nodes.append({"id": len(nodes), "parent": parent})
                nxt.append(len(nodes) - 1)
        level = nxt
    return nodes
