from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import IterationCapExceeded
from .config import DEFAULT, SolverConfig
from .scalar import minimize_scalar_convex


@dataclass
class FWResult:
    point: np.ndarray
    value: float | None
    gap: float
    iterations: int
    gap_history: list[float] = field(default_factory=list)


def frank_wolfe(grad: Callable[[np.ndarray], np.ndarray],
                lmo: Callable[[np.ndarray], np.ndarray],
                start, cfg: SolverConfig = DEFAULT,
                f: Callable[[np.ndarray], float] | None = None,
                max_iterations: int | None = None,
                raise_on_cap: bool = False) -> FWResult:
    """Conditional-gradient minimisation of a convex function over a polytope.

    ``lmo(g)`` must return a minimiser of ``g . s`` over the feasible set.
    With ``f`` given, each step uses an exact line search (golden section on
    [0, 1]), which makes objective values monotone; the reported gap is then
    the running minimum of the per-iteration gaps, a valid suboptimality
    bound for the returned point.  Without ``f`` the open-loop rule
    2 / (k + 2) is used.
    """
    x = np.array(start, dtype=float)
    cap = max_iterations or cfg.max_iterations
    best_gap = np.inf
    history: list[float] = []
    ls_cfg = SolverConfig(tolerance=1e-12, max_iterations=200)
    k = 0
    for k in range(cap):
        g = np.asarray(grad(x), dtype=float)
        s = np.asarray(lmo(g), dtype=float)
        d = s - x
        gap = float(-(g @ d))
        best_gap = min(best_gap, max(gap, 0.0))
        history.append(best_gap)
        if best_gap <= cfg.tolerance:
            break
        if f is None:
            gamma = 2.0 / (k + 2.0)
        else:
            def phi(t, x=x, d=d):
                v = f(x + t * d)
                return np.inf if np.isnan(v) else v
            gamma = minimize_scalar_convex(phi, (0.0, 1.0), ls_cfg).argmin
            if gamma == 0.0:
                break
        x = x + gamma * d
    else:
        if raise_on_cap:
            raise IterationCapExceeded(f"Frank-Wolfe gap {best_gap:.3g} after {cap} iterations",
                                       best=x)
    return FWResult(x, None if f is None else float(f(x)), best_gap, k + 1, history)
