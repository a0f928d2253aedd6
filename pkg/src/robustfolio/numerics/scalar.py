from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from ..errors import BracketNotConvex, DomainError
from .config import DEFAULT, SolverConfig

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ScalarMin:
    argmin: float
    value: float
    iterations: int


def minimize_scalar_convex(f: Callable[[float], float], bracket: tuple[float, float],
                           cfg: SolverConfig = DEFAULT) -> ScalarMin:
    """Golden-section search for the minimiser of a unimodal ``f`` on ``bracket``.

    Stops once the bracket is narrower than ``cfg.tolerance * max(1, |y|)``.
    Endpoints are candidates too, so monotone functions return the boundary.
    Raises ``BracketNotConvex`` when the first interior probe sits above both
    endpoints, which no convex function allows.
    """
    a, b = map(float, bracket)
    if not a < b:
        raise DomainError(f"bracket must satisfy lo < hi, got {bracket!r}")
    fa, fb = f(a), f(b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    if max(fc, fd) > max(fa, fb) and not math.isinf(max(fa, fb)):
        raise BracketNotConvex(f"interior value {max(fc, fd)!r} exceeds both endpoints "
                               f"({fa!r}, {fb!r}) on {bracket!r}")
    lo, hi = a, b
    it = 0
    while hi - lo > cfg.tolerance * max(1.0, abs(c)) and it < cfg.max_iterations:
        it += 1
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    best = min((fa, a), (fb, b), (fc, c), (fd, d))
    return ScalarMin(best[1], best[0], it)
