"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Desk-scale only (a few hundred variables at most).  General bounds and
inequality rows are reduced to ``min c.z, A z = b, z >= 0, b >= 0`` and the
pivoting itself runs in the compiled kernel when available.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _kernels
from ..errors import DomainError, IterationCapExceeded, LPNumericalFailure
from .config import DEFAULT, SolverConfig

PIVOT_TOL = 1e-9


@dataclass
class LinearProgram:
    """min (or max) c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi."""

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    bounds: Sequence[tuple[float, float]] | None = None
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq, self.b_eq = self._rows(self.A_eq, self.b_eq, n, "equality")
        self.A_ub, self.b_ub = self._rows(self.A_ub, self.b_ub, n, "inequality")
        if self.bounds is None:
            self.bounds = [(0.0, np.inf)] * n
        elif len(self.bounds) != n:
            raise DomainError(f"{len(self.bounds)} bounds for {n} variables")
        for lo, hi in self.bounds:
            if lo > hi or lo == np.inf or hi == -np.inf:
                raise DomainError(f"empty bound interval [{lo}, {hi}]")
        if not np.all(np.isfinite(self.c)):
            raise DomainError("objective has non-finite entries")

    @staticmethod
    def _rows(A, b, n, kind):
        if A is None:
            return np.zeros((0, n)), np.zeros(0)
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape != (b.size, n):
            raise DomainError(f"{kind} block has shape {A.shape}, expected ({b.size}, {n})")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise DomainError(f"{kind} block has non-finite entries")
        return A, b

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    iterations: int = 0
    basis: list[int] = field(default_factory=list)


def _standard_form(lp: LinearProgram):
    """Map x -> z >= 0.  Returns (A, b, c, offset, recover) with x = recover(z)."""
    n = lp.n
    cols = []  # per original var: list of (z index, sign)
    shift = np.zeros(n)
    upper_rows = []  # (z index, rhs) for finite-width intervals
    nz = 0
    for j, (lo, hi) in enumerate(lp.bounds):
        if np.isfinite(lo):
            shift[j] = lo
            cols.append([(nz, 1.0)])
            if np.isfinite(hi):
                upper_rows.append((nz, hi - lo))
            nz += 1
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append([(nz, -1.0)])
            nz += 1
        else:
            cols.append([(nz, 1.0), (nz + 1, -1.0)])
            nz += 2

    M = np.zeros((n, nz))
    for j, entries in enumerate(cols):
        for k, s in entries:
            M[j, k] = s

    n_ub = lp.A_ub.shape[0] + len(upper_rows)
    A_ub = np.zeros((n_ub, nz))
    b_ub = np.zeros(n_ub)
    m1 = lp.A_ub.shape[0]
    A_ub[:m1] = lp.A_ub @ M
    b_ub[:m1] = lp.b_ub - lp.A_ub @ shift
    for r, (k, cap) in enumerate(upper_rows):
        A_ub[m1 + r, k] = 1.0
        b_ub[m1 + r] = cap

    A_eq = lp.A_eq @ M
    b_eq = lp.b_eq - lp.A_eq @ shift

    A = np.zeros((A_eq.shape[0] + n_ub, nz + n_ub))
    A[:A_eq.shape[0], :nz] = A_eq
    A[A_eq.shape[0]:, :nz] = A_ub
    A[A_eq.shape[0]:, nz:] = np.eye(n_ub)
    b = np.concatenate([b_eq, b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign

    c = np.zeros(nz + n_ub)
    c[:nz] = lp.c @ M
    if lp.maximize:
        c = -c
    offset = float(lp.c @ shift)

    def recover(z):
        return shift + M @ z[:nz]

    return A, b, c, offset, recover


def _run(T, basis, ncols, cfg: SolverConfig, phase: str) -> tuple[int, int]:
    status, iters = _kernels.simplex_pivot(T, basis, ncols, PIVOT_TOL, cfg.max_iterations)
    if status == _kernels.STATUS_ITERATION_CAP:
        raise IterationCapExceeded(f"simplex {phase}: {iters} pivots without termination")
    if not np.all(np.isfinite(T)):
        raise LPNumericalFailure(f"simplex {phase}: tableau lost finiteness")
    return status, iters


def solve_lp(lp: LinearProgram, cfg: SolverConfig = DEFAULT) -> LPResult:
    A, b, c, _, recover = _standard_form(lp)
    m, N = A.shape

    # phase 1: one artificial per row, minimise their sum
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :N] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(N, N + m, dtype=np.intp)
    iters = 0
    if m:
        _, iters = _run(T, basis, N, cfg, "phase 1")
        infeas = -T[m, -1]
        if infeas > cfg.tolerance * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LPResult("infeasible", None, None, iters)

        # drive remaining artificials out; drop rows that are redundant
        keep = []
        for i in range(m):
            if basis[i] >= N:
                row = T[i, :N]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size == 0:
                    continue
                j = int(nz[0])
                T[i] /= T[i, j]
                for r in range(m + 1):
                    if r != i and T[r, j] != 0.0:
                        T[r] -= T[r, j] * T[i]
                basis[i] = j
            keep.append(i)
        T = np.ascontiguousarray(np.vstack([T[keep][:, list(range(N)) + [-1]],
                                            np.zeros((1, N + 1))]))
        basis = np.ascontiguousarray(basis[keep])
        m = len(keep)
    else:
        T = np.zeros((1, N + 1))

    # phase 2 reduced costs for the current basis
    cB = c[basis]
    T[m, :N] = c - cB @ T[:m, :N]
    T[m, -1] = -(cB @ T[:m, -1])
    status, it2 = _run(T, basis, N, cfg, "phase 2")
    iters += it2
    if status == _kernels.STATUS_UNBOUNDED:
        return LPResult("unbounded", None, None, iters, list(basis))

    z = np.zeros(N)
    z[basis] = np.maximum(T[:m, -1], 0.0)
    x = recover(z)
    obj = float(lp.c @ x)
    return LPResult("optimal", x, obj, iters, [int(v) for v in basis])
