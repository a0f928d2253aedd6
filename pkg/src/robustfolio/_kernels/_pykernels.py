"""Pure-Python/numpy versions of the hot loops.

Signatures and semantics match ``_ckernels.pyx`` exactly; the dispatcher in
``__init__`` picks one at import time.
"""

from __future__ import annotations

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_CAP = 2

_ADMISSIBLE = -1e-12


def simplex_pivot(T, basis, ncols, tol, max_iter):
    """Bland's-rule primal simplex on a tableau, in place.

    ``T`` has one row per constraint plus a final reduced-cost row; the last
    column is the right-hand side.  Only columns ``< ncols`` may enter.
    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    it = 0
    while it < max_iter:
        cost = T[m, :ncols]
        cand = np.flatnonzero(cost < -tol)
        if cand.size == 0:
            return STATUS_OPTIMAL, it
        j = int(cand[0])
        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return STATUS_UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        rmin = ratios.min()
        tied = rows[ratios <= rmin + tol * max(1.0, abs(rmin))]
        i = int(tied[np.argmin(basis[tied])])
        T[i] /= T[i, j]
        piv = T[i]
        for r in range(m + 1):
            if r != i:
                f = T[r, j]
                if f != 0.0:
                    T[r] -= f * piv
        basis[i] = j
        it += 1
    return STATUS_ITERATION_CAP, it


def _utility(code, alpha, X):
    with np.errstate(divide="ignore"):
        if code == 0:
            return np.log(X)
        return np.power(X, alpha) / alpha


def _expect(P, U):
    """``P @ U`` with 0 * (-inf) read as 0 (null states contribute nothing)."""
    finite = np.isfinite(U)
    out = P @ np.where(finite, U, 0.0)
    if not finite.all():
        hit = (P > 0).astype(float) @ (~finite).astype(float)
        out = np.where(hit > 0, -np.inf, out)
    return out


def _marginal(code, alpha, X):
    if code == 0:
        return 1.0 / X
    return np.power(X, alpha - 1.0)


def eu_supergradient(B, P, code, alpha, x, w0, a, b, max_iter):
    """Normalised supergradient ascent on w -> min_i E_{P_i}[U(x + B w)].

    Steps are ``a / (k + b)`` along the unit supergradient of the active
    (minimal) expectation, halved until wealth stays strictly positive.
    Returns ``(best_w, best_value, iterations)``.
    """
    w = np.array(w0, dtype=float)
    best_w = w.copy()
    best = -np.inf
    it = 0
    for k in range(max_iter):
        it = k + 1
        X = x + B @ w
        vals = _expect(P, _utility(code, alpha, X))
        i = int(np.argmin(vals))
        if vals[i] > best:
            best = float(vals[i])
            best_w = w.copy()
        g = B.T @ (P[i] * _marginal(code, alpha, X))
        gn = float(np.sqrt(g @ g))
        if gn == 0.0:
            break
        step = a / (k + b)
        direction = g / gn
        for _ in range(60):
            trial = w + step * direction
            if np.all(x + B @ trial > 0.0):
                break
            step *= 0.5
        else:
            break
        w = trial
    return best_w, best, it


def grid_scan(Gn, Gl, P, code, alpha, x, lo, hi, npts):
    """Exhaustive max of min_i E_{P_i}[U(x + Gl h)] over a box grid.

    Points with any node wealth ``x + Gn h`` below zero are skipped.  The grid
    is traversed in C order (last coordinate fastest); the first strict
    maximiser wins.  Returns ``(best_h, best_value, n_admissible)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    npts = np.asarray(npts, dtype=np.int64)
    n = lo.size
    axes = [lo[k] + (hi[k] - lo[k]) * np.arange(npts[k]) / (npts[k] - 1) if npts[k] > 1
            else np.array([lo[k]]) for k in range(n)]
    total = int(np.prod(npts))
    best = -np.inf
    best_h = np.full(n, np.nan)
    count = 0
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), tuple(npts))
        H = np.column_stack([axes[k][idx[k]] for k in range(n)])
        ok = np.all(x + H @ Gn.T >= _ADMISSIBLE, axis=1)
        if not ok.any():
            continue
        H = H[ok]
        count += H.shape[0]
        X = np.maximum(x + H @ Gl.T, 0.0)
        vals = _expect(P, _utility(code, alpha, X).T).min(axis=0)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best = float(vals[j])
            best_h = H[j].copy()
    return best_h, best, count
