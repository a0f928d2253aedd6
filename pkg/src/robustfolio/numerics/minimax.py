"""Maximisation of min_i f_i(w) for concave f_i.

``supergradient_minimax`` is the generic method (any callables).  The
``eu_*`` routines specialise to expected utilities
f_i(w) = E_{P_i}[U(x + B w)], which is all the portfolio solver needs:

* ``eu_supergradient``: the same ascent, run in the compiled kernel;
* ``eu_maximize``: damped Newton for a single prior;
* ``eu_minimax_barrier``: log-barrier Newton on the epigraph form
  max t s.t. f_i(w) >= t, accurate to ~1e-12 even at kinks where the
  supergradient method stalls at the step size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import _kernels
from ..errors import InfeasibleStart, IterationCapExceeded, SolverFailure
from .config import DEFAULT, SolverConfig


@dataclass
class MinimaxResult:
    point: np.ndarray
    value: float
    iterations: int
    weights: np.ndarray | None = None  # multipliers on the f_i (sum to 1)


def supergradient_minimax(fs: Sequence[Callable[[np.ndarray], tuple[float, np.ndarray]]],
                          feasible: Callable[[np.ndarray], bool], start,
                          cfg: SolverConfig = DEFAULT) -> MinimaxResult:
    """Best-iterate supergradient ascent on min_i f_i.

    Each ``f_i(h)`` returns ``(value, supergradient)``.  Steps follow
    ``a / (k + b)`` along the normalised supergradient of an active piece and
    are halved until ``feasible`` accepts the trial point, so iterates never
    leave the strictly admissible region.
    """
    h = np.array(start, dtype=float)
    if not feasible(h):
        raise InfeasibleStart("starting point is not strictly admissible")
    best_h, best = h.copy(), -np.inf
    k = 0
    for k in range(cfg.max_iterations):
        evals = [f(h) for f in fs]
        i = int(np.argmin([v for v, _ in evals]))
        val, g = evals[i]
        if val > best:
            best, best_h = float(val), h.copy()
        g = np.asarray(g, dtype=float)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        step = cfg.step_a / (k + cfg.step_b)
        for _ in range(60):
            trial = h + step * g / gn
            if feasible(trial):
                break
            step *= 0.5
        else:
            break
        h = trial
    return MinimaxResult(best_h, best, k + 1)


def eu_supergradient(B: np.ndarray, P: np.ndarray, u, x: float, w0=None,
                     cfg: SolverConfig = DEFAULT) -> MinimaxResult:
    B = np.ascontiguousarray(B, dtype=float)
    P = np.ascontiguousarray(np.atleast_2d(P), dtype=float)
    w0 = np.zeros(B.shape[1]) if w0 is None else np.asarray(w0, dtype=float)
    if not np.all(x + B @ w0 > 0):
        raise InfeasibleStart("starting point is not strictly admissible")
    if u.code < 0:
        fs = [_eu_piece(B, p, u, x) for p in P]
        return supergradient_minimax(fs, lambda w: bool(np.all(x + B @ w > 0)), w0, cfg)
    w, val, it = _kernels.eu_supergradient(B, P, u.code, u.param, float(x), w0,
                                           cfg.step_a, cfg.step_b, cfg.max_iterations)
    return MinimaxResult(np.asarray(w), float(val), int(it))


def _eu_piece(B, p, u, x):
    def f(w):
        X = x + B @ w
        return float(p @ np.asarray(u(X))), B.T @ (p * np.asarray(u.d1(X)))
    return f


class _EU:
    """Values, gradients and Hessians of w -> P_i . U(x + B w) for all i."""

    def __init__(self, B, P, u, x):
        self.B, self.P, self.u, self.x = B, P, u, x

    def wealth(self, w):
        return self.x + self.B @ w

    def values(self, w):
        X = self.wealth(w)
        if not np.all(X > 0):
            return None
        return self.P @ np.asarray(self.u(X), dtype=float)

    def derivs(self, w):
        X = self.wealth(w)
        d1 = np.asarray(self.u.d1(X), dtype=float)
        d2 = np.asarray(self.u.d2(X), dtype=float)
        grads = (self.P * d1) @ self.B                     # (m, r)
        hess = np.einsum("il,lj,lk->ijk", self.P * d2, self.B, self.B)  # (m, r, r)
        return grads, hess


def _roundoff(eu, w) -> float:
    """Size of floating-point noise in the expected utilities at w."""
    U = np.abs(np.asarray(eu.u(eu.wealth(w)), dtype=float))
    return 1e-15 * max(1.0, float(np.max(eu.P @ U)))


def eu_maximize(B: np.ndarray, p: np.ndarray, u, x: float, w0=None,
                max_iter: int = 200) -> MinimaxResult:
    """Damped Newton for max_w p . U(x + B w); B must have full column rank."""
    B = np.asarray(B, dtype=float)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    eu = _EU(B, p, u, x)
    w = np.zeros(B.shape[1]) if w0 is None else np.array(w0, dtype=float)
    f = eu.values(w)
    if f is None:
        raise InfeasibleStart("starting point is not strictly admissible")
    f = f[0]
    it = 0
    for it in range(1, max_iter + 1):
        g, H = eu.derivs(w)
        g, H = g[0], H[0]
        try:
            dw = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("singular Hessian in single-prior Newton step") from exc
        dec = float(g @ dw)
        if dec <= _roundoff(eu, w):
            # the predicted gain is below what f can resolve: finish with one
            # undamped step (we are deep in the quadratic region) and stop
            ft = eu.values(w + dw)
            if ft is not None:
                w, f = w + dw, ft[0]
            break
        t = 1.0
        while True:
            trial = w + t * dw
            ft = eu.values(trial)
            if ft is not None and ft[0] >= f + 0.25 * t * dec:
                break
            t *= 0.5
            if t < 1e-20:
                break
        if t < 1e-20:
            break
        w, f = trial, ft[0]
    else:
        raise IterationCapExceeded("single-prior Newton did not converge", best=w)
    return MinimaxResult(w, float(f), it, np.ones(1))


def eu_minimax_barrier(B: np.ndarray, P: np.ndarray, u, x: float, w0=None,
                       mu_min: float = 1e-13, shrink: float = 0.1,
                       max_newton: int = 100) -> MinimaxResult:
    """Log-barrier path following for max_w min_i P_i . U(x + B w).

    Maximises t + mu * sum_i log(f_i(w) - t) for a decreasing sequence of
    mu; the final multipliers mu / (f_i - t) identify the worst-case mixture
    of the P_i.  The Lagrangian Hessian must be negative definite, which
    holds when B has full column rank and every P_i is strictly positive.
    """
    B = np.asarray(B, dtype=float)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    m, r = P.shape[0], B.shape[1]
    eu = _EU(B, P, u, x)
    w = np.zeros(r) if w0 is None else np.array(w0, dtype=float)
    f = eu.values(w)
    if f is None:
        raise InfeasibleStart("starting point is not strictly admissible")
    scale = max(1.0, float(np.max(np.abs(f))))
    t = float(f.min()) - 1.0
    mu = 1.0
    mu_floor = mu_min * scale
    total = 0

    def merit(fv, tv, muv):
        return tv + muv * float(np.sum(np.log(fv - tv)))

    while True:
        for _ in range(max_newton):
            total += 1
            s = f - t
            lam = mu / s
            G, Hs = eu.derivs(w)
            gw = lam @ G
            gt = 1.0 - lam.sum()
            c = lam / s
            Hww = np.einsum("i,ijk->jk", lam, Hs) - (G.T * c) @ G
            Hwt = c @ G
            Htt = -c.sum()
            H = np.empty((r + 1, r + 1))
            H[:r, :r] = Hww
            H[:r, r] = Hwt
            H[r, :r] = Hwt
            H[r, r] = Htt
            g = np.append(gw, gt)
            try:
                dz = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError as exc:
                raise SolverFailure("singular barrier Hessian") from exc
            dec = float(g @ dz)
            if not np.isfinite(dec) or dec <= _roundoff(eu, w) + 1e-15 * abs(t):
                break
            phi = merit(f, t, mu)
            step = 1.0
            accepted = False
            while step > 1e-20:
                wt = w + step * dz[:r]
                tt = t + step * dz[r]
                ft = eu.values(wt)
                if ft is not None and np.all(ft - tt > 0):
                    if merit(ft, tt, mu) >= phi + 0.25 * step * dec:
                        accepted = True
                        break
                step *= 0.5
            if not accepted:
                break
            w, t, f = wt, tt, ft
        if mu <= mu_floor:
            break
        mu = max(mu * shrink, mu_floor)
    weights = mu / (f - t)
    weights = weights / weights.sum()
    return MinimaxResult(w, float(f.min()), total, weights)
