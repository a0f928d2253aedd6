"""Command-line entry point.

Exit status: 0 success, 1 invalid input or violated model assumption,
2 numerical failure, 3 verification disagreement.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, ParseError, RobustfolioError, SolverError
from .io import load_config, load_json, market_from_doc, parse_utility, priors_from_doc
from .market import FiniteMarket, market_to_dict
from .measures import PriorSet
from .numerics import SolverConfig
from .oracle import brute_force_no_betting, brute_force_optimal
from .solver import reconcile_duality, saddle_gap, solve_dual, solve_robust
from .theorem import (
    DETECT_TOL,
    Caps,
    dow_werlang_interval,
    dow_werlang_priors,
    no_betting_set,
    randomized_verification,
    theorem_check,
)

EXIT_OK, EXIT_DOMAIN, EXIT_SOLVER, EXIT_DISAGREE = 0, 1, 2, 3
COMMANDS = ("solve", "dual", "check", "no-betting", "verify", "oracle")


@dataclass
class RunConfig:
    command: str
    market: Any = None          # market document (dict)
    priors: Any = None          # prior-set document (dict)
    utility: Any = None         # utility document (dict)
    x: float | None = None
    y: float | None = None
    seed: int = 0
    trials: int = 500
    tol: float = DETECT_TOL
    solver: dict = field(default_factory=dict)
    method: str = "barrier"
    singleton: bool = False
    dump_dir: str | None = None
    dow_werlang: list | None = None
    price_step: float | None = None

    def inputs(self) -> dict:
        keys = ("market", "priors", "utility", "x", "y", "seed", "trials", "tol", "solver",
                "method", "singleton", "dow_werlang", "price_step")
        return {k: getattr(self, k) for k in keys}


# -- helpers -----------------------------------------------------------------------

def _need(cfg: RunConfig, *names):
    for n in names:
        if getattr(cfg, n) is None:
            raise DomainError(f"command '{cfg.command}' needs --{n.replace('_', '-')}")
    if "x" in names and not (cfg.x > 0 and math.isfinite(cfg.x)):
        raise DomainError(f"--x must be positive, got {cfg.x!r}")


def _market(cfg) -> FiniteMarket:
    return market_from_doc(cfg.market)


def _priors(cfg) -> PriorSet:
    return priors_from_doc(cfg.priors)


def _floats(a) -> list:
    return [float(v) for v in np.ravel(a)]


def _holdings_by_node(market: FiniteMarket, H) -> dict:
    tree = market.tree
    return {str(tree.ids[n]): _floats(H[j]) for j, n in enumerate(tree.internal)}


def _by_leaf(market: FiniteMarket, values) -> dict:
    tree = market.tree
    return {str(tree.ids[n]): float(v) for n, v in zip(tree.leaves, values)}


# -- commands ------------------------------------------------------------------------

def _solve(cfg: RunConfig, scfg: SolverConfig):
    _need(cfg, "market", "priors", "utility", "x")
    market, priors, u = _market(cfg), _priors(cfg), parse_utility(cfg.utility)
    plan = solve_robust(market, priors, u, cfg.x, scfg, method=cfg.method)
    gap = saddle_gap(market, priors, u, cfg.x, plan, scfg)
    return EXIT_OK, {
        "holdings": _holdings_by_node(market, plan.holdings),
        "terminal_wealth": _by_leaf(market, plan.terminal_wealth),
        "value": plan.value,
        "u_of_x": float(u(cfg.x)),
        "worst_case_prior": _floats(plan.worst_case_prior.weights),
        "worst_case_weights": _floats(plan.worst_case_weights),
        "vertex_values": _floats(plan.vertex_values),
        "saddle_gap": gap,
        "foc_residual": plan.foc_residual,
        "method": plan.method,
    }


def _dual(cfg: RunConfig, scfg: SolverConfig):
    _need(cfg, "market", "priors", "utility", "x")
    market, priors, u = _market(cfg), _priors(cfg), parse_utility(cfg.utility)
    if len(priors) != 1:
        raise DomainError("the dual command takes a single prior (one vertex)")
    rep = reconcile_duality(market, priors, u, cfg.x, scfg)
    out: dict[str, Any] = {}
    if cfg.y is not None:
        if not cfg.y > 0:
            raise DomainError(f"--y must be positive, got {cfg.y!r}")
        sol = solve_dual(market, priors, u, cfg.y, scfg)
        out.update({"y": cfg.y, "dual_measure": _floats(sol.measure.weights),
                    "dual_value": sol.value, "frank_wolfe_gap": sol.gap})
    out["reconciliation"] = {
        "y_star": rep.y_star,
        "dual_measure": _floats(rep.dual_measure.weights),
        "primal_value": rep.primal_value,
        "dual_value": rep.dual_value,
        "duality_gap": rep.duality_gap,
        "wealth_error": rep.wealth_error,
        "product_error": rep.product_error,
        "node_product_error": rep.node_product_error,
        "ok": rep.ok,
    }
    return (EXIT_OK if rep.ok else EXIT_DISAGREE), out


def _check(cfg: RunConfig, scfg: SolverConfig):
    _need(cfg, "market", "priors", "utility", "x")
    rep = theorem_check(_market(cfg), _priors(cfg), parse_utility(cfg.utility), cfg.x,
                        cfg.tol, scfg)
    return (EXIT_OK if rep.agreement else EXIT_DISAGREE), rep.to_dict()


def _no_betting(cfg: RunConfig, scfg: SolverConfig):
    if cfg.dow_werlang is not None:
        pi, pi_p, high, low = (float(v) for v in cfg.dow_werlang)
        lo, hi = dow_werlang_interval(pi, pi_p, high, low)
        priors, payoffs, price = dow_werlang_priors(pi, pi_p), np.array([high, low]), None
        out: dict[str, Any] = {"formula_interval": [lo, hi]}
    else:
        _need(cfg, "market", "priors")
        market, priors = _market(cfg), _priors(cfg)
        if market.tree.steps != 1:
            raise DomainError("no-betting sets are defined for one-period markets")
        payoffs, price = market.leaf_prices(), market.prices[market.tree.root]
        out = {}
    nb = no_betting_set(priors, payoffs)
    out.update(nb.to_dict())
    if price is not None:
        out["price"] = _floats(price)
        out["price_in_set"] = nb.contains(price)
    if cfg.price_step is not None:
        A = np.asarray(payoffs, dtype=float)
        if A.ndim > 1 and A.shape[1] > 1:
            raise DomainError("the price sweep needs a single asset")
        A = A.ravel()
        n = int(round((A.max() - A.min()) / cfg.price_step))
        grid = np.round(A.min() + cfg.price_step * np.arange(n + 1), 12)
        marked, _ = brute_force_no_betting(priors, A, grid)
        out["sweep_step"] = cfg.price_step
        out["sweep_interval"] = None if marked is None else list(marked)
    return EXIT_OK, out


def _verify(cfg: RunConfig, scfg: SolverConfig):
    agg = randomized_verification(cfg.seed, cfg.trials, Caps(), cfg.singleton, cfg.tol, scfg,
                                  dump_dir=cfg.dump_dir)
    return (EXIT_OK if agg.agreement_rate == 1.0 else EXIT_DISAGREE), agg.to_dict()


def _oracle(cfg: RunConfig, scfg: SolverConfig):
    _need(cfg, "market", "priors", "utility", "x")
    market, priors, u = _market(cfg), _priors(cfg), parse_utility(cfg.utility)
    res = brute_force_optimal(market, priors, u, cfg.x)
    plan = solve_robust(market, priors, u, cfg.x, scfg)
    return EXIT_OK, {
        "oracle_value": res.value,
        "oracle_holdings": _holdings_by_node(market, res.holdings),
        "oracle_evaluations": res.evaluations,
        "oracle_cell": _floats(res.cell),
        "solver_value": plan.value,
        "solver_holdings": _holdings_by_node(market, plan.holdings),
        "delta": plan.value - res.value,
    }


_DISPATCH = {"solve": _solve, "dual": _dual, "check": _check, "no-betting": _no_betting,
             "verify": _verify, "oracle": _oracle}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute one command; returns (exit status, report document)."""
    doc: dict[str, Any] = {"command": cfg.command, "inputs": cfg.inputs()}
    try:
        if cfg.command not in _DISPATCH:
            raise DomainError(f"unknown command {cfg.command!r}")
        scfg = SolverConfig.from_dict(cfg.solver).with_(seed=cfg.seed)
        code, result = _DISPATCH[cfg.command](cfg, scfg)
        doc["result"] = result
    except DomainError as exc:
        code = EXIT_DOMAIN
        doc["error"] = {"type": type(exc).__name__, "message": str(exc)}
    except SolverError as exc:
        code = EXIT_SOLVER
        doc["error"] = {"type": type(exc).__name__, "message": str(exc)}
    doc["exit_status"] = code
    return code, doc


# -- formatting ------------------------------------------------------------------------

def _human(value, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        lines = []
        for k, v in value.items():
            if isinstance(v, (dict, list)) and v and not _flat_list(v):
                lines.append(f"{pad}{k}:")
                lines.append(_human(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
        return "\n".join(lines)
    if isinstance(value, list):
        return "\n".join(f"{pad}- " + _human(v, indent + 1).lstrip() for v in value)
    return pad + _scalar(value)


def _flat_list(v) -> bool:
    return isinstance(v, list) and all(not isinstance(e, (dict, list)) for e in v)


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if isinstance(v, bool) else "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list):
        return "[" + ", ".join(_scalar(e) for e in v) + "]"
    if isinstance(v, dict):
        return "{}"
    return str(v)


def render(doc: dict, fmt: str) -> str:
    if fmt == "machine":
        return json.dumps(doc, indent=2, allow_nan=True)
    body = {"command": doc["command"]}
    if "error" in doc:
        body["error"] = f"{doc['error']['type']}: {doc['error']['message']}"
    else:
        body.update(doc["result"])
    body["exit_status"] = doc["exit_status"]
    return _human(body)


# -- argument parsing --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError("<command line>", "arguments", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robustfolio", description="Robust expected-utility portfolio tools.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--market", help="market JSON file (or instance document)")
    p.add_argument("--priors", help="prior-set JSON file (or instance document)")
    p.add_argument("--utility", help="'log', 'power:ALPHA', JSON object or file")
    p.add_argument("--x", type=float, help="initial wealth")
    p.add_argument("--y", type=float, help="dual variable for the dual command")
    p.add_argument("--seed", type=int, help="seed (falls back to $ROBUSTFOLIO_SEED, then 0)")
    p.add_argument("--trials", type=int, default=None, help="random instances for verify")
    p.add_argument("--tol", type=float, default=None, help="riskless-detector tolerance")
    p.add_argument("--format", choices=("human", "machine"), default="human")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--config", help="solver config JSON (tolerance, max_iterations, ...)")
    p.add_argument("--replay", help="re-run the inputs recorded in a machine-format report "
                                    "or a verification dump")
    p.add_argument("--method", choices=("barrier", "supergradient"), default=None)
    p.add_argument("--singleton", action="store_true", help="verify with one-vertex priors")
    p.add_argument("--dump-dir", help="verify: write each disagreement to this directory")
    p.add_argument("--dow-werlang", nargs=4, type=float, metavar=("PI", "PI_PRIME", "H", "L"),
                   help="no-betting: two-outcome capacity instance")
    p.add_argument("--price-step", type=float, help="no-betting: brute-force price sweep step")
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if args.replay:
        doc = load_json(args.replay)
        if not isinstance(doc, dict):
            raise ParseError(args.replay, "top level", "replay file must be an object")
        rec = doc.get("inputs", doc)
        for key in ("market", "priors", "utility", "x", "y", "seed", "trials", "tol", "solver",
                    "method", "singleton", "dow_werlang", "price_step"):
            if rec.get(key) is not None:
                setattr(cfg, key, rec[key])
    if args.market:
        cfg.market = market_to_dict(market_from_doc(load_json(args.market), args.market))
    if args.priors:
        doc = load_json(args.priors)
        cfg.priors = priors_from_doc(doc, args.priors).to_dict()
    if args.utility:
        cfg.utility = parse_utility(args.utility).to_dict()
    elif isinstance(cfg.utility, str):
        cfg.utility = parse_utility(cfg.utility).to_dict()
    for key in ("x", "y", "trials", "tol", "method"):
        v = getattr(args, key)
        if v is not None:
            setattr(cfg, key, v)
    if args.seed is not None:
        cfg.seed = args.seed
    elif not args.replay and os.environ.get("ROBUSTFOLIO_SEED"):
        try:
            cfg.seed = int(os.environ["ROBUSTFOLIO_SEED"])
        except ValueError as exc:
            raise ParseError("ROBUSTFOLIO_SEED", "environment", "not an integer") from exc
    if args.config:
        cfg.solver = load_config(args.config).to_dict()
    if args.singleton:
        cfg.singleton = True
    if args.dump_dir:
        cfg.dump_dir = args.dump_dir
    if args.dow_werlang:
        cfg.dow_werlang = list(args.dow_werlang)
    if args.price_step is not None:
        cfg.price_step = args.price_step
    return cfg


def main(argv=None) -> int:
    fmt, out = "human", None
    try:
        args = build_parser().parse_args(argv)
        fmt, out = args.format, args.out
        code, doc = run(config_from_args(args))
    except RobustfolioError as exc:
        code = EXIT_DOMAIN if isinstance(exc, DomainError) else EXIT_SOLVER
        doc = {"command": None, "inputs": None,
               "error": {"type": type(exc).__name__, "message": str(exc)}, "exit_status": code}
    text = render(doc, fmt) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if "error" in doc:
        sys.stderr.write(f"robustfolio: {doc['error']['type']}: {doc['error']['message']}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
