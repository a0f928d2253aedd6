"""File ingestion for markets, prior sets, utilities and solver configs.

Every file is a JSON document.  A market file holds ``steps``, ``assets``
and ``nodes``; a prior file holds ``vertices``.  Instance documents (as
written by the verification harness or by ``--format machine``) carry both
under ``market`` / ``priors`` and are accepted wherever either is expected.
"""

from __future__ import annotations

import json
import os
from typing import Any

from .errors import DomainError, ParseError
from .market import FiniteMarket, market_from_dict
from .measures import PriorSet, priors_from_dict
from .numerics import SolverConfig
from .utility import UtilityFunction, utility_from_dict


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(path, "file", exc.strerror or str(exc)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"line {exc.lineno} column {exc.colno}", exc.msg) from exc


def _section(doc, key: str, marker: str, path: str):
    if isinstance(doc, dict) and marker in doc:
        return doc
    if isinstance(doc, dict) and isinstance(doc.get("inputs"), dict) and key in doc["inputs"]:
        return doc["inputs"][key]
    if isinstance(doc, dict) and key in doc:
        return doc[key]
    raise ParseError(path, "top level", f"expected a '{marker}' list or a '{key}' object")


def _wrap(path: str, where: str, fn, *args):
    try:
        return fn(*args)
    except DomainError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(path, where, f"{type(exc).__name__}: {exc}") from exc


def market_from_doc(doc, path: str = "<market>") -> FiniteMarket:
    sec = _section(doc, "market", "nodes", path)
    return _wrap(path, "market", market_from_dict, sec)


def priors_from_doc(doc, path: str = "<priors>") -> PriorSet:
    sec = _section(doc, "priors", "vertices", path)
    return _wrap(path, "priors", priors_from_dict, sec)


def load_market(path: str) -> FiniteMarket:
    return market_from_doc(load_json(path), path)


def load_priors(path: str) -> PriorSet:
    return priors_from_doc(load_json(path), path)


def parse_utility(spec) -> UtilityFunction:
    """``log``, ``power:ALPHA``, a JSON object, or a path to a JSON file."""
    if isinstance(spec, dict):
        return _wrap("<utility>", "utility", utility_from_dict, spec)
    text = str(spec).strip()
    if text == "log":
        return UtilityFunction("log")
    if text.startswith("power:"):
        try:
            alpha = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise ParseError("<utility>", text, "power exponent is not a number") from exc
        return UtilityFunction("power", alpha)
    if text.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError("<utility>", f"column {exc.colno}", exc.msg) from exc
        return parse_utility(doc)
    if os.path.exists(text):
        doc = load_json(text)
        if isinstance(doc, dict) and "utility" in doc and "family" not in doc:
            doc = doc["utility"]
        return _wrap(text, "utility", utility_from_dict, doc)
    raise ParseError("<utility>", text, "expected 'log', 'power:ALPHA', JSON, or a file path")


def load_config(path: str | None) -> SolverConfig:
    if path is None:
        return SolverConfig()
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise ParseError(path, "top level", "solver config must be an object")
    return _wrap(path, "config", SolverConfig.from_dict, doc)
