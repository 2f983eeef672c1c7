"""Deterministic JSON for markets, models, and reports.

Numbers are written with 17 significant digits so files round-trip losslessly;
key order is fixed, which makes output byte-stable for golden tests.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .conditions import MarketCheck
from .construction import TreeModel, TreeNode
from .curves import Market
from .errors import InputError
from .verify import MartingaleReport, RepriceReport


def _fmt(value, indent: int = 0) -> str:
    pad = " " * indent
    if value is None:
        return "null"
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x) or math.isinf(x):
            raise InputError("cannot serialize non-finite numbers")
        return format(x, ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_fmt(v, indent + 2)}' for k, v in value.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        inner = ",\n".join(f"{pad}  {_fmt(v, indent + 2)}" for v in value)
        return "[\n" + inner + "\n" + pad + "]"
    raise InputError(f"cannot serialize {type(value)!r}")


def dumps(obj) -> str:
    return _fmt(obj) + "\n"


# ---------------------------------------------------------------------------
# markets
# ---------------------------------------------------------------------------


def market_to_dict(market: Market) -> dict:
    return {
        "spot": market.spot,
        "rate": market.rate,
        "maturity": market.maturity,
        "european": [{"strike": q.strike, "price": q.price} for q in market.european],
        "american": [{"strike": q.strike, "price": q.price} for q in market.american],
        "tolerance": market.tolerance,
    }


def _require(data: dict, key: str, kinds) -> object:
    if key not in data:
        raise InputError(f"missing field '{key}'")
    value = data[key]
    if not isinstance(value, kinds):
        raise InputError(f"field '{key}' has the wrong type")
    return value


def market_from_dict(data: dict, tolerance: float | None = None) -> Market:
    if not isinstance(data, dict):
        raise InputError("market file must hold a JSON object")
    spot = float(_require(data, "spot", (int, float)))
    rate = float(_require(data, "rate", (int, float)))
    maturity = float(_require(data, "maturity", (int, float)))

    def quotes(key: str):
        rows = _require(data, key, list)
        out = []
        for row in rows:
            if not isinstance(row, dict):
                raise InputError(f"entries of '{key}' must be objects")
            out.append((float(_require(row, "strike", (int, float))),
                        float(_require(row, "price", (int, float)))))
        return out

    tol = tolerance
    if tol is None:
        tol = float(data.get("tolerance", 1e-9))
    return Market(spot=spot, rate=rate, maturity=maturity,
                  european=quotes("european"), american=quotes("american"), tolerance=tol)


def load_market(path: str, tolerance: float | None = None) -> Market:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    return market_from_dict(data, tolerance=tolerance)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def model_to_dict(model: TreeModel, rate: float) -> dict:
    return {
        "rate": rate,
        "nodes": [
            {"id": n.id, "time": n.time, "price": n.price,
             "parent": n.parent, "prob": n.prob}
            for n in model.nodes
        ],
    }


def model_from_dict(data: dict) -> tuple[TreeModel, float]:
    if not isinstance(data, dict):
        raise InputError("model file must hold a JSON object")
    rate = float(_require(data, "rate", (int, float)))
    rows = _require(data, "nodes", list)
    nodes = []
    for row in rows:
        if not isinstance(row, dict):
            raise InputError("entries of 'nodes' must be objects")
        parent = row.get("parent")
        nodes.append(TreeNode(
            id=int(_require(row, "id", (int,))),
            time=float(_require(row, "time", (int, float))),
            price=float(_require(row, "price", (int, float))),
            parent=None if parent is None else int(parent),
            prob=float(_require(row, "prob", (int, float))),
        ))
    return TreeModel(tuple(nodes)), rate


def load_model(path: str) -> tuple[TreeModel, float]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(data)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def check_to_dict(check: MarketCheck) -> dict:
    def rep(r):
        return {
            "passed": r.passed,
            "violations": [
                {"kind": v.kind.value, "strikes": list(v.strikes),
                 "magnitude": v.magnitude, "detail": v.detail}
                for v in r.violations
            ],
            "warnings": list(r.warnings),
        }

    return {
        "passed": check.passed,
        "european": rep(check.european),
        "american": rep(check.american),
        "discrete_pairs": rep(check.discrete),
        "warnings": list(check.warnings),
    }


def reprice_to_dict(report: RepriceReport) -> dict:
    return {
        "passed": report.passed,
        "max_error": report.max_error,
        "european_errors": [{"strike": k, "error": e} for k, e in report.european_errors],
        "american_errors": [{"strike": k, "error": e} for k, e in report.american_errors],
    }


def martingale_to_dict(report: MartingaleReport) -> dict:
    return {
        "passed": report.passed,
        "max_residual": report.max_residual,
        "worst_node": report.worst_node,
    }


def strategy_to_dict(strategy) -> dict:
    return {
        "kind": strategy.kind.value,
        "description": strategy.description,
        "initial_credit": strategy.initial_credit,
        "positions": [
            {
                "instrument": p.instrument.value,
                "strike": p.strike,
                "quantity": p.quantity,
                "exercise_rule": p.rule.value,
                "couples_to": p.couples_to,
            }
            for p in strategy.positions
        ],
        "payoff_cases": [
            {"label": c.label, "from": c.lo,
             "to": None if math.isinf(c.hi) else c.hi,
             "minimum": c.minimum()}
            for c in strategy.payoff_cases
        ],
    }
