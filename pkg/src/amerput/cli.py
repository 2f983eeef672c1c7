"""Batch front end: check quote files, emit arbitrage books, build and audit models.

Exit codes: 0 consistent/success, 1 violations or mispricing found, 2 input
error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .arbitrage import strategies_for_market
from .conditions import check_market
from .construction import build_model_detailed
from .curves import Market
from .errors import InconsistencyError, InputError, InternalError
from .serialize import (
    check_to_dict,
    dumps,
    load_market,
    load_model,
    market_to_dict,
    martingale_to_dict,
    model_to_dict,
    reprice_to_dict,
    strategy_to_dict,
)
from .verify import martingale_check, random_model_oracle, reprice_report, validate_tree

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _default_tolerance(args) -> float | None:
    if args.tolerance is not None:
        return args.tolerance
    env = os.environ.get("AMERPUT_TOLERANCE")
    if env:
        try:
            return float(env)
        except ValueError as exc:
            raise InputError(f"AMERPUT_TOLERANCE is not a number: {env!r}") from exc
    return None


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.format == "json":
        body = dumps(payload)
    else:
        body = "\n".join(text_lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)


def _violation_lines(check) -> list[str]:
    lines = []
    for v in check.violations:
        lines.append(f"  {v}")
    for w in check.warnings:
        lines.append(f"  warning: {w}")
    return lines


def _cmd_check(args) -> int:
    market = load_market(args.input, tolerance=_default_tolerance(args))
    check = check_market(market)
    text = [f"consistency: {'passed' if check.passed else 'FAILED'}"]
    text += _violation_lines(check)
    _emit(args, check_to_dict(check), text)
    return EXIT_OK if check.passed else EXIT_VIOLATIONS


def _cmd_arbitrage(args) -> int:
    market = load_market(args.input, tolerance=_default_tolerance(args))
    check = check_market(market)
    strategies = [] if check.passed else strategies_for_market(market, check)
    payload = {
        "check": check_to_dict(check),
        "strategies": [strategy_to_dict(s) for s in strategies],
    }
    text = [f"consistency: {'passed' if check.passed else 'FAILED'}"]
    text += _violation_lines(check)
    for s in strategies:
        text.append(f"strategy [{s.kind.value}] credit {s.initial_credit:.10g}: "
                    f"{s.description}")
        for p in s.positions:
            strike = "" if p.strike is None else f" K={p.strike:.10g}"
            text.append(f"    {p.quantity:+.10g} x {p.instrument.value}{strike}"
                        f" ({p.rule.value})")
    _emit(args, payload, text)
    return EXIT_OK if check.passed else EXIT_VIOLATIONS


def _cmd_build(args) -> int:
    market = load_market(args.input, tolerance=_default_tolerance(args))
    check = check_market(market)
    if not check.passed:
        _emit(args, {"check": check_to_dict(check)},
              ["market fails consistency checks; nothing to build"]
              + _violation_lines(check))
        return EXIT_VIOLATIONS
    model, stats = build_model_detailed(market)
    audit = martingale_check(model, market.rate)
    reprice = reprice_report(model, market, tol=market.tolerance * 10)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(dumps(model_to_dict(model, market.rate)))
    payload = {
        "nodes": len(model.nodes),
        "embed_steps": stats.embed_steps,
        "maturity_steps": stats.maturity_steps,
        "martingale": martingale_to_dict(audit),
        "reprice": reprice_to_dict(reprice),
    }
    text = [
        f"built model with {len(model.nodes)} nodes "
        f"({stats.embed_steps} embeddings, {stats.maturity_steps} maturity layers)",
        f"martingale audit: max residual {audit.max_residual:.3e}",
        f"reprice: max error {reprice.max_error:.3e} "
        f"({'within' if reprice.passed else 'OUTSIDE'} tolerance)",
    ]
    body_args = argparse.Namespace(**vars(args))
    body_args.output = None  # model already written; report goes to stdout
    _emit(body_args, payload, text)
    ok = reprice.passed and audit.passed
    return EXIT_OK if ok else EXIT_VIOLATIONS


def _cmd_verify(args) -> int:
    model, rate = load_model(args.input)
    validate_tree(model)
    audit = martingale_check(model, rate)
    payload = {"martingale": martingale_to_dict(audit), "nodes": len(model.nodes)}
    text = [
        f"model with {len(model.nodes)} nodes",
        f"martingale audit: max residual {audit.max_residual:.3e} "
        f"({'passed' if audit.passed else 'FAILED'})",
    ]
    _emit(args, payload, text)
    return EXIT_OK if audit.passed else EXIT_VIOLATIONS


def _cmd_roundtrip(args) -> int:
    tol = _default_tolerance(args) or 1e-8
    _, market = random_model_oracle(seed=args.seed, depth=3, branching=3)
    check = check_market(market)
    if not check.passed:
        _emit(args, {"check": check_to_dict(check)}, ["oracle market failed its own checks"])
        return EXIT_INTERNAL
    model, stats = build_model_detailed(market)
    reprice = reprice_report(model, market, tol=tol)
    audit = martingale_check(model, market.rate)
    payload = {
        "seed": args.seed,
        "quotes": len(market.european) + len(market.american),
        "nodes": len(model.nodes),
        "reprice": reprice_to_dict(reprice),
        "martingale": martingale_to_dict(audit),
    }
    text = [
        f"seed {args.seed}: {len(market.european)} european / "
        f"{len(market.american)} american quotes",
        f"rebuilt model: {len(model.nodes)} nodes, max reprice error "
        f"{reprice.max_error:.3e}",
        f"martingale residual {audit.max_residual:.3e}",
    ]
    _emit(args, payload, text)
    return EXIT_OK if reprice.passed and audit.passed else EXIT_VIOLATIONS


def _cmd_demo(args) -> int:
    ln2 = math.log(2.0)
    market = Market(
        spot=1.0, rate=ln2, maturity=1.0,
        european=[(1.0, 0.0), (2.0, 0.125), (3.0, 0.5)],
        american=[(0.6, 0.0), (1.0, 0.1)],
    )
    lines = [
        "worked example: spot 1, rate ln 2, maturity 1",
        "european quotes (1, 0), (2, 0.125), (3, 0.5) -> terminal law "
        "1/4, 1/2, 1/4 on {1, 2, 3}",
        "american quotes (0.6, 0), (1, 0.1)",
        "",
    ]
    check = check_market(market)
    lines.append(f"step 1  consistency checks: {'passed' if check.passed else 'FAILED'}")
    model, stats = build_model_detailed(market)
    from .construction import root_picture, extend_american, critical_time

    picture, completed = root_picture(market)
    lines.append(
        f"step 2  completion appends the american quote "
        f"({completed.american[-1].strike:.10g}, {completed.american[-1].price:.10g}) "
        f"on the intrinsic bound" if len(completed.american) > len(market.american)
        else "step 2  quotes already end on their bounds")
    ext = extend_american(picture)
    crit = critical_time(picture, ext)
    lines.append(
        f"step 3  slope-corrected continuation engages at K={ext.k_p:.10g}; "
        f"piece slopes {', '.join(f'{s:.6g}' for s, _ in ext.pieces)}")
    lines.append(
        f"step 4  first touch of the decaying bound: t* = {crit.t_crit:.12g} "
        f"(= log2(1.1)), strike K* = {crit.k_crit:.12g}")
    kids = model.children(0)
    lines.append(
        f"step 5  the spot jumps to {model.nodes[kids[0]].price:.10g} w.p. "
        f"{model.nodes[kids[0]].prob:.10g} or {model.nodes[kids[1]].price:.10g} w.p. "
        f"{model.nodes[kids[1]].prob:.10g}")
    reprice = reprice_report(model, market, tol=1e-10)
    audit = martingale_check(model, market.rate)
    lines.append(
        f"step 6  both halves are terminal and jump to their atoms at maturity: "
        f"{len(model.nodes)} nodes, {stats.embed_steps} embedding")
    lines.append(
        f"step 7  audit: reprice error {reprice.max_error:.3e}, martingale residual "
        f"{audit.max_residual:.3e}")
    payload = {
        "market": market_to_dict(market),
        "model": model_to_dict(model, market.rate),
        "reprice": reprice_to_dict(reprice),
    }
    _emit(args, payload, lines)
    return EXIT_OK if reprice.passed else EXIT_INTERNAL


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amerput",
        description="Consistency checks, arbitrage portfolios, and martingale "
                    "models for co-terminal American/European put quotes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "check": ("run the static consistency checks on a quote file", _cmd_check, True),
        "arbitrage": ("emit an arbitrage portfolio for each violated condition",
                      _cmd_arbitrage, True),
        "build": ("construct a martingale model repricing every quote", _cmd_build, True),
        "verify": ("audit a model file (structure and martingale property)",
                   _cmd_verify, True),
        "roundtrip": ("generate a random consistent market and rebuild it",
                      _cmd_roundtrip, False),
        "demo": ("walk through the fully worked three-atom example", _cmd_demo, False),
    }
    for name, (help_text, fn, needs_input) in specs.items():
        p = sub.add_parser(name, help=help_text)
        if needs_input:
            p.add_argument("--input", required=True, help="input JSON file")
        p.add_argument("--output", default=None, help="write the result here")
        p.add_argument("--tolerance", type=float, default=None,
                       help="comparison tolerance (default 1e-9, spot-normalized)")
        p.add_argument("--seed", type=int, default=0, help="seed for roundtrip")
        p.add_argument("--format", choices=("json", "text"), default="text",
                       help="report format")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InconsistencyError as exc:
        print(f"inconsistent quotes: {exc}", file=sys.stderr)
        return EXIT_VIOLATIONS
    except InternalError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
