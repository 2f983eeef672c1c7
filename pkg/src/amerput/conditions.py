"""Static consistency checks on American/European put quote curves.

Violations are data, not errors: each check returns a report listing every
failed inequality with its witness strikes and an S0-normalized magnitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .curves import (
    Market,
    PLCurve,
    american_quote_curve,
    complete_european,
    european_from_measure,
    european_quote_curve,
    max_curves,
)
from .errors import AmerputError


class ViolationKind(enum.Enum):
    E_MONOTONE_CONVEX = "E_MONOTONE_CONVEX"
    E_LOWER = "E_LOWER"
    E_UPPER = "E_UPPER"
    E_SLOPE_CAP = "E_SLOPE_CAP"
    A_MONOTONE = "A_MONOTONE"
    A_CONVEX = "A_CONVEX"
    A_LF = "A_LF"
    A_LOWER = "A_LOWER"
    A_UPPER = "A_UPPER"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    strikes: tuple[float, ...]
    magnitude: float  # normalized by spot
    detail: str = ""

    def __str__(self) -> str:
        ks = ", ".join(f"{k:.10g}" for k in self.strikes)
        return f"{self.kind.value} at K=[{ks}] magnitude {self.magnitude:.3e} {self.detail}"


@dataclass(frozen=True)
class ConditionReport:
    passed: bool
    violations: tuple[Violation, ...]
    warnings: tuple[str, ...] = ()

    @staticmethod
    def build(violations, warnings=()) -> "ConditionReport":
        vs = tuple(violations)
        return ConditionReport(passed=not vs, violations=vs, warnings=tuple(warnings))

    def merged(self, other: "ConditionReport") -> "ConditionReport":
        return ConditionReport.build(self.violations + other.violations,
                                     self.warnings + other.warnings)


def check_european(market: Market) -> ConditionReport:
    """The four European quote conditions, tested at every quoted strike.

    1. increasing and convex with value 0 at strike 0
    2. lower bound (e^{-rT}K - S0)_+
    3. upper bound e^{-rT}K
    4. right slope strictly below e^{-rT} wherever the curve is off the bound
    """
    tol = market.tolerance
    spot = market.spot
    disc = market.discount
    violations: list[Violation] = []
    warnings: list[str] = []

    quotes = market.european
    ks = np.array([q.strike for q in quotes])
    vs = np.array([q.price for q in quotes])

    if ks[0] == 0.0 and vs[0] > tol * spot:
        violations.append(Violation(ViolationKind.E_MONOTONE_CONVEX, (0.0,), vs[0] / spot,
                                    "price at strike 0 must vanish"))

    # monotone and convex through the origin
    full_k = np.concatenate(([0.0], ks)) if ks[0] > 0.0 else ks
    full_v = np.concatenate(([0.0], vs)) if ks[0] > 0.0 else vs
    slopes = np.diff(full_v) / np.diff(full_k)
    for i, s in enumerate(slopes):
        if s < -tol:
            violations.append(Violation(ViolationKind.E_MONOTONE_CONVEX,
                                        (full_k[i], full_k[i + 1]), -s, "decreasing"))
    for i in range(1, len(slopes)):
        gap = slopes[i] - slopes[i - 1]
        if gap < -tol:
            violations.append(Violation(ViolationKind.E_MONOTONE_CONVEX,
                                        (full_k[i - 1], full_k[i], full_k[i + 1]),
                                        -gap, "concave kink"))

    for k, v in zip(ks, vs):
        lower = max(disc * k - spot, 0.0)
        if v < lower - tol * spot:
            violations.append(Violation(ViolationKind.E_LOWER, (k,), (lower - v) / spot))
        upper = disc * k
        if v > upper + tol * spot:
            violations.append(Violation(ViolationKind.E_UPPER, (k,), (v - upper) / spot))

    # slope cap on each quoted segment where the curve is off the lower bound
    bound = np.maximum(disc * full_k - spot, 0.0)
    off_bound = (full_v - bound) > tol * spot
    for i, s in enumerate(slopes):
        if not (off_bound[i] or off_bound[i + 1]):
            continue
        if s > disc + tol:
            violations.append(Violation(ViolationKind.E_SLOPE_CAP,
                                        (full_k[i], full_k[i + 1]), (s - disc),
                                        "slope exceeds discount factor"))
        elif s > disc - tol:
            warnings.append(
                f"segment [{full_k[i]:.10g}, {full_k[i + 1]:.10g}] has slope at the "
                f"discount-factor boundary while off the lower bound"
            )
    return ConditionReport.build(violations, warnings)


def check_curve_pair(a_curve: PLCurve, e_curve: PLCurve, spot: float, rate: float,
                     tau: float, tol: float) -> ConditionReport:
    """American-vs-European conditions for explicit curves on a common clock.

    ``e_curve`` must be defined for all strikes (completed); ``a_curve`` is
    trusted only up to its last kink, so every pointwise test stays inside
    that range.
    """
    violations: list[Violation] = []
    disc = math.exp(-rate * tau)
    a_last = float(a_curve.x[-1])

    # (i) increasing and convex
    slopes = np.concatenate(([a_curve.left_slope], a_curve.segment_slopes,
                             [a_curve.right_slope]))
    kink_pos = np.concatenate((a_curve.x[:1], a_curve.x))
    for i, s in enumerate(slopes):
        if s < -tol:
            violations.append(Violation(ViolationKind.A_MONOTONE, (float(kink_pos[i]),), -s,
                                        "decreasing"))
    jumps = np.diff(slopes)
    for i, g in enumerate(jumps):
        if g < -tol:
            violations.append(Violation(ViolationKind.A_CONVEX, (float(a_curve.x[i]),), -g,
                                        "concave kink"))

    # (ii) conjugate comparison at European atoms inside the trusted range,
    # plus American kinks left of the first atom; the strike-space tolerance
    # keeps one-ulp kink placement from flipping the one-sided slope
    kink_tol = tol * max(spot, 1.0)
    first_atom = float(e_curve.x[e_curve.x > 0][0]) if np.any(e_curve.x > 0) else 0.0
    lf_points = [float(k) for k in e_curve.x if 0.0 < k <= a_last + tol * spot]
    lf_points += [float(k) for k in a_curve.x if 0.0 < k < first_atom]
    for k in sorted(set(lf_points)):
        lhs = a_curve.lf_value(k, tol=kink_tol)
        rhs = e_curve.lf_value(k)
        if lhs < rhs - tol * spot:
            violations.append(Violation(ViolationKind.A_LF, (k,), (rhs - lhs) / spot))

    # (iii) lower bound max{E, K - spot}
    lower = max_curves(e_curve, PLCurve(np.array([spot]), np.array([0.0]), 0.0, 1.0))
    pts = np.unique(np.concatenate((a_curve.x, lower.x[lower.x <= a_last])))
    for k in pts:
        gap = lower.value(float(k)) - a_curve.value(float(k))
        if gap > tol * spot:
            violations.append(Violation(ViolationKind.A_LOWER, (float(k),), gap / spot))

    # (iv) upper bound E(e^{r tau} K)
    upper = e_curve.scale_strikes(math.exp(rate * tau))
    pts = np.unique(np.concatenate((a_curve.x, upper.x[upper.x <= a_last])))
    for k in pts:
        gap = a_curve.value(float(k)) - upper.value(float(k))
        if gap > tol * spot:
            violations.append(Violation(ViolationKind.A_UPPER, (float(k),), gap / spot))

    return ConditionReport.build(violations)


def check_american(market: Market, e_curve: PLCurve, a_curve: PLCurve | None = None
                   ) -> ConditionReport:
    """American conditions against a completed European curve.

    Tested only at kinks: the conjugate comparison at atoms suffices for the
    whole curve, and bound comparisons between piecewise-linear functions are
    extremal at kinks of either side.
    """
    if a_curve is None:
        a_curve = american_quote_curve(market)
    return check_curve_pair(a_curve, e_curve, market.spot, market.rate,
                            market.maturity, market.tolerance)


def check_discrete_pairs(market: Market) -> ConditionReport:
    """Chord form of the conjugate comparison on raw traded strikes.

    For every quadruple K_j^E <= K_i^A <= K_j'^E <= K_i'^A the American chord
    over [K_i, K_i'] must carry at least the conjugate value of the European
    chord over [K_j, K_j'].  Needs no interpolation convention.
    """
    tol = market.tolerance
    spot = market.spot
    violations: list[Violation] = []
    eur = [(q.strike, q.price) for q in market.european]
    amr = [(q.strike, q.price) for q in market.american]
    for j, (kj, ej) in enumerate(eur):
        for i, (ki, ai) in enumerate(amr):
            if ki < kj:
                continue
            for jp, (kjp, ejp) in enumerate(eur):
                if jp <= j or kjp < ki or kjp <= kj:
                    continue
                for ip, (kip, aip) in enumerate(amr):
                    if ip <= i or kip < kjp or kip <= ki:
                        continue
                    lhs = (aip - ai) / (kip - ki) * ki - ai
                    rhs = (ejp - ej) / (kjp - kj) * kj - ej
                    if lhs < rhs - tol * spot:
                        violations.append(Violation(
                            ViolationKind.A_LF, (kj, ki, kjp, kip),
                            (rhs - lhs) / spot, "chord quadruple"))
    return ConditionReport.build(violations)


def lf_equivalence_probe(a_curve: PLCurve, e_curve: PLCurve, strike: float,
                         eps_step: float, tol: float | None = None) -> bool:
    """Finite-difference form of the conjugate comparison at one (K, eps).

    The chord over a small step amplifies evaluation rounding by K/eps, so
    the default tolerance carries that factor.
    """
    if eps_step <= 0:
        raise ValueError("eps_step must be > 0")
    if strike == 0.0:
        return True
    a0, a1 = a_curve.value(strike), a_curve.value(strike + eps_step)
    e0, e1 = e_curve.value(strike), e_curve.value(strike + eps_step)
    lhs = (a1 - a0) / eps_step * strike - a0
    rhs = (e1 - e0) / eps_step * strike - e0
    if tol is None:
        scale = max(1.0, abs(a0), abs(a1), abs(e0), abs(e1))
        tol = 1e-13 * scale * (1.0 + strike / eps_step)
    return bool(lhs >= rhs - tol)


@dataclass(frozen=True)
class MarketCheck:
    """Combined result of the raw-quote checks for one market."""

    european: ConditionReport
    american: ConditionReport
    discrete: ConditionReport
    warnings: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.european.passed and self.american.passed and self.discrete.passed

    @property
    def violations(self) -> tuple[Violation, ...]:
        return self.european.violations + self.american.violations + self.discrete.violations


def check_market(market: Market) -> MarketCheck:
    """Run every raw-quote check, completing the European side when possible."""
    rep_e = check_european(market)
    warnings: list[str] = []
    e_curve = None
    if rep_e.passed:
        try:
            _, measure = complete_european(market)
            e_curve = european_from_measure(measure, market.rate, market.maturity)
        except AmerputError as exc:
            warnings.append(f"european completion failed: {exc}")
    if e_curve is None:
        e_curve = european_quote_curve(market)
        if not rep_e.passed:
            warnings.append("american checks ran against the raw quoted european curve")
    rep_a = check_american(market, e_curve)
    rep_d = check_discrete_pairs(market)
    return MarketCheck(rep_e, rep_a, rep_d, tuple(warnings))
