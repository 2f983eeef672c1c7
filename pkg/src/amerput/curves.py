"""Piecewise-linear convex curves, discrete terminal measures, and quote completion.

Price curves are piecewise linear in the strike.  A curve is stored as its
kinks plus the two extension slopes; every linear piece can equivalently be
read as a supporting line ``f(K) = s*K - d``.  The intercept ``d`` of the
active piece at ``K+`` equals ``f'(K+)*K - f(K)``, the value of the convex
conjugate of ``f`` at its right slope, which is the quantity most of the
consistency conditions compare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InconsistencyError, InputError, InternalError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Quote:
    """One traded put price."""

    strike: float
    price: float

    def __post_init__(self) -> None:
        if not (self.strike >= 0.0) or not math.isfinite(self.strike):
            raise InputError(f"strike must be finite and >= 0, got {self.strike}")
        if not (self.price >= 0.0) or not math.isfinite(self.price):
            raise InputError(f"price must be finite and >= 0, got {self.price}")


def _as_quotes(quotes) -> tuple[Quote, ...]:
    out = []
    for q in quotes:
        if isinstance(q, Quote):
            out.append(q)
        else:
            k, p = q
            out.append(Quote(float(k), float(p)))
    return tuple(out)


def _check_strictly_increasing(strikes, label: str) -> None:
    for a, b in zip(strikes, strikes[1:]):
        if b <= a:
            raise InputError(f"{label} strikes must be strictly increasing, got {a} then {b}")


@dataclass(frozen=True)
class Market:
    """Spot, flat continuously-compounded rate, common maturity, and the two quote lists."""

    spot: float
    rate: float
    maturity: float
    european: tuple[Quote, ...]
    american: tuple[Quote, ...]
    tolerance: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        if not (self.spot > 0.0):
            raise InputError("spot must be > 0")
        if not (self.rate > 0.0):
            raise InputError("rate must be > 0")
        if not (self.maturity > 0.0):
            raise InputError("maturity must be > 0")
        if not (self.tolerance > 0.0):
            raise InputError("tolerance must be > 0")
        object.__setattr__(self, "european", _as_quotes(self.european))
        object.__setattr__(self, "american", _as_quotes(self.american))
        _check_strictly_increasing([q.strike for q in self.european], "european")
        _check_strictly_increasing([q.strike for q in self.american], "american")

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.maturity)

    def with_quotes(self, european=None, american=None) -> "Market":
        return Market(
            spot=self.spot,
            rate=self.rate,
            maturity=self.maturity,
            european=self.european if european is None else european,
            american=self.american if american is None else american,
            tolerance=self.tolerance,
        )


@dataclass(frozen=True, eq=False)
class PLCurve:
    """Continuous piecewise-linear function of the strike.

    ``x`` holds the kink strikes (strictly increasing), ``y`` the values there.
    Left of ``x[0]`` the function extends linearly with ``left_slope``, right
    of ``x[-1]`` with ``right_slope``.
    """

    x: np.ndarray
    y: np.ndarray
    left_slope: float
    right_slope: float

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise InputError("curve needs matching 1-d kink arrays with at least one point")
        if np.any(np.diff(x) <= 0):
            raise InputError("kink strikes must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "left_slope", float(self.left_slope))
        object.__setattr__(self, "right_slope", float(self.right_slope))

    # -- evaluation ---------------------------------------------------------

    def value(self, strike):
        k = np.asarray(strike, dtype=float)
        x, y = self.x, self.y
        v = np.interp(k, x, y)
        below = k < x[0]
        above = k > x[-1]
        if np.any(below):
            v = np.where(below, y[0] + self.left_slope * (k - x[0]), v)
        if np.any(above):
            v = np.where(above, y[-1] + self.right_slope * (k - x[-1]), v)
        if np.isscalar(strike) or getattr(strike, "ndim", 0) == 0:
            return float(v)
        return v

    @property
    def segment_slopes(self) -> np.ndarray:
        if self.x.size == 1:
            return np.empty(0)
        return np.diff(self.y) / np.diff(self.x)

    def right_slope_at(self, strike: float, tol: float = 0.0) -> float:
        """Slope of the piece immediately right of ``strike``.

        ``tol`` absorbs kinks sitting within rounding distance right of the
        strike, so a kink computed one ulp off its intended position still
        reads as a kink at that position.
        """
        i = int(np.searchsorted(self.x, strike + tol, side="right")) - 1
        if i < 0:
            return self.left_slope
        if i >= self.x.size - 1:
            return self.right_slope
        return float(self.segment_slopes[i])

    def left_slope_at(self, strike: float, tol: float = 0.0) -> float:
        """Slope of the piece immediately left of ``strike``."""
        i = int(np.searchsorted(self.x, strike - tol, side="left")) - 1
        if i < 0:
            return self.left_slope
        if i >= self.x.size - 1:
            return self.right_slope
        return float(self.segment_slopes[i])

    def lf_value(self, strike: float, tol: float = 0.0) -> float:
        """``f'(K+)*K - f(K)``: the convex conjugate evaluated at the right slope."""
        return self.right_slope_at(strike, tol) * strike - self.value(strike)

    # -- structure ----------------------------------------------------------

    def lines(self) -> list[tuple[float, float]]:
        """All supporting lines ``(slope, d)`` with ``f(K) = slope*K - d``, by appearance."""
        out = [(self.left_slope, self.left_slope * float(self.x[0]) - float(self.y[0]))]
        slopes = self.segment_slopes
        for i, s in enumerate(slopes):
            out.append((float(s), float(s * self.x[i] - self.y[i])))
        out.append((self.right_slope, self.right_slope * float(self.x[-1]) - float(self.y[-1])))
        # collapse consecutive identical lines (no kink between them)
        dedup: list[tuple[float, float]] = []
        for s, d in out:
            if dedup and abs(dedup[-1][0] - s) == 0.0 and abs(dedup[-1][1] - d) == 0.0:
                continue
            dedup.append((s, d))
        return dedup

    def is_convex(self, tol: float = 0.0) -> bool:
        slopes = np.concatenate(([self.left_slope], self.segment_slopes, [self.right_slope]))
        return bool(np.all(np.diff(slopes) >= -tol))

    def scale_values(self, factor: float) -> "PLCurve":
        return PLCurve(self.x, factor * self.y, factor * self.left_slope, factor * self.right_slope)

    def scale_strikes(self, factor: float) -> "PLCurve":
        """Return ``K -> f(factor*K)``; kinks move to ``x/factor``."""
        if factor <= 0:
            raise InputError("strike scale factor must be > 0")
        return PLCurve(self.x / factor, self.y, self.left_slope * factor, self.right_slope * factor)


def curve_from_quotes(quotes, left_slope: float, right_slope: float, tol: float = 0.0) -> PLCurve:
    """Linear interpolation through ``quotes`` with the stated extension slopes.

    With ``tol > 0`` points where the slope changes by at most ``tol`` are
    merged away, so the kink list carries only genuine pieces.
    """
    qs = _as_quotes(quotes)
    if not qs:
        raise InputError("need at least one quote")
    _check_strictly_increasing([q.strike for q in qs], "quote")
    x = np.array([q.strike for q in qs], dtype=float)
    y = np.array([q.price for q in qs], dtype=float)
    if tol > 0.0 and x.size > 1:
        slopes = np.concatenate(([left_slope], np.diff(y) / np.diff(x), [right_slope]))
        keep = np.abs(np.diff(slopes)) > tol
        if not np.any(keep):
            keep[0] = True  # keep one anchor point
        x, y = x[keep], y[keep]
    return PLCurve(x, y, left_slope, right_slope)


def upper_envelope(lines, anchor: float = 0.0, tol: float = 1e-14) -> PLCurve:
    """Pointwise maximum of lines ``f(K) = s*K - d`` as a curve on ``K >= anchor``.

    A convex piecewise-linear function equals the maximum of its supporting
    lines, so this doubles as the constructor for any piecewise-linear convex
    curve given by pieces.
    """
    ls = sorted({(float(s), float(d)) for s, d in lines})
    if not ls:
        raise InputError("need at least one line")
    # for (near-)equal slopes only the highest line (smallest d) can win
    filtered: list[tuple[float, float]] = []
    for s, d in ls:
        if filtered and abs(s - filtered[-1][0]) <= tol:
            if d < filtered[-1][1]:
                filtered[-1] = (s, d)
            continue
        filtered.append((s, d))

    def crossing(a, b) -> float:
        return (b[1] - a[1]) / (b[0] - a[0])

    hull: list[tuple[float, float]] = []
    for ln in filtered:
        while hull:
            if ln[1] <= hull[-1][1]:
                # at least as high everywhere left of any crossing and steeper
                hull.pop()
                continue
            if len(hull) >= 2 and crossing(hull[-1], ln) <= crossing(hull[-2], hull[-1]):
                hull.pop()
                continue
            break
        hull.append(ln)
    # drop pieces that end before the anchor
    while len(hull) >= 2 and crossing(hull[0], hull[1]) <= anchor:
        hull.pop(0)
    if len(hull) == 1:
        s, d = hull[0]
        return PLCurve(np.array([anchor]), np.array([s * anchor - d]), s, s)
    xs = np.array([crossing(a, b) for a, b in zip(hull, hull[1:])], dtype=float)
    ys = np.array([s * k - d for k, (s, d) in zip(xs, hull[1:])], dtype=float)
    return PLCurve(xs, ys, hull[0][0], hull[-1][0])


def max_curves(a: PLCurve, b: PLCurve) -> PLCurve:
    """Pointwise maximum of two convex curves."""
    return upper_envelope(a.lines() + b.lines())


def linear_combination(terms) -> PLCurve:
    """Weighted sum of curves, exact at the union of their kinks."""
    terms = list(terms)
    if not terms:
        raise InputError("need at least one curve")
    xs = np.unique(np.concatenate([c.x for _, c in terms]))
    y = np.zeros_like(xs)
    left = 0.0
    right = 0.0
    for w, c in terms:
        y = y + w * c.value(xs)
        left += w * c.left_slope
        right += w * c.right_slope
    return PLCurve(xs, y, left, right)


def curves_equal(a: PLCurve, b: PLCurve, tol: float) -> bool:
    """Pointwise equality of two piecewise-linear curves within ``tol``."""
    xs = np.unique(np.concatenate([a.x, b.x]))
    if np.max(np.abs(a.value(xs) - b.value(xs))) > tol:
        return False
    if abs(a.left_slope - b.left_slope) > tol or abs(a.right_slope - b.right_slope) > tol:
        return False
    return True


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite atomic distribution of the terminal asset price."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1 or x.size == 0:
            raise InputError("measure needs matching 1-d atom arrays")
        if np.any(np.diff(x) <= 0):
            raise InputError("atom locations must be strictly increasing")
        if np.any(p <= 0):
            raise InputError("atom masses must be > 0")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-6:
            raise InputError(f"masses must sum to 1, got {total}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p / total)

    @property
    def mean(self) -> float:
        return float(np.dot(self.x, self.p))

    def prob_below(self, v: float) -> float:
        return float(self.p[self.x < v].sum())

    def prob_upto(self, v: float) -> float:
        return float(self.p[self.x <= v].sum())


def european_from_measure(measure: DiscreteMeasure, rate: float, tau: float) -> PLCurve:
    """Discounted put prices ``E(K) = e^{-r*tau} * sum p_i (K - x_i)_+``.

    Kinks sit exactly at the atoms; the right extension slope is the discount
    factor and the curve is flat at zero left of the first atom.
    """
    disc = math.exp(-rate * tau)
    cp = np.concatenate(([0.0], np.cumsum(measure.p)))[:-1]       # P(X < x_i)
    cpx = np.concatenate(([0.0], np.cumsum(measure.p * measure.x)))[:-1]
    y = disc * (cp * measure.x - cpx)
    return PLCurve(measure.x.copy(), y, 0.0, disc)


def measure_from_european(curve: PLCurve, rate: float, tau: float, spot: float,
                          tol: float = DEFAULT_TOL) -> DiscreteMeasure:
    """Invert a valid European curve back to its terminal distribution.

    Each kink carries the mass ``e^{r*tau} * (slope change)``.  The curve must
    be convex, start flat at zero, end with slope ``e^{-r*tau}`` on the lower
    bound ``e^{-r*tau}K - spot``, and imply mean ``spot * e^{r*tau}``.
    """
    disc = math.exp(-rate * tau)
    scale = max(spot, 1.0)
    slopes = np.concatenate(([curve.left_slope], curve.segment_slopes, [curve.right_slope]))
    jumps = np.diff(slopes)
    if np.any(jumps < -tol):
        raise InconsistencyError("curve is not convex; no positive measure exists")
    if abs(curve.left_slope) > tol:
        raise InconsistencyError("curve must be flat left of its first kink")
    masses = np.exp(rate * tau) * jumps
    keep = masses > tol
    atoms = curve.x[keep]
    masses = masses[keep]
    if atoms.size == 0 or abs(masses.sum() - 1.0) > 1e3 * tol:
        raise InconsistencyError(
            f"slope changes imply total mass {masses.sum() if masses.size else 0.0:.12g}, not 1"
        )
    mean = float(np.dot(atoms, masses))
    target = spot * math.exp(rate * tau)
    if abs(mean - target) > 1e3 * tol * scale * math.exp(rate * tau):
        raise InconsistencyError(f"implied mean {mean:.12g} differs from {target:.12g}")
    last = float(atoms[-1])
    if abs(curve.value(last) - (disc * last - spot)) > 1e3 * tol * scale:
        raise InconsistencyError("last kink does not sit on the lower bound")
    return DiscreteMeasure(atoms, masses)


# ---------------------------------------------------------------------------
# quote curves and completion
# ---------------------------------------------------------------------------


def european_quote_curve(market: Market) -> PLCurve:
    """European quotes interpolated through the origin, continued with the last slope."""
    pts = list(market.european)
    if not pts:
        raise InputError("market has no european quotes")
    if pts[0].strike > 0.0:
        pts = [Quote(0.0, 0.0)] + pts
    curve = curve_from_quotes(pts, 0.0, 0.0, tol=0.0)
    right = curve.segment_slopes[-1] if curve.x.size > 1 else 0.0
    return PLCurve(curve.x, curve.y, 0.0, float(right))


def american_quote_curve(market: Market) -> PLCurve:
    """American quotes interpolated through the origin, continued with the last slope."""
    pts = list(market.american)
    if not pts:
        raise InputError("market has no american quotes")
    if pts[0].strike > 0.0:
        pts = [Quote(0.0, 0.0)] + pts
    curve = curve_from_quotes(pts, 0.0, 0.0, tol=0.0)
    right = curve.segment_slopes[-1] if curve.x.size > 1 else 0.0
    return PLCurve(curve.x, curve.y, 0.0, float(right))


def complete_european(market: Market) -> tuple[Market, DiscreteMeasure]:
    """Append the single balancing atom that puts the last European quote on the bound.

    The quoted curve pins down atoms at its kinks; whatever mass is missing
    from one is placed so the measure's mean equals ``spot * e^{rT}``, which is
    exactly the strike where the final quoted piece meets ``e^{-rT}K - spot``.
    """
    tol = market.tolerance
    scale = market.spot
    disc = market.discount
    grow = math.exp(market.rate * market.maturity)
    curve = european_quote_curve(market)

    all_slopes = np.concatenate(([curve.left_slope], curve.segment_slopes, [curve.right_slope]))
    masses = grow * np.diff(all_slopes)
    keep = masses > tol
    atoms = curve.x[keep]
    masses = masses[keep]

    residual = 1.0 - float(masses.sum())
    if residual < -tol:
        raise InconsistencyError(
            f"final quoted slope exceeds the discount factor (residual mass {residual:.3g})"
        )
    last_quote = market.european[-1]
    if residual <= tol:
        gap = last_quote.price - (disc * last_quote.strike - market.spot)
        if abs(gap) > 1e3 * tol * scale:
            raise InconsistencyError("unit mass implied but last quote is off the lower bound")
        return market, DiscreteMeasure(atoms, masses)

    target = market.spot * grow
    x_star = (target - float(np.dot(atoms, masses))) / residual
    if x_star <= last_quote.strike + tol * scale:
        # the balancing atom coincides with the final quote, which must
        # therefore already sit on the lower bound
        gap = last_quote.price - (disc * last_quote.strike - market.spot)
        if abs(gap) > 1e3 * tol * scale or x_star < last_quote.strike - 1e3 * tol * scale:
            raise InconsistencyError("quoted curve meets the lower bound before its last strike")
        measure = DiscreteMeasure(
            np.append(atoms, last_quote.strike), np.append(masses, residual)
        )
        return market, measure
    new_quote = Quote(x_star, disc * x_star - market.spot)
    market2 = market.with_quotes(european=market.european + (new_quote,))
    measure = DiscreteMeasure(np.append(atoms, x_star), np.append(masses, residual))
    return market2, measure


def extension_lines(cont_slope: float, cont_d: float, e_curve: PLCurve,
                    tol: float = DEFAULT_TOL) -> tuple[float | None, list[tuple[float, float]]]:
    """Slope-corrected continuation lines of an American curve beyond its quotes.

    The incoming piece ``(cont_slope, cont_d)`` runs until the first atom of
    ``e_curve`` whose piece intercept exceeds ``cont_d`` (the first strike
    where the conjugate comparison fails).  From that atom on, each atom
    resets the slope so the comparison holds with equality, which pins the new
    piece's intercept to the European one.

    Returns the engaging atom (or None) and the list of corrected lines.
    """
    atoms = e_curve.x
    out: list[tuple[float, float]] = []
    k_p = None
    s_prev, d_prev = cont_slope, cont_d
    for k in atoms:
        if k <= 0.0:
            continue
        d_e = e_curve.lf_value(float(k))
        if k_p is None:
            if d_e > cont_d + tol:
                k_p = float(k)
            else:
                continue
        a_val = s_prev * k - d_prev
        s_new = (a_val + d_e) / k
        out.append((float(s_new), float(d_e)))
        s_prev, d_prev = s_new, d_e
    return k_p, out


def complete_american(market: Market, e_curve: PLCurve) -> PLCurve:
    """Extend the American quotes until they cross ``K - spot`` and clamp there.

    ``e_curve`` must be the completed European curve.  The result is the full
    convex curve whose final piece is ``K - spot``; its last kink is the
    appended quote on the bound.
    """
    tol = market.tolerance
    scale = market.spot
    quote_curve = american_quote_curve(market)
    lines = quote_curve.lines()
    cont_slope, cont_d = lines[-1]
    _, ext = extension_lines(cont_slope, cont_d, e_curve, tol=tol * scale)
    completed = upper_envelope(lines + ext + [(1.0, market.spot)])
    if completed.right_slope != 1.0:
        raise InternalError("extension never crosses the immediate-exercise bound")
    crossing = float(completed.x[-1])
    limit = float(e_curve.x[-1]) * market.discount
    if crossing > limit * (1.0 + tol) + tol * scale:
        raise InternalError(
            f"bound crossing {crossing:.12g} exceeds {limit:.12g}; upper bound violated upstream"
        )
    return completed
