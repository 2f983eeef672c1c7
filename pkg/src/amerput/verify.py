"""Independent verification on tree models.

Scalar backward induction for American prices, leaf expectations for
Europeans, a per-node martingale audit, an exact piecewise-linear value-curve
recursion, and a seeded random-model generator whose quotes feed round-trip
tests of the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .construction import TreeModel, TreeNode
from .curves import (
    DiscreteMeasure,
    Market,
    PLCurve,
    european_from_measure,
    linear_combination,
    upper_envelope,
)
from .errors import InputError

FLAG_TOL = 1e-10


def validate_tree(model: TreeModel) -> None:
    """Structural checks shared by every consumer of a tree."""
    nodes = model.nodes
    if nodes[0].parent is not None or nodes[0].time != 0.0:
        raise InputError("root must be node 0 at time 0")
    horizon = max(n.time for n in nodes)
    for n in nodes:
        if n.price < 0.0:
            raise InputError(f"node {n.id} has negative price")
        if n.parent is not None and n.time < nodes[n.parent].time - 1e-15:
            raise InputError(f"node {n.id} precedes its parent in time")
    for n in nodes:
        kids = model.children(n.id)
        if kids:
            psum = sum(nodes[c].prob for c in kids)
            if abs(psum - 1.0) > 1e-9:
                raise InputError(f"transition probabilities at node {n.id} sum to {psum}")
        else:
            if abs(n.time - horizon) > 1e-12 * max(1.0, horizon):
                raise InputError(f"leaf {n.id} does not sit at the common maturity")


@dataclass(frozen=True, eq=False)
class ValueSurface:
    """American values per (node, strike), discounted to time zero.

    ``exercise`` flags nodes where the value equals the discounted raw
    intrinsic ``e^{-rt}(K - S)`` (not its positive part), i.e. where immediate
    exercise attains the supremum.
    """

    strikes: np.ndarray
    values: np.ndarray      # shape (n_nodes, n_strikes)
    exercise: np.ndarray    # same shape, boolean

    def value(self, node_id: int, strike: float) -> float:
        j = int(np.searchsorted(self.strikes, strike))
        if j >= self.strikes.size or self.strikes[j] != strike:
            raise InputError(f"strike {strike} not on the surface grid")
        return float(self.values[node_id, j])


def dp_surface(model: TreeModel, rate: float, strikes) -> ValueSurface:
    """Backward induction over the tree for a whole strike grid at once."""
    validate_tree(model)
    ks = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(np.diff(ks) <= 0):
        raise InputError("strike grid must be strictly increasing")
    n = len(model.nodes)
    values = np.zeros((n, ks.size))
    exercise = np.zeros((n, ks.size), dtype=bool)
    for node in reversed(model.nodes):
        disc = math.exp(-rate * node.time)
        intrinsic_raw = disc * (ks - node.price)
        kids = model.children(node.id)
        if kids:
            cont = np.zeros(ks.size)
            for c in kids:
                cont += model.nodes[c].prob * values[c]
            v = np.maximum(np.maximum(intrinsic_raw, 0.0), cont)
        else:
            v = np.maximum(intrinsic_raw, 0.0)
        values[node.id] = v
        exercise[node.id] = v - intrinsic_raw <= FLAG_TOL * max(1.0, node.price)
    return ValueSurface(strikes=ks, values=values, exercise=exercise)


def dp_american(model: TreeModel, rate: float, strike: float) -> tuple[float, ValueSurface]:
    """Time-0 American put value for one strike, with its value surface."""
    surface = dp_surface(model, rate, [strike])
    return float(surface.values[0, 0]), surface


def path_probabilities(model: TreeModel) -> np.ndarray:
    probs = np.zeros(len(model.nodes))
    probs[0] = 1.0
    for node in model.nodes[1:]:
        probs[node.id] = probs[node.parent] * node.prob
    return probs


def terminal_law(model: TreeModel, tol: float = 0.0) -> DiscreteMeasure:
    """Aggregate the leaf layer into the terminal distribution."""
    probs = path_probabilities(model)
    buckets: dict[float, float] = {}
    for leaf in model.leaves():
        price = model.nodes[leaf].price
        buckets[price] = buckets.get(price, 0.0) + probs[leaf]
    xs = np.array(sorted(buckets))
    ps = np.array([buckets[x] for x in xs])
    if tol > 0.0 and xs.size > 1:
        merged_x = [xs[0]]
        merged_p = [ps[0]]
        for x, p in zip(xs[1:], ps[1:]):
            if x - merged_x[-1] <= tol:
                w = merged_p[-1] + p
                merged_x[-1] = (merged_x[-1] * merged_p[-1] + x * p) / w
                merged_p[-1] = w
            else:
                merged_x.append(x)
                merged_p.append(p)
        xs, ps = np.array(merged_x), np.array(merged_p)
    return DiscreteMeasure(xs, ps)


def european_on_tree(model: TreeModel, rate: float, strike: float) -> float:
    """Discounted leaf expectation of the put payoff."""
    validate_tree(model)
    probs = path_probabilities(model)
    horizon = max(n.time for n in model.nodes)
    total = sum(probs[i] * max(strike - model.nodes[i].price, 0.0) for i in model.leaves())
    return math.exp(-rate * horizon) * total


@dataclass(frozen=True)
class MartingaleReport:
    passed: bool
    max_residual: float
    worst_node: int | None
    residuals: tuple[tuple[int, float], ...]


def martingale_check(model: TreeModel, rate: float, tol: float = 1e-10) -> MartingaleReport:
    """Per-node relative residual of the discounted-mean identity."""
    residuals = []
    worst = (None, 0.0)
    for node in model.nodes:
        kids = model.children(node.id)
        if not kids:
            continue
        mean = sum(
            model.nodes[c].prob * model.nodes[c].price
            * math.exp(-rate * (model.nodes[c].time - node.time))
            for c in kids
        )
        rel = abs(mean - node.price) / max(node.price, 1e-12)
        residuals.append((node.id, rel))
        if rel > worst[1]:
            worst = (node.id, rel)
    return MartingaleReport(passed=worst[1] <= tol, max_residual=worst[1],
                            worst_node=worst[0], residuals=tuple(residuals))


@dataclass(frozen=True)
class RepriceReport:
    passed: bool
    max_error: float            # normalized by spot
    european_errors: tuple[tuple[float, float], ...]
    american_errors: tuple[tuple[float, float], ...]


def reprice_report(model: TreeModel, market: Market, tol: float = 1e-8) -> RepriceReport:
    """Compare model prices against every quote, normalized by the spot."""
    eur = []
    for q in market.european:
        err = (european_on_tree(model, market.rate, q.strike) - q.price) / market.spot
        eur.append((q.strike, err))
    ks = np.array([q.strike for q in market.american])
    surface = dp_surface(model, market.rate, ks) if ks.size else None
    amr = []
    for j, q in enumerate(market.american):
        err = (float(surface.values[0, j]) - q.price) / market.spot
        amr.append((q.strike, err))
    worst = max((abs(e) for _, e in eur + amr), default=0.0)
    return RepriceReport(passed=worst <= tol, max_error=worst,
                         european_errors=tuple(eur), american_errors=tuple(amr))


# ---------------------------------------------------------------------------
# exact value curves (piecewise-linear DP)
# ---------------------------------------------------------------------------


def american_value_curve(model: TreeModel, rate: float) -> PLCurve:
    """The full strike curve of time-0 American values, computed exactly.

    Every node value is piecewise linear in the strike, so the Bellman
    recursion closes over such curves: leaves contribute discounted hockey
    sticks, continuations are probability mixtures, and the exercise
    comparison is an upper envelope.
    """
    validate_tree(model)
    curves: dict[int, PLCurve] = {}
    for node in reversed(model.nodes):
        disc = math.exp(-rate * node.time)
        hockey = PLCurve(np.array([node.price]), np.array([0.0]), 0.0, disc)
        kids = model.children(node.id)
        if not kids:
            curves[node.id] = hockey
            continue
        cont = linear_combination([(model.nodes[c].prob, curves[c]) for c in kids])
        curves[node.id] = upper_envelope(cont.lines() + hockey.lines())
        for c in kids:
            del curves[c]
    return curves[0]


def exercise_monotonicity(model: TreeModel, surface: ValueSurface) -> tuple[bool, list]:
    """Check that each node's exercise set is upward-closed in the strike."""
    bad = []
    for node in model.nodes:
        flags = surface.exercise[node.id]
        first = int(np.argmax(flags)) if flags.any() else flags.size
        if not flags[first:].all():
            bad.append(node.id)
    return (not bad), bad


# ---------------------------------------------------------------------------
# random ground-truth models
# ---------------------------------------------------------------------------


def random_model_oracle(seed: int, depth: int = 3, branching: int = 3,
                        spot: float = 100.0) -> tuple[TreeModel, Market]:
    """A random discounted-martingale tree plus the quotes it implies.

    Child prices are mean-matched around the grown parent price and kept
    within [spot/10, 10*spot].  European quotes sit at every distinct leaf
    price; American quotes sit at every kink of the exact value curve, so the
    linear interpolation of the quotes reproduces the model's prices.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    branching = max(2, min(int(branching), 4))
    rng = np.random.default_rng(seed)
    rate = float(rng.uniform(0.02, 0.25))
    maturity = float(rng.uniform(0.5, 2.0))
    lo, hi = spot / 10.0, spot * 10.0

    nodes = [TreeNode(0, 0.0, spot, None, 1.0)]
    frontier = [(0, 0)]  # (node id, depth)
    while frontier:
        node_id, d = frontier.pop()
        parent = nodes[node_id]
        is_last = d + 1 >= depth
        t_child = maturity if is_last else \
            parent.time + (maturity - parent.time) * float(rng.uniform(0.25, 0.75))
        n_children = int(rng.integers(2, branching + 1))
        grown = parent.price * math.exp(rate * (t_child - parent.time))
        spreads = rng.uniform(-0.35, 0.5, size=n_children)
        probs = rng.uniform(0.2, 1.0, size=n_children)
        probs /= probs.sum()
        spreads -= float(np.dot(probs, spreads))          # exact mean match
        # shrink the spread rather than clip, so the mean identity survives
        scale = 1.0
        s_min, s_max = float(spreads.min()), float(spreads.max())
        if s_min < 0.0 and grown * (1.0 + s_min) < lo:
            scale = min(scale, (1.0 - lo / grown) / -s_min)
        if s_max > 0.0 and grown * (1.0 + s_max) > hi:
            scale = min(scale, max(hi / grown - 1.0, 0.0) / s_max)
        prices = grown * (1.0 + max(scale, 0.0) * spreads)
        order = np.argsort(prices)
        for idx in order:
            child = TreeNode(len(nodes), t_child, float(prices[idx]), node_id,
                             float(probs[idx]))
            nodes.append(child)
            stop_early = (not is_last) and rng.uniform() < 0.15
            if not is_last and not stop_early:
                frontier.append((child.id, d + 1))
            elif not is_last and stop_early:
                # leaf must sit at maturity: add the deterministic growth leg
                leaf = TreeNode(len(nodes), maturity,
                                child.price * math.exp(rate * (maturity - child.time)),
                                child.id, 1.0)
                nodes.append(leaf)
    model = TreeModel(tuple(nodes))

    law = terminal_law(model, tol=1e-9 * spot)
    e_curve = european_from_measure(law, rate, maturity)
    eur_quotes = [(float(k), float(e_curve.value(float(k)))) for k in law.x]

    a_curve = american_value_curve(model, rate)
    snap = 1e-7 * spot
    ks = []
    for k in a_curve.x:
        k = float(k)
        if k <= 1e-9 * spot:
            continue
        # value-curve kinks at atoms are the same point computed twice; use
        # the atom's exact float so both quote lists share the strike
        j = int(np.argmin(np.abs(law.x - k)))
        if abs(float(law.x[j]) - k) <= snap:
            k = float(law.x[j])
        if ks and k - ks[-1] <= snap:
            continue
        ks.append(k)
    amr_quotes = [(k, float(a_curve.value(k))) for k in ks]
    market = Market(spot=spot, rate=rate, maturity=maturity,
                    european=eur_quotes, american=amr_quotes)
    return model, market
