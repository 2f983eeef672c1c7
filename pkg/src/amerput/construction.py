"""Recursive construction of a discrete martingale model matching put quotes.

One round embeds one linear piece of the American curve: rotate the decaying
upper bound until it first touches the extended American, jump the spot to the
embedded piece's zero (down) and the martingale-balancing level (up), split
the terminal law and both price curves at the touching atom, and recurse on
the two independent half-problems.  Pictures whose American curve already
equals max{European, intrinsic} stop and send the terminal law straight to
maturity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import check_curve_pair
from .curves import (
    DiscreteMeasure,
    Market,
    PLCurve,
    complete_american,
    complete_european,
    european_from_measure,
    extension_lines,
    max_curves,
    upper_envelope,
)
from .errors import InputError, InternalError

_TIME_GUARD = 1e-12


@dataclass(frozen=True)
class Picture:
    """A self-contained sub-problem: spot and start time plus both curves.

    ``a_curve`` is the completed American curve (its final piece is
    ``K - spot``); the European curve is implied by ``measure`` over the
    remaining life ``maturity - t_old``.
    """

    spot: float
    t_old: float
    a_curve: PLCurve
    measure: DiscreteMeasure
    rate: float
    maturity: float
    tol: float

    @property
    def tau(self) -> float:
        return self.maturity - self.t_old

    def european_curve(self) -> PLCurve:
        return european_from_measure(self.measure, self.rate, self.tau)

    def intrinsic_curve(self) -> PLCurve:
        return PLCurve(np.array([self.spot]), np.array([0.0]), 0.0, 1.0)


@dataclass(frozen=True)
class ExtendedAmerican:
    """The American curve continued past its bound with corrected slopes.

    ``pieces`` lists every supporting line (slope, intercept) by appearance,
    excluding the realised ``K - spot`` piece; the first ``n_original`` come
    from the quoted curve, the rest restore the conjugate comparison with
    equality at each atom from ``k_p`` on.
    """

    pieces: tuple[tuple[float, float], ...]
    breakpoints: tuple[float, ...]
    n_original: int
    k_p: float | None

    def curve(self) -> PLCurve:
        return upper_envelope(list(self.pieces))


@dataclass(frozen=True)
class CriticalTime:
    t_crit: float
    k_crit: float
    piece_index: int
    atom_index: int


@dataclass(frozen=True)
class SplitResult:
    t_crit: float
    t_jump: float
    k_crit: float
    p_down: float
    p_up: float
    s_down: float
    s_up: float
    piece_index: int
    picture_down: Picture
    picture_up: Picture


@dataclass(frozen=True)
class TreeNode:
    id: int
    time: float
    price: float
    parent: int | None
    prob: float  # transition probability from the parent (1.0 at the root)


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Rooted tree of (time, price) states; prices grow at the rate between jumps."""

    nodes: tuple[TreeNode, ...]

    def __post_init__(self) -> None:
        nodes = tuple(self.nodes)
        if not nodes:
            raise InputError("tree needs at least a root node")
        children: list[list[int]] = [[] for _ in nodes]
        for n in nodes:
            if n.id != nodes[n.id].id:
                raise InputError("node ids must equal their positions")
            if n.parent is not None:
                if not (0 <= n.parent < n.id):
                    raise InputError("parents must precede children")
                children[n.parent].append(n.id)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def children(self, node_id: int) -> tuple[int, ...]:
        return self._children[node_id]

    def leaves(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if not self._children[n.id])


@dataclass(frozen=True)
class BuildStats:
    embed_steps: int
    maturity_steps: int
    n_regular_pieces: int

    @property
    def total_steps(self) -> int:
        return self.embed_steps + self.maturity_steps


# ---------------------------------------------------------------------------
# extension and critical times
# ---------------------------------------------------------------------------


def _split_lines(picture: Picture) -> tuple[list[tuple[float, float]], tuple[float, float]]:
    """Separate the quoted curve's lines into regular pieces and the bound piece."""
    lines = picture.a_curve.lines()
    s_last, d_last = lines[-1]
    tol_s = picture.tol * max(picture.spot, 1.0)
    if abs(s_last - 1.0) > 1e-9 or abs(d_last - picture.spot) > 1e3 * tol_s:
        raise InternalError("picture American must end on its immediate-exercise bound")
    return lines[:-1], (s_last, d_last)


def extend_american(picture: Picture) -> ExtendedAmerican:
    """Continue the American past its bound crossing with corrected slopes.

    The last regular slope runs until the first atom whose European piece
    intercept exceeds it; from that atom on each new piece reuses the European
    intercept, which enforces the conjugate comparison with equality.
    """
    regular, _ = _split_lines(picture)
    if not regular:
        raise InputError("picture American coincides with its bound; nothing to extend")
    e_curve = picture.european_curve()
    cont_slope, cont_d = regular[-1]
    k_p, ext = extension_lines(cont_slope, cont_d, e_curve,
                               tol=picture.tol * max(picture.spot, 1.0))
    pieces = tuple(regular) + tuple(ext)
    bps = []
    for (s0, d0), (s1, d1) in zip(pieces, pieces[1:]):
        if s1 <= s0:
            raise InternalError("extended American pieces must have increasing slopes")
        bps.append((d1 - d0) / (s1 - s0))
    return ExtendedAmerican(pieces=pieces, breakpoints=tuple(bps),
                            n_original=len(regular), k_p=k_p)


def upper_bound(picture: Picture, strike: float, t: float) -> float:
    """The decaying bound ``E(e^{r(tau - t)} K)`` for ``0 <= t <= tau``."""
    if t < -_TIME_GUARD or t > picture.tau + _TIME_GUARD:
        raise InputError(f"t={t} outside [0, {picture.tau}]")
    return picture.european_curve().value(math.exp(picture.rate * (picture.tau - t)) * strike)


def _atom_tables(picture: Picture) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-atom slope and intercept of the European piece right of each atom."""
    disc = math.exp(-picture.rate * picture.tau)
    slopes = disc * np.cumsum(picture.measure.p)
    intercepts = disc * np.cumsum(picture.measure.p * picture.measure.x)
    return picture.measure.x, slopes, intercepts


def _piece_touch(picture: Picture, piece: tuple[float, float],
                 tables: tuple[np.ndarray, np.ndarray, np.ndarray]) -> tuple[float, int]:
    s_j, d = piece
    xs, slopes, intercepts = tables
    idx = int(np.searchsorted(intercepts, d, side="right"))
    if idx >= xs.size:
        raise InternalError("no atom intercept exceeds the piece; bound piece was not excluded")
    k_i = float(xs[idx])
    if k_i <= 0.0:
        raise InternalError("touching atom sits at strike zero")
    arg = float(slopes[idx]) / s_j + (d - float(intercepts[idx])) / (s_j * k_i)
    if arg <= 0.0:
        raise InternalError("degenerate touch: bound already below the piece")
    return picture.tau + math.log(arg) / picture.rate, idx


def critical_time_piece(picture: Picture, piece: tuple[float, float]) -> tuple[float, int]:
    """First time the rotating bound touches one line ``f(K) = s*K - d``.

    Touch happens at the first atom whose European piece intercept exceeds
    ``d``; the closed form follows from the bound's value being constant in
    time at its own atoms.
    """
    if piece[0] <= 0.0:
        raise InputError("piece needs positive slope")
    return _piece_touch(picture, piece, _atom_tables(picture))


def critical_time(picture: Picture, ext: ExtendedAmerican) -> CriticalTime | None:
    """Minimal touch time over all pieces, or None when everything waits for maturity.

    Ties are resolved to the smallest touching atom and then the left piece.
    The chosen piece must come from the quoted curve: extension pieces always
    touch later, so hitting one signals a broken invariant.
    """
    tol_s = picture.tol * max(picture.spot, 1.0)
    eps_t = _TIME_GUARD * max(1.0, picture.tau)
    tables = _atom_tables(picture)
    candidates: list[tuple[float, int, int]] = []
    for j, (s, d) in enumerate(ext.pieces):
        if s <= picture.tol or d >= picture.spot - tol_s:
            continue
        t_j, idx = _piece_touch(picture, (s, d), tables)
        if t_j < -eps_t:
            raise InternalError(f"negative critical time {t_j}")
        candidates.append((max(t_j, 0.0), idx, j))
    if not candidates:
        return None
    t_min = min(c[0] for c in candidates)
    if t_min >= picture.tau - eps_t:
        return None  # nothing intersects before maturity: embed everything at T
    best = min((c for c in candidates if c[0] <= t_min + eps_t), key=lambda c: (c[1], c[2]))
    _, atom_idx, piece_idx = best
    if piece_idx >= ext.n_original:
        raise InternalError("an extension piece set the critical time before the terminal regime")
    k_star = float(picture.measure.x[atom_idx]) * math.exp(-picture.rate * (picture.tau - t_min))
    return CriticalTime(t_crit=t_min, k_crit=k_star, piece_index=piece_idx, atom_index=atom_idx)


# ---------------------------------------------------------------------------
# the split
# ---------------------------------------------------------------------------


def _check_picture(picture: Picture, context: str) -> None:
    e_curve = picture.european_curve()
    report = check_curve_pair(picture.a_curve, e_curve, picture.spot, picture.rate,
                              picture.tau, picture.tol * 100)
    if not report.passed:
        msgs = "; ".join(str(v) for v in report.violations[:4])
        raise InternalError(f"{context}: sub-picture violates conditions: {msgs}")


def embed_step(picture: Picture, ext: ExtendedAmerican, crit: CriticalTime,
               validate: bool = True) -> SplitResult:
    """Jump the spot onto the embedded piece's zero and rebalance the rest.

    The down probability is the embedded slope grown to the jump time; the
    terminal law splits at the touching atom with the straddling mass divided
    so each half keeps the martingale mean.  Both American halves are explicit
    maxima over the original pieces, so the sub-problems are again of the same
    form.
    """
    tol = picture.tol
    spot = picture.spot
    growth = math.exp(picture.rate * crit.t_crit)
    s_k, d_k = ext.pieces[crit.piece_index]
    p_down = growth * s_k
    if not (tol < p_down < 1.0 - tol):
        raise InternalError(f"down probability {p_down} outside (0, 1)")
    p_up = 1.0 - p_down
    s_down = d_k / s_k
    t_jump = picture.t_old + crit.t_crit
    s_up = (spot * growth - p_down * s_down) / p_up

    measure = picture.measure
    li = crit.atom_index
    x_star = float(measure.x[li])
    if abs(crit.k_crit * math.exp(picture.rate * (picture.maturity - t_jump)) - x_star) \
            > 1e-6 * max(x_star, 1.0):
        raise InternalError("critical strike does not grow back onto the splitting atom")
    p_below = float(measure.p[:li].sum())
    p_upto = p_below + float(measure.p[li])
    if p_down <= p_below - 1e3 * tol or p_down > p_upto + 1e3 * tol:
        raise InternalError(
            f"down probability {p_down} outside its bracket ({p_below}, {p_upto}]")

    lower_mass = p_down - p_below       # straddling mass kept by the down picture
    upper_mass = p_upto - p_down        # remainder handed to the up picture
    if lower_mass <= 1e3 * tol:
        if li == 0:
            raise InternalError("down picture would receive no mass")
        x1 = measure.x[:li]
        p1 = measure.p[:li] / p_down
    else:
        x1 = measure.x[: li + 1]
        p1 = np.append(measure.p[:li], lower_mass) / p_down
    if upper_mass <= 1e3 * tol:
        if li == measure.x.size - 1:
            raise InternalError("up picture would receive no mass")
        x2 = measure.x[li + 1:]
        p2 = measure.p[li + 1:] / p_up
    else:
        x2 = measure.x[li:]
        p2 = np.append(upper_mass, measure.p[li + 1:]) / p_up
    m_down = DiscreteMeasure(x1, p1)
    m_up = DiscreteMeasure(x2, p2)

    compound = math.exp(picture.rate * (picture.maturity - t_jump))
    for m, s, label in ((m_down, s_down, "down"), (m_up, s_up, "up")):
        target = s * compound
        if abs(m.mean - target) > 1e-7 * max(target, 1.0):
            raise InternalError(
                f"{label} measure mean {m.mean:.12g} misses martingale target {target:.12g}")

    g1 = growth / p_down
    lines1 = [(s * g1, d * g1) for s, d in ext.pieces[: crit.piece_index]]
    lines1.append((1.0, s_down))        # the embedded piece rescales onto the new bound
    a_down = upper_envelope(lines1)

    g2 = growth / p_up
    lines2 = [(0.0, 0.0)]               # the embedded piece maps to the zero piece
    lines2 += [((s - s_k) * g2, (d - d_k) * g2) for s, d in ext.pieces[crit.piece_index + 1:]]
    lines2.append((1.0, s_up))          # the discounted intrinsic maps onto the new bound
    a_up = upper_envelope(lines2)

    pic_down = Picture(spot=s_down, t_old=t_jump, a_curve=a_down, measure=m_down,
                       rate=picture.rate, maturity=picture.maturity, tol=tol)
    pic_up = Picture(spot=s_up, t_old=t_jump, a_curve=a_up, measure=m_up,
                     rate=picture.rate, maturity=picture.maturity, tol=tol)
    if validate:
        _check_picture(pic_down, "down")
        _check_picture(pic_up, "up")
    return SplitResult(t_crit=crit.t_crit, t_jump=t_jump, k_crit=crit.k_crit,
                       p_down=p_down, p_up=p_up, s_down=s_down, s_up=s_up,
                       piece_index=crit.piece_index,
                       picture_down=pic_down, picture_up=pic_up)


# ---------------------------------------------------------------------------
# terminal pictures and the full build
# ---------------------------------------------------------------------------


def is_terminal(picture: Picture) -> bool:
    """True when the American curve equals max{European, intrinsic}.

    Cross-checked through the conjugate signature: wherever the European
    branch is the active one, their conjugate values must then agree.
    """
    from .curves import curves_equal

    e_curve = picture.european_curve()
    target = max_curves(e_curve, picture.intrinsic_curve())
    tol_s = 1e3 * picture.tol * max(picture.spot, 1.0)
    equal = curves_equal(picture.a_curve, target, tol_s)
    if equal:
        for k in picture.measure.x:
            k = float(k)
            if k <= 0.0:
                continue
            # where the European branch is strictly the active one, the
            # conjugate values must agree as well
            if e_curve.value(k) > max(k - picture.spot, 0.0) + tol_s:
                lf_a = picture.a_curve.lf_value(k, tol=picture.tol * max(picture.spot, 1.0))
                if abs(lf_a - e_curve.lf_value(k)) > 1e3 * tol_s:
                    raise InternalError(
                        "terminal detectors disagree: curves equal but conjugates differ")
    return equal


def root_picture(market: Market) -> tuple[Picture, Market]:
    """Complete both quote families and assemble the time-0 picture."""
    market2, measure = complete_european(market)
    e_curve = european_from_measure(measure, market2.rate, market2.maturity)
    a_full = complete_american(market2, e_curve)
    picture = Picture(spot=market2.spot, t_old=0.0, a_curve=a_full, measure=measure,
                      rate=market2.rate, maturity=market2.maturity, tol=market2.tolerance)
    return picture, market2


def _regular_piece_count(a_curve: PLCurve, spot: float, tol: float) -> int:
    lines = a_curve.lines()
    count = 0
    for s, d in lines:
        if s <= tol:
            continue
        if abs(s - 1.0) <= 1e-9 and abs(d - spot) <= 1e3 * tol * max(spot, 1.0):
            continue
        count += 1
    return count


def build_model_detailed(market: Market, validate: bool = True) -> tuple[TreeModel, BuildStats]:
    """Run the full recursion and report the step counts alongside the tree."""
    picture, _ = root_picture(market)
    n_regular = _regular_piece_count(picture.a_curve, picture.spot, picture.tol)
    max_steps = 2 * max(n_regular, 1) + 1
    nodes = [TreeNode(0, 0.0, picture.spot, None, 1.0)]
    embeds = 0
    maturity_steps = 0
    stack: list[tuple[Picture, int]] = [(picture, 0)]
    while stack:
        pic, node_id = stack.pop()
        crit = None
        if not is_terminal(pic):
            ext = extend_american(pic)
            crit = critical_time(pic, ext)
        if crit is None:
            maturity_steps += 1
            for x, p in zip(pic.measure.x, pic.measure.p):
                nodes.append(TreeNode(len(nodes), pic.maturity, float(x), node_id, float(p)))
        else:
            split = embed_step(pic, ext, crit, validate=validate)
            embeds += 1
            id_d = len(nodes)
            nodes.append(TreeNode(id_d, split.t_jump, split.s_down, node_id, split.p_down))
            id_u = len(nodes)
            nodes.append(TreeNode(id_u, split.t_jump, split.s_up, node_id, split.p_up))
            stack.append((split.picture_down, id_d))
            stack.append((split.picture_up, id_u))
        if embeds + maturity_steps > max_steps:
            raise InternalError(
                f"recursion exceeded its termination bound {max_steps} "
                f"({embeds} embeds, {maturity_steps} maturity steps)")
    return TreeModel(tuple(nodes)), BuildStats(embeds, maturity_steps, n_regular)


def build_model(market: Market, validate: bool = True) -> TreeModel:
    """Construct a discounted-martingale tree repricing every quote."""
    model, _ = build_model_detailed(market, validate=validate)
    return model


def extremal_models(market: Market, delta: float | None = None) -> tuple[TreeModel, TreeModel]:
    """The two bound-attaining models implied by the European quotes alone.

    The lower one grows at the rate and jumps to the terminal law at maturity,
    pricing Americans at max{intrinsic, European}.  The upper one jumps almost
    immediately (after ``delta``) to the discounted terminal values and then
    grows deterministically, pricing Americans at ``E(e^{rT}K)`` up to
    O(delta).
    """
    _, measure = complete_european(market)
    T = market.maturity
    if delta is None:
        delta = T * 1e-6
    if not (0.0 < delta < T):
        raise InputError("delta must lie strictly inside (0, maturity)")
    lower_nodes = [TreeNode(0, 0.0, market.spot, None, 1.0)]
    for x, p in zip(measure.x, measure.p):
        lower_nodes.append(TreeNode(len(lower_nodes), T, float(x), 0, float(p)))
    upper_nodes = [TreeNode(0, 0.0, market.spot, None, 1.0)]
    shrink = math.exp(-market.rate * (T - delta))
    for x, p in zip(measure.x, measure.p):
        mid = TreeNode(len(upper_nodes), delta, float(x) * shrink, 0, float(p))
        upper_nodes.append(mid)
        upper_nodes.append(TreeNode(len(upper_nodes), T, float(x), mid.id, 1.0))
    return TreeModel(tuple(lower_nodes)), TreeModel(tuple(upper_nodes))
