from __future__ import annotations

import math

import numpy as np
import pytest

from amerput import (
    DiscreteMeasure,
    max_curves,
)
from amerput.construction import (
    Picture,
    build_model_detailed,
    critical_time,
    critical_time_piece,
    embed_step,
    extend_american,
    extremal_models,
    is_terminal,
    root_picture,
    upper_bound,
)

from .conftest import LN2

LOG2_1P1 = math.log(1.1) / LN2


@pytest.fixture
def scenario_w_picture(scenario_w_market) -> Picture:
    picture, _ = root_picture(scenario_w_market)
    return picture


# -------------------------
# extension
# -------------------------
def test_scenario_w_extension(scenario_w_picture):
    ext = extend_american(scenario_w_picture)
    assert ext.k_p == pytest.approx(2.0)
    assert ext.n_original == 2  # the zero piece and the 0.25 piece
    slopes = [s for s, _ in ext.pieces]
    intercepts = [d for _, d in ext.pieces]
    assert slopes == pytest.approx([0.0, 0.25, 0.4875, 0.6125], abs=1e-12)
    assert intercepts == pytest.approx([0.0, 0.15, 0.625, 1.0], abs=1e-12)
    # slope rule written the other way: E'(K+) + (ext(K) - E(K)) / K,
    # with ext(K) carried in from the previous piece
    e = scenario_w_picture.european_curve()
    for atom, prev, this in zip((2.0, 3.0), ext.pieces[1:], ext.pieces[2:]):
        carried = prev[0] * atom - prev[1]
        expected = e.right_slope_at(atom) + (carried - e.value(atom)) / atom
        assert this[0] == pytest.approx(expected, abs=1e-12)


def test_extension_stays_between_bounds(scenario_w_picture):
    ext = extend_american(scenario_w_picture)
    c = ext.curve()
    e = scenario_w_picture.european_curve()
    grid = np.linspace(0.0, 6.0, 400)
    upper = np.array([upper_bound(scenario_w_picture, float(k), 0.0) for k in grid])
    assert np.all(c.value(grid) >= e.value(grid) - 1e-12)
    assert np.all(c.value(grid) <= upper + 1e-12)
    assert c.is_convex(tol=1e-12)


def test_extension_conjugate_equality_beyond_kp(scenario_w_picture):
    # the conjugate value is constant on each piece, so probing just inside a
    # piece reads its intercept without kink-rounding ambiguity
    ext = extend_american(scenario_w_picture)
    e = scenario_w_picture.european_curve()
    c = ext.curve()
    for k in (2.0, 3.0):
        assert c.lf_value(k + 1e-6) == pytest.approx(e.lf_value(k), abs=1e-6)


# -------------------------
# the decaying upper bound
# -------------------------
def test_upper_bound_at_maturity_is_european(scenario_w_picture):
    e = scenario_w_picture.european_curve()
    for k in (0.5, 1.0, 2.2):
        assert upper_bound(scenario_w_picture, k, 1.0) == pytest.approx(e.value(k))


def test_upper_bound_scenario_value(scenario_w_picture):
    assert upper_bound(scenario_w_picture, 1.1, LOG2_1P1) == pytest.approx(0.125, abs=1e-14)


def test_upper_bound_at_zero_is_static_bound(scenario_w_picture):
    e = scenario_w_picture.european_curve()
    for k in (0.7, 1.3):
        assert upper_bound(scenario_w_picture, k, 0.0) == pytest.approx(e.value(2.0 * k))


# -------------------------
# critical time
# -------------------------
def bisect_touch(picture: Picture, piece, atom: float, tol=1e-14) -> float | None:
    """Independent oracle: solve bound(atom position, t) = piece value by bisection."""
    s, d = piece
    e = picture.european_curve()

    def gap(t: float) -> float:
        u = atom * math.exp(-picture.rate * (picture.tau - t))
        return e.value(atom) - (s * u - d)

    lo, hi = 0.0, picture.tau
    if gap(lo) < 0:
        return 0.0
    if gap(hi) > 0:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def test_scenario_w_critical_time_closed_form(scenario_w_picture):
    t, idx = critical_time_piece(scenario_w_picture, (0.25, 0.15))
    assert idx == 1  # the atom at 2
    assert t == pytest.approx(LOG2_1P1, abs=1e-12)


def test_critical_time_bisection_cross_check(scenario_w_picture):
    pic = scenario_w_picture
    piece = (0.25, 0.15)
    times = [bisect_touch(pic, piece, float(a)) for a in pic.measure.x]
    times = [t for t in times if t is not None]
    assert times, "no touch found by the oracle"
    t_formula, _ = critical_time_piece(pic, piece)
    assert min(times) == pytest.approx(t_formula, abs=1e-10)


def test_critical_time_equal_intercept_example():
    # one atom at 2 with slope 0.5 beyond, piece with the same intercept:
    # candidate is tau + log2(s_E/s_A)
    from amerput import PLCurve

    measure = DiscreteMeasure(np.array([2.0]), np.array([1.0]))
    intrinsic = PLCurve(np.array([1.0]), np.array([0.0]), 0.0, 1.0)
    pic = Picture(spot=1.0, t_old=0.0, a_curve=intrinsic, measure=measure,
                  rate=LN2, maturity=1.0, tol=1e-9)
    t, idx = critical_time_piece(pic, (0.75, 1.0 - 1e-13))
    assert idx == 0
    assert t == pytest.approx(1.0 + math.log(0.5 / 0.75) / LN2, abs=1e-9)
    oracle = bisect_touch(pic, (0.75, 1.0), 2.0)
    assert oracle == pytest.approx(t, abs=1e-9)


def test_critical_time_picks_left_piece_on_kink_tie(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    crit = critical_time(pic, ext)
    assert crit is not None
    assert crit.piece_index == 1
    assert crit.atom_index == 1
    assert crit.t_crit == pytest.approx(LOG2_1P1, abs=1e-12)
    assert crit.k_crit == pytest.approx(1.1, abs=1e-12)


# -------------------------
# the embed step
# -------------------------
def test_scenario_w_embed_numbers(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    crit = critical_time(pic, ext)
    split = embed_step(pic, ext, crit)
    assert split.p_down == pytest.approx(0.275, abs=1e-12)
    assert split.s_down == pytest.approx(0.6, abs=1e-12)
    assert split.p_up == pytest.approx(0.725, abs=1e-12)
    assert split.s_up == pytest.approx(0.935 / 0.725, abs=1e-12)
    assert split.t_jump == pytest.approx(LOG2_1P1, abs=1e-12)

    m1, m2 = split.picture_down.measure, split.picture_up.measure
    assert m1.x.tolist() == [1.0, 2.0]
    assert m1.p.tolist() == pytest.approx([0.25 / 0.275, 0.025 / 0.275], abs=1e-12)
    assert m2.x.tolist() == [2.0, 3.0]
    assert m2.p.tolist() == pytest.approx([0.475 / 0.725, 0.25 / 0.725], abs=1e-12)


def test_measure_recombination(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    split = embed_step(pic, ext, critical_time(pic, ext))
    # p_d*mu1 + p_u*mu2 telescopes back to mu
    combined: dict[float, float] = {}
    for m, w in ((split.picture_down.measure, split.p_down),
                 (split.picture_up.measure, split.p_up)):
        for x, p in zip(m.x, m.p):
            combined[float(x)] = combined.get(float(x), 0.0) + w * float(p)
    assert sorted(combined) == pic.measure.x.tolist()
    for x, p in zip(pic.measure.x, pic.measure.p):
        assert combined[float(x)] == pytest.approx(float(p), abs=1e-14)


def test_european_recombination(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    split = embed_step(pic, ext, critical_time(pic, ext))
    e = pic.european_curve()
    e1 = split.picture_down.european_curve()
    e2 = split.picture_up.european_curve()
    factor = math.exp(-pic.rate * split.t_crit)
    for k in np.unique(np.concatenate((e.x, e1.x, e2.x, [0.4, 1.7, 2.4, 3.6]))):
        lhs = e.value(float(k))
        rhs = factor * (split.p_down * e1.value(float(k)) + split.p_up * e2.value(float(k)))
        assert lhs == pytest.approx(rhs, abs=1e-13)


def test_american_recombination(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    split = embed_step(pic, ext, critical_time(pic, ext))
    a = pic.a_curve
    a1 = split.picture_down.a_curve
    a2 = split.picture_up.a_curve
    factor = math.exp(-pic.rate * split.t_crit)
    pts = np.unique(np.concatenate((a.x, a1.x, a2.x, [0.5, 1.0, 1.2, 2.5, 4.0])))
    for k in pts:
        k = float(k)
        rhs = max(k - pic.spot,
                  factor * (split.p_down * a1.value(k) + split.p_up * a2.value(k)))
        assert a.value(k) == pytest.approx(rhs, abs=1e-13)


def test_split_probability_bracket(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    crit = critical_time(pic, ext)
    split = embed_step(pic, ext, crit)
    atom = float(pic.measure.x[crit.atom_index])
    assert pic.measure.prob_below(atom) < split.p_down <= pic.measure.prob_upto(atom)


def test_subpictures_means(scenario_w_picture):
    pic = scenario_w_picture
    ext = extend_american(pic)
    split = embed_step(pic, ext, critical_time(pic, ext))
    for sub in (split.picture_down, split.picture_up):
        grow = math.exp(pic.rate * sub.tau)
        assert sub.measure.mean == pytest.approx(sub.spot * grow, rel=1e-12)


# -------------------------
# terminal pictures
# -------------------------
def test_scenario_w_children_terminal(scenario_w_picture):
    pic = scenario_w_picture
    assert not is_terminal(pic)
    ext = extend_american(pic)
    split = embed_step(pic, ext, critical_time(pic, ext))
    assert is_terminal(split.picture_down)
    assert is_terminal(split.picture_up)


def test_lower_bound_market_is_terminal_at_root(scenario_w_market):
    # American priced exactly at max{E, (K - S0)_+}
    _, measure = __import__("amerput").complete_european(scenario_w_market)
    from amerput import european_from_measure

    e = european_from_measure(measure, LN2, 1.0)
    crossing = 1.0 / (1.0 - e.right_slope_at(1.0))  # where E's piece meets K-1... solved below
    target = max_curves(e, Picture(1.0, 0.0, e, measure, LN2, 1.0, 1e-9).intrinsic_curve())
    quotes = [(float(k), float(target.value(float(k)))) for k in np.unique(target.x)]
    market = scenario_w_market.with_quotes(american=quotes)
    pic, _ = root_picture(market)
    assert is_terminal(pic)


# -------------------------
# full build
# -------------------------
def test_scenario_w_build_structure(scenario_w_market):
    model, stats = build_model_detailed(scenario_w_market)
    assert stats.embed_steps == 1
    assert stats.maturity_steps == 2
    root = model.root
    kids = model.children(0)
    assert len(kids) == 2
    times = sorted({model.nodes[c].time for c in kids})
    assert times == pytest.approx([LOG2_1P1])
    prices = sorted(model.nodes[c].price for c in kids)
    assert prices == pytest.approx([0.6, 0.935 / 0.725], abs=1e-12)
    # leaves reproduce the atoms
    leaf_prices = sorted(model.nodes[i].price for i in model.leaves())
    assert leaf_prices == pytest.approx([1.0, 2.0, 2.0, 3.0], abs=1e-12)
    leaf_times = {model.nodes[i].time for i in model.leaves()}
    assert leaf_times == {1.0}


def test_leaf_distribution_matches_measure(scenario_w_market):
    model, _ = build_model_detailed(scenario_w_market)
    probs: dict[float, float] = {}
    for leaf in model.leaves():
        p = 1.0
        node = model.nodes[leaf]
        while node.parent is not None:
            p *= node.prob
            node = model.nodes[node.parent]
        probs[model.nodes[leaf].price] = probs.get(model.nodes[leaf].price, 0.0) + p
    assert probs[1.0] == pytest.approx(0.25, abs=1e-10)
    assert probs[2.0] == pytest.approx(0.5, abs=1e-10)
    assert probs[3.0] == pytest.approx(0.25, abs=1e-10)


def test_termination_bound(scenario_w_market):
    model, stats = build_model_detailed(scenario_w_market)
    assert stats.total_steps <= 2 * stats.n_regular_pieces + 1


def test_lower_bound_market_builds_single_layer(scenario_w_market):
    from amerput import complete_european, european_from_measure

    _, measure = complete_european(scenario_w_market)
    e = european_from_measure(measure, LN2, 1.0)
    pic0 = Picture(1.0, 0.0, e, measure, LN2, 1.0, 1e-9)
    target = max_curves(e, pic0.intrinsic_curve())
    quotes = [(float(k), float(target.value(float(k)))) for k in np.unique(target.x)]
    market = scenario_w_market.with_quotes(american=quotes)
    model, stats = build_model_detailed(market)
    assert stats.embed_steps == 0
    assert stats.maturity_steps == 1
    assert len(model.children(0)) == measure.x.size
    for c in model.children(0):
        assert model.nodes[c].time == 1.0


# -------------------------
# extremal models
# -------------------------
def test_extremal_models_shapes(scenario_w_market):
    lower, upper = extremal_models(scenario_w_market)
    assert len(lower.children(0)) == 3
    assert all(lower.nodes[c].time == 1.0 for c in lower.children(0))
    assert len(upper.children(0)) == 3
    for c in upper.children(0):
        assert upper.nodes[c].time == pytest.approx(1e-6)
        grand = upper.children(c)
        assert len(grand) == 1
        assert upper.nodes[grand[0]].time == 1.0
