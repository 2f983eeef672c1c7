from __future__ import annotations

import math

import numpy as np
import pytest

from amerput import InputError
from amerput.conditions import check_market
from amerput.construction import TreeModel, TreeNode, build_model, build_model_detailed
from amerput.verify import (
    american_value_curve,
    dp_american,
    dp_surface,
    european_on_tree,
    exercise_monotonicity,
    martingale_check,
    path_probabilities,
    random_model_oracle,
    reprice_report,
    terminal_law,
    validate_tree,
)

from .conftest import LN2


def one_period_model() -> TreeModel:
    return TreeModel((
        TreeNode(0, 0.0, 100.0, None, 1.0),
        TreeNode(1, 1.0, 50.0, 0, 0.5),
        TreeNode(2, 1.0, 150.0, 0, 0.5),
    ))


# -------------------------
# dynamic programming
# -------------------------
def test_one_period_bellman():
    price, surface = dp_american(one_period_model(), rate=1e-12, strike=100.0)
    assert price == pytest.approx(25.0, abs=1e-9)
    assert not surface.exercise[0, 0]


def test_zero_strike_worthless():
    model, market = random_model_oracle(seed=5, depth=2, branching=3)
    price, _ = dp_american(model, market.rate, 1e-12)
    assert price <= 1e-10


def test_scenario_w_model_reprices_quotes(scenario_w_market):
    model = build_model(scenario_w_market)
    price, _ = dp_american(model, LN2, 1.0)
    assert price == pytest.approx(0.1, abs=1e-12)
    assert european_on_tree(model, LN2, 2.0) == pytest.approx(0.125, abs=1e-12)


def test_european_below_lowest_leaf_is_zero(scenario_w_market):
    model = build_model(scenario_w_market)
    assert european_on_tree(model, LN2, 0.5) == 0.0


def test_european_parity_asymptote(scenario_w_market):
    model = build_model(scenario_w_market)
    k = 1000.0
    assert european_on_tree(model, LN2, k) == pytest.approx(0.5 * k - 1.0, abs=1e-9)


def test_value_dominance(scenario_w_market):
    model = build_model(scenario_w_market)
    strikes = np.linspace(0.2, 4.0, 20)
    surface = dp_surface(model, LN2, strikes)
    for node in model.nodes:
        disc = math.exp(-LN2 * node.time)
        intrinsic = np.maximum(disc * (strikes - node.price), 0.0)
        kids = model.children(node.id)
        vals = surface.values[node.id]
        assert np.all(vals >= intrinsic - 1e-14)
        if kids:
            cont = sum(model.nodes[c].prob * surface.values[c] for c in kids)
            assert np.all(vals >= cont - 1e-14)
            assert np.all(np.isclose(vals, np.maximum(intrinsic, cont), atol=1e-14))


def test_between_jump_node_insertion_is_neutral(scenario_w_market):
    model = build_model(scenario_w_market)
    # splice a deterministic growth node halfway along the first child edge
    child = model.nodes[model.children(0)[0]]
    t_mid = 0.5 * child.time
    mid_price = model.root.price * math.exp(LN2 * t_mid)
    relabel = {0: 0}
    nodes = [TreeNode(0, 0.0, model.root.price, None, 1.0),
             TreeNode(1, t_mid, mid_price, 0, child.prob)]
    for n in model.nodes[1:]:
        new_id = len(nodes)
        relabel[n.id] = new_id
        parent, prob = relabel[n.parent], n.prob
        if n.id == child.id:
            parent, prob = 1, 1.0
        nodes.append(TreeNode(new_id, n.time, n.price, parent, prob))
    spliced = TreeModel(tuple(nodes))
    for k in (0.8, 1.0, 1.5, 2.5):
        v0, _ = dp_american(model, LN2, k)
        v1, _ = dp_american(spliced, LN2, k)
        assert v1 == pytest.approx(v0, abs=1e-14)


def test_malformed_tree_rejected():
    with pytest.raises(InputError):
        validate_tree(TreeModel((
            TreeNode(0, 0.0, 100.0, None, 1.0),
            TreeNode(1, 1.0, 50.0, 0, 0.4),
            TreeNode(2, 1.0, 150.0, 0, 0.4),   # probabilities sum to 0.8
        )))
    with pytest.raises(InputError):
        validate_tree(TreeModel((
            TreeNode(0, 0.0, 100.0, None, 1.0),
            TreeNode(1, 0.5, 100.0, 0, 1.0),
            TreeNode(2, 1.0, 100.0, 1, 0.5),
            TreeNode(3, 0.7, 100.0, 1, 0.5),   # leaves at different times
        )))


# -------------------------
# martingale audit
# -------------------------
def test_constructed_model_is_martingale(scenario_w_market):
    model = build_model(scenario_w_market)
    rep = martingale_check(model, LN2)
    assert rep.passed
    assert rep.max_residual <= 1e-12


def test_hand_built_failure_detected():
    model = TreeModel((
        TreeNode(0, 0.0, 100.0, None, 1.0),
        TreeNode(1, 1.0, 50.0, 0, 0.5),
        TreeNode(2, 1.0, 140.0, 0, 0.5),
    ))
    rep = martingale_check(model, 1e-12)
    assert not rep.passed
    assert rep.max_residual == pytest.approx(5.0 / 100.0, rel=1e-9)
    assert rep.worst_node == 0


def test_single_node_tree_passes_vacuously():
    model = TreeModel((TreeNode(0, 0.0, 100.0, None, 1.0),))
    rep = martingale_check(model, 0.05)
    assert rep.passed and rep.max_residual == 0.0


# -------------------------
# reprice reports
# -------------------------
def test_scenario_w_reprice(scenario_w_market):
    model = build_model(scenario_w_market)
    rep = reprice_report(model, scenario_w_market, tol=1e-9)
    assert rep.passed
    assert rep.max_error <= 1e-12


def test_lower_extremal_misprices_richer_american(scenario_w_market):
    from amerput.construction import extremal_models

    lower, _ = extremal_models(scenario_w_market)
    rep = reprice_report(lower, scenario_w_market, tol=1e-9)
    assert not rep.passed
    bad = [k for k, e in rep.american_errors if abs(e) > 1e-9]
    assert 1.0 in bad  # A(1) = 0.1 exceeds the bound max{E(1), 0} = 0.05


def test_perturbed_probability_localizes(scenario_w_market):
    model = build_model(scenario_w_market)
    nodes = list(model.nodes)
    kids = model.children(0)
    a, b = kids
    nodes[a] = TreeNode(a, nodes[a].time, nodes[a].price, 0, nodes[a].prob + 0.01)
    nodes[b] = TreeNode(b, nodes[b].time, nodes[b].price, 0, nodes[b].prob - 0.01)
    bad_model = TreeModel(tuple(nodes))
    rep = reprice_report(bad_model, scenario_w_market, tol=1e-9)
    assert not rep.passed


# -------------------------
# the random oracle
# -------------------------
def test_oracle_structure_and_quotes():
    model, market = random_model_oracle(seed=42, depth=3, branching=3)
    validate_tree(model)
    assert martingale_check(model, market.rate).passed
    # quotes reproduce the exact curves at their own strikes
    rep = reprice_report(model, market, tol=1e-10)
    assert rep.passed, rep.max_error


def test_oracle_depth_one_is_lower_bound_market():
    model, market = random_model_oracle(seed=11, depth=1, branching=4)
    law = terminal_law(model)
    disc = market.discount
    e_vals = {q.strike: q.price for q in market.european}
    for q in market.american:
        euro = sum(p * max(q.strike - x, 0.0) for x, p in zip(law.x, law.p)) * disc
        assert q.price == pytest.approx(max(euro, q.strike - market.spot, 0.0), abs=1e-10)


def test_oracle_markets_pass_checks():
    for seed in range(12):
        _, market = random_model_oracle(seed=seed, depth=3, branching=3)
        chk = check_market(market)
        assert chk.passed, (seed, [str(v) for v in chk.violations])


def test_oracle_roundtrip_small():
    for seed in (0, 1, 2, 3, 4):
        _, market = random_model_oracle(seed=seed, depth=2, branching=3)
        rebuilt, stats = build_model_detailed(market)
        assert martingale_check(rebuilt, market.rate).passed
        rep = reprice_report(rebuilt, market, tol=1e-8)
        assert rep.passed, (seed, rep.max_error)
        assert stats.total_steps <= 2 * stats.n_regular_pieces + 1


def test_american_value_curve_matches_scalar_dp():
    model, market = random_model_oracle(seed=9, depth=3, branching=3)
    curve = american_value_curve(model, market.rate)
    for k in np.linspace(1.0, 800.0, 23):
        scalar, _ = dp_american(model, market.rate, float(k))
        assert curve.value(float(k)) == pytest.approx(scalar, abs=1e-9)


# -------------------------
# exercise monotonicity
# -------------------------
def test_exercise_sets_upward_closed(scenario_w_market):
    model = build_model(scenario_w_market)
    strikes = np.array([0.6, 1.0, 17.0 / 15.0, 2.0])
    surface = dp_surface(model, LN2, strikes)
    ok, bad = exercise_monotonicity(model, surface)
    assert ok, bad


def test_one_period_exercise_set():
    model = one_period_model()
    strikes = np.linspace(50.0, 400.0, 36)
    surface = dp_surface(model, 1e-12, strikes)
    ok, _ = exercise_monotonicity(model, surface)
    assert ok
    flags = surface.exercise[0]
    # at the root, exercising K pays K-100 against a continuation of (K-50)/2
    # below K=150: exercise wins from K=150 on
    expected = strikes - 100.0 >= np.minimum(strikes - 50.0, 100.0) / 2.0 + \
        np.maximum(strikes - 150.0, 0.0) / 2.0 - 1e-9
    assert np.array_equal(flags, expected)


def test_exercise_monotone_random_models():
    for seed in range(8):
        model, market = random_model_oracle(seed=seed, depth=3, branching=4)
        strikes = np.linspace(market.spot * 0.2, market.spot * 5.0, 20)
        surface = dp_surface(model, market.rate, strikes)
        ok, bad = exercise_monotonicity(model, surface)
        assert ok, (seed, bad)
