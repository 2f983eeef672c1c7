"""Shared fixtures: the fully worked three-atom scenario used across the suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from amerput import DiscreteMeasure, Market, european_from_measure

LN2 = math.log(2.0)


@pytest.fixture
def scenario_w_measure() -> DiscreteMeasure:
    return DiscreteMeasure(np.array([1.0, 2.0, 3.0]), np.array([0.25, 0.5, 0.25]))


@pytest.fixture
def scenario_w_market(scenario_w_measure) -> Market:
    """Spot 1, rate ln 2, maturity 1, terminal law 1/4,1/2,1/4 on {1,2,3}.

    American quotes trace max{0, 0.25(K-0.6), K-1}: flat to 0.6, then the
    0.25-slope piece, ending on the bound at 17/15.
    """
    e_curve = european_from_measure(scenario_w_measure, LN2, 1.0)
    eq = [(float(k), float(e_curve.value(k))) for k in (1.0, 2.0, 3.0)]
    aq = [(0.6, 0.0), (1.0, 0.1), (17.0 / 15.0, 2.0 / 15.0)]
    return Market(spot=1.0, rate=LN2, maturity=1.0, european=eq, american=aq)


def direct_put_value(measure: DiscreteMeasure, rate: float, tau: float, strike: float) -> float:
    """Independent oracle: discounted expectation summed atom by atom."""
    total = 0.0
    for x, p in zip(measure.x, measure.p):
        total += p * max(strike - x, 0.0)
    return math.exp(-rate * tau) * total
