"""Consistency engine for co-terminal American and European put quotes."""

from .curves import (
    DEFAULT_TOL,
    DiscreteMeasure,
    Market,
    PLCurve,
    Quote,
    american_quote_curve,
    complete_american,
    complete_european,
    curve_from_quotes,
    curves_equal,
    european_from_measure,
    european_quote_curve,
    linear_combination,
    max_curves,
    measure_from_european,
    upper_envelope,
)
from .errors import (
    AmerputError,
    InconsistencyError,
    InputError,
    InternalError,
    NotApplicableError,
)

from .conditions import (
    ConditionReport,
    MarketCheck,
    Violation,
    ViolationKind,
    check_american,
    check_discrete_pairs,
    check_european,
    check_market,
    lf_equivalence_probe,
)
from .construction import (
    BuildStats,
    Picture,
    TreeModel,
    TreeNode,
    build_model,
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
from .verify import (
    ValueSurface,
    american_value_curve,
    dp_american,
    dp_surface,
    european_on_tree,
    exercise_monotonicity,
    martingale_check,
    random_model_oracle,
    reprice_report,
    terminal_law,
    validate_tree,
)
from .arbitrage import (
    ArbitrageStrategy,
    ExerciseRule,
    Instrument,
    Position,
    strategies_for_market,
    strategy_for_convexity,
    strategy_for_lf,
    strategy_for_lower_bound,
    strategy_for_monotonicity,
    strategy_for_upper_bound,
    verify_strategy,
)

__all__ = [
    "DEFAULT_TOL",
    "AmerputError",
    "ArbitrageStrategy",
    "BuildStats",
    "ConditionReport",
    "DiscreteMeasure",
    "ExerciseRule",
    "InconsistencyError",
    "InputError",
    "Instrument",
    "InternalError",
    "Market",
    "MarketCheck",
    "NotApplicableError",
    "PLCurve",
    "Picture",
    "Position",
    "Quote",
    "TreeModel",
    "TreeNode",
    "ValueSurface",
    "Violation",
    "ViolationKind",
    "american_quote_curve",
    "american_value_curve",
    "build_model",
    "build_model_detailed",
    "check_american",
    "check_discrete_pairs",
    "check_european",
    "check_market",
    "complete_american",
    "complete_european",
    "critical_time",
    "critical_time_piece",
    "curve_from_quotes",
    "curves_equal",
    "dp_american",
    "dp_surface",
    "embed_step",
    "european_from_measure",
    "european_on_tree",
    "european_quote_curve",
    "exercise_monotonicity",
    "extend_american",
    "extremal_models",
    "is_terminal",
    "lf_equivalence_probe",
    "linear_combination",
    "martingale_check",
    "max_curves",
    "measure_from_european",
    "random_model_oracle",
    "reprice_report",
    "root_picture",
    "strategies_for_market",
    "strategy_for_convexity",
    "strategy_for_lf",
    "strategy_for_lower_bound",
    "strategy_for_monotonicity",
    "strategy_for_upper_bound",
    "terminal_law",
    "upper_bound",
    "upper_envelope",
    "validate_tree",
    "verify_strategy",
]
