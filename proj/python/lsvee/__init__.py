"""Python surface of the LSVEE library.

The heavy lifting lives in the compiled extension; this package re-exports the
operations most scripts need: environment generators, the exact oracle, and
the learner itself.
"""

from lsvee._core import (
    BudgetExceeded,
    ConfigError,
    FunctionClass,
    LayeredCdp,
    SizeGuardExceeded,
    ValidationFailed,
    brute_force_policy_search,
    compute_params,
    exact_values,
    load_cdp,
    load_function_class,
    make_disjoint_obs,
    make_lock,
    make_random_realizable,
    max_bellman_residual,
    policy_value,
    run_lsvee,
    save_cdp,
    save_function_class,
    validate_assumptions,
    value_prediction,
)

__all__ = [
    "BudgetExceeded",
    "ConfigError",
    "FunctionClass",
    "LayeredCdp",
    "SizeGuardExceeded",
    "ValidationFailed",
    "brute_force_policy_search",
    "compute_params",
    "exact_values",
    "load_cdp",
    "load_function_class",
    "make_disjoint_obs",
    "make_lock",
    "make_random_realizable",
    "max_bellman_residual",
    "policy_value",
    "run_lsvee",
    "save_cdp",
    "save_function_class",
    "validate_assumptions",
    "value_prediction",
]
