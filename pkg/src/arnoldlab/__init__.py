"""Special flows over irrational rotations under asymmetric logarithmic roofs.

Rotation numbers are continued fractions, circle points are fixed-point
integers with an error bound in ulps, and every comparison that decides a
verdict is ternary: it says Indeterminate rather than guess.
"""
from .circle import CirclePoint, TernaryOrder, d_k, orbit_spacing_check, rotate, set_membership
from .errors import (
    ArnoldLabError,
    BudgetError,
    DomainError,
    IndeterminateError,
    InsufficientDepthError,
    PrecisionError,
    PreconditionError,
    SingularEvaluationError,
)
from .flow import FlowPoint, FlowStep, flow_distance, special_return, swr_statistic
from .harness import SuiteConfig, SuiteReport, run_suite, sample_pairs
from .numeration import (
    ContinuedFraction,
    cf_expand,
    cf_from_quotients,
    classify_alpha,
    golden,
    make_D_alpha,
    ostrowski_expand,
    silver,
)
from .roof import RoofFunction, birkhoff_derivative_sum, birkhoff_sum, make_roof, roof_eval
from .shear import (
    classify_pair,
    large_shearing_check,
    shear_constants,
    shearing_preservation_check,
    small_shearing_search,
)

__version__ = "0.1.0"

__all__ = [
    "CirclePoint",
    "TernaryOrder",
    "d_k",
    "orbit_spacing_check",
    "rotate",
    "set_membership",
    "ArnoldLabError",
    "BudgetError",
    "DomainError",
    "IndeterminateError",
    "InsufficientDepthError",
    "PrecisionError",
    "PreconditionError",
    "SingularEvaluationError",
    "FlowPoint",
    "FlowStep",
    "flow_distance",
    "special_return",
    "swr_statistic",
    "SuiteConfig",
    "SuiteReport",
    "run_suite",
    "sample_pairs",
    "ContinuedFraction",
    "cf_expand",
    "cf_from_quotients",
    "classify_alpha",
    "golden",
    "make_D_alpha",
    "ostrowski_expand",
    "silver",
    "RoofFunction",
    "birkhoff_derivative_sum",
    "birkhoff_sum",
    "make_roof",
    "roof_eval",
    "classify_pair",
    "large_shearing_check",
    "shear_constants",
    "shearing_preservation_check",
    "small_shearing_search",
]
