"""Quadratic population dynamics of sex-linked inheritance with temperature-dependent sex ratios."""

from gonodyn.analysis import (
    FixedPointRecord,
    LimitKind,
    LimitReport,
    OmegaOptions,
    PredictedLimit,
    Stability,
    classify_1d,
    classify_nd,
    enumerate_fixed_points,
    fixed_points_n2,
    iterate,
    omega_limit,
    orbit,
    predict_limit_U,
    predict_limit_n2,
)
from gonodyn.claims import ClaimReport, run_all, run_claim
from gonodyn.model import (
    FullState,
    HeredityTensor,
    MixingRate,
    NormalizedState,
    ReducedState,
    TemperatureParams,
    derive_rates,
    lift,
    normalize,
    reduce,
    validate_tensor,
)
from gonodyn.operators import (
    GonosomalOperator,
    QuadraticMap1D,
    UOperator,
    build_C1,
    build_C2,
    build_C3,
    build_U,
    n2_tensor,
)

__version__ = "0.1.0"
