"""Dimension-2 Markov measures for suspension flows over subshifts of finite type."""

from .errors import (
    BadTheta,
    ConfigError,
    DegenerateLevelSet,
    Infeasible,
    NonPositiveFunction,
    NotMixing,
    NumericalFailure,
    RowSum,
    SftDimError,
    StrandedSymbol,
    SupportMismatch,
    ValidationError,
    WordTooShort,
)
from .markov import MarkovMeasure, shift_entropy, validate_markov
from .sft import Cycle, LocallyConstantFn, Sft, Word, block_recode, validate_sft
from .solver import SolveOptions, SolveResult, bowen_root, level_set_sample, solve_dimension_two
from .suspension import FlowStats, check_dim_two, flow_stats

__version__ = "0.1.0"

__all__ = [
    "BadTheta",
    "ConfigError",
    "Cycle",
    "DegenerateLevelSet",
    "FlowStats",
    "Infeasible",
    "LocallyConstantFn",
    "MarkovMeasure",
    "NonPositiveFunction",
    "NotMixing",
    "NumericalFailure",
    "RowSum",
    "Sft",
    "SftDimError",
    "SolveOptions",
    "SolveResult",
    "StrandedSymbol",
    "SupportMismatch",
    "ValidationError",
    "Word",
    "WordTooShort",
    "block_recode",
    "bowen_root",
    "check_dim_two",
    "flow_stats",
    "level_set_sample",
    "shift_entropy",
    "solve_dimension_two",
    "validate_markov",
    "validate_sft",
]
