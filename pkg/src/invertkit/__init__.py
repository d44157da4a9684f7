"""Learn a closed-form model from input/output data, then invert a target performance box through it."""

from .expr import (
    Binary,
    Const,
    ExprVector,
    SexprError,
    Unary,
    Var,
    eval_array,
    eval_interval,
    eval_scalar,
    format_model,
    format_sexpr,
    parse_model,
    parse_sexpr,
)
from .interval import Box, Interval, Paving, bisect_all, intersect, volume
from .psi import InversionProblem, PavingIncomplete, PsiConfig, classify, invert, invert_decomposed, probability

__all__ = [
    "Binary",
    "Box",
    "Const",
    "ExprVector",
    "Interval",
    "InversionProblem",
    "Paving",
    "PavingIncomplete",
    "PsiConfig",
    "SexprError",
    "Unary",
    "Var",
    "bisect_all",
    "classify",
    "eval_array",
    "eval_interval",
    "eval_scalar",
    "format_model",
    "format_sexpr",
    "intersect",
    "invert",
    "invert_decomposed",
    "parse_model",
    "parse_sexpr",
    "probability",
    "volume",
]
