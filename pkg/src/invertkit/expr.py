"""Expression trees over a fixed function basis.

Trees are built from four frozen node types and exchanged as prefix
S-expressions such as ``(* (sin (* 5 x)) (exp (neg (* x x))))``.  Three
evaluators share the same domain rules:

* :func:`eval_scalar` -- one point, ``math`` functions, ``None`` when invalid;
* :func:`eval_interval` -- natural interval extension with outward rounding,
  ``None`` when an operation's domain is violated;
* :func:`eval_array` -- vectorised over many points, NaN marks invalid points.

A point is invalid when any sub-evaluation takes ``log`` of a non-positive
value, divides by zero, hits ``tan`` within ``POLE_TOL`` of a pole, or
overflows.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .interval import Box, Interval, down, up

UNARY_OPS = ("exp", "log", "sin", "cos", "tan", "neg")
BINARY_OPS = ("+", "-", "*", "/")
BASIS = BINARY_OPS + UNARY_OPS

POLE_TOL = 1e-12

TWO_PI = 2 * math.pi
HALF_PI = math.pi / 2


@dataclass(frozen=True, slots=True)
class Const:
    value: float


@dataclass(frozen=True, slots=True)
class Var:
    index: int


@dataclass(frozen=True, slots=True)
class Unary:
    op: str
    child: "Expr"


@dataclass(frozen=True, slots=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]


@dataclass(frozen=True)
class ExprVector:
    """Multi-output model: one expression per output, shared input arity."""

    components: tuple
    arity: int

    def __post_init__(self):
        if not self.components:
            raise ValueError("a model needs at least one output")
        object.__setattr__(self, "components", tuple(self.components))
        for c in self.components:
            if max_var_index(c) >= self.arity:
                raise ValueError(f"variable index out of range for arity {self.arity}")

    @property
    def outputs(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)


class SexprError(ValueError):
    """Malformed S-expression text."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


# tree utilities


def children(e: Expr) -> tuple:
    t = type(e)
    if t is Unary:
        return (e.child,)
    if t is Binary:
        return (e.left, e.right)
    return ()


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in children(e))


def depth(e: Expr) -> int:
    """Number of levels; a lone terminal has depth 1."""
    cs = children(e)
    return 1 + max(depth(c) for c in cs) if cs else 1


def max_var_index(e: Expr) -> int:
    if type(e) is Var:
        return e.index
    return max((max_var_index(c) for c in children(e)), default=-1)


def iter_nodes(e: Expr, path: tuple = (), level: int = 0) -> Iterator[tuple[tuple, Expr, int]]:
    """Pre-order ``(path, subtree, level)`` triples; the root is at level 0."""
    yield path, e, level
    for i, c in enumerate(children(e)):
        yield from iter_nodes(c, path + (i,), level + 1)


def subtree_at(e: Expr, path: Sequence[int]) -> Expr:
    for i in path:
        e = children(e)[i]
    return e


def replace_at(e: Expr, path: Sequence[int], new: Expr) -> Expr:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if type(e) is Unary:
        return Unary(e.op, replace_at(e.child, rest, new))
    if i == 0:
        return Binary(e.op, replace_at(e.left, rest, new), e.right)
    return Binary(e.op, e.left, replace_at(e.right, rest, new))


# text format

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_VAR_NAMES = {"x": 0, "y": 1, "z": 2}
_INDEXED_VAR = re.compile(r"x(\d+)\Z")


def _tokenize(text: str) -> list[tuple[str, int]]:
    return [(m.group(), m.start()) for m in _TOKEN.finditer(text)]


def _atom(tok: str, pos: int, arity: int) -> Expr:
    idx = _VAR_NAMES.get(tok)
    if idx is None:
        m = _INDEXED_VAR.match(tok)
        if m:
            idx = int(m.group(1))
    if idx is not None:
        if idx >= arity:
            raise SexprError(f"variable {tok!r} out of range for arity {arity}", pos)
        return Var(idx)
    try:
        v = float(tok)
    except ValueError:
        raise SexprError(f"unknown atom {tok!r}", pos) from None
    if not math.isfinite(v):
        raise SexprError(f"non-finite constant {tok!r}", pos)
    return Const(v)


def _parse_at(tokens: list, i: int, arity: int) -> tuple[Expr, int]:
    if i >= len(tokens):
        raise SexprError("unexpected end of input", tokens[-1][1] if tokens else 0)
    tok, pos = tokens[i]
    if tok == ")":
        raise SexprError("unexpected ')'", pos)
    if tok != "(":
        return _atom(tok, pos, arity), i + 1
    if i + 1 >= len(tokens):
        raise SexprError("unbalanced parenthesis", pos)
    op, op_pos = tokens[i + 1]
    if op in ("(", ")"):
        raise SexprError("expected an operator", op_pos)
    if op not in BASIS:
        raise SexprError(f"unknown operator {op!r}", op_pos)
    args = []
    j = i + 2
    while True:
        if j >= len(tokens):
            raise SexprError("unbalanced parenthesis", pos)
        if tokens[j][0] == ")":
            break
        arg, j = _parse_at(tokens, j, arity)
        args.append(arg)
    want = 1 if op in UNARY_OPS else 2
    if len(args) != want:
        raise SexprError(f"operator {op!r} takes {want} operand(s), got {len(args)}", op_pos)
    node = Unary(op, args[0]) if want == 1 else Binary(op, args[0], args[1])
    return node, j + 1


def parse_many(text: str, arity: int) -> list[Expr]:
    """Parse a whitespace-separated sequence of top-level expressions."""
    if arity < 1:
        raise ValueError("arity must be >= 1")
    tokens = _tokenize(text)
    exprs = []
    i = 0
    while i < len(tokens):
        e, i = _parse_at(tokens, i, arity)
        exprs.append(e)
    if not exprs:
        raise SexprError("empty expression", 0)
    return exprs


def parse_sexpr(text: str, arity: int) -> Expr:
    if arity < 1:
        raise ValueError("arity must be >= 1")
    tokens = _tokenize(text)
    if not tokens:
        raise SexprError("empty expression", 0)
    e, i = _parse_at(tokens, 0, arity)
    if i < len(tokens):
        raise SexprError("trailing input after expression", tokens[i][1])
    return e


def parse_model(text: str, arity: int) -> ExprVector:
    """One expression per output, separated by whitespace or newlines."""
    return ExprVector(tuple(parse_many(text, arity)), arity)


def _format_const(v: float) -> str:
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def var_name(index: int, arity: int) -> str:
    if arity <= 3:
        return "xyz"[index]
    return f"x{index}"


def format_sexpr(e: Expr, arity: int | None = None) -> str:
    """Canonical single-space prefix text.

    Variables are written ``x, y, z`` when the arity is at most 3 and
    ``x0, x1, ...`` otherwise; the arity defaults to the highest variable
    index used.
    """
    if arity is None:
        arity = max(max_var_index(e) + 1, 1)
    t = type(e)
    if t is Var:
        return var_name(e.index, arity)
    if t is Const:
        return _format_const(e.value)
    if t is Unary:
        return f"({e.op} {format_sexpr(e.child, arity)})"
    return f"({e.op} {format_sexpr(e.left, arity)} {format_sexpr(e.right, arity)})"


def format_model(model: ExprVector) -> str:
    return "\n".join(format_sexpr(c, model.arity) for c in model) + "\n"


# scalar evaluation


def _s_exp(v):
    try:
        return math.exp(v)
    except OverflowError:
        return None


def _s_log(v):
    return math.log(v) if v > 0.0 else None


def _s_tan(v):
    if abs(math.cos(v)) < POLE_TOL:
        return None
    return math.tan(v)


_SCALAR_UNARY = {
    "exp": _s_exp,
    "log": _s_log,
    "sin": math.sin,
    "cos": math.cos,
    "tan": _s_tan,
    "neg": lambda v: -v,
}


def _scalar(e: Expr, pt) -> float | None:
    t = type(e)
    if t is Var:
        return pt[e.index]
    if t is Const:
        return e.value
    if t is Unary:
        v = _scalar(e.child, pt)
        if v is None:
            return None
        return _SCALAR_UNARY[e.op](v)
    a = _scalar(e.left, pt)
    if a is None:
        return None
    b = _scalar(e.right, pt)
    if b is None:
        return None
    op = e.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    else:
        if b == 0.0:
            return None
        r = a / b
    return r if math.isfinite(r) else None


def _check_arity(e, n: int) -> None:
    if isinstance(e, ExprVector):
        if e.arity != n:
            raise ValueError(f"model takes {e.arity} inputs, got {n}")
    elif max_var_index(e) >= n:
        raise ValueError(f"expression needs more than {n} inputs")


def eval_scalar(e, point: Sequence[float]):
    """Evaluate at one point; ``None`` when the point is outside the domain.

    For an :class:`ExprVector` the result is a tuple, or ``None`` if any
    component is invalid.
    """
    pt = tuple(float(v) for v in point)
    _check_arity(e, len(pt))
    if isinstance(e, ExprVector):
        out = []
        for c in e:
            v = _scalar(c, pt)
            if v is None:
                return None
            out.append(v)
        return tuple(out)
    return _scalar(e, pt)


# interval evaluation (natural extension, outward rounded)


def _slack(lo: float, hi: float) -> float:
    # float error of k*pi grows with |x|; widening only loosens the bound
    return POLE_TOL + 1e-15 * max(abs(lo), abs(hi))


def _hits(lo: float, hi: float, offset: float, period: float, s: float) -> bool:
    """Whether some ``offset + k*period`` lies in ``[lo - s, hi + s]``."""
    k = math.ceil((lo - s - offset) / period)
    return offset + k * period <= hi + s


def _periodic_range(f, lo, hi, max_at, min_at):
    if hi - lo >= TWO_PI:
        return (-1.0, 1.0)
    s = _slack(lo, hi)
    a, b = f(lo), f(hi)
    rlo = -1.0 if _hits(lo, hi, min_at, TWO_PI, s) else max(-1.0, down(min(a, b)))
    rhi = 1.0 if _hits(lo, hi, max_at, TWO_PI, s) else min(1.0, up(max(a, b)))
    return (rlo, rhi)


def _i_exp(lo, hi):
    try:
        rhi = up(math.exp(hi))
    except OverflowError:
        return None
    if not math.isfinite(rhi):
        return None
    return (max(0.0, down(math.exp(lo))), rhi)


def _i_log(lo, hi):
    if lo <= 0.0:
        return None
    return (down(math.log(lo)), up(math.log(hi)))


def _i_tan(lo, hi):
    if hi - lo >= math.pi or _hits(lo, hi, HALF_PI, math.pi, _slack(lo, hi)):
        return None
    rlo, rhi = down(math.tan(lo)), up(math.tan(hi))
    if not (math.isfinite(rlo) and math.isfinite(rhi)):
        return None
    return (rlo, rhi)


_INTERVAL_UNARY = {
    "exp": _i_exp,
    "log": _i_log,
    "sin": lambda lo, hi: _periodic_range(math.sin, lo, hi, HALF_PI, -HALF_PI),
    "cos": lambda lo, hi: _periodic_range(math.cos, lo, hi, 0.0, math.pi),
    "tan": _i_tan,
    "neg": lambda lo, hi: (-hi, -lo),
}


def _interval(e: Expr, box) -> tuple[float, float] | None:
    t = type(e)
    if t is Var:
        return box[e.index]
    if t is Const:
        return (e.value, e.value)
    if t is Unary:
        v = _interval(e.child, box)
        if v is None:
            return None
        return _INTERVAL_UNARY[e.op](v[0], v[1])
    a = _interval(e.left, box)
    if a is None:
        return None
    b = _interval(e.right, box)
    if b is None:
        return None
    alo, ahi = a
    blo, bhi = b
    op = e.op
    if op == "+":
        rlo, rhi = down(alo + blo), up(ahi + bhi)
    elif op == "-":
        rlo, rhi = down(alo - bhi), up(ahi - blo)
    elif op == "*":
        p = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
        rlo, rhi = down(min(p)), up(max(p))
    else:
        if blo <= 0.0 <= bhi:
            return None
        q = (alo / blo, alo / bhi, ahi / blo, ahi / bhi)
        rlo, rhi = down(min(q)), up(max(q))
    if rlo == -math.inf or rhi == math.inf:
        return None
    return (rlo, rhi)


def eval_interval(e, box):
    """Enclosure of the range of ``e`` over ``box``; ``None`` when invalid.

    Returns an :class:`Interval` for a single expression and a
    :class:`Box` (one axis per output) for an :class:`ExprVector`.
    """
    bx = box if isinstance(box, Box) else Box(box)
    _check_arity(e, len(bx))
    if isinstance(e, ExprVector):
        out = []
        for c in e:
            r = _interval(c, bx)
            if r is None:
                return None
            out.append(r)
        return tuple.__new__(Box, (tuple.__new__(Interval, r) for r in out))
    r = _interval(e, bx)
    return None if r is None else tuple.__new__(Interval, r)


def interval_image(model: ExprVector, box) -> list | None:
    """Raw ``[(lo, hi), ...]`` image of a model; no arity checks."""
    out = []
    for c in model.components:
        r = _interval(c, box)
        if r is None:
            return None
        out.append(r)
    return out


# vectorised evaluation

_ARRAY_UNARY = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "neg": np.negative,
}


def _array(e: Expr, cols, m: int) -> np.ndarray:
    t = type(e)
    if t is Var:
        return cols[e.index]
    if t is Const:
        return np.full(m, e.value)
    if t is Unary:
        v = _array(e.child, cols, m)
        op = e.op
        if op == "log":
            r = np.log(v)
            r[~(v > 0.0)] = np.nan
            return r
        if op == "tan":
            r = np.tan(v)
            r[~(np.abs(np.cos(v)) >= POLE_TOL)] = np.nan
            return r
        r = _ARRAY_UNARY[op](v)
        if op == "exp":
            r[r == np.inf] = np.nan
        return r
    a = _array(e.left, cols, m)
    b = _array(e.right, cols, m)
    op = e.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    else:
        r = a / b
        r[b == 0.0] = np.nan
    r[np.isinf(r)] = np.nan
    return r


def _strict(e: Expr, cols):
    # under np.errstate(all="raise"): any domain or overflow event raises
    t = type(e)
    if t is Var:
        return cols[e.index]
    if t is Const:
        return np.float64(e.value)
    if t is Unary:
        v = _strict(e.child, cols)
        op = e.op
        if op == "log":
            return np.log(v)
        if op == "tan":
            if np.any(np.abs(np.cos(v)) < POLE_TOL):
                raise FloatingPointError("tan pole")
            return np.tan(v)
        return _ARRAY_UNARY[op](v)
    a = _strict(e.left, cols)
    b = _strict(e.right, cols)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def eval_all_valid(e: Expr, cols) -> np.ndarray | None:
    """Values at every point given as per-variable columns, or ``None`` if any point is invalid."""
    try:
        with np.errstate(all="raise", under="ignore"):
            return _strict(e, cols)
    except FloatingPointError:
        return None


def eval_array(e, X) -> np.ndarray:
    """Evaluate at every row of ``X`` (shape ``(m, n)``); NaN marks invalid points.

    An :class:`ExprVector` gives shape ``(m, outputs)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    m, n = X.shape
    _check_arity(e, n)
    cols = [np.ascontiguousarray(X[:, k]) for k in range(n)]
    with np.errstate(all="ignore"):
        if isinstance(e, ExprVector):
            return np.column_stack([_array(c, cols, m) for c in e])
        r = _array(e, cols, m)
    return r.copy() if type(e) is Var else r
