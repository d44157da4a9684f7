import math
import random

import pytest
from hypothesis import strategies as st

from invertkit.expr import BINARY_OPS, UNARY_OPS, Binary, Const, Unary, Var, depth
from invertkit.gp import grow_tree

WAVELET = "(* (sin (* 5 x)) (exp (neg (* x x))))"
PAPER_TREE = "(* (* (sin (* x 5)) 1)(exp (* (neg 1)(* x x))))"
SYSTEM_2D = "(+ (- (* x x) (* (* y y) (exp x))) (* x (exp y)))\n(- (* x (+ x y)) (* y y))"
SYSTEM_3D = "x\ny\nz\n(+ (- (* x x) (* y y)) (* z z))"


def wavelet(x):
    return math.sin(5 * x) * math.exp(-x * x)


def exprs(arity=1, max_leaves=12):
    leaves = st.one_of(
        st.builds(Var, st.integers(0, arity - 1)),
        st.builds(Const, st.floats(-5, 5, allow_nan=False).map(float)),
        st.builds(Const, st.integers(-5, 5).map(float)),
    )

    def extend(inner):
        return st.one_of(
            st.builds(Unary, st.sampled_from(UNARY_OPS), inner),
            st.builds(Binary, st.sampled_from(BINARY_OPS), inner, inner),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves).filter(lambda e: depth(e) <= 6)


def random_trees(seed, count, arity=1, max_depth=5):
    rng = random.Random(seed)
    basis = BINARY_OPS + UNARY_OPS
    return [grow_tree(rng, basis, max_depth, arity) for _ in range(count)]


@pytest.fixture
def rng():
    return random.Random(1234)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
