"""Probabilistic set inversion by bisection.

Each candidate box ``X`` is mapped through the model's inclusion function to
an image box ``Y`` and scored by ``p(X) = vol(Y & P) / vol(Y)``.  Boxes with
``p = 1`` are accepted, ``p = 0`` rejected, and anything in between is split
along every axis until its volume drops below the resolution, at which point
it is kept as a boundary box.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .expr import ExprVector, format_model, interval_image, parse_model
from .interval import Box, Interval, Paving, bisect_all, volume

log = logging.getLogger(__name__)


class PavingIncomplete(RuntimeError):
    """Raised when ``max_boxes`` is exceeded; carries the partial paving."""

    def __init__(self, paving: Paving, processed: int):
        super().__init__(f"box budget exhausted after {processed} boxes")
        self.paving = paving
        self.processed = processed


@dataclass(frozen=True)
class InversionProblem:
    model: ExprVector
    R: Box
    P: Box

    def __post_init__(self):
        object.__setattr__(self, "R", Box(self.R))
        object.__setattr__(self, "P", Box(self.P))
        if self.model.arity != self.R.dim:
            raise ValueError(f"model takes {self.model.arity} inputs but R has dimension {self.R.dim}")
        if self.model.outputs != self.P.dim:
            raise ValueError(f"model has {self.model.outputs} outputs but P has dimension {self.P.dim}")
        if volume(self.R) <= 0.0:
            raise ValueError("R must have positive volume")

    @classmethod
    def from_text(cls, model_text: str, R, P) -> "InversionProblem":
        R = Box(R)
        return cls(parse_model(model_text, R.dim), R, Box(P))


@dataclass(frozen=True)
class PsiConfig:
    resolution: float
    max_boxes: int = 10_000_000
    workers: int = 1

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.max_boxes <= 0:
            raise ValueError("max_boxes must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_width(cls, width: float, dim: int, **kw) -> "PsiConfig":
        """Resolution given as a per-axis width ``w``; the volume threshold is ``w**dim``."""
        return cls(resolution=width**dim, **kw)


class Kind(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    BISECT = "bisect"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class Classification:
    kind: Kind
    probability: float | None = None


def _probability(Y, P) -> float:
    inside = True
    degenerate = False
    for (ylo, yhi), (plo, phi) in zip(Y, P):
        if ylo < plo or yhi > phi:
            inside = False
        if ylo == yhi:
            degenerate = True
    if inside:
        return 1.0
    widths = []
    for (ylo, yhi), (plo, phi) in zip(Y, P):
        lo, hi = max(ylo, plo), min(yhi, phi)
        if lo > hi:
            return 0.0
        widths.append(hi - lo)
    if degenerate:
        return 0.5
    if 0.0 in widths:
        return 0.0
    vi = vy = 1.0
    for w, (ylo, yhi) in zip(widths, Y):
        vi *= w
        vy *= yhi - ylo
    p = vi / vy
    # keep the strict-inequality cases strict after rounding
    if p >= 1.0:
        return math.nextafter(1.0, 0.0)
    if p <= 0.0:
        return 5e-324
    return p


def probability(problem: InversionProblem, X) -> float | None:
    """Fraction of the image box of ``X`` that lies in ``P``.

    Exactly 1 when the image is contained in ``P`` and exactly 0 when the
    intersection has zero measure; ``None`` when the image is undefined.
    A zero-volume image that straddles the border of ``P`` scores 0.5.
    """
    Y = interval_image(problem.model, Box(X))
    if Y is None:
        return None
    return _probability(Y, problem.P)


def classify(problem: InversionProblem, config: PsiConfig, X) -> Classification:
    X = Box(X)
    p = probability(problem, X)
    if p == 1.0:
        return Classification(Kind.ACCEPT, p)
    if p == 0.0:
        return Classification(Kind.REJECT, p)
    if volume(X) >= config.resolution:
        return Classification(Kind.BISECT, p)
    return Classification(Kind.BOUNDARY, p)


def _pave(model: ExprVector, P: Box, start: list, resolution: float, max_boxes: int):
    accepted, rejected, boundary = [], [], []
    stack = list(reversed(start))
    processed = 0
    while stack:
        X = stack.pop()
        processed += 1
        if processed > max_boxes:
            stack.append(X)
            return accepted, rejected, boundary, processed - 1, stack
        Y = interval_image(model, X)
        p = None if Y is None else _probability(Y, P)
        if p == 1.0:
            accepted.append(X)
        elif p == 0.0:
            rejected.append(X)
        elif volume(X) < resolution:
            boundary.append(X)
        else:
            try:
                kids = bisect_all(X)
            except ValueError:
                boundary.append(X)
                continue
            stack.extend(reversed(kids))
    return accepted, rejected, boundary, processed, []


def _paving(problem: InversionProblem, config: PsiConfig) -> Paving:
    return Paving(R=problem.R, P=problem.P, resolution=config.resolution, model=format_model(problem.model))


def _finish(paving: Paving, result) -> Paving:
    acc, rej, bnd, processed, pending = result
    paving.accepted.extend(acc)
    paving.rejected.extend(rej)
    paving.boundary.extend(bnd)
    if pending:
        # unexplored boxes are undecided
        paving.boundary.extend(pending)
        raise PavingIncomplete(paving, processed)
    return paving


def invert(problem: InversionProblem, config: PsiConfig) -> Paving:
    """Pave ``R`` depth-first, single-threaded."""
    result = _pave(problem.model, problem.P, [problem.R], config.resolution, config.max_boxes)
    return _finish(_paving(problem, config), result)


def dyadic_columns(R: Box, workers: int) -> list[list[Box]]:
    """Starting boxes for each worker's slab along axis 0.

    ``R`` is cut into the ``2**m`` by ``2**m`` ... grid reached after ``m``
    rounds of full bisection, with ``2**m`` the smallest power of two not
    below ``workers``.  Grid columns along axis 0 are dealt out in
    contiguous runs, so for a power-of-two worker count every slab has equal
    width.  Because each start box is a node of the single-worker bisection
    tree, the final point classification does not depend on ``workers``.
    """
    m = max(0, math.ceil(math.log2(workers)))
    cells = [R]
    for _ in range(m):
        cells = [k for c in cells for k in bisect_all(c)]
    per_col: dict[int, list[Box]] = {}
    cuts = sorted({c[0][0] for c in cells})
    for c in cells:
        per_col.setdefault(cuts.index(c[0][0]), []).append(c)
    cols = [per_col[i] for i in range(len(cuts))]
    base, extra = divmod(len(cols), workers)
    slabs, i = [], 0
    for w in range(workers):
        take = base + (1 if w < extra else 0)
        slabs.append([b for col in cols[i : i + take] for b in col])
        i += take
    return slabs


def _run_slab(args):
    model, P, start, resolution, max_boxes = args
    return _pave(model, P, start, resolution, max_boxes)


def invert_decomposed(problem: InversionProblem, config: PsiConfig) -> Paving:
    """Split ``R`` into slabs along axis 0 and pave each one in its own process.

    Results are merged in slab order.  ``max_boxes`` applies to each slab.
    """
    if config.workers == 1:
        return invert(problem, config)
    slabs = [s for s in dyadic_columns(problem.R, config.workers) if s]
    jobs = [(problem.model, problem.P, s, config.resolution, config.max_boxes) for s in slabs]
    with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
        results = list(pool.map(_run_slab, jobs))
    paving = _paving(problem, config)
    processed = 0
    pending = []
    for acc, rej, bnd, n, rest in results:
        paving.accepted.extend(acc)
        paving.rejected.extend(rej)
        paving.boundary.extend(bnd)
        processed += n
        pending.extend(rest)
    log.debug("decomposed inversion: %d slabs, %d boxes processed", len(slabs), processed)
    if pending:
        paving.boundary.extend(pending)
        raise PavingIncomplete(paving, processed)
    return paving


def box_from_spec(spec) -> Box:
    """Build a box from ``[[lo, hi], ...]`` or a flat ``[lo, hi]`` pair."""
    if len(spec) == 2 and all(isinstance(v, (int, float)) for v in spec):
        return Box([Interval(*spec)])
    return Box(spec)
