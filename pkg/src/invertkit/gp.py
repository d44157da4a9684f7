"""Symbolic regression by genetic programming.

Trees are initialised with the grow method under a hard depth cap, selected
by tournament, and varied by subtree crossover and subtree mutation.  Fitness
is the mean squared error on a dataset; any invalid point makes it infinite.
:func:`multi_start_evolve` runs several independently seeded populations and
finishes with a larger run seeded by their elites.
"""

from __future__ import annotations

import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .expr import (
    BASIS,
    UNARY_OPS,
    Binary,
    Const,
    Expr,
    Unary,
    Var,
    depth,
    eval_all_valid,
    format_sexpr,
    iter_nodes,
    node_count,
    replace_at,
)

log = logging.getLogger(__name__)

OPERATOR_PROB = 0.7
VAR_PROB = 0.5
INTEGER_CONSTANTS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class GpConfig:
    population_size: int = 1000
    max_depth: int = 5
    basis: tuple = BASIS
    generations: int = 200
    target_cost: float = 1e-3
    tournament_size: int = 7
    crossover_rate: float = 0.8
    mutation_rate: float = 0.15
    reproduction_rate: float = 0.05
    const_range: tuple = (-5.0, 5.0)
    seed: int = 0
    restarts: int = 8
    elite_per_restart: int = 10
    elite_merge_population: int = 2000
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        object.__setattr__(self, "const_range", tuple(float(v) for v in self.const_range))
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not self.target_cost > 0:
            raise ValueError("target_cost must be positive")
        rates = (self.crossover_rate, self.mutation_rate, self.reproduction_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates) or abs(sum(rates) - 1.0) > 1e-12:
            raise ValueError("operator rates must lie in [0, 1] and sum to 1")
        if not 1 <= self.tournament_size:
            raise ValueError("tournament_size must be >= 1")
        unknown = set(self.basis) - set(BASIS)
        if unknown or not self.basis:
            raise ValueError(f"bad basis {sorted(unknown)}")
        lo, hi = self.const_range
        if not lo <= hi:
            raise ValueError("const_range must be ordered")
        if self.restarts < 1 or self.workers < 1:
            raise ValueError("restarts and workers must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["basis"] = list(self.basis)
        d["const_range"] = list(self.const_range)
        return d


@dataclass
class Dataset:
    """Input rows ``(m, n)`` and one output per row."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim == 1:
            self.inputs = self.inputs[:, None]
        self.outputs = np.asarray(self.outputs, dtype=float).reshape(-1)
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs differ in length")
        if len(self.outputs) < 2:
            raise ValueError("a dataset needs at least 2 rows")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ValueError("dataset contains non-finite values")
        self.columns = [np.ascontiguousarray(self.inputs[:, k]) for k in range(self.inputs.shape[1])]

    @property
    def arity(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return len(self.outputs)


@dataclass(frozen=True)
class Individual:
    expr: Expr
    cost: float
    size: int = field(default=0, compare=False)

    @classmethod
    def make(cls, expr: Expr, cost: float) -> "Individual":
        return cls(expr, cost, node_count(expr))

    def key(self) -> tuple:
        return (self.cost, self.size)


def cost(e: Expr, data: Dataset) -> float:
    """Mean squared error, or ``inf`` if any point is invalid or non-finite."""
    pred = eval_all_valid(e, data.columns)
    if pred is None:
        return math.inf
    err = pred - data.outputs
    with np.errstate(over="ignore", invalid="ignore"):
        mse = float(np.mean(err * err))
    return mse if math.isfinite(mse) else math.inf


def _terminal(rng: random.Random, arity: int, const_range) -> Expr:
    if rng.random() < VAR_PROB:
        return Var(rng.randrange(arity))
    # one uniform draw and each integer constant carry equal weight
    pick = rng.randrange(len(INTEGER_CONSTANTS) + 1)
    if pick == 0:
        return Const(rng.uniform(*const_range))
    return Const(float(INTEGER_CONSTANTS[pick - 1]))


def grow_tree(rng: random.Random, basis, max_depth: int, arity: int, const_range=(-5.0, 5.0)) -> Expr:
    """Grow a random tree of depth at most ``max_depth``.

    Below the cap each node is an operator with probability 0.7; at the cap
    it is always a terminal.
    """
    if max_depth <= 1 or rng.random() >= OPERATOR_PROB:
        return _terminal(rng, arity, const_range)
    op = rng.choice(basis)
    if op in UNARY_OPS:
        return Unary(op, grow_tree(rng, basis, max_depth - 1, arity, const_range))
    left = grow_tree(rng, basis, max_depth - 1, arity, const_range)
    right = grow_tree(rng, basis, max_depth - 1, arity, const_range)
    return Binary(op, left, right)


def tournament_select(rng: random.Random, population: list[Individual], k: int) -> Individual:
    """Best of ``k`` uniform draws with replacement.

    Lower cost wins, then smaller tree; remaining ties go to the earlier draw.
    """
    best = population[rng.randrange(len(population))]
    for _ in range(k - 1):
        cand = population[rng.randrange(len(population))]
        if cand.cost < best.cost or (cand.cost == best.cost and cand.size < best.size):
            best = cand
    return best


def subtree_crossover(rng: random.Random, a: Expr, b: Expr, max_depth: int) -> tuple[Expr, Expr]:
    """Swap uniformly chosen subtrees; an over-deep child reverts to its parent."""
    na = list(iter_nodes(a))
    nb = list(iter_nodes(b))
    pa, sa, _ = na[rng.randrange(len(na))]
    pb, sb, _ = nb[rng.randrange(len(nb))]
    c1 = replace_at(a, pa, sb)
    c2 = replace_at(b, pb, sa)
    if depth(c1) > max_depth:
        c1 = a
    if depth(c2) > max_depth:
        c2 = b
    return c1, c2


def subtree_mutation(rng: random.Random, a: Expr, config: GpConfig, arity: int) -> Expr:
    """Replace a uniformly chosen node by a freshly grown subtree that fits the depth cap."""
    nodes = list(iter_nodes(a))
    path, _, level = nodes[rng.randrange(len(nodes))]
    fresh = grow_tree(rng, config.basis, config.max_depth - level, arity, config.const_range)
    return replace_at(a, path, fresh)


@dataclass
class EvolveResult:
    best: Individual
    generations: int
    seed: int
    top: list[Individual]
    history: list[float]


class _Scorer:
    """Memoised fitness; populations are full of repeated trees."""

    def __init__(self, data: Dataset):
        self.data = data
        self.memo: dict[Expr, float] = {}

    def __call__(self, e: Expr) -> Individual:
        c = self.memo.get(e)
        if c is None:
            c = cost(e, self.data)
            if len(self.memo) > 200_000:
                self.memo.clear()
            self.memo[e] = c
        return Individual.make(e, c)


def _best(pop: list[Individual]) -> Individual:
    # min() keeps the first of equal keys, so ties go to the lower index
    return min(pop, key=Individual.key)


def _top_distinct(pop: list[Individual], n: int) -> list[Individual]:
    out, seen = [], set()
    for ind in sorted(pop, key=Individual.key):
        if ind.expr in seen:
            continue
        seen.add(ind.expr)
        out.append(ind)
        if len(out) == n:
            break
    return out


def _evolve(data: Dataset, config: GpConfig, seed: int, population_size: int, seeds: list[Expr] = ()) -> EvolveResult:
    rng = random.Random(seed)
    score = _Scorer(data)
    arity = data.arity
    pop = [score(e) for e in seeds][:population_size]
    seen = {ind.expr for ind in pop}
    attempts = 0
    while len(pop) < population_size:
        e = grow_tree(rng, config.basis, config.max_depth, arity, config.const_range)
        attempts += 1
        # distinct trees while the grow space allows it
        if e in seen and attempts < 20 * population_size:
            continue
        seen.add(e)
        pop.append(score(e))
    best = _best(pop)
    history = [best.cost]
    gen = 0
    cx = config.crossover_rate
    cx_mut = cx + config.mutation_rate
    k = min(config.tournament_size, population_size)
    while gen < config.generations and best.cost > config.target_cost:
        elite = _best(pop)
        nxt = [elite]
        members = {elite.expr}
        tries = 0
        while len(nxt) < population_size:
            tries += 1
            r = rng.random()
            if r < cx:
                a = tournament_select(rng, pop, k)
                b = tournament_select(rng, pop, k)
                kids = subtree_crossover(rng, a.expr, b.expr, config.max_depth)
            elif r < cx_mut:
                parent = tournament_select(rng, pop, k)
                kids = (subtree_mutation(rng, parent.expr, config, arity),)
            else:
                kids = (tournament_select(rng, pop, k).expr,)
            for child in kids:
                # duplicates are admitted only once fresh offspring become hard to find
                if len(nxt) < population_size and (child not in members or tries > 4 * population_size):
                    members.add(child)
                    nxt.append(score(child))
        pop = nxt
        gen += 1
        cand = _best(pop)
        if cand.key() < best.key():
            best = cand
        history.append(best.cost)
        if gen % 20 == 0:
            log.debug("seed %d gen %d best %.6g %s", seed, gen, best.cost, format_sexpr(best.expr, arity))
    return EvolveResult(best, gen, seed, _top_distinct(pop + [best], config.elite_per_restart), history)


def evolve(data: Dataset, config: GpConfig) -> Individual:
    """One generational run seeded with ``config.seed``; returns the best-ever individual."""
    return _evolve(data, config, config.seed, config.population_size).best


def _restart(args) -> EvolveResult:
    data, config, seed = args
    return _evolve(data, config, seed, config.population_size)


@dataclass
class RegressionReport:
    best: Individual
    arity: int
    generations_used: int
    seed: int
    restart_id: int | None
    restart_costs: list[float]
    reached_target: bool

    @property
    def sexpr(self) -> str:
        return format_sexpr(self.best.expr, self.arity)

    def to_dict(self) -> dict:
        return {
            "model": self.sexpr,
            "cost": self.best.cost,
            "generations_used": self.generations_used,
            "seed": self.seed,
            "restart_id": self.restart_id,
            "restart_costs": self.restart_costs,
            "node_count": self.best.size,
            "depth": depth(self.best.expr),
            "reached_target": self.reached_target,
        }


def run_restarts(data: Dataset, config: GpConfig) -> list[EvolveResult]:
    """Independent runs seeded ``seed + 0 ... seed + restarts - 1``, in restart order."""
    jobs = [(data, config, config.seed + i) for i in range(config.restarts)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_restart, jobs))
    return [_restart(j) for j in jobs]


def regress(data: Dataset, config: GpConfig) -> RegressionReport:
    """Multi-start run plus the merged-elite run, with provenance of the winner."""
    runs = run_restarts(data, config)
    elites: list[Expr] = []
    seen = set()
    for run in runs:
        for ind in [run.best] + run.top:
            if ind.expr not in seen:
                seen.add(ind.expr)
                elites.append(ind.expr)
    merge_seed = config.seed + config.restarts
    size = max(config.elite_merge_population, len(elites))
    final = _evolve(data, config, merge_seed, size, elites)
    # the merged run starts from every restart's best, so it can only match or improve
    best_run = min(range(len(runs)), key=lambda i: runs[i].best.key())
    if runs[best_run].best.key() <= final.best.key():
        best, restart_id, gens, seed = runs[best_run].best, best_run, runs[best_run].generations, runs[best_run].seed
    else:
        best, restart_id, gens, seed = final.best, None, final.generations, merge_seed
    return RegressionReport(
        best=best,
        arity=data.arity,
        generations_used=gens,
        seed=seed,
        restart_id=restart_id,
        restart_costs=[r.best.cost for r in runs],
        reached_target=best.cost <= config.target_cost,
    )


def multi_start_evolve(data: Dataset, config: GpConfig) -> Individual:
    return regress(data, config).best
