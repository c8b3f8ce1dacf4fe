"""Exhaustive search for the cheapest piecewise-constant policy of one region.

The search walks the tree of interval choices depth first, carrying the
epidemic state and the running implementation and non-compliance sums down
each branch so no leaf is simulated from day 0. The deepest levels of each
branch are expanded together as numpy arrays, which keeps the leaf-by-leaf
arithmetic identical to a scalar walk while making the full 3**14 France
search affordable in pure Python.

The impact term needs the recovered fraction at the cost horizon, so every
leaf is also run forward, uncontrolled, from the policy end to the horizon.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .cost import CostBreakdown, CostWeights, breakdown, combine, tail_terms, total_cost
from .epidemic import SirParams, SirState, check_state, euler, euler_inplace, herd_threshold, simulate_single
from .errors import PreconditionError, SearchSpaceTooLarge
from .policy import IntensitySet, PolicySchedule, count_schedules, enumerate_schedules

log = logging.getLogger(__name__)

BLOCK_LEAVES = 1 << 16
ORACLE_LIMIT = 10**5
HERD_CHECKS = ("policy_end", "horizon")


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings.

    ``cost_horizon`` is the normalisation horizon ``T`` of the cost (defaults
    to ``horizon``). ``herd_check`` selects where the herd constraint
    ``s > 1/R0 - epsilon`` is tested: at the policy end ``t0`` or at the
    simulation horizon.
    """

    intensity_set: IntensitySet
    dt: int
    t0: int
    horizon: int = 1500
    epsilon: float = 0.01
    weights: CostWeights = field(default_factory=lambda: CostWeights(0.0, 1.0))
    enforce_herd: bool = True
    cost_horizon: int | None = None
    parent: PolicySchedule | None = None
    herd_check: str = "policy_end"
    prune: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise PreconditionError("epsilon must be positive")
        if self.dt < 1 or self.t0 < 0 or self.t0 % self.dt:
            raise PreconditionError(f"policy end {self.t0} is not a multiple of interval {self.dt}")
        if self.t0 > self.horizon:
            raise PreconditionError(f"policy end {self.t0} is after horizon {self.horizon}")
        if self.T < self.t0 or self.T < self.dt:
            raise PreconditionError(f"cost horizon {self.T} is shorter than the policy period")
        if self.herd_check not in HERD_CHECKS:
            raise PreconditionError(f"herd_check must be one of {HERD_CHECKS}")
        if self.parent is None and not self.weights.is_top_layer:
            raise PreconditionError("weights leave a non-compliance share but no parent schedule is given")
        if self.parent is not None and self.parent.dt != self.dt:
            raise PreconditionError("parent schedule must use the same interval length")

    @property
    def T(self) -> int:
        return self.horizon if self.cost_horizon is None else self.cost_horizon

    @property
    def n_intervals(self) -> int:
        return self.t0 // self.dt

    @property
    def search_size(self) -> int:
        return count_schedules(self.intensity_set, self.dt, self.t0)


@dataclass
class OptimizerResult:
    best_schedule: PolicySchedule | None
    best_cost: CostBreakdown | None
    s_final: float | None
    explored: int
    feasible: bool
    s_policy_end: float | None = None
    pruned: int = 0


@dataclass
class _Block:
    """Every leaf below one search prefix, in lexicographic order."""

    prefix: tuple[float, ...]
    s_end: np.ndarray       # s at the policy end
    s_final: np.ndarray     # s at the simulation horizon
    r_T: np.ndarray         # r at the cost horizon
    impl: np.ndarray
    nc: np.ndarray


def _parent_levels(config: OptimizerConfig) -> list[float] | None:
    if config.parent is None:
        return None
    return [config.parent.value_at(k * config.dt) for k in range(config.n_intervals)]


def _advance(s, i, r, alpha, params, days):
    if isinstance(s, np.ndarray):
        s, i, r = s.copy(), i.copy(), r.copy()
        euler_inplace(s, i, r, alpha, params.beta, params.gamma, days)
        return s, i, r
    for _ in range(days):
        s, i, r = euler(s, i, r, alpha, params.beta, params.gamma)
    return s, i, r


def _free_run(s, i, r, params, start, T, horizon):
    """Run arrays with u = 1 from day ``start``; return (r at T, s at horizon)."""
    s, i, r = s.copy(), i.copy(), r.copy()
    marks = sorted({T, horizon})
    out = {}
    day = start
    for m in marks:
        euler_inplace(s, i, r, 1.0, params.beta, params.gamma, m - day)
        day = m
        out[m] = (s.copy(), r.copy())
    return out[T][1], out[horizon][0]


def _expand_block(state, impl, nc, level, prefix, params, config, levels, pis, frac, tail) -> _Block:
    s = np.array([state[0]])
    i = np.array([state[1]])
    r = np.array([state[2]])
    impl = np.array([impl])
    nc = np.array([nc])
    n = config.n_intervals
    for k in range(level, n):
        parts = []
        for a in levels:
            ss, ii, rr = _advance(s, i, r, a, params, config.dt)
            cost_i = impl + frac * (1.0 - a)
            cost_n = nc + frac * (a - pis[k]) ** 2 if pis is not None else nc
            parts.append((ss, ii, rr, cost_i, cost_n))
        s, i, r, impl, nc = (np.stack(col, axis=1).ravel() for col in zip(*parts))
    impl = impl + tail[0]
    nc = nc + tail[1]
    r_T, s_h = _free_run(s, i, r, params, config.t0, config.T, config.horizon)
    return _Block(prefix, s, s_h, r_T, impl, nc)


def iter_blocks(initial: SirState, params: SirParams, config: OptimizerConfig,
                first: tuple[float, ...] = (), best=None) -> Iterator[_Block]:
    """Depth-first walk yielding one :class:`_Block` per search prefix.

    ``first`` pins the leading intensities (used to split work). ``best``
    is an optional callable returning the incumbent total; when
    ``config.prune`` is set, branches whose sunk implementation and
    non-compliance cost already exceeds it are skipped.
    """
    levels = config.intensity_set.levels
    n = config.n_intervals
    pis = _parent_levels(config)
    frac = config.dt / config.T
    tail = tail_terms(config.t0, config.T, config.parent)
    w = config.weights
    depth = 0
    while depth < n and len(levels) ** (depth + 1) <= BLOCK_LEAVES:
        depth += 1
    split = max(n - depth, len(first))

    def walk(level, state, impl, nc, prefix):
        if config.prune and best is not None and w.kappa * impl + w.compliance * nc > best():
            yield len(levels) ** (n - level)
            return
        if level == split:
            yield _expand_block(state, impl, nc, level, prefix, params, config, levels, pis, frac, tail)
            return
        choices = (first[level],) if level < len(first) else levels
        for a in choices:
            nxt = _advance(*state, a, params, config.dt)
            ci = impl + frac * (1.0 - a)
            cn = nc + frac * (a - pis[level]) ** 2 if pis is not None else nc
            yield from walk(level + 1, nxt, ci, cn, prefix + (a,))

    yield from walk(0, tuple(map(float, initial)), 0.0, 0.0, ())


def _decode(index: int, width: int, levels) -> tuple[float, ...]:
    digits = []
    base = len(levels)
    for _ in range(width):
        index, d = divmod(index, base)
        digits.append(levels[d])
    return tuple(reversed(digits))


def _feasible_mask(block: _Block, config: OptimizerConfig, threshold: float) -> np.ndarray:
    if not config.enforce_herd:
        return np.ones(block.s_end.shape, dtype=bool)
    s = block.s_end if config.herd_check == "policy_end" else block.s_final
    return s > threshold - config.epsilon


def _search(initial, params, config, first=()):
    """Serial search; returns (best_total, schedule, block, j, explored, pruned)."""
    threshold = herd_threshold(params) if config.enforce_herd else 0.0
    levels = config.intensity_set.levels
    state = {"total": math.inf, "hit": None, "explored": 0, "pruned": 0}

    for block in iter_blocks(initial, params, config, first, best=lambda: state["total"]):
        if isinstance(block, int):
            state["pruned"] += block
            continue
        state["explored"] += block.impl.size
        feasible = _feasible_mask(block, config, threshold)
        if not feasible.any():
            continue
        totals = combine(config.weights, block.impl, block.r_T, block.nc)
        totals = np.where(feasible, totals, np.inf)
        j = int(np.argmin(totals))
        # strict improvement keeps the lexicographically first minimiser
        if totals[j] < state["total"]:
            state["total"] = float(totals[j])
            state["hit"] = (block, j)
    if state["hit"] is None:
        return math.inf, None, state["explored"], state["pruned"]
    block, j = state["hit"]
    width = config.n_intervals - len(block.prefix)
    sched = PolicySchedule(block.prefix + _decode(j, width, levels), config.dt, config.t0)
    leaf = dict(
        cost=breakdown(config.weights, float(block.impl[j]), float(block.r_T[j]), float(block.nc[j])),
        s_final=float(block.s_final[j]), s_end=float(block.s_end[j]))
    return state["total"], (sched, leaf), state["explored"], state["pruned"]


def _search_task(args):
    return _search(*args)


def optimize(initial: SirState, params: SirParams, config: OptimizerConfig, workers: int = 1,
             max_leaves: int | None = None) -> OptimizerResult:
    """Minimise the total cost over every schedule on the interval grid.

    Ties are broken in favour of the lexicographically first schedule
    (strictest-earliest, since levels ascend). With ``workers > 1`` the
    first interval's choices are searched in separate processes and merged
    in the same order, so the answer does not depend on ``workers``.
    """
    check_state(initial)
    size = config.search_size
    if max_leaves is not None and size > max_leaves:
        raise SearchSpaceTooLarge(size, max_leaves)
    levels = config.intensity_set.levels
    if workers > 1 and config.n_intervals > 0:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_search_task, [(initial, params, config, (a,)) for a in levels]))
    else:
        parts = [_search(initial, params, config)]
    explored = sum(p[2] for p in parts)
    pruned = sum(p[3] for p in parts)
    best = None
    for total, hit, _, _ in parts:
        if hit is not None and (best is None or total < best[0]):
            best = (total, hit)
    if best is None:
        log.info("no schedule satisfies the herd constraint (%d explored)", explored)
        return OptimizerResult(None, None, None, explored, False, pruned=pruned)
    sched, leaf = best[1]
    return OptimizerResult(sched, leaf["cost"], leaf["s_final"], explored, True,
                           s_policy_end=leaf["s_end"], pruned=pruned)


def evaluate_schedule(initial: SirState, params: SirParams, schedule: PolicySchedule,
                      config: OptimizerConfig) -> tuple[CostBreakdown, float]:
    """Simulate ``schedule`` from day 0 and score it; no search."""
    traj = simulate_single(initial, params, schedule, max(config.T, config.horizon))
    cost = total_cost(schedule, config.parent, config.weights, config.T, float(traj.r[config.T]))
    return cost, float(traj.s[config.horizon])


def brute_force_oracle(initial: SirState, params: SirParams, config: OptimizerConfig) -> OptimizerResult:
    """Score every schedule independently from day 0 and keep the first minimum."""
    size = config.search_size
    if size > ORACLE_LIMIT:
        raise SearchSpaceTooLarge(size, ORACLE_LIMIT)
    check_state(initial)
    threshold = herd_threshold(params) if config.enforce_herd else 0.0
    horizon = max(config.T, config.horizon)
    best = None
    explored = 0
    for sched in enumerate_schedules(config.intensity_set, config.dt, config.t0):
        traj = simulate_single(initial, params, sched, horizon)
        explored += 1
        s_end = float(traj.s[config.t0])
        s_final = float(traj.s[config.horizon])
        if config.enforce_herd:
            s_check = s_end if config.herd_check == "policy_end" else s_final
            if not s_check > threshold - config.epsilon:
                continue
        cost = total_cost(sched, config.parent, config.weights, config.T, float(traj.r[config.T]))
        if best is None or cost.total < best[1].total:
            best = (sched, cost, s_final, s_end)
    if best is None:
        return OptimizerResult(None, None, None, explored, False)
    sched, cost, s_final, s_end = best
    return OptimizerResult(sched, cost, s_final, explored, True, s_policy_end=s_end)


def with_alpha_max(config: OptimizerConfig, alpha_max: float) -> OptimizerConfig:
    return replace(config, intensity_set=IntensitySet.from_alpha_max(alpha_max))
