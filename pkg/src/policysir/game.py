"""Hierarchical per-interval best-response game over the network SIR model.

Regions form a forest (e.g. state -> counties). Only leaves carry epidemic
state; they are the rows and columns of the excitation matrix. At the start
of every decision interval the top layer picks first, then each lower
layer, every region responding to its parent's fresh choice while its
same-layer peers are assumed to keep their previous policies. The leaves'
choices then drive the dynamics for ``dt`` days.

A candidate intensity is scored by holding it fixed from the current day to
the horizon ``T`` (all other leaves frozen) and reading the recovered
fraction at ``T``. For a non-leaf region the candidate is applied to every
leaf below it and the impact is the population-weighted recovered fraction
of those leaves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cost import CostBreakdown, CostWeights, interval_cost, total_cost
from .epidemic import SirParams, SirState, Trajectory, check_excitation, check_state, network_step
from .errors import PreconditionError
from .policy import IntensitySet, PolicySchedule


@dataclass
class RegionNode:
    id: str
    population: float
    weights: CostWeights
    initial: SirState | None = None
    parent: str | None = None
    children: list[str] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children


class RegionTree:
    """Validated forest of :class:`RegionNode` with a fixed leaf order."""

    def __init__(self, nodes: Sequence[RegionNode]):
        self.nodes: dict[str, RegionNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise PreconditionError(f"duplicate region id {node.id!r}")
            self.nodes[node.id] = node
        # children lists may be given explicitly or derived from parent links
        for node in nodes:
            if node.parent is not None:
                if node.parent not in self.nodes:
                    raise PreconditionError(f"region {node.id!r} has unknown parent {node.parent!r}")
                siblings = self.nodes[node.parent].children
                if node.id not in siblings:
                    siblings.append(node.id)
        for node in self.nodes.values():
            for c in node.children:
                if c not in self.nodes or self.nodes[c].parent != node.id:
                    raise PreconditionError(f"child link {node.id!r} -> {c!r} has no matching parent link")
        self.depth: dict[str, int] = {}
        for nid in self.nodes:
            seen = set()
            cur, d = nid, 0
            while self.nodes[cur].parent is not None:
                if cur in seen:
                    raise PreconditionError(f"cycle through region {cur!r}")
                seen.add(cur)
                cur = self.nodes[cur].parent
                d += 1
            self.depth[nid] = d
        self.leaves = [n.id for n in nodes if self.nodes[n.id].is_leaf]
        self.leaf_index = {lid: k for k, lid in enumerate(self.leaves)}
        for node in self.nodes.values():
            if node.is_leaf:
                if node.initial is None:
                    raise PreconditionError(f"leaf region {node.id!r} has no initial state")
                check_state(node.initial)
            if node.parent is None and not node.weights.is_top_layer:
                raise PreconditionError(f"top-layer region {node.id!r} must have kappa + eta = 1")
            if node.population <= 0:
                raise PreconditionError(f"region {node.id!r} has non-positive population")
        self.order = sorted(self.nodes, key=lambda nid: self.depth[nid])  # stable: file order per layer

    def __getitem__(self, nid: str) -> RegionNode:
        return self.nodes[nid]

    @property
    def layers(self) -> list[list[str]]:
        out: list[list[str]] = []
        for nid in self.order:
            d = self.depth[nid]
            while len(out) <= d:
                out.append([])
            out[d].append(nid)
        return out

    def leaves_under(self, nid: str) -> list[str]:
        node = self.nodes[nid]
        if node.is_leaf:
            return [nid]
        out: list[str] = []
        for c in node.children:
            out.extend(self.leaves_under(c))
        return sorted(out, key=self.leaf_index.__getitem__)


def aggregate_parent_state(tree: RegionTree, nid: str, leaf_states: Mapping[str, Sequence[float]]) -> SirState:
    """Population-weighted mean of the (s, i, r) of every leaf below ``nid``."""
    leaves = tree.leaves_under(nid)
    pops = np.array([tree[lid].population for lid in leaves], dtype=float)
    total = pops.sum()
    if total <= 0:
        raise PreconditionError(f"region {nid!r} has zero total population")
    states = np.array([leaf_states[lid] for lid in leaves], dtype=float)
    s, i, r = (pops @ states) / total
    return SirState(float(s), float(i), float(r))


@dataclass
class GameContext:
    """Frozen information a region sees when choosing for one interval."""

    tree: RegionTree
    K: np.ndarray
    params: SirParams
    levels: tuple[float, ...]
    dt: int
    T: int
    day: int
    states: np.ndarray          # (n_leaves, 3) at ``day``
    policies: dict[str, float]  # previous-interval intensity of every region


@dataclass
class Candidate:
    alpha: float
    cost: CostBreakdown


def _impact_at_T(ctx: GameContext, nid: str) -> np.ndarray:
    """Recovered fraction at ``T`` for each candidate level, held from ``ctx.day``."""
    tree = ctx.tree
    n_leaves = len(tree.leaves)
    levels = np.array(ctx.levels)
    alphas = np.tile([ctx.policies[lid] for lid in tree.leaves], (len(levels), 1)).astype(float)
    cols = [tree.leaf_index[lid] for lid in tree.leaves_under(nid)]
    alphas[:, cols] = levels[:, None]
    s = np.tile(ctx.states[:, 0], (len(levels), 1))
    i = np.tile(ctx.states[:, 1], (len(levels), 1))
    r = np.tile(ctx.states[:, 2], (len(levels), 1))
    for _ in range(ctx.day, ctx.T):
        s, i, r = network_step(s, i, r, alphas, ctx.params.beta, ctx.params.gamma, ctx.K)
    if len(cols) == 1:
        return r[:, cols[0]]
    pops = np.array([tree[tree.leaves[c]].population for c in cols])
    assert r.shape[1] == n_leaves
    return (r[:, cols] @ pops) / pops.sum()


def evaluate_candidates(ctx: GameContext, nid: str, parent_choice: float | None) -> list[Candidate]:
    node = ctx.tree[nid]
    impacts = _impact_at_T(ctx, nid)
    out = []
    for a, imp in zip(ctx.levels, impacts):
        imp = min(max(float(imp), 0.0), 1.0)
        out.append(Candidate(a, interval_cost(a, parent_choice, node.weights, ctx.dt, ctx.T, imp)))
    return out


def best_response(ctx: GameContext, nid: str, parent_choice: float | None) -> tuple[float, list[Candidate]]:
    """Cheapest level for ``nid`` this interval; ties go to the larger intensity."""
    cands = evaluate_candidates(ctx, nid, parent_choice)
    best = None
    for c in reversed(cands):
        if best is None or c.cost.total < best.cost.total:
            best = c
    return best.alpha, cands


@dataclass
class GameResult:
    tree: RegionTree
    schedules: dict[str, PolicySchedule]
    trajectories: dict[str, Trajectory]
    costs: dict[str, CostBreakdown]
    log: list[dict]
    T: int

    def final_state(self, nid: str) -> SirState:
        if self.tree[nid].is_leaf:
            return self.trajectories[nid].final()
        return aggregate_parent_state(self.tree, nid,
                                      {lid: t.states[-1] for lid, t in self.trajectories.items()})


def run_game(tree: RegionTree, K, params: SirParams, levels: IntensitySet | Sequence[float], dt: int, T: int,
             first_decision: int = 1, initial_policy: float = 1.0) -> GameResult:
    """Play the layered best-response game over ``T // dt`` intervals.

    Intervals before ``first_decision`` run at ``initial_policy``; from then
    on every region re-decides at the start of each interval.
    """
    if dt < 1 or T % dt:
        raise PreconditionError(f"horizon {T} is not a multiple of interval {dt}")
    n_leaves = len(tree.leaves)
    K = check_excitation(np.eye(n_leaves) if K is None else K, n_leaves)
    levels = tuple(sorted(float(a) for a in levels))
    n_int = T // dt
    states = np.empty((T + 1, n_leaves, 3))
    states[0] = [tree[lid].initial for lid in tree.leaves]
    daily_alpha = np.empty((T, n_leaves))
    policies = {nid: initial_policy for nid in tree.nodes}
    chosen: dict[str, list[float]] = {nid: [] for nid in tree.nodes}
    log: list[dict] = []

    for n in range(n_int):
        day = n * dt
        if n >= first_decision:
            ctx = GameContext(tree, K, params, levels, dt, T, day, states[day].copy(), dict(policies))
            fresh: dict[str, float] = {}
            for layer in tree.layers:
                for nid in layer:
                    parent = tree[nid].parent
                    pi = None if parent is None else fresh[parent]
                    alpha, cands = best_response(ctx, nid, pi)
                    fresh[nid] = alpha
                    for c in cands:
                        log.append(dict(interval=n, day=day, region=nid, layer=tree.depth[nid],
                                        candidate=c.alpha, parent=pi, implementation=c.cost.implementation,
                                        impact=c.cost.impact, non_compliance=c.cost.non_compliance,
                                        total=c.cost.total, chosen=c.alpha == alpha))
            policies.update(fresh)
        for nid in tree.nodes:
            chosen[nid].append(policies[nid])
        alphas = np.array([policies[lid] for lid in tree.leaves])
        s, i, r = states[day, :, 0], states[day, :, 1], states[day, :, 2]
        for t in range(day, day + dt):
            s, i, r = network_step(s, i, r, alphas, params.beta, params.gamma, K)
            states[t + 1, :, 0], states[t + 1, :, 1], states[t + 1, :, 2] = s, i, r
            daily_alpha[t] = alphas

    schedules = {nid: PolicySchedule(tuple(v), dt, T) for nid, v in chosen.items()}
    trajectories = {lid: Trajectory(states[:, k, :].copy(), daily_alpha[:, k].copy())
                    for k, lid in enumerate(tree.leaves)}
    final = {lid: states[T, k] for k, lid in enumerate(tree.leaves)}
    costs = {}
    for nid, node in tree.nodes.items():
        r_T = float(final[nid][2]) if node.is_leaf else aggregate_parent_state(tree, nid, final).r
        parent = None if node.parent is None else schedules[node.parent]
        costs[nid] = total_cost(schedules[nid], parent, node.weights, T, min(max(r_T, 0.0), 1.0))
    return GameResult(tree, schedules, trajectories, costs, log, T)
