"""Scenario files and experiment orchestration.

A scenario is a YAML document::

    name: france_dt7
    mode: optimize              # simulate | optimize | game
    params: {r0: 2.9, gamma: 0.1}
    regions:
      - id: france
        population: 6.7e7
        I0: 1000                # absolute counts (I0, R0) or fractions (i0, r0)
        weights: {kappa: 0, eta: 1}
    policy: {levels: [0, 0.5, 1], dt: 7, t0: 98}
    horizon: 1500
    optimizer: {epsilon: 0.01, enforce_herd: true}

See ``docs/scenario-format.md`` for every key.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .cost import CostWeights, total_cost
from .epidemic import DEFAULT_GAMMA, SirParams, SirState, herd_threshold, make_state, simulate
from .errors import PolicySirError, PreconditionError, ScenarioError
from .game import RegionNode, RegionTree, run_game
from .optimizer import HERD_CHECKS, OptimizerConfig, optimize
from .policy import IntensitySet, PolicySchedule
from . import report

log = logging.getLogger(__name__)

MODES = ("simulate", "optimize", "game")
DEFAULT_HORIZON = 1500
DEFAULT_EPSILON = 0.01
MAX_SEARCH = 5_000_000

TOP_KEYS = {"name", "description", "mode", "params", "regions", "policy", "horizon", "cost_horizon",
            "optimizer", "excitation", "game", "output"}
REGION_KEYS = {"id", "population", "i0", "r0", "I0", "R0", "weights", "parent", "schedule", "note"}


@dataclass
class RegionSpec:
    id: str
    population: float
    initial: SirState | None
    weights: CostWeights
    parent: str | None = None
    schedule: PolicySchedule | None = None


@dataclass
class Scenario:
    name: str
    mode: str
    r0: float
    gamma: float
    regions: list[RegionSpec]
    levels: IntensitySet
    dt: int
    t0: int
    horizon: int = DEFAULT_HORIZON
    cost_horizon: int | None = None
    epsilon: float = DEFAULT_EPSILON
    enforce_herd: bool = True
    herd_check: str = "policy_end"
    prune: bool = False
    K: np.ndarray | None = None
    first_decision: int = 1
    output: str | None = None
    source: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def params(self) -> SirParams:
        return SirParams.from_r0(self.r0, self.gamma)

    @property
    def leaves(self) -> list[RegionSpec]:
        parents = {r.parent for r in self.regions}
        return [r for r in self.regions if r.id not in parents]

    def optimizer_config(self) -> OptimizerConfig:
        region = self.regions[0]
        return OptimizerConfig(self.levels, self.dt, self.t0, self.horizon, self.epsilon, region.weights,
                               self.enforce_herd, self.cost_horizon, None, self.herd_check, self.prune)

    def region_tree(self) -> RegionTree:
        return RegionTree([RegionNode(r.id, r.population, r.weights, r.initial, r.parent) for r in self.regions])


class _Lines:
    """Dotted key path -> 1-based source line, from the YAML node graph."""

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, "")

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                sub = f"{path}.{k.value}" if path else str(k.value)
                self.lines[sub] = k.start_mark.line + 1
                self._walk(v, sub)
                self.lines[sub] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for n, v in enumerate(node.value):
                self._walk(v, f"{path}[{n}]")

    def __call__(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rsplit(".", 1)[0] if "." in path else ""
        return None


class _Reader:
    def __init__(self, data: dict, lines: _Lines):
        self.data = data
        self.lines = lines

    def fail(self, path: str, message: str):
        raise ScenarioError(message, field=path, line=self.lines(path))

    def get(self, mapping: dict, path: str, key: str, kind=None, required=False, default=None):
        full = f"{path}.{key}" if path else key
        if key not in mapping or mapping[key] is None:
            if required:
                self.fail(full, f"missing required field '{full}'")
            return default
        value = mapping[key]
        if kind is not None:
            try:
                if kind is int and (isinstance(value, bool) or float(value) != int(float(value))):
                    raise ValueError
                if kind is bool and not isinstance(value, bool):
                    raise ValueError
                value = kind(value)
            except (TypeError, ValueError):
                self.fail(full, f"'{full}' must be {kind.__name__}, got {value!r}")
        return value

    def section(self, mapping: dict, key: str, required=False) -> dict:
        value = self.get(mapping, "", key, required=required, default={})
        if not isinstance(value, dict):
            self.fail(key, f"'{key}' must be a mapping")
        return value


def bundled_scenarios() -> list[str]:
    root = resources.files("policysir") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _resolve(path: str | Path) -> tuple[str, str]:
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = p.name[:-5] if p.name.endswith(".yaml") else p.name
    res = resources.files("policysir") / "scenarios" / f"{name}.yaml"
    if res.is_file():
        return res.read_text(), f"bundled:{name}"
    raise ScenarioError(f"scenario file {path} not found and no bundled scenario named {name!r}")


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file (or the name of a bundled one)."""
    text, source = _resolve(path)
    return parse_scenario(text, source)


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ScenarioError(f"YAML parse error: {exc.problem}", line=line) from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping at the top level", line=1)
    lines = _Lines(text)
    rd = _Reader(data, lines)
    for key in data:
        if key not in TOP_KEYS:
            rd.fail(str(key), f"unknown field '{key}'")

    mode = rd.get(data, "", "mode", str, required=True)
    if mode not in MODES:
        rd.fail("mode", f"mode must be one of {MODES}, got {mode!r}")
    name = rd.get(data, "", "name", str, default=Path(source or "scenario").stem)

    params = rd.section(data, "params", required=True)
    r0 = rd.get(params, "params", "r0", float, required=True)
    gamma = rd.get(params, "params", "gamma", float, default=DEFAULT_GAMMA)
    try:
        SirParams.from_r0(r0, gamma)
    except PreconditionError as exc:
        rd.fail("params.r0", str(exc))

    policy = rd.section(data, "policy", required=True)
    dt = rd.get(policy, "policy", "dt", int, required=True)
    if dt < 1:
        rd.fail("policy.dt", "policy.dt must be a positive number of days")
    t0 = rd.get(policy, "policy", "t0", int, required=(mode == "optimize"), default=0)
    levels_raw = rd.get(policy, "policy", "levels")
    alpha_max = rd.get(policy, "policy", "alpha_max", float)
    try:
        if levels_raw is not None:
            levels = IntensitySet(tuple(float(x) for x in levels_raw))
        elif alpha_max is not None:
            levels = IntensitySet.from_alpha_max(alpha_max)
        elif mode == "simulate":
            levels = IntensitySet((0.0, 0.5, 1.0))
        else:
            rd.fail("policy.levels", "missing required field 'policy.levels' (or 'policy.alpha_max')")
    except (PreconditionError, TypeError, ValueError) as exc:
        rd.fail("policy.levels", f"invalid intensity levels: {exc}")
    if t0 % dt:
        rd.fail("policy.t0", f"policy.t0={t0} is not a multiple of policy.dt={dt}")

    horizon = rd.get(data, "", "horizon", int, default=DEFAULT_HORIZON)
    cost_horizon = rd.get(data, "", "cost_horizon", int)
    if horizon < 1:
        rd.fail("horizon", "horizon must be at least one day")
    if mode == "optimize" and t0 > horizon:
        rd.fail("policy.t0", f"policy.t0={t0} is after the horizon {horizon}")
    if mode == "game" and horizon % dt:
        rd.fail("horizon", f"game horizon {horizon} must be a multiple of policy.dt={dt}")

    opt = rd.section(data, "optimizer")
    epsilon = rd.get(opt, "optimizer", "epsilon", float, default=DEFAULT_EPSILON)
    if epsilon <= 0:
        rd.fail("optimizer.epsilon", "optimizer.epsilon must be positive")
    enforce = rd.get(opt, "optimizer", "enforce_herd", bool, default=True)
    herd_check = rd.get(opt, "optimizer", "herd_check", str, default="policy_end")
    if herd_check not in HERD_CHECKS:
        rd.fail("optimizer.herd_check", f"optimizer.herd_check must be one of {HERD_CHECKS}")
    prune = rd.get(opt, "optimizer", "prune", bool, default=False)
    game = rd.section(data, "game")
    first_decision = rd.get(game, "game", "first_decision", int, default=1)

    regions_raw = rd.get(data, "", "regions", required=True)
    if not isinstance(regions_raw, list) or not regions_raw:
        rd.fail("regions", "'regions' must be a non-empty list")
    regions = [_parse_region(rd, f"regions[{n}]", raw, mode, dt) for n, raw in enumerate(regions_raw)]
    ids = [r.id for r in regions]
    if len(set(ids)) != len(ids):
        rd.fail("regions", f"duplicate region ids in {ids}")
    for n, r in enumerate(regions):
        if r.parent is not None and r.parent not in ids:
            rd.fail(f"regions[{n}].parent", f"parent {r.parent!r} of region {r.id!r} does not exist")
    parents = {r.parent for r in regions}
    for n, r in enumerate(regions):
        if r.id not in parents and r.initial is None:
            rd.fail(f"regions[{n}]", f"leaf region {r.id!r} needs initial conditions (i0 or I0)")
        if r.parent is None and not r.weights.is_top_layer and mode != "simulate":
            rd.fail(f"regions[{n}].weights", f"top-layer region {r.id!r} needs kappa + eta = 1")
    n_leaves = sum(1 for r in regions if r.id not in parents)
    if mode == "optimize" and len(regions) != 1:
        rd.fail("regions", "optimize mode takes exactly one region")

    K = rd.get(data, "", "excitation")
    if K is not None:
        try:
            K = np.asarray(K, dtype=float)
        except (TypeError, ValueError):
            rd.fail("excitation", "excitation must be a numeric matrix")
        if K.shape != (n_leaves, n_leaves):
            rd.fail("excitation", f"excitation is {K.shape} but there are {n_leaves} leaf regions")
        if np.any(np.diag(K) != 1.0) or np.any(K < 0):
            rd.fail("excitation", "excitation needs a unit diagonal and non-negative entries")
    else:
        K = np.eye(n_leaves)

    return Scenario(name=name, mode=mode, r0=r0, gamma=gamma, regions=regions, levels=levels, dt=dt, t0=t0,
                    horizon=horizon, cost_horizon=cost_horizon, epsilon=epsilon, enforce_herd=enforce,
                    herd_check=herd_check, prune=prune, K=K, first_decision=first_decision,
                    output=rd.get(data, "", "output", str), source=source, raw=data)


def _parse_region(rd: _Reader, path: str, raw: Any, mode: str, dt: int) -> RegionSpec:
    if not isinstance(raw, dict):
        rd.fail(path, "each region must be a mapping")
    for key in raw:
        if key not in REGION_KEYS:
            rd.fail(f"{path}.{key}", f"unknown region field '{key}'")
    rid = str(rd.get(raw, path, "id", str, required=True))
    population = rd.get(raw, path, "population", float, required=True)
    if population <= 0:
        rd.fail(f"{path}.population", "population must be positive")
    if "i0" in raw and "I0" in raw:
        rd.fail(f"{path}.I0", "give either i0 (fraction) or I0 (count), not both")
    if "r0" in raw and "R0" in raw:
        rd.fail(f"{path}.R0", "give either r0 (fraction) or R0 (count), not both")
    i0 = rd.get(raw, path, "i0", float)
    r0 = rd.get(raw, path, "r0", float, default=0.0)
    if "I0" in raw:
        i0 = rd.get(raw, path, "I0", float) / population
    if "R0" in raw:
        r0 = rd.get(raw, path, "R0", float) / population
    initial = None
    if i0 is not None:
        try:
            initial = make_state(1.0 - i0 - r0, i0, r0)
        except PreconditionError as exc:
            rd.fail(path, f"invalid initial conditions: {exc}")
    w = raw.get("weights") or {}
    if not isinstance(w, dict):
        rd.fail(f"{path}.weights", "weights must be a mapping with kappa and eta")
    kappa = rd.get(w, f"{path}.weights", "kappa", float, default=0.0 if mode != "game" else None,
                   required=mode == "game")
    eta = rd.get(w, f"{path}.weights", "eta", float, default=1.0 - kappa, required=mode == "game")
    try:
        weights = CostWeights(kappa, eta)
    except PreconditionError as exc:
        rd.fail(f"{path}.weights", str(exc))
    schedule = None
    if "schedule" in raw:
        if mode != "simulate":
            rd.fail(f"{path}.schedule", "explicit schedules are only used in simulate mode")
        vals = raw["schedule"]
        try:
            schedule = PolicySchedule(tuple(float(x) for x in vals or ()), dt, dt * len(vals or ()))
        except (PreconditionError, TypeError, ValueError) as exc:
            rd.fail(f"{path}.schedule", f"invalid schedule: {exc}")
    parent = rd.get(raw, path, "parent", str)
    return RegionSpec(rid, population, initial, weights, parent, schedule)


@dataclass
class RunReport:
    """What a run produced. ``payload`` is exactly what goes to the JSON report."""

    scenario: Scenario
    payload: dict
    schedules: dict[str, PolicySchedule]
    trajectories: dict
    files: dict[str, str]
    feasible: bool = True
    result: Any = None


def _echo(sc: Scenario) -> dict:
    return {
        "name": sc.name, "mode": sc.mode, "source": sc.source, "r0": sc.r0, "gamma": sc.gamma,
        "levels": list(sc.levels.levels), "dt": sc.dt, "t0": sc.t0, "horizon": sc.horizon,
        "cost_horizon": sc.cost_horizon, "epsilon": sc.epsilon, "enforce_herd": sc.enforce_herd,
        "herd_check": sc.herd_check, "excitation": sc.K.tolist() if sc.K is not None else None,
        "regions": [{"id": r.id, "population": r.population, "parent": r.parent,
                     "initial": list(r.initial) if r.initial else None,
                     "kappa": r.weights.kappa, "eta": r.weights.eta} for r in sc.regions],
    }


def run(sc: Scenario, out: str | Path | None = None, workers: int = 1, allow_large_search: bool = False,
        figures: bool = True) -> RunReport:
    """Execute a scenario and write its trajectory, schedule, cost and report files.

    Output files share the prefix ``out`` (falling back to the scenario's
    ``output`` key, then ``results/<name>``).
    """
    prefix = Path(out or sc.output or Path("results") / sc.name)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    params = sc.params
    files = {k: f"{prefix}_{k}.{ext}" for k, ext in
             (("trajectory", "csv"), ("schedule", "csv"), ("costs", "csv"), ("report", "json"))}
    search: dict = {}
    result: Any = None
    costs: dict[str, Any] = {}
    feasible = True

    if sc.mode == "optimize":
        region = sc.regions[0]
        cfg = sc.optimizer_config()
        search["search_size"] = cfg.search_size
        result = optimize(region.initial, params, cfg, workers=workers,
                          max_leaves=None if allow_large_search else MAX_SEARCH)
        search.update(explored=result.explored, pruned=result.pruned, feasible=result.feasible)
        feasible = result.feasible
        sched = result.best_schedule if feasible else PolicySchedule.constant(1.0, sc.dt, 0)
        horizon = max(sc.horizon, cfg.T)
        traj = simulate([region.initial], params, None, [sched], horizon)[0]
        schedules = {region.id: sched}
        trajectories = {region.id: traj}
        if feasible:
            costs[region.id] = result.best_cost
            search["s_policy_end"] = result.s_policy_end
    elif sc.mode == "simulate":
        leaves = sc.leaves
        schedules = {r.id: r.schedule or PolicySchedule((), sc.dt, 0) for r in leaves}
        T = sc.cost_horizon or sc.horizon
        horizon = max(sc.horizon, T)
        trajs = simulate([r.initial for r in leaves], params, sc.K, [schedules[r.id] for r in leaves], horizon)
        trajectories = {r.id: t for r, t in zip(leaves, trajs)}
        for r in leaves:
            sched = schedules[r.id]
            if sched.t0 <= T and r.weights.is_top_layer:
                costs[r.id] = total_cost(sched, None, r.weights, T, float(trajectories[r.id].r[T]))
    else:
        tree = sc.region_tree()
        game = run_game(tree, sc.K, params, sc.levels, sc.dt, sc.horizon, first_decision=sc.first_decision)
        result = game
        schedules = {nid: game.schedules[nid] for nid in tree.order}
        trajectories = game.trajectories
        costs = {nid: game.costs[nid] for nid in tree.order}
        files["game_log"] = f"{prefix}_game_log.jsonl"
        report.write_jsonl(Path(files["game_log"]), game.log)

    report.write_trajectories(Path(files["trajectory"]), trajectories)
    report.write_schedules(Path(files["schedule"]), schedules)
    weights = {r.id: r.weights for r in sc.regions}
    report.write_costs(Path(files["costs"]), [(rid, weights[rid], c) for rid, c in costs.items()])
    try:
        herd = herd_threshold(params)
    except PolicySirError:
        herd = None
    if figures:
        files["figure"] = f"{prefix}_figure.png"
        report.render_figure(Path(files["figure"]), trajectories, schedules, herd, sc.name)

    regions_out = {}
    for r in sc.regions:
        entry: dict = {"schedule": [list(seg) for seg in schedules[r.id].segments()] if r.id in schedules else None}
        if r.id in trajectories:
            entry.update(report.trajectory_summary(trajectories[r.id]))
        elif sc.mode == "game":
            fin = result.final_state(r.id)
            entry.update(s_final=fin.s, i_final=fin.i, r_final=fin.r)
        if r.id in costs:
            c = costs[r.id]
            entry["cost"] = {"implementation": c.implementation, "impact": c.impact,
                             "non_compliance": c.non_compliance, "total": c.total}
        regions_out[r.id] = entry
    payload = {
        "version": __version__,
        "scenario": _echo(sc),
        "herd_threshold": herd,
        "feasible": feasible,
        "regions": regions_out,
        "search": search,
        "files": {k: Path(v).name for k, v in files.items()},
        "wall_time": time.perf_counter() - started,
    }
    report.write_json(Path(files["report"]), payload)
    log.info("wrote %s", files["report"])
    return RunReport(sc, payload, schedules, trajectories, files, feasible, result)


def load_report(path: str | Path) -> dict:
    import json

    with open(path) as fh:
        return json.load(fh)


def compare_runs(report_a: dict, report_b: dict) -> dict[str, dict]:
    """Per-region differences ``b - a`` of final size, cost, peak and wave count."""
    ra, rb = report_a["regions"], report_b["regions"]
    if set(ra) != set(rb):
        raise PreconditionError(f"reports cover different regions: {sorted(ra)} vs {sorted(rb)}")
    out = {}
    for rid in ra:
        a, b = ra[rid], rb[rid]

        def delta(key, sub=None):
            va = a.get(key) if sub is None else (a.get(key) or {}).get(sub)
            vb = b.get(key) if sub is None else (b.get(key) or {}).get(sub)
            return None if va is None or vb is None else vb - va

        out[rid] = {
            "d_s_final": delta("s_final"),
            "d_total_cost": delta("cost", "total"),
            "d_peak_i": delta("peak_i"),
            "waves_a": a.get("waves"),
            "waves_b": b.get("waves"),
            "d_waves": delta("waves"),
        }
    return out
