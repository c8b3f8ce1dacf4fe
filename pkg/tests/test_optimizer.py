from dataclasses import replace

import numpy as np
import pytest

from policysir import (CostWeights, IntensitySet, OptimizerConfig, PolicySchedule, PreconditionError, SearchSpaceTooLarge,
                       SirParams, brute_force_oracle, evaluate_schedule, herd_threshold, make_state, optimize,
                       simulate_single)
from policysir.optimizer import iter_blocks, with_alpha_max

A3 = IntensitySet((0.0, 0.5, 1.0))


def same(a, b):
    assert a.feasible == b.feasible
    assert a.best_schedule == b.best_schedule
    assert a.best_cost == b.best_cost
    assert a.s_final == b.s_final


@pytest.fixture
def dt28(france_initial, france_params):
    return france_initial, france_params, OptimizerConfig(A3, 28, 112)


def test_france_dt28_matches_oracle(dt28):
    x0, p, cfg = dt28
    res = optimize(x0, p, cfg)
    same(res, brute_force_oracle(x0, p, cfg))
    assert res.explored == 81
    assert res.s_policy_end > herd_threshold(p) - cfg.epsilon


def test_looser_then_stricter(dt28):
    res = optimize(*dt28)
    vals = res.best_schedule.intensities
    assert any(a == 0.5 and b == 0.0 for a, b in zip(vals, vals[1:]))


def test_two_level_oracle(france_params):
    x0 = make_state(0.99, 0.01, 0.0)
    for w in (CostWeights(0, 1), CostWeights(1, 0), CostWeights(0.4, 0.6)):
        cfg = OptimizerConfig(IntensitySet((0.0, 1.0)), 7, 14, horizon=400, weights=w, enforce_herd=False)
        same(optimize(x0, france_params, cfg), brute_force_oracle(x0, france_params, cfg))


def test_empty_search(france_initial, france_params):
    cfg = OptimizerConfig(A3, 7, 0, enforce_herd=False)
    res = optimize(france_initial, france_params, cfg)
    tr = simulate_single(france_initial, france_params, PolicySchedule((), 7, 0), 1500)
    assert res.best_schedule.intensities == ()
    assert res.best_cost.total == tr.r[1500]
    same(res, brute_force_oracle(france_initial, france_params, cfg))


def test_strictest_without_herd_constraint(france_initial, france_params):
    # impact read at the policy end: holding the strictest level is optimal
    cfg = OptimizerConfig(A3, 14, 56, enforce_herd=False, cost_horizon=56)
    res = optimize(france_initial, france_params, cfg)
    assert set(res.best_schedule.intensities) == {0.0}


def test_infeasible_reported():
    # already below the threshold at day 0, so no schedule can satisfy it
    x0 = make_state(0.3, 0.05, 0.65)
    cfg = OptimizerConfig(IntensitySet((0.0, 1.0)), 7, 14, horizon=20)
    res = optimize(x0, SirParams.from_r0(2.9), cfg)
    assert not res.feasible
    assert res.best_schedule is None and res.explored == 4
    assert not brute_force_oracle(x0, SirParams.from_r0(2.9), cfg).feasible


def test_constraint_soundness_at_horizon(france_initial, france_params):
    cfg = OptimizerConfig(A3, 28, 112, herd_check="horizon")
    res = optimize(france_initial, france_params, cfg)
    if res.feasible:
        assert res.s_final > herd_threshold(france_params) - cfg.epsilon
    same(res, brute_force_oracle(france_initial, france_params, cfg))


def test_search_guard(france_initial, france_params):
    cfg = OptimizerConfig(A3, 7, 98)
    with pytest.raises(SearchSpaceTooLarge):
        optimize(france_initial, france_params, cfg, max_leaves=1000)
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_oracle(france_initial, france_params, cfg)


def test_workers_agree(dt28):
    same(optimize(*dt28), optimize(*dt28, workers=2))


def test_pruning_agrees(monkeypatch):
    # small blocks so the scalar prefix walk (where pruning happens) is deep
    monkeypatch.setattr("policysir.optimizer.BLOCK_LEAVES", 9)
    x0 = make_state(0.9999, 0.0001, 0.0)
    p = SirParams.from_r0(1.5)
    parent = PolicySchedule.constant(0.0, 7, 35)
    cfg = OptimizerConfig(A3, 7, 35, horizon=300, cost_horizon=35, weights=CostWeights(0.1, 0.1),
                          parent=parent, enforce_herd=False)
    plain = optimize(x0, p, cfg)
    pruned = optimize(x0, p, replace(cfg, prune=True))
    same(plain, pruned)
    same(plain, brute_force_oracle(x0, p, cfg))
    assert pruned.pruned > 0
    assert pruned.explored + pruned.pruned == cfg.search_size


def test_accumulated_cost_equals_evaluation(france_initial, france_params):
    cfg = OptimizerConfig(A3, 14, 56, horizon=500, weights=CostWeights(0.3, 0.7))
    thr = herd_threshold(france_params)
    levels = A3.levels
    for block in iter_blocks(france_initial, france_params, cfg):
        total = cfg.weights.kappa * block.impl + cfg.weights.eta * block.r_T
        for k in range(len(total)):
            tail = np.unravel_index(k, (3,) * (cfg.n_intervals - len(block.prefix)))
            sched = PolicySchedule(block.prefix + tuple(levels[j] for j in tail), 14, 56)
            cost, s_final = evaluate_schedule(france_initial, france_params, sched, cfg)
            assert total[k] == cost.total
            assert block.s_final[k] == s_final
    assert thr > 0


def test_config_validation():
    with pytest.raises(PreconditionError):
        OptimizerConfig(A3, 7, 10)
    with pytest.raises(PreconditionError):
        OptimizerConfig(A3, 7, 14, epsilon=0)
    with pytest.raises(PreconditionError):
        OptimizerConfig(A3, 7, 14, weights=CostWeights(0.2, 0.2))
    with pytest.raises(PreconditionError):
        OptimizerConfig(A3, 7, 14, horizon=7)
    with pytest.raises(PreconditionError):
        OptimizerConfig(A3, 7, 14, herd_check="sometime")
    assert with_alpha_max(OptimizerConfig(A3, 7, 14), 0.2).intensity_set.levels == (0.2, 0.6, 1.0)
