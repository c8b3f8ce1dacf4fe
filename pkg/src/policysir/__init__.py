"""Policy-controlled SIR epidemics: simulation, optimal policy search and hierarchical games."""

from .cost import CostBreakdown, CostWeights, interval_cost, total_cost
from .epidemic import (
    SirParams,
    SirState,
    Trajectory,
    final_size,
    herd_threshold,
    make_state,
    simulate,
    simulate_single,
    step_network,
    step_single,
)
from .errors import NoEpidemicError, PolicySirError, PreconditionError, ScenarioError, SearchSpaceTooLarge
from .optimizer import OptimizerConfig, OptimizerResult, brute_force_oracle, evaluate_schedule, optimize
from .policy import IntensitySet, PolicySchedule, cdc_level_to_intensity, enumerate_schedules, schedule_value_at

__version__ = "0.1.0"

__all__ = [
    "CostBreakdown", "CostWeights", "interval_cost", "total_cost",
    "SirParams", "SirState", "Trajectory", "final_size", "herd_threshold", "make_state", "simulate",
    "simulate_single", "step_network", "step_single",
    "NoEpidemicError", "PolicySirError", "PreconditionError", "ScenarioError", "SearchSpaceTooLarge",
    "OptimizerConfig", "OptimizerResult", "brute_force_oracle", "evaluate_schedule", "optimize",
    "IntensitySet", "PolicySchedule", "cdc_level_to_intensity", "enumerate_schedules", "schedule_value_at",
]
