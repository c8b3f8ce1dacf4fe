"""Implementation, impact and non-compliance costs.

All costs are dimensionless. Durations are normalised by the evaluation
horizon ``T`` and the impact term is the recovered fraction at ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PreconditionError
from .policy import PolicySchedule

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class CostWeights:
    kappa: float
    eta: float

    def __post_init__(self):
        if self.kappa < 0 or self.eta < 0 or self.kappa + self.eta > 1 + WEIGHT_TOL:
            raise PreconditionError(f"invalid weights kappa={self.kappa}, eta={self.eta}")

    @property
    def compliance(self) -> float:
        """Weight on the non-compliance term, ``1 - kappa - eta``."""
        return max(0.0, 1.0 - self.kappa - self.eta)

    @property
    def is_top_layer(self) -> bool:
        return abs(self.kappa + self.eta - 1.0) <= WEIGHT_TOL


@dataclass(frozen=True)
class CostBreakdown:
    """Unweighted terms plus their weighted total."""

    implementation: float
    impact: float
    non_compliance: float
    total: float


def combine(weights: CostWeights, implementation: float, impact: float, non_compliance: float) -> float:
    return weights.kappa * implementation + weights.eta * impact + weights.compliance * non_compliance


def breakdown(weights: CostWeights, implementation: float, impact: float, non_compliance: float) -> CostBreakdown:
    return CostBreakdown(implementation, impact, non_compliance,
                         combine(weights, implementation, impact, non_compliance))


def _require_parent(weights: CostWeights, has_parent: bool) -> None:
    if not has_parent and not weights.is_top_layer:
        raise PreconditionError(
            f"no parent policy but kappa + eta = {weights.kappa + weights.eta} != 1")


def interval_cost(alpha: float, pi: float | None, weights: CostWeights, dt: float, T: float,
                  r_at_T: float) -> CostBreakdown:
    """Cost of holding ``alpha`` for one ``dt``-day interval.

    ``pi`` is the parent's intensity over the interval, or ``None`` for a
    top-layer decision maker.
    """
    if not (0.0 <= alpha <= 1.0) or (pi is not None and not 0.0 <= pi <= 1.0):
        raise PreconditionError("intensities must lie in [0, 1]")
    if dt > T:
        raise PreconditionError(f"interval {dt} longer than horizon {T}")
    if not 0.0 <= r_at_T <= 1.0:
        raise PreconditionError(f"recovered fraction {r_at_T} outside [0, 1]")
    _require_parent(weights, pi is not None)
    frac = dt / T
    impl = frac * (1.0 - alpha)
    nc = 0.0 if pi is None else frac * (alpha - pi) ** 2
    return breakdown(weights, impl, r_at_T, nc)


def _parent_levels(schedule: PolicySchedule, parent: PolicySchedule | None) -> list[float] | None:
    if parent is None:
        return None
    if parent.dt != schedule.dt:
        raise PreconditionError(f"parent interval {parent.dt} differs from {schedule.dt}")
    return [parent.value_at(k * schedule.dt) for k in range(schedule.n_intervals)]


def tail_terms(t0: int, T: int, parent: PolicySchedule | None) -> tuple[float, float]:
    """Implementation and non-compliance accrued on ``[t0, T)`` where u = 1."""
    nc = 0.0
    if parent is not None:
        for t in range(t0, T):
            nc += (1.0 - parent.value_at(t)) ** 2 / T
    return 0.0, nc


def total_cost(schedule: PolicySchedule, parent: PolicySchedule | None, weights: CostWeights, T: int,
               r_at_T: float) -> CostBreakdown:
    """Averaged cost of a whole schedule over ``[0, T)``.

    Interval terms are accumulated in interval order, then the post-policy
    tail. The optimisers accumulate the same way so results agree bitwise.
    """
    if schedule.t0 > T:
        raise PreconditionError(f"policy end {schedule.t0} is after the horizon {T}")
    if not 0.0 <= r_at_T <= 1.0:
        raise PreconditionError(f"recovered fraction {r_at_T} outside [0, 1]")
    _require_parent(weights, parent is not None)
    pis = _parent_levels(schedule, parent)
    frac = schedule.dt / T
    impl = 0.0
    nc = 0.0
    for k, a in enumerate(schedule.intensities):
        impl += frac * (1.0 - a)
        if pis is not None:
            nc += frac * (a - pis[k]) ** 2
    ti, tn = tail_terms(schedule.t0, T, parent)
    return breakdown(weights, impl + ti, r_at_T, nc + tn)
