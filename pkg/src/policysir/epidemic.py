"""Discrete-time SIR dynamics under a control intensity.

States are fractions of the region population. One Euler step advances one
day::

    new = alpha * beta * pressure * s
    s' = s - new
    i' = i + new - gamma * i
    r' = r + gamma * i

where ``pressure`` is the region's own infected fraction in the single-region
model and ``sum_b K[a, b] * i_b`` in the network model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NoEpidemicError, PreconditionError
from .policy import PolicySchedule

DEFAULT_GAMMA = 0.1
DEFAULT_QUIESCENCE = 1e-9
SUM_TOL = 1e-12


@dataclass(frozen=True)
class SirParams:
    """Transmission and recovery rates per day.

    Build from a reproduction number with :meth:`from_r0`; ``r0`` is always
    derived as ``beta / gamma``.
    """

    beta: float
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0):
            raise PreconditionError(f"beta and gamma must be positive, got {self.beta}, {self.gamma}")
        # Larger rates let a unit Euler step push compartments outside [0, 1].
        if self.beta > 1 or self.gamma > 1:
            raise PreconditionError(f"beta and gamma must be <= 1 for a unit step, got {self.beta}, {self.gamma}")

    @classmethod
    def from_r0(cls, r0: float, gamma: float = DEFAULT_GAMMA) -> "SirParams":
        return cls(beta=r0 * gamma, gamma=gamma)

    @property
    def r0(self) -> float:
        return self.beta / self.gamma


class SirState(NamedTuple):
    s: float
    i: float
    r: float


def make_state(s: float, i: float, r: float) -> SirState:
    """Validated constructor for :class:`SirState`."""
    state = SirState(float(s), float(i), float(r))
    check_state(state)
    return state


def state_from_counts(population: float, infected: float, recovered: float = 0.0) -> SirState:
    """Convert absolute counts to fractions; susceptibles are the remainder."""
    if population <= 0:
        raise PreconditionError("population must be positive")
    i = infected / population
    r = recovered / population
    return make_state(1.0 - i - r, i, r)


def check_state(state) -> None:
    s, i, r = state
    for name, v in (("s", s), ("i", i), ("r", r)):
        if not (0.0 <= v <= 1.0) or math.isnan(v):
            raise PreconditionError(f"{name}={v} outside [0, 1]")
    if abs(s + i + r - 1.0) > SUM_TOL:
        raise PreconditionError(f"compartments sum to {s + i + r!r}, not 1")


def _check_alpha(alpha) -> None:
    if not (0.0 <= alpha <= 1.0):
        raise PreconditionError(f"intensity {alpha} outside [0, 1]")


def euler(s, i, r, alpha, beta, gamma, pressure=None):
    """One unit Euler step; works elementwise on floats or numpy arrays.

    The operation order here is the reference rounding; :func:`euler_inplace`
    reproduces it bit for bit on arrays.
    """
    if pressure is None:
        pressure = i
    new = alpha * beta * pressure * s
    rec = gamma * i
    return s - new, i + new - rec, r + rec


def euler_inplace(s, i, r, alpha, beta, gamma, days=1):
    """Advance numpy arrays ``days`` steps in place (single-region form).

    Rounds exactly like :func:`euler`; used by the search hot loops.
    """
    c = alpha * beta
    new = np.empty_like(i)
    rec = np.empty_like(i)
    for _ in range(days):
        np.multiply(i, c, out=new)
        new *= s
        np.multiply(i, gamma, out=rec)
        s -= new
        i += new
        i -= rec
        r += rec


def step_single(state: SirState, params: SirParams, alpha: float) -> SirState:
    check_state(state)
    _check_alpha(alpha)
    s, i, r = euler(state.s, state.i, state.r, alpha, params.beta, params.gamma)
    return SirState(s, i, r)


def check_excitation(K, n: int | None = None) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise PreconditionError(f"excitation matrix must be square, got shape {K.shape}")
    if n is not None and K.shape[0] != n:
        raise PreconditionError(f"excitation matrix is {K.shape[0]}x{K.shape[0]} but there are {n} regions")
    if np.any(np.diag(K) != 1.0):
        raise PreconditionError("excitation matrix must have unit diagonal")
    if np.any(K < 0):
        raise PreconditionError("excitation matrix entries must be non-negative")
    return K


def network_step(s, i, r, alphas, beta, gamma, K):
    """Vectorised network step. ``s, i, r`` have shape (..., n)."""
    pressure = i @ K.T
    return euler(s, i, r, alphas, beta, gamma, pressure)


def step_network(states: Sequence, params: SirParams, K, alphas: Sequence[float]) -> list[SirState]:
    n = len(states)
    K = check_excitation(K, n)
    if len(alphas) != n:
        raise PreconditionError(f"{len(alphas)} intensities for {n} regions")
    for st in states:
        check_state(st)
    for a in alphas:
        _check_alpha(a)
    arr = np.asarray(states, dtype=float).reshape(n, 3)
    s, i, r = network_step(arr[:, 0], arr[:, 1], arr[:, 2], np.asarray(alphas, dtype=float),
                           params.beta, params.gamma, K)
    return [SirState(float(a), float(b), float(c)) for a, b, c in zip(s, i, r)]


@dataclass
class Trajectory:
    """Daily states (``horizon + 1`` rows of s, i, r) and applied intensities."""

    states: np.ndarray
    intensities: np.ndarray

    @property
    def s(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def i(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def r(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def horizon(self) -> int:
        return len(self.intensities)

    def final(self) -> SirState:
        return SirState(*map(float, self.states[-1]))


def simulate(initial: Sequence, params: SirParams, K, schedules: Sequence[PolicySchedule],
             horizon: int) -> list[Trajectory]:
    """Run the network model day by day for ``horizon`` days.

    The intensity for region ``a`` on day ``t`` is ``schedules[a].value_at(t)``.
    A single region with ``K = [[1]]`` reduces to :func:`step_single`.
    """
    if horizon < 1:
        raise PreconditionError("horizon must be at least one day")
    n = len(initial)
    if len(schedules) != n:
        raise PreconditionError(f"{len(schedules)} schedules for {n} regions")
    K = check_excitation(np.eye(n) if K is None else K, n)
    for st in initial:
        check_state(st)
    alphas = np.array([[sch.value_at(t) for sch in schedules] for t in range(horizon)], dtype=float)
    states = np.empty((horizon + 1, n, 3))
    states[0] = np.asarray(initial, dtype=float)
    beta, gamma = params.beta, params.gamma
    if n == 1:
        # scalar path; bitwise identical to step_single
        s, i, r = states[0, 0]
        s, i, r = float(s), float(i), float(r)
        for t in range(horizon):
            s, i, r = euler(s, i, r, float(alphas[t, 0]), beta, gamma)
            states[t + 1, 0] = (s, i, r)
    else:
        s, i, r = states[0, :, 0], states[0, :, 1], states[0, :, 2]
        for t in range(horizon):
            s, i, r = network_step(s, i, r, alphas[t], beta, gamma, K)
            states[t + 1, :, 0] = s
            states[t + 1, :, 1] = i
            states[t + 1, :, 2] = r
    return [Trajectory(states[:, a, :].copy(), alphas[:, a].copy()) for a in range(n)]


def simulate_single(initial, params: SirParams, schedule: PolicySchedule, horizon: int) -> Trajectory:
    return simulate([initial], params, None, [schedule], horizon)[0]


def herd_threshold(params: SirParams | float) -> float:
    """Susceptible fraction ``1 / R0`` below which infections decline unaided."""
    r0 = params.r0 if isinstance(params, SirParams) else float(params)
    if r0 <= 1:
        raise NoEpidemicError(f"R0={r0} <= 1: no epidemic, herd threshold undefined")
    return 1.0 / r0


def final_size(initial, params: SirParams, schedule: PolicySchedule, horizon: int,
               quiescence: float = DEFAULT_QUIESCENCE) -> tuple[float, float, bool]:
    """Terminal ``(s, r, quiescent)`` after simulating to ``horizon``."""
    if horizon < schedule.t0:
        raise PreconditionError(f"horizon {horizon} ends before policy end {schedule.t0}")
    fin = simulate_single(initial, params, schedule, horizon).final()
    return fin.s, fin.r, fin.i < quiescence


def final_size_fixed_point(r0: float, s0: float, i0: float = 0.0, tol: float = 1e-14) -> float:
    """Solve ``s = s0 * exp(-R0 * (1 - s))`` for the limiting susceptible fraction.

    This is the classical continuous-time final-size relation with recovered
    fraction starting at ``1 - s0 - i0``; it ignores any policy and serves as
    an independent check on long uncontrolled runs. Solved by bisection on
    ``(0, min(s0, 1 / R0))``, which brackets the non-trivial root when
    ``R0 * s0 > 1`` (so ``s0 = 1, i0 = 0`` gives the limit of a vanishing seed).
    """
    r_init = 1.0 - s0 - i0

    def g(x):
        return x - s0 * math.exp(-r0 * (1.0 - x - r_init))

    if r0 * s0 <= 1.0:
        return s0 if i0 == 0.0 else _bisect(g, 0.0, s0, tol)
    hi = min(s0, 1.0 / r0)
    if g(hi) <= 0:  # seed so large that the root sits above 1 / R0
        hi = s0
    return _bisect(g, 0.0, hi, tol)


def _bisect(g, lo, hi, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
