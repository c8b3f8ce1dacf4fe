"""Piecewise-constant policies on a fixed grid of minimal policy intervals."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import PreconditionError

CDC_LEVELS = {
    0: "Mandatory for all individuals",
    1: "Mandatory only for all individuals in certain areas of the jurisdiction",
    2: "Mandatory only for at-risk individuals in the jurisdiction",
    3: "Mandatory only for at-risk individuals in certain areas of the jurisdiction",
    4: "Advisory/Recommendation",
    5: "No order for individuals to stay home",
}


@dataclass(frozen=True)
class IntensitySet:
    """Ascending, distinct intensity levels in ``[alpha_max, 1]`` containing both ends."""

    levels: tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise PreconditionError("intensity set is empty")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise PreconditionError(f"intensity levels must be strictly ascending: {levels}")
        if levels[0] < 0 or levels[-1] != 1.0:
            raise PreconditionError(f"intensity levels must lie in [0, 1] and include 1: {levels}")

    @classmethod
    def from_alpha_max(cls, alpha_max: float) -> "IntensitySet":
        """The three-level set ``{alpha_max, (alpha_max + 1) / 2, 1}``."""
        if alpha_max == 1.0:
            return cls((1.0,))
        return cls((alpha_max, (alpha_max + 1.0) / 2.0, 1.0))

    @property
    def alpha_max(self) -> float:
        return self.levels[0]

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


@dataclass(frozen=True)
class PolicySchedule:
    """One intensity per ``dt``-day interval on ``[0, t0)``; 1 afterwards."""

    intensities: tuple[float, ...]
    dt: int
    t0: int

    def __post_init__(self):
        object.__setattr__(self, "intensities", tuple(float(x) for x in self.intensities))
        if int(self.dt) != self.dt or self.dt < 1:
            raise PreconditionError(f"interval length must be a positive integer, got {self.dt}")
        if self.t0 < 0 or self.t0 % self.dt:
            raise PreconditionError(f"policy end {self.t0} is not a multiple of interval {self.dt}")
        if len(self.intensities) != self.t0 // self.dt:
            raise PreconditionError(
                f"{len(self.intensities)} intensities but {self.t0 // self.dt} intervals in [0, {self.t0})")
        for a in self.intensities:
            if not (0.0 <= a <= 1.0):
                raise PreconditionError(f"intensity {a} outside [0, 1]")

    @classmethod
    def constant(cls, value: float, dt: int, t0: int) -> "PolicySchedule":
        return cls((value,) * (t0 // dt), dt, t0)

    @classmethod
    def from_segments(cls, segments: Sequence[tuple[int, int, float]], dt: int) -> "PolicySchedule":
        """Inverse of :meth:`segments`; segment bounds must sit on the grid."""
        values: list[float] = []
        end = 0
        for start, stop, value in segments:
            if start != end or start % dt or stop % dt or stop <= start:
                raise PreconditionError(f"segment ({start}, {stop}) is not contiguous on a {dt}-day grid")
            values.extend([value] * ((stop - start) // dt))
            end = stop
        return cls(tuple(values), dt, end)

    @property
    def n_intervals(self) -> int:
        return len(self.intensities)

    def value_at(self, t: float) -> float:
        return schedule_value_at(self, t)

    def segments(self) -> list[tuple[int, int, float]]:
        """Merge equal adjacent intervals into ``(start_day, end_day, intensity)``."""
        out: list[tuple[int, int, float]] = []
        for k, a in enumerate(self.intensities):
            start, stop = k * self.dt, (k + 1) * self.dt
            if out and out[-1][2] == a:
                out[-1] = (out[-1][0], stop, a)
            else:
                out.append((start, stop, a))
        return out

    def reversed(self) -> "PolicySchedule":
        return PolicySchedule(self.intensities[::-1], self.dt, self.t0)

    def flipped(self) -> "PolicySchedule":
        """Reverse the order of intervals inside the controlled window.

        The controlled window runs from the first to the last interval with
        intensity below 1; uncontrolled intervals outside it stay in place.
        """
        idx = [k for k, a in enumerate(self.intensities) if a < 1.0]
        if not idx:
            return self
        lo, hi = idx[0], idx[-1] + 1
        vals = self.intensities
        return PolicySchedule(vals[:lo] + vals[lo:hi][::-1] + vals[hi:], self.dt, self.t0)

    def first_control_day(self) -> int | None:
        for k, a in enumerate(self.intensities):
            if a < 1.0:
                return k * self.dt
        return None


def schedule_value_at(schedule: PolicySchedule, t: float) -> float:
    if t < 0:
        raise PreconditionError(f"day {t} is negative")
    if t >= schedule.t0:
        return 1.0
    return schedule.intensities[int(t // schedule.dt)]


def count_schedules(levels: IntensitySet | Sequence[float], dt: int, t0: int) -> int:
    if t0 % dt:
        raise PreconditionError(f"policy end {t0} is not a multiple of interval {dt}")
    return len(tuple(levels)) ** (t0 // dt)


def enumerate_schedules(levels: IntensitySet | Sequence[float], dt: int, t0: int) -> Iterator[PolicySchedule]:
    """Yield every schedule in depth-first order, levels ascending at each position.

    This order is lexicographic on the intensity tuples and fixes the
    tie-breaking used by the optimisers.
    """
    if dt < 1 or t0 % dt:
        raise PreconditionError(f"policy end {t0} is not a multiple of interval {dt}")
    levels = tuple(sorted(float(a) for a in levels))
    for combo in itertools.product(levels, repeat=t0 // dt):
        yield PolicySchedule(combo, dt, t0)


def cdc_level_to_intensity(level: int) -> float:
    """Map a CDC stay-at-home level 0..5 linearly onto ``[0, 1]``."""
    if level not in CDC_LEVELS or isinstance(level, bool):
        raise PreconditionError(f"CDC level must be an integer in 0..5, got {level!r}")
    return level / 5
