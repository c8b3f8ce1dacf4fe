import pytest

from policysir import IntensitySet, PolicySchedule, PreconditionError, cdc_level_to_intensity, enumerate_schedules
from policysir.policy import count_schedules, schedule_value_at

A3 = IntensitySet((0.0, 0.5, 1.0))


def test_value_lookup():
    sched = PolicySchedule((1.0, 0.0), 7, 14)
    assert schedule_value_at(sched, 3) == 1.0
    assert schedule_value_at(sched, 10) == 0.0
    assert schedule_value_at(sched, 14) == 1.0
    assert sched.value_at(200) == 1.0
    with pytest.raises(PreconditionError):
        sched.value_at(-1)


def test_first_control_day_lookup():
    sched = PolicySchedule.from_segments([(0, 63, 1.0), (63, 98, 0.0)], 7)
    assert sched.value_at(62) == 1.0
    assert sched.value_at(63) == 0.0
    assert sched.first_control_day() == 63


@pytest.mark.parametrize("values,dt,t0", [((1.0,), 7, 14), ((1.0, 1.0), 7, 15), ((1.2,), 7, 7), ((1.0,), 0, 0)])
def test_invalid_schedules(values, dt, t0):
    with pytest.raises(PreconditionError):
        PolicySchedule(values, dt, t0)


def test_segments_roundtrip():
    sched = PolicySchedule((1, 1, 0.5, 0, 0, 1), 7, 42)
    segs = sched.segments()
    assert segs == [(0, 14, 1.0), (14, 21, 0.5), (21, 35, 0.0), (35, 42, 1.0)]
    assert PolicySchedule.from_segments(segs, 7) == sched


def test_reverse_and_flip():
    sched = PolicySchedule((1, 1, 0.5, 0), 28, 112)
    assert sched.reversed().intensities == (0, 0.5, 1, 1)
    assert sched.flipped().intensities == (1, 1, 0, 0.5)
    assert PolicySchedule.constant(1.0, 7, 21).flipped() == PolicySchedule.constant(1.0, 7, 21)


def test_enumeration_small():
    out = list(enumerate_schedules(A3, 7, 14))
    assert len(out) == 9
    assert out[0].intensities == (0.0, 0.0)
    assert out[-1].intensities == (1.0, 1.0)
    assert [s.intensities for s in out[:4]] == [(0, 0), (0, 0.5), (0, 1), (0.5, 0)]


def test_enumeration_counts():
    assert count_schedules(A3, 7, 98) == 3 ** 14 == 4_782_969
    assert sum(1 for _ in enumerate_schedules(IntensitySet((0.2, 0.6, 1.0)), 7, 28)) == 81
    assert [s.intensities for s in enumerate_schedules(A3, 7, 0)] == [()]
    with pytest.raises(PreconditionError):
        list(enumerate_schedules(A3, 7, 10))


def test_intensity_set():
    assert IntensitySet.from_alpha_max(0.2).levels == (0.2, 0.6, 1.0)
    assert IntensitySet.from_alpha_max(0.0).alpha_max == 0.0
    for bad in [(), (0.5, 0.2, 1.0), (0.0, 0.5), (-0.1, 1.0), (0.5, 0.5, 1.0)]:
        with pytest.raises(PreconditionError):
            IntensitySet(bad)


@pytest.mark.parametrize("level,expected", [(0, 0.0), (5, 1.0), (3, 0.6), (1, 0.2)])
def test_cdc(level, expected):
    assert cdc_level_to_intensity(level) == pytest.approx(expected)


@pytest.mark.parametrize("level", [-1, 6, 2.5, True])
def test_cdc_out_of_range(level):
    with pytest.raises(PreconditionError):
        cdc_level_to_intensity(level)
