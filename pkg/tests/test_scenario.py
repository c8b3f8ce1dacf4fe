import csv
import json
import textwrap
from pathlib import Path

import numpy as np
import pytest

from policysir import ScenarioError
from policysir.scenario import bundled_scenarios, compare_runs, load_report, load_scenario, parse_scenario, run

BASE = textwrap.dedent("""\
    name: tiny
    mode: optimize
    params:
      r0: 2.9
    regions:
      - id: x
        population: 1000
        I0: 10
    policy:
      levels: [0, 1]
      dt: 7
      t0: 14
    horizon: 200
    """)

FAST = ["france_dt28", "france_dt28_flipped", "three_county", "three_county_state", "three_county_baseline"]


def test_bundled_list():
    names = bundled_scenarios()
    assert {"france_dt7", "france_dt28", "three_county", "three_county_state"} <= set(names)
    assert sum(n.startswith("la_") for n in names) == 6


def test_france_dt7_fields():
    sc = load_scenario("france_dt7")
    reg = sc.regions[0]
    assert reg.population == 6.7e7
    assert reg.initial.i * reg.population == pytest.approx(1e3)
    assert sc.r0 == 2.9 and sc.t0 == 98 and sc.dt == 7
    assert sc.levels.levels == (0.0, 0.5, 1.0)


def test_france_dt28_fields():
    sc = load_scenario("france_dt28")
    assert (sc.t0, sc.dt) == (112, 28)


def test_defaults():
    sc = parse_scenario(BASE.replace("horizon: 200\n", ""))
    assert sc.gamma == 0.1 and sc.epsilon == 0.01 and sc.horizon == 1500
    np.testing.assert_array_equal(sc.K, np.eye(1))


def test_missing_r0_names_field():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(BASE.replace("  r0: 2.9\n", "  gamma: 0.1\n"))
    assert exc.value.field == "params.r0"
    assert "params.r0" in str(exc.value)
    assert exc.value.line == 3


@pytest.mark.parametrize("edit,field", [
    (("mode: optimize", "mode: sideways"), "mode"),
    (("t0: 14", "t0: 10"), "policy.t0"),
    (("levels: [0, 1]", "levels: [0, 0.5]"), "policy.levels"),
    (("I0: 10", "I0: 10\n    colour: red"), "regions[0].colour"),
    (("population: 1000", "population: -5"), "regions[0].population"),
    (("horizon: 200", "horizon: 200\nexcitation: [[1, 0], [0, 1]]"), "excitation"),
    (("dt: 7", "dt: seven"), "policy.dt"),
])
def test_validation_errors(edit, field):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(BASE.replace(*edit))
    assert exc.value.field == field
    assert exc.value.line is not None


def test_yaml_syntax_error_has_line():
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(BASE + "policy: [unclosed\n")
    assert exc.value.line is not None


def test_fraction_and_count_initial():
    a = parse_scenario(BASE)
    b = parse_scenario(BASE.replace("I0: 10", "i0: 0.01"))
    assert a.regions[0].initial == pytest.approx(b.regions[0].initial)
    with pytest.raises(ScenarioError):
        parse_scenario(BASE.replace("I0: 10", "I0: 10\n    i0: 0.01"))


def test_missing_file():
    with pytest.raises(ScenarioError):
        load_scenario("/nonexistent/nothing.yaml")


def test_game_parent_resolution():
    text = load_scenario("three_county_state").raw
    assert text["regions"][1]["parent"] == "state"
    broken = textwrap.dedent("""\
        mode: game
        params: {r0: 2}
        regions:
          - {id: a, population: 1, i0: 0.1, parent: nowhere, weights: {kappa: 0.5, eta: 0.5}}
        policy: {levels: [0, 1], dt: 7}
        horizon: 14
        """)
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(broken)
    assert exc.value.field == "regions[0].parent"


@pytest.mark.parametrize("name", FAST)
def test_bundled_roundtrip(tmp_path, name):
    sc = load_scenario(name)
    rep = run(sc, tmp_path / name, figures=False)
    for path in rep.files.values():
        assert Path(path).exists()
    report = load_report(rep.files["report"])
    assert report["scenario"]["name"] == name
    rows = list(csv.DictReader(open(rep.files["trajectory"])))
    n_leaves = len(sc.leaves)
    assert len(rows) == (len(next(iter(rep.trajectories.values())).states)) * n_leaves
    assert list(rows[0]) == ["day", "region", "s", "i", "r", "u"]


def test_trajectory_rows(tmp_path):
    sc = load_scenario("three_county_baseline")
    rep = run(sc, tmp_path / "b", figures=False)
    with open(rep.files["trajectory"]) as fh:
        assert sum(1 for _ in fh) - 1 == (sc.horizon + 1) * 3


def test_state_scenario_schedule_blocks(tmp_path):
    rep = run(load_scenario("three_county_state"), tmp_path / "s", figures=False)
    regions = {row["region"] for row in csv.DictReader(open(rep.files["schedule"]))}
    assert regions == {"state", "county1", "county2", "county3"}
    ref = rep.schedules["state"]
    assert all(rep.schedules[c] == ref for c in ("county1", "county2", "county3"))


def test_determinism(tmp_path):
    a = run(load_scenario("france_dt28"), tmp_path / "a", figures=False)
    b = run(load_scenario("france_dt28"), tmp_path / "b", figures=False)
    for key in ("schedule", "trajectory", "costs"):
        assert open(a.files[key], "rb").read() == open(b.files[key], "rb").read()
    ja, jb = load_report(a.files["report"]), load_report(b.files["report"])
    for rep in (ja, jb):
        rep.pop("wall_time")
        rep.pop("files")
    assert json.dumps(ja, sort_keys=True) == json.dumps(jb, sort_keys=True)


def test_compare(tmp_path):
    a = load_report(run(load_scenario("france_dt28"), tmp_path / "a", figures=False).files["report"])
    b = load_report(run(load_scenario("france_dt28_flipped"), tmp_path / "b", figures=False).files["report"])
    same = compare_runs(a, a)["france"]
    assert same["d_s_final"] == 0 and same["d_total_cost"] == 0 and same["d_peak_i"] == 0 and same["d_waves"] == 0
    diff = compare_runs(a, b)["france"]
    assert diff["d_s_final"] < 0 and diff["waves_b"] == 2


def test_compare_intervention(tmp_path):
    base = load_report(run(load_scenario("three_county_baseline"), tmp_path / "n", figures=False).files["report"])
    ctrl = load_report(run(load_scenario("three_county"), tmp_path / "c", figures=False).files["report"])
    diff = compare_runs(base, ctrl)
    assert all(diff[c]["d_s_final"] > 0 for c in ("county1", "county2", "county3"))


def test_compare_mismatch(tmp_path):
    a = {"regions": {"x": {}}}
    b = {"regions": {"y": {}}}
    with pytest.raises(ValueError):
        compare_runs(a, b)
