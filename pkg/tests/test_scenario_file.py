import math

import pytest

from dcmicrogrid.engine import Event, Scenario, SetGridRequest, SetQRef
from dcmicrogrid.presets import CASES, case_preset, preset_file_text
from dcmicrogrid.scenario_file import (
    EVENT_NAMES,
    KEYS,
    ScenarioError,
    format_scenario,
    load_scenario,
    parse_scenario,
)


def test_minimal_file_uses_defaults():
    sc = parse_scenario("[meta]\nduration = 2\n")
    assert sc == Scenario(duration=2.0)


@pytest.mark.parametrize("n", CASES)
def test_shipped_files_match_presets(n):
    assert parse_scenario(preset_file_text(n)) == case_preset(n)


@pytest.mark.parametrize("n", CASES)
def test_format_round_trip(n):
    sc = case_preset(n)
    assert parse_scenario(format_scenario(sc)) == sc


def test_round_trip_non_default_everything():
    text = """
[meta]
duration = 3  dt = 0.0005  log_decimation = 4
[pv]
photocurrent_stc = 8.0
strings_parallel = 40
mppt_period = 0.02
converter_efficiency = 0.98
[battery]
capacity_kwh = 20 soc_min = 0.1 soc_max = 0.9 initial_soc = 0.3
[inverter]
v_dc_ref = 400 capacitance = 0.2 feedforward = false kp = 2.5 ki = 40
[ems]
p_import_limit_kw = 50 soc_band = 0
[events]
t=0 irradiance 700
t=0.5 grid_request absorb_max
t=1 q_ref 5
t=1 vdc_ref 420
"""
    sc = parse_scenario(text)
    assert sc.pv.params.strings_parallel == 40
    assert sc.inverter.feedforward is False
    assert math.isinf(sc.events[1].kind.value)
    assert parse_scenario(format_scenario(sc)) == sc


def test_absorb_max_keyword():
    sc = parse_scenario("[meta]\nduration=2\n[events]\nt=1 grid_request absorb_max\n")
    assert sc.events == (Event(1.0, SetGridRequest(math.inf)),)


def test_absorb_max_only_for_grid_request():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("[meta]\nduration=2\n[events]\nt=1 q_ref absorb_max\n")
    assert err.value.line == 4


def test_inverted_soc_bounds_name_the_invariant():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("[meta]\nduration=1\n[battery]\nsoc_min = 0.9\nsoc_max = 0.2\n", "bad.scn")
    assert "soc_min < soc_max" in str(err.value)
    assert str(err.value).startswith("bad.scn:3:")


def test_unknown_key_is_located():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("[meta]\nduration=1\n[battery]\ncapacity_kwh=5  socmax=0.9\n")
    assert (err.value.line, err.value.column) == (4, 17)
    assert "socmax" in err.value.message


@pytest.mark.parametrize(
    "text, line",
    [
        ("duration = 1\n", 1),
        ("[meta]\nduration = abc\n", 2),
        ("[meta]\nduration = 1\n[bogus]\n", 3),
        ("[meta]\nduration = 1\nduration = 2\n", 3),
        ("[meta]\nduration = 1 stray\n", 2),
        ("[meta]\nduration = inf\n", 2),
        ("[meta]\nduration = 1\n[events]\nt=0 irradiance\n", 4),
        ("[meta]\nduration = 1\n[events]\nt=0 wind 3\n", 4),
        ("[meta]\nduration = 1\n[events]\nt=0 irradiance -5\n", 4),
        ("[meta]\nduration = 1\n[events]\nt=5 load 3\n", 4),
        ("[inverter]\nfeedforward = maybe\n", 2),
    ],
)
def test_syntax_errors_are_located(text, line):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert err.value.line == line


def test_missing_duration():
    with pytest.raises(ScenarioError, match="duration is required"):
        parse_scenario("[battery]\ninitial_soc=0.5\n")


def test_unsorted_events():
    text = "[meta]\nduration=2\n[events]\nt=1 load 5\nt=0.5 load 6\n"
    with pytest.raises(ScenarioError, match="not sorted") as err:
        parse_scenario(text)
    assert err.value.line == 5


def test_pv_sizing_conflicts():
    with pytest.raises(ScenarioError, match="mutually exclusive"):
        parse_scenario("[meta]\nduration=1\n[pv]\nrated_power_kw=100 photocurrent_stc=8\n")
    with pytest.raises(ScenarioError, match="strings_parallel"):
        parse_scenario("[meta]\nduration=1\n[pv]\nstrings_parallel=10\n")


def test_rated_power_scales_array():
    small = parse_scenario("[meta]\nduration=1\n[pv]\nrated_power_kw=50\n")
    assert small.pv.rated_power_kw == pytest.approx(50.0, rel=1e-6)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "nope.scn")


def test_load_reports_path(tmp_path):
    path = tmp_path / "x.scn"
    path.write_text("[meta]\nduration=1\n[nope]\n")
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    assert str(err.value).startswith(f"{path}:3:1:")


def test_tables_cover_event_types():
    assert set(EVENT_NAMES) == {"irradiance", "temperature", "load", "grid_request", "vdc_ref", "q_ref"}
    assert EVENT_NAMES["q_ref"] is SetQRef
    assert all(len(entry) == 3 for section in KEYS.values() for entry in section.values())
