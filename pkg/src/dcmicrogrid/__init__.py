"""Simulation and control of a grid-connected PV-battery DC microgrid."""

from .battery import BatteryParams, BatteryState, battery_advance
from .ems import ABSORB_MAX, CaseLabel, Dispatch, GridRequest, classify_case, dispatch
from .engine import RunResult, Scenario, SimRecord, run, steady_state_summary
from .presets import case_preset
from .pv_array import EnvConditions, PvParams, calibrated_params, pv_current, true_mpp
from .scenario_file import ScenarioError, format_scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "ABSORB_MAX",
    "BatteryParams",
    "BatteryState",
    "CaseLabel",
    "Dispatch",
    "EnvConditions",
    "GridRequest",
    "PvParams",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "SimRecord",
    "battery_advance",
    "calibrated_params",
    "case_preset",
    "classify_case",
    "dispatch",
    "format_scenario",
    "load_scenario",
    "parse_scenario",
    "pv_current",
    "run",
    "steady_state_summary",
    "true_mpp",
]
