"""
Reader and writer for scenario files.

A scenario file is INI-like text::

    # comment
    [meta]
    duration = 5          # s
    dt = 0.001            # s
    [battery]
    initial_soc = 0.6
    soc_min=0.2 soc_max=0.95
    [events]
    t=0 irradiance 1000
    t=1 grid_request absorb_max

Sections are ``meta``, ``pv``, ``battery``, ``inverter``, ``ems`` and
``events``. Several ``key=value`` pairs may share a line. Unknown sections
and keys are errors; see ``KEYS`` for the accepted keys and their units.
"""

from __future__ import annotations

import math
import re
from dataclasses import fields, replace

from .battery import BatteryParams
from .ems import ABSORB_MAX
from .engine import (
    EmsConfig,
    Event,
    PvConfig,
    Scenario,
    SetDcLoad,
    SetGridRequest,
    SetIrradiance,
    SetQRef,
    SetTemperature,
    SetVdcRef,
)
from .inverter import InverterParams
from .pv_array import PvParams, calibrated_params

__all__ = ["ScenarioError", "KEYS", "EVENT_NAMES", "parse_scenario", "load_scenario", "format_scenario"]


class ScenarioError(ValueError):
    def __init__(self, message, line=None, column=None, source="<scenario>"):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = source
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


# section -> file key -> (target field, type, unit)
KEYS = {
    "meta": {
        "duration": ("duration", float, "s"),
        "dt": ("dt", float, "s"),
        "log_decimation": ("log_decimation", int, "steps"),
    },
    "pv": {
        "rated_power_kw": ("rated_power_kw", float, "kW"),
        "photocurrent_stc": ("photocurrent_stc", float, "A"),
        "saturation_current": ("saturation_current", float, "A"),
        "series_resistance": ("series_resistance", float, "ohm per cell"),
        "shunt_resistance": ("shunt_resistance", float, "ohm per cell"),
        "ideality_factor": ("ideality_factor", float, "-"),
        "thermal_voltage_stc": ("thermal_voltage_stc", float, "V"),
        "cells_series": ("cells_series", int, "cells"),
        "strings_parallel": ("strings_parallel", int, "strings"),
        "current_temp_coeff": ("current_temp_coeff", float, "A/degC"),
        "irradiance_stc": ("irradiance_stc", float, "W/m2"),
        "temp_stc": ("temp_stc", float, "degC"),
        "mppt_step_fraction": ("mppt_step_fraction", float, "fraction of V_oc"),
        "mppt_period": ("mppt_period", float, "s"),
        "curtail_gain": ("curtail_gain", float, "V/W"),
        "converter_time_constant": ("converter_time_constant", float, "s"),
        "converter_efficiency": ("converter_efficiency", float, "-"),
    },
    "battery": {
        "capacity_kwh": ("capacity", float, "kWh"),
        "soc_min": ("soc_min", float, "fraction"),
        "soc_max": ("soc_max", float, "fraction"),
        "p_charge_max_kw": ("p_charge_max", float, "kW"),
        "p_discharge_max_kw": ("p_discharge_max", float, "kW"),
        "efficiency_charge": ("efficiency_charge", float, "-"),
        "efficiency_discharge": ("efficiency_discharge", float, "-"),
        "time_constant": ("tracking_time_constant", float, "s"),
        "initial_soc": ("initial_soc", float, "fraction"),
    },
    "inverter": {
        "v_dc_ref": ("v_dc_ref", float, "V"),
        "v_ll": ("v_ll", float, "V rms"),
        "frequency": ("frequency", float, "Hz"),
        "rating_kva": ("rating_kva", float, "kVA"),
        "current_time_constant": ("current_time_constant", float, "s"),
        "efficiency": ("efficiency", float, "-"),
        "capacitance": ("capacitance", float, "F"),
        "v_dc_min": ("v_dc_min", float, "V"),
        "kp": ("kp", float, "A/V"),
        "ki": ("ki", float, "A/(V s)"),
        "feedforward": ("feedforward", bool, "true|false"),
        "settling_time": ("settling_time", float, "s"),
    },
    "ems": {
        "period": ("period", float, "s"),
        "p_import_limit_kw": ("p_import_limit", float, "kW"),
        "p_export_limit_kw": ("p_export_limit", float, "kW"),
        "soc_band": ("soc_band", float, "fraction"),
        "max_infeasible_time": ("max_infeasible_time", float, "s"),
    },
}

EVENT_NAMES = {
    "irradiance": SetIrradiance,
    "temperature": SetTemperature,
    "load": SetDcLoad,
    "grid_request": SetGridRequest,
    "vdc_ref": SetVdcRef,
    "q_ref": SetQRef,
}
_EVENT_KEYWORDS = {cls: name for name, cls in EVENT_NAMES.items()}

_PV_DIODE_FIELDS = {f.name for f in fields(PvParams)}
_PAIR = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)")
_SECTION = re.compile(r"\[\s*([A-Za-z_]+)\s*\]")
_EVENT = re.compile(r"t\s*=\s*(\S+)\s+([A-Za-z_]+)\s+(\S+)")


def _convert(text, kind, where):
    if kind is bool:
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ScenarioError(f"expected true or false, got {text!r}", *where)
    try:
        value = kind(text)
    except ValueError:
        name = "integer" if kind is int else "number"
        raise ScenarioError(f"expected {name}, got {text!r}", *where) from None
    if kind is float and not math.isfinite(value):
        raise ScenarioError(f"value must be finite, got {text!r}", *where)
    return value


def _strip_comment(line):
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """
    Parse scenario text into a validated :class:`Scenario`.

    Raises
    ------
    ScenarioError
        On syntax errors, unknown sections or keys, bad values, unsorted
        events or violated invariants, with the offending line and column.
    """
    values = {name: {} for name in KEYS}
    section_line = {}
    events = []
    section = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        stripped = line.strip()

        m = _SECTION.fullmatch(stripped)
        if m:
            name = m.group(1)
            if name not in KEYS and name != "events":
                raise ScenarioError(f"unknown section [{name}]", lineno, indent + 1, source)
            if name in section_line:
                raise ScenarioError(f"duplicate section [{name}]", lineno, indent + 1, source)
            section = name
            section_line[name] = lineno
            continue
        if stripped.startswith("["):
            raise ScenarioError("malformed section header", lineno, indent + 1, source)
        if section is None:
            raise ScenarioError("content before the first section header", lineno, indent + 1, source)

        if section == "events":
            m = _EVENT.fullmatch(stripped)
            if not m:
                raise ScenarioError(
                    "expected 't=<seconds> <event> <value>'", lineno, indent + 1, source
                )
            col = lambda g: indent + m.start(g) + 1  # noqa: E731
            time = _convert(m.group(1), float, (lineno, col(1), source))
            name = m.group(2)
            if name not in EVENT_NAMES:
                raise ScenarioError(
                    f"unknown event {name!r} (expected one of {', '.join(EVENT_NAMES)})",
                    lineno,
                    col(2),
                    source,
                )
            token = m.group(3)
            if name == "grid_request" and token == "absorb_max":
                value = ABSORB_MAX
            else:
                value = _convert(token, float, (lineno, col(3), source))
            if events and time < events[-1][0]:
                raise ScenarioError(
                    f"events not sorted: t={time} follows t={events[-1][0]}", lineno, col(1), source
                )
            try:
                kind = EVENT_NAMES[name](value)
            except ValueError as exc:
                raise ScenarioError(str(exc), lineno, col(3), source) from None
            events.append((time, kind, lineno))
            continue

        pos = 0
        body = line
        for m in _PAIR.finditer(body):
            gap = body[pos : m.start()]
            if gap.strip():
                raise ScenarioError(
                    f"unexpected text {gap.strip()!r}", lineno, pos + len(gap) - len(gap.lstrip()) + 1, source
                )
            key = m.group(1)
            where = (lineno, m.start(1) + 1, source)
            if key not in KEYS[section]:
                raise ScenarioError(f"unknown key {key!r} in [{section}]", *where)
            if key in values[section]:
                raise ScenarioError(f"duplicate key {key!r} in [{section}]", *where)
            target, kind, _unit = KEYS[section][key]
            values[section][key] = (_convert(m.group(2), kind, (lineno, m.start(2) + 1, source)), lineno)
            pos = m.end()
        tail = body[pos:]
        if tail.strip():
            col = pos + len(tail) - len(tail.lstrip()) + 1
            raise ScenarioError(f"expected key=value, got {tail.strip()!r}", lineno, col, source)

    def block(name):
        return {KEYS[name][k][0]: v for k, (v, _) in values[name].items()}

    def invalid(name, exc):
        line = section_line.get(name)
        return ScenarioError(str(exc), line, 1 if line else None, source)

    try:
        pv = _build_pv(block("pv"))
    except ValueError as exc:
        raise invalid("pv", exc) from None
    bat_values = block("battery")
    initial_soc = bat_values.pop("initial_soc", 0.5)
    try:
        battery = BatteryParams(**bat_values)
    except ValueError as exc:
        raise invalid("battery", exc) from None
    inv_values = block("inverter")
    v_dc_ref = inv_values.pop("v_dc_ref", 450.0)
    try:
        inverter = InverterParams(**inv_values)
    except ValueError as exc:
        raise invalid("inverter", exc) from None
    try:
        ems = EmsConfig(**block("ems"))
    except ValueError as exc:
        raise invalid("ems", exc) from None

    meta = block("meta")
    if "duration" not in meta:
        raise ScenarioError("[meta] duration is required", section_line.get("meta"), None, source)
    for time, _kind, lineno in events:
        if time < 0 or time > meta["duration"]:
            raise ScenarioError(
                f"event time {time} outside [0, duration={meta['duration']}]", lineno, 1, source
            )
    try:
        return Scenario(
            pv=pv,
            battery=battery,
            inverter=inverter,
            ems=ems,
            initial_soc=initial_soc,
            v_dc_ref=v_dc_ref,
            events=tuple(Event(t, kind) for t, kind, _ in events),
            **meta,
        )
    except ValueError as exc:
        raise invalid("meta", exc) from None


def _build_pv(values):
    diode = {k: v for k, v in values.items() if k in _PV_DIODE_FIELDS}
    control = {k: v for k, v in values.items() if k not in _PV_DIODE_FIELDS and k != "rated_power_kw"}
    rated = values.get("rated_power_kw")
    if "photocurrent_stc" in diode:
        if rated is not None:
            raise ValueError("pv: rated_power_kw and photocurrent_stc are mutually exclusive")
        params = replace(PvParams(), **diode)
    else:
        if "strings_parallel" in diode:
            raise ValueError("pv: strings_parallel requires an explicit photocurrent_stc")
        if rated is not None and not rated > 0:
            raise ValueError(f"pv: rated_power_kw must be > 0, got {rated}")
        template = replace(PvParams(), **diode)
        params = calibrated_params(1e3 * (165.0 if rated is None else rated), template)
    return PvConfig(params=params, **control)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read(), source=str(path))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)


def format_scenario(scenario: Scenario) -> str:
    """Serialise ``scenario`` with explicit parameters; parses back to an equal object."""
    out = ["[meta]"]
    out.append(f"duration = {_fmt(scenario.duration)}")
    out.append(f"dt = {_fmt(scenario.dt)}")
    out.append(f"log_decimation = {int(scenario.log_decimation)}")

    sources = {
        "pv": lambda field: getattr(scenario.pv.params, field)
        if field in _PV_DIODE_FIELDS
        else getattr(scenario.pv, field),
        "battery": lambda field: scenario.initial_soc
        if field == "initial_soc"
        else getattr(scenario.battery, field),
        "inverter": lambda field: scenario.v_dc_ref
        if field == "v_dc_ref"
        else getattr(scenario.inverter, field),
        "ems": lambda field: getattr(scenario.ems, field),
    }
    for section, getter in sources.items():
        out.append("")
        out.append(f"[{section}]")
        for key, (target, _kind, unit) in KEYS[section].items():
            if key == "rated_power_kw":
                continue
            value = getter(target)
            if value is None:
                continue
            out.append(f"{key} = {_fmt(value)}  # {unit}")

    out.append("")
    out.append("[events]")
    for ev in scenario.events:
        name = _EVENT_KEYWORDS[type(ev.kind)]
        value = "absorb_max" if ev.kind.value == ABSORB_MAX else _fmt(ev.kind.value)
        out.append(f"t={_fmt(ev.time)} {name} {value}")
    return "\n".join(out) + "\n"
