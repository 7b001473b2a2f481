"""
Fixed-timestep simulation of the PV-battery DC microgrid.

Each step of length ``dt`` applies due events, runs the supervisor at its
own period, advances the PV converter, the battery, the inverter and the
DC link, and audits the power balance

    p_pv + p_bat - p_grid - p_load - p_loss - p_cap = 0

where ``p_cap`` is the rate of change of the link-capacitor energy.
Powers in records are kW, time is seconds.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, field, replace
from typing import Union

from . import inverter as inv_mod
from .battery import BatteryParams, BatteryState, battery_advance
from .ems import GridRequest, SocLatch, dispatch, update_latch
from .pv_array import (
    STC,
    EnvConditions,
    PvParams,
    PvSolverError,
    calibrated_params,
    open_circuit_voltage,
    pv_operating_point,
    true_mpp,
)
from .pv_controller import ConverterState, MpptState, converter_advance, curtail_step, incond_step

__all__ = [
    "PvConfig",
    "EmsConfig",
    "SetIrradiance",
    "SetTemperature",
    "SetDcLoad",
    "SetGridRequest",
    "SetVdcRef",
    "SetQRef",
    "Event",
    "Scenario",
    "SimRecord",
    "Fault",
    "RunSummary",
    "RunResult",
    "ChannelStats",
    "NUMERIC_CHANNELS",
    "run",
    "steady_state_summary",
    "summarize_columns",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PvConfig:
    params: PvParams = field(default_factory=calibrated_params)
    mppt_step_fraction: float = 0.005  # of the STC open-circuit voltage
    mppt_period: float = 0.01
    curtail_gain: float = 1e-4  # V/W
    converter_time_constant: float = 1e-3
    converter_efficiency: float = 1.0

    def __post_init__(self):
        if not self.mppt_step_fraction > 0:
            raise ValueError("pv: mppt_step_fraction must be > 0")
        if not self.mppt_period > 0:
            raise ValueError("pv: mppt_period must be > 0")
        if not self.curtail_gain > 0:
            raise ValueError("pv: curtail_gain must be > 0")
        if not self.converter_time_constant > 0:
            raise ValueError("pv: converter_time_constant must be > 0")
        if not 0 < self.converter_efficiency <= 1:
            raise ValueError("pv: converter_efficiency must lie in (0, 1]")

    @property
    def rated_power_kw(self):
        return true_mpp(self.params, STC).power * 1e-3


@dataclass(frozen=True)
class EmsConfig:
    period: float = 0.05
    p_import_limit: float = 500.0
    p_export_limit: float = 500.0
    soc_band: float = 0.01
    max_infeasible_time: float = 1.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("ems: period must be > 0")
        if not (self.p_import_limit >= 0 and self.p_export_limit >= 0):
            raise ValueError("ems: grid limits must be >= 0")
        if not self.soc_band >= 0:
            raise ValueError("ems: soc_band must be >= 0")
        if not self.max_infeasible_time > 0:
            raise ValueError("ems: max_infeasible_time must be > 0")


def _finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class SetIrradiance:
    value: float  # W/m2

    def __post_init__(self):
        _finite("irradiance", self.value)
        if self.value < 0:
            raise ValueError("irradiance must be >= 0")


@dataclass(frozen=True)
class SetTemperature:
    value: float  # degC

    def __post_init__(self):
        _finite("temperature", self.value)


@dataclass(frozen=True)
class SetDcLoad:
    value: float  # kW

    def __post_init__(self):
        _finite("load", self.value)
        if self.value < 0:
            raise ValueError("load must be >= 0")


@dataclass(frozen=True)
class SetGridRequest:
    """Export request in kW; ``ems.ABSORB_MAX`` asks for as much as possible."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0):
            raise ValueError("grid request must be >= 0 or absorb_max")


@dataclass(frozen=True)
class SetVdcRef:
    value: float  # V

    def __post_init__(self):
        _finite("vdc_ref", self.value)
        if self.value <= 0:
            raise ValueError("vdc_ref must be > 0")


@dataclass(frozen=True)
class SetQRef:
    value: float  # kVAr

    def __post_init__(self):
        _finite("q_ref", self.value)


EventKind = Union[SetIrradiance, SetTemperature, SetDcLoad, SetGridRequest, SetVdcRef, SetQRef]


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind


@dataclass(frozen=True)
class Scenario:
    duration: float
    dt: float = 1e-3
    log_decimation: int = 10
    pv: PvConfig = field(default_factory=PvConfig)
    battery: BatteryParams = field(default_factory=BatteryParams)
    inverter: inv_mod.InverterParams = field(default_factory=inv_mod.InverterParams)
    ems: EmsConfig = field(default_factory=EmsConfig)
    initial_soc: float = 0.5
    v_dc_ref: float = 450.0
    events: tuple = ()

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError("meta: duration must be > 0")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError("meta: dt must be > 0")
        if self.dt > self.duration:
            raise ValueError("meta: dt must not exceed duration")
        if int(self.log_decimation) != self.log_decimation or self.log_decimation < 1:
            raise ValueError("meta: log_decimation must be an integer >= 1")
        if not 0 <= self.initial_soc <= 1:
            raise ValueError("battery: initial_soc must lie in [0, 1]")
        if not self.v_dc_ref > self.inverter.v_dc_min:
            raise ValueError("inverter: v_dc_ref must exceed v_dc_min")
        object.__setattr__(self, "events", tuple(self.events))
        last = -math.inf
        for ev in self.events:
            if ev.time < 0 or ev.time > self.duration:
                raise ValueError(f"events: time {ev.time} outside [0, duration={self.duration}]")
            if ev.time < last:
                raise ValueError(f"events: not sorted by time (t={ev.time} after t={last})")
            last = ev.time


@dataclass(frozen=True)
class SimRecord:
    t: float
    irradiance: float
    temperature: float
    v_pv: float
    i_pv: float
    p_pv: float
    pv_mode: str
    p_pv_ref: float
    p_bat: float
    p_bat_ref: float
    soc: float
    p_load: float
    p_grid: float
    q_grid: float
    v_dc: float
    p_loss: float
    p_cap: float
    balance_residual: float
    case_label: str
    flags: tuple = ()


NUMERIC_CHANNELS = (
    "irradiance",
    "temperature",
    "v_pv",
    "i_pv",
    "p_pv",
    "p_pv_ref",
    "p_bat",
    "p_bat_ref",
    "soc",
    "p_load",
    "p_grid",
    "q_grid",
    "v_dc",
    "p_loss",
    "p_cap",
    "balance_residual",
)


@dataclass(frozen=True)
class Fault:
    kind: str  # "bus_collapse" | "infeasible" | "solver"
    time: float
    message: str


@dataclass(frozen=True)
class RunSummary:
    completed: bool
    steps: int
    n_records: int
    max_abs_residual: float
    load_shed_time: float
    fault: Fault | None = None


@dataclass(frozen=True)
class RunResult:
    records: tuple
    summary: RunSummary

    def __iter__(self):
        return iter((self.records, self.summary))


def _steps_per(period, dt):
    return max(1, round(period / dt))


def _event_step(time, dt):
    # snap forward to the next step boundary; the epsilon absorbs t/dt rounding
    return math.ceil(time / dt - 1e-9)


def run(scenario: Scenario) -> RunResult:
    """Simulate ``scenario`` and return the logged records and a summary."""
    dt = scenario.dt
    n_steps = round(scenario.duration / dt)
    n_ems = _steps_per(scenario.ems.period, dt)
    n_mppt = _steps_per(scenario.pv.mppt_period, dt)
    dec = int(scenario.log_decimation)

    pv_cfg = scenario.pv
    params = pv_cfg.params
    bat_params = scenario.battery
    inv_params = scenario.inverter
    kp, ki = inv_mod.default_gains(inv_params, scenario.v_dc_ref)

    env = EnvConditions(0.0, 25.0)
    load = 0.0
    grid = GridRequest(
        p_request=0.0,
        p_import_limit=scenario.ems.p_import_limit,
        p_export_limit=scenario.ems.p_export_limit,
    )
    v_dc_ref = scenario.v_dc_ref
    q_ref = 0.0

    pending = sorted(
        ((_event_step(ev.time, dt), i, ev.kind) for i, ev in enumerate(scenario.events)),
        key=lambda e: (e[0], e[1]),
    )
    cursor = 0

    def apply_due(k):
        nonlocal cursor, env, load, grid, v_dc_ref, q_ref
        env_changed = False
        while cursor < len(pending) and pending[cursor][0] <= k:
            kind = pending[cursor][2]
            cursor += 1
            if isinstance(kind, SetIrradiance):
                env = replace(env, irradiance=kind.value)
                env_changed = True
            elif isinstance(kind, SetTemperature):
                env = replace(env, cell_temperature=kind.value)
                env_changed = True
            elif isinstance(kind, SetDcLoad):
                load = kind.value
            elif isinstance(kind, SetGridRequest):
                grid = replace(grid, p_request=kind.value)
            elif isinstance(kind, SetVdcRef):
                v_dc_ref = kind.value
            elif isinstance(kind, SetQRef):
                q_ref = kind.value
                grid = replace(grid, q_request=kind.value)
        return env_changed

    apply_due(0)
    mpp = true_mpp(params, env)
    step_size = pv_cfg.mppt_step_fraction * open_circuit_voltage(params, STC)
    first = pv_operating_point(params, env, mpp.voltage)
    mppt = MpptState(
        v_ref=mpp.voltage,
        prev_voltage=first.voltage,
        prev_current=first.current,
        step_size=step_size,
        update_period=n_mppt * dt,
        v_oc_estimate=open_circuit_voltage(params, env),
        v_mpp_estimate=mpp.voltage,
    )
    conv = ConverterState(mpp.voltage, pv_cfg.converter_time_constant, pv_cfg.converter_efficiency)
    op = first
    battery = BatteryState(soc=scenario.initial_soc)
    latch = SocLatch(band=scenario.ems.soc_band)
    inverter = inv_mod.initial_inverter_state(inv_params)
    bus = inv_mod.DcBusState(scenario.v_dc_ref, inv_params.capacitance, inv_params.v_dc_min)

    records = []
    decision = None
    infeasible_for = 0.0
    shed_time = 0.0
    max_residual = 0.0
    fault = None
    k = 0

    for k in range(n_steps):
        t = k * dt
        if k > 0 and apply_due(k):
            mpp = true_mpp(params, env)
            mppt = replace(
                mppt, v_oc_estimate=open_circuit_voltage(params, env), v_mpp_estimate=mpp.voltage
            )

        if k % n_ems == 0:
            latch = update_latch(latch, battery.soc, bat_params)
            decision = dispatch(mpp.power * 1e-3, load, grid, battery.soc, bat_params, latch)
        if decision.shortfall > 0:
            infeasible_for += dt
            shed_time += dt
            if infeasible_for > scenario.ems.max_infeasible_time:
                fault = Fault("infeasible", t, f"demand exceeds supply by {decision.shortfall:.3f} kW")
                log.warning("run aborted at t=%.3f s: %s", t, fault.message)
                break
        else:
            infeasible_for = 0.0

        try:
            if k % n_mppt == 0:
                if decision.pv_mode == "mppt":
                    mppt = incond_step(mppt, op)
                else:
                    mppt = curtail_step(mppt, op, decision.p_pv_ref * 1e3, pv_cfg.curtail_gain)
            else:
                mppt = replace(mppt, time_since_update=mppt.time_since_update + dt)
            conv = converter_advance(conv, mppt.v_ref, dt)
            op = pv_operating_point(params, env, max(conv.terminal_voltage, 0.0))
        except PvSolverError as exc:
            fault = Fault("solver", t, str(exc))
            break
        p_pv = op.power * 1e-3
        p_pv_dc = p_pv * conv.efficiency

        battery = battery_advance(battery, bat_params, decision.p_bat_ref, dt)
        p_load = max(load - decision.shortfall, 0.0)

        p_ff = p_pv_dc + battery.p_bat - p_load if inv_params.feedforward else 0.0
        inverter = inv_mod.voltage_loop_step(bus, inverter, v_dc_ref, dt, kp, ki, p_ff)
        inverter = inv_mod.q_loop_step(inverter, q_ref, dt)
        p_grid = inv_mod.active_power(inverter)
        p_inv_dc = inv_mod.dc_side_power(inverter)

        try:
            new_bus = inv_mod.bus_advance(bus, p_pv_dc + battery.p_bat, p_load + p_inv_dc, dt)
        except inv_mod.BusCollapseError as exc:
            fault = Fault("bus_collapse", t + dt, str(exc))
            log.warning("run aborted at t=%.3f s: %s", t + dt, exc)
            break
        p_cap = (new_bus.energy - bus.energy) / dt * 1e-3
        bus = new_bus
        p_loss = (p_pv - p_pv_dc) + (p_inv_dc - p_grid)
        residual = p_pv + battery.p_bat - p_grid - p_load - p_loss - p_cap
        max_residual = max(max_residual, abs(residual))

        if (k + 1) % dec == 0:
            flags = []
            if inverter.d_saturated:
                flags.append("id_saturated")
            if inverter.q_limited:
                flags.append("q_limited")
            if decision.shortfall > 0:
                flags.append("load_shed")
            records.append(
                SimRecord(
                    t=(k + 1) * dt,
                    irradiance=env.irradiance,
                    temperature=env.cell_temperature,
                    v_pv=op.voltage,
                    i_pv=op.current,
                    p_pv=p_pv,
                    pv_mode=decision.pv_mode,
                    p_pv_ref=decision.p_pv_ref,
                    p_bat=battery.p_bat,
                    p_bat_ref=battery.p_ref,
                    soc=battery.soc,
                    p_load=p_load,
                    p_grid=p_grid,
                    q_grid=inv_mod.reactive_power(inverter),
                    v_dc=bus.v_dc,
                    p_loss=p_loss,
                    p_cap=p_cap,
                    balance_residual=residual,
                    case_label=decision.case_label.value,
                    flags=tuple(flags),
                )
            )
    else:
        k = n_steps

    summary = RunSummary(
        completed=fault is None,
        steps=k if fault is not None else n_steps,
        n_records=len(records),
        max_abs_residual=max_residual,
        load_shed_time=shed_time,
        fault=fault,
    )
    return RunResult(tuple(records), summary)


@dataclass(frozen=True)
class ChannelStats:
    mean: float
    min: float
    max: float
    count: int


def summarize_columns(times, columns, window):
    """
    Mean/min/max of each column over the trailing ``window`` seconds.

    ``times`` and every column are equal-length sequences; samples with
    ``t > t_end - window`` are included.
    """
    times = list(times)
    if not times:
        raise ValueError("no records to summarize")
    if not window > 0:
        raise ValueError("window must be > 0")
    span = times[-1] - times[0] + (times[1] - times[0] if len(times) > 1 else 0.0)
    if window > span * (1 + 1e-9):
        raise ValueError(f"window {window} s exceeds record span {span} s")
    start = times[-1] - window
    idx = [i for i, t in enumerate(times) if t > start + 1e-12 * max(1.0, abs(start))]
    if not idx:
        raise ValueError("empty summary window")
    out = {}
    for name, values in columns.items():
        sel = [values[i] for i in idx]
        out[name] = ChannelStats(statistics.fmean(sel), min(sel), max(sel), len(sel))
    return out


def steady_state_summary(records, window, channels=NUMERIC_CHANNELS):
    """Per-channel :class:`ChannelStats` over the trailing ``window`` seconds."""
    if not records:
        raise ValueError("no records to summarize")
    times = [r.t for r in records]
    columns = {c: [getattr(r, c) for r in records] for c in channels}
    return summarize_columns(times, columns, window)
