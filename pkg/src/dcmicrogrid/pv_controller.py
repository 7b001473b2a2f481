"""
Controller of the PV boost converter.

Two modes: incremental-conductance MPPT and curtailment to a power
reference. Both move the voltage reference ``v_ref``; the averaged converter
then drags the PV terminal voltage toward it with a first-order lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

__all__ = [
    "Mppt",
    "PowerReference",
    "PvControlMode",
    "MpptState",
    "ConverterState",
    "INCOND_EPSILON",
    "incond_step",
    "curtail_step",
    "converter_advance",
    "delivered_power",
]

# conductance tolerance for the IncCond equality test, in S
INCOND_EPSILON = 1e-6


@dataclass(frozen=True)
class Mppt:
    @property
    def label(self):
        return "mppt"


@dataclass(frozen=True)
class PowerReference:
    p_ref: float  # W

    def __post_init__(self):
        if not self.p_ref >= 0:
            raise ValueError(f"PowerReference.p_ref must be >= 0, got {self.p_ref}")

    @property
    def label(self):
        return "power_ref"


PvControlMode = Union[Mppt, PowerReference]


@dataclass(frozen=True)
class MpptState:
    """
    Voltage-reference state shared by both control modes.

    ``v_oc_estimate`` and ``v_mpp_estimate`` bound the reference; the
    supervisor refreshes them whenever the environment changes.
    """

    v_ref: float
    prev_voltage: float = 0.0
    prev_current: float = 0.0
    step_size: float = 1.0
    update_period: float = 0.01
    time_since_update: float = 0.0
    v_oc_estimate: float = math.inf
    v_mpp_estimate: float = 0.0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("MpptState.step_size must be > 0")
        if not self.update_period > 0:
            raise ValueError("MpptState.update_period must be > 0")


@dataclass(frozen=True)
class ConverterState:
    terminal_voltage: float
    tracking_time_constant: float = 1e-3
    efficiency: float = 1.0

    def __post_init__(self):
        if not self.tracking_time_constant > 0:
            raise ValueError("ConverterState.tracking_time_constant must be > 0")
        if not 0 < self.efficiency <= 1:
            raise ValueError("ConverterState.efficiency must lie in (0, 1]")


def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


def incond_step(state: MpptState, measured) -> MpptState:
    """One incremental-conductance update of ``v_ref``."""
    v, i = measured.voltage, measured.current
    dv = v - state.prev_voltage
    di = i - state.prev_current
    step = state.step_size

    if dv == 0.0:
        if di == 0.0:
            delta = 0.0
        elif di > 0.0:
            delta = step
        else:
            delta = -step
    elif v <= 0.0:
        # -I/V is undefined at short circuit; dP/dV = I >= 0 there
        delta = step
    else:
        incremental = di / dv
        instantaneous = -i / v
        if abs(incremental - instantaneous) <= INCOND_EPSILON:
            delta = 0.0
        elif incremental > instantaneous:
            delta = step
        else:
            delta = -step

    v_ref = _clamp(state.v_ref + delta, 0.0, state.v_oc_estimate)
    return replace(state, v_ref=v_ref, prev_voltage=v, prev_current=i, time_since_update=0.0)


def curtail_step(state: MpptState, measured, p_ref: float, controller_gain: float) -> MpptState:
    """
    Integral power control on the high-voltage side of the MPP.

    Right of the MPP, raising the voltage lowers the power, so
    ``v_ref += gain * (P - p_ref)`` is a stable integral loop. The lower
    clamp at the MPP voltage makes a reference above the available power
    settle at the MPP.
    """
    if not p_ref >= 0:
        raise ValueError(f"p_ref must be >= 0, got {p_ref}")
    v_ref = state.v_ref + controller_gain * (measured.power - p_ref)
    v_ref = _clamp(v_ref, state.v_mpp_estimate, state.v_oc_estimate)
    return replace(
        state,
        v_ref=v_ref,
        prev_voltage=measured.voltage,
        prev_current=measured.current,
        time_since_update=0.0,
    )


def converter_advance(conv: ConverterState, v_ref: float, dt: float) -> ConverterState:
    """Exact first-order step of the terminal voltage toward ``v_ref``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    decay = math.exp(-dt / conv.tracking_time_constant)
    v = v_ref + (conv.terminal_voltage - v_ref) * decay
    return replace(conv, terminal_voltage=v)


def delivered_power(conv: ConverterState, terminal_power: float) -> float:
    """Power the converter hands to the DC bus."""
    return terminal_power * conv.efficiency
