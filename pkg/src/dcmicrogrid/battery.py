"""
Battery energy reservoir behind the bidirectional DC/DC converter.

Sign convention: ``p_bat > 0`` discharges into the DC bus, ``p_bat < 0``
charges. Powers are in kW, energies in kWh, time in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = ["BatteryParams", "BatteryState", "battery_advance", "soc_overshoot_bound"]


@dataclass(frozen=True)
class BatteryParams:
    capacity: float = 100.0  # kWh
    soc_max: float = 0.95
    soc_min: float = 0.20
    p_charge_max: float = 10.0  # kW
    p_discharge_max: float = 10.0  # kW
    efficiency_charge: float = 0.95
    efficiency_discharge: float = 0.95
    tracking_time_constant: float = 0.02  # s; 0 means ideal tracking

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError(f"battery: capacity must be > 0, got {self.capacity}")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValueError(
                "battery: invariant 0 <= soc_min < soc_max <= 1 violated "
                f"(soc_min={self.soc_min}, soc_max={self.soc_max})"
            )
        if not (self.p_charge_max > 0 and self.p_discharge_max > 0):
            raise ValueError("battery: power limits must be > 0")
        for name in ("efficiency_charge", "efficiency_discharge"):
            eta = getattr(self, name)
            if not 0 < eta <= 1:
                raise ValueError(f"battery: {name} must lie in (0, 1], got {eta}")
        if not self.tracking_time_constant >= 0:
            raise ValueError("battery: tracking_time_constant must be >= 0")


@dataclass(frozen=True)
class BatteryState:
    soc: float
    p_bat: float = 0.0
    p_ref: float = 0.0

    def __post_init__(self):
        if not 0 <= self.soc <= 1:
            raise ValueError(f"battery: soc must lie in [0, 1], got {self.soc}")


def soc_overshoot_bound(params: BatteryParams, dt: float) -> float:
    """Largest SOC change one step can produce at rated power."""
    rate = max(params.p_charge_max * params.efficiency_charge, params.p_discharge_max / params.efficiency_discharge)
    return rate * dt / (params.capacity * 3600.0)


def _energy(p0, target, tau, t):
    """Integral over [0, t] of target + (p0 - target) * exp(-s/tau), in kW*s."""
    if tau == 0.0:
        return target * t
    return target * t + (p0 - target) * tau * -math.expm1(-t / tau)


def battery_advance(state: BatteryState, params: BatteryParams, p_ref: float, dt: float) -> BatteryState:
    """
    Advance the battery by ``dt`` seconds toward the power reference ``p_ref``.

    The reference is clamped to the converter limits, then to the SOC
    window (no charging at or above ``soc_max``, no discharging at or below
    ``soc_min``). At a limit, realized power in the blocked direction is
    cut at once instead of decaying, so the SOC overshoots by at most one
    step. Otherwise the realized power follows with an exact first-order lag
    and the SOC integrates the exact lag trajectory, switching efficiency at
    the zero crossing when the power changes sign inside the step.
    The returned state carries the effective reference in ``p_ref``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    ref = min(max(p_ref, -params.p_charge_max), params.p_discharge_max)
    p0 = state.p_bat
    if state.soc >= params.soc_max:
        ref = max(ref, 0.0)
        p0 = max(p0, 0.0)
    if state.soc <= params.soc_min:
        ref = min(ref, 0.0)
        p0 = min(p0, 0.0)

    tau = params.tracking_time_constant
    p1 = ref if tau == 0.0 else ref + (p0 - ref) * math.exp(-dt / tau)

    # split the step where the lag trajectory crosses zero
    if tau > 0.0 and p0 * ref < 0.0:
        t_cross = min(tau * math.log((p0 - ref) / -ref), dt)
        segments = ((p0, t_cross), (0.0, dt - t_cross))
    else:
        segments = ((p0, dt),)

    delta_kwh = 0.0
    for p_start, duration in segments:
        e = _energy(p_start, ref, tau, duration) / 3600.0
        if e > 0.0:
            delta_kwh -= e / params.efficiency_discharge
        else:
            delta_kwh -= e * params.efficiency_charge

    soc = min(max(state.soc + delta_kwh / params.capacity, 0.0), 1.0)
    return BatteryState(soc=soc, p_bat=p1, p_ref=ref)
