"""
Averaged model of the DC link and the grid-tied inverter.

The grid is an infinite bus with the d axis aligned to the phase-a voltage
(ideal PLL), so ``v_q = 0`` and

    P = 3/2 * v_d * i_d        Q = -3/2 * v_d * i_q

on the AC side. Inverter losses are taken on the DC side. Currents are in A,
voltages in V, powers in kW unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "InverterParams",
    "InverterState",
    "DcBusState",
    "InverterError",
    "BusCollapseError",
    "phase_peak_voltage",
    "dq_transform",
    "abc_transform",
    "default_gains",
    "initial_inverter_state",
    "voltage_loop_step",
    "q_loop_step",
    "active_power",
    "reactive_power",
    "dc_side_power",
    "bus_advance",
]

TWO_PI_3 = 2.0 * math.pi / 3.0


class InverterError(ArithmeticError):
    pass


class BusCollapseError(RuntimeError):
    """DC-link energy fell below the guard floor."""

    def __init__(self, message, v_dc=None):
        super().__init__(message)
        self.v_dc = v_dc


@dataclass(frozen=True)
class InverterParams:
    v_ll: float = 208.0  # V rms, line to line
    frequency: float = 60.0
    rating_kva: float = 250.0
    current_time_constant: float = 0.005
    efficiency: float = 1.0
    capacitance: float = 0.5  # F
    v_dc_min: float = 50.0
    kp: float | None = None  # A/V; None selects the pole-placement default
    ki: float | None = None  # A/(V s)
    feedforward: bool = True
    settling_time: float = 0.1

    def __post_init__(self):
        if not (self.v_ll > 0 and self.frequency > 0 and self.rating_kva > 0):
            raise ValueError("inverter: v_ll, frequency and rating_kva must be > 0")
        if not self.current_time_constant > 0:
            raise ValueError("inverter: current_time_constant must be > 0")
        if not 0 < self.efficiency <= 1:
            raise ValueError("inverter: efficiency must lie in (0, 1]")
        if not self.capacitance > 0:
            raise ValueError("inverter: capacitance must be > 0")
        if not self.v_dc_min > 0:
            raise ValueError("inverter: v_dc_min must be > 0")
        if not self.settling_time > 0:
            raise ValueError("inverter: settling_time must be > 0")


@dataclass(frozen=True)
class InverterState:
    i_d: float = 0.0
    i_q: float = 0.0
    i_d_ref: float = 0.0
    i_q_ref: float = 0.0
    pi_integrator: float = 0.0  # integral of the voltage error, V s
    current_time_constant: float = 0.005
    grid_voltage_d: float = 208.0 * math.sqrt(2.0 / 3.0)
    efficiency: float = 1.0
    current_limit: float = math.inf
    d_saturated: bool = False
    q_limited: bool = False


@dataclass(frozen=True)
class DcBusState:
    v_dc: float
    capacitance: float
    v_min_guard: float = 50.0

    def __post_init__(self):
        if not (math.isfinite(self.v_dc) and self.v_dc > 0):
            raise ValueError(f"v_dc must be finite and > 0, got {self.v_dc}")
        if not self.capacitance > 0:
            raise ValueError("capacitance must be > 0")

    @property
    def energy(self):
        return 0.5 * self.capacitance * self.v_dc**2


def phase_peak_voltage(v_ll: float) -> float:
    """Peak phase voltage of a balanced set with rms line voltage ``v_ll``."""
    return v_ll * math.sqrt(2.0 / 3.0)


def dq_transform(i_abc, theta: float) -> tuple[float, float]:
    """
    Amplitude-invariant abc -> dq rotation.

    ``i_a = M cos(theta + phi)`` (balanced) maps to
    ``(i_d, i_q) = (M cos phi, M sin phi)``; a set leading ``theta`` by 90
    degrees therefore gives ``i_q = +M``.
    """
    a, b, c = i_abc
    ca, cb, cc = math.cos(theta), math.cos(theta - TWO_PI_3), math.cos(theta + TWO_PI_3)
    sa, sb, sc = math.sin(theta), math.sin(theta - TWO_PI_3), math.sin(theta + TWO_PI_3)
    i_d = 2.0 / 3.0 * (a * ca + b * cb + c * cc)
    i_q = -2.0 / 3.0 * (a * sa + b * sb + c * sc)
    return i_d, i_q


def abc_transform(i_d: float, i_q: float, theta: float) -> tuple[float, float, float]:
    """Inverse of :func:`dq_transform` for a zero-sequence-free set."""
    return tuple(
        i_d * math.cos(theta - k * TWO_PI_3) - i_q * math.sin(theta - k * TWO_PI_3) for k in (0, 1, 2)
    )


def default_gains(params: InverterParams, v_dc_ref: float, damping: float = 0.8) -> tuple[float, float]:
    """
    PI gains placing the linearised voltage loop at ``damping`` and a 2 %
    settling time of ``params.settling_time``.

    Around ``v_dc_ref`` the link obeys ``d(dv)/dt = -K i_d`` with
    ``K = 1.5 v_d / (C v_dc_ref)``.
    """
    gain = 1.5 * phase_peak_voltage(params.v_ll) / (params.capacitance * v_dc_ref)
    omega = 4.0 / (damping * params.settling_time)
    kp = params.kp if params.kp is not None else 2.0 * damping * omega / gain
    ki = params.ki if params.ki is not None else omega**2 / gain
    return kp, ki


def initial_inverter_state(params: InverterParams) -> InverterState:
    v_d = phase_peak_voltage(params.v_ll)
    return InverterState(
        current_time_constant=params.current_time_constant,
        grid_voltage_d=v_d,
        efficiency=params.efficiency,
        current_limit=params.rating_kva * 1e3 / (1.5 * v_d),
    )


def _lag(x, target, tau, dt):
    return target + (x - target) * math.exp(-dt / tau)


def voltage_loop_step(
    bus: DcBusState,
    inv: InverterState,
    v_dc_ref: float,
    dt: float,
    kp: float,
    ki: float,
    p_feedforward: float = 0.0,
) -> InverterState:
    """
    Outer DC-voltage PI producing ``i_d_ref``, then one step of the d-axis
    current lag.

    A positive error (bus above reference) raises the exported current.
    ``p_feedforward`` is the net DC-side power available for export, in kW.
    The integrator is frozen while the output is saturated and the error
    would drive it further into saturation.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v_d = inv.grid_voltage_d
    if v_d <= 0:
        raise InverterError("grid d-axis voltage must be > 0")
    error = bus.v_dc - v_dc_ref
    p_ac = p_feedforward * inv.efficiency if p_feedforward > 0 else p_feedforward / inv.efficiency
    i_ff = p_ac * 1e3 / (1.5 * v_d)

    integ = inv.pi_integrator + error * dt
    i_unsat = i_ff + kp * error + ki * integ
    limit = inv.current_limit
    saturated = abs(i_unsat) > limit
    if saturated and i_unsat * error > 0:
        integ = inv.pi_integrator
        i_unsat = i_ff + kp * error + ki * integ
    i_ref = min(max(i_unsat, -limit), limit)
    return replace(
        inv,
        i_d_ref=i_ref,
        i_d=_lag(inv.i_d, i_ref, inv.current_time_constant, dt),
        pi_integrator=integ,
        d_saturated=saturated,
    )


def q_loop_step(inv: InverterState, q_ref: float, dt: float) -> InverterState:
    """
    Map ``q_ref`` (kVAr) to ``i_q_ref`` and step the q-axis current lag.

    Active current has priority; ``i_q_ref`` is clamped to the headroom left
    under the current limit and ``q_limited`` is raised when that happens.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v_d = inv.grid_voltage_d
    if v_d == 0:
        raise InverterError("cannot map reactive power with v_d = 0")
    i_q_ref = -q_ref * 1e3 / (1.5 * v_d)
    headroom = math.sqrt(max(inv.current_limit**2 - inv.i_d_ref**2, 0.0))
    limited = abs(i_q_ref) > headroom
    if limited:
        i_q_ref = math.copysign(headroom, i_q_ref)
    return replace(
        inv,
        i_q_ref=i_q_ref,
        i_q=_lag(inv.i_q, i_q_ref, inv.current_time_constant, dt),
        q_limited=limited,
    )


def active_power(inv: InverterState) -> float:
    """AC-side active power delivered to the grid, kW."""
    return 1.5 * inv.grid_voltage_d * inv.i_d * 1e-3


def reactive_power(inv: InverterState) -> float:
    return -1.5 * inv.grid_voltage_d * inv.i_q * 1e-3


def dc_side_power(inv: InverterState) -> float:
    """Power drawn from the DC link, kW; exceeds the AC power by the losses."""
    p = active_power(inv)
    return p / inv.efficiency if p >= 0 else p * inv.efficiency


def bus_advance(bus: DcBusState, p_in: float, p_out: float, dt: float) -> DcBusState:
    """
    Integrate the link capacitor in energy: ``E += (p_in - p_out) dt``.

    Exact for powers held constant over the step.

    Raises
    ------
    BusCollapseError
        If the energy falls below the level of ``v_min_guard``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not bus.v_dc > bus.v_min_guard:
        raise BusCollapseError(f"DC bus collapse: v_dc={bus.v_dc:.3f} V", bus.v_dc)
    energy = bus.energy + (p_in - p_out) * 1e3 * dt
    floor = 0.5 * bus.capacitance * bus.v_min_guard**2
    if energy <= floor:
        v = math.sqrt(max(energy, 0.0) * 2.0 / bus.capacitance)
        raise BusCollapseError(f"DC bus collapse: v_dc={v:.3f} V below {bus.v_min_guard} V guard", v)
    return replace(bus, v_dc=math.sqrt(2.0 * energy / bus.capacitance))
