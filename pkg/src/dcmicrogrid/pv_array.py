"""
Single-diode model of the PV array.

The array is ``cells_series`` identical cells per string and
``strings_parallel`` identical strings. Cell-level quantities are stored in
:class:`PvParams`; the string equation is solved for the string current and
scaled by the number of strings:

    I = Iph - I0 * (exp((V + I*Rs) / a) - 1) - (V + I*Rs) / Rsh

with ``a = n * Ns * Vt``, ``Rs = Ns * rs_cell`` and ``Rsh = Ns * rsh_cell``.
Powers in this module are in watts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import optimize

__all__ = [
    "PvParams",
    "EnvConditions",
    "PvOperatingPoint",
    "PvSolverError",
    "STC",
    "pv_current",
    "pv_current_array",
    "pv_operating_point",
    "pv_power_curve",
    "open_circuit_voltage",
    "true_mpp",
    "calibrated_params",
]

BOLTZMANN = 1.380649e-23
ELEMENTARY_CHARGE = 1.602176634e-19
KELVIN = 273.15

NEWTON_RTOL = 1e-9
NEWTON_MAX_ITER = 100


class PvSolverError(ArithmeticError):
    """The diode equation did not converge for the given inputs."""

    def __init__(self, message, params=None, env=None, voltage=None):
        super().__init__(message)
        self.params = params
        self.env = env
        self.voltage = voltage


@dataclass(frozen=True)
class PvParams:
    """
    Single-diode parameters of the array.

    Attributes
    ----------
    photocurrent_stc : float
        Cell (= string) photocurrent at 1000 W/m2 and 25 degC, in A.
    saturation_current : float
        Diode saturation current of one cell, in A.
    series_resistance, shunt_resistance : float
        Per-cell resistances, in ohm.
    ideality_factor : float
        Diode ideality factor, in [1, 2].
    thermal_voltage_stc : float
        kT/q at the STC temperature, in V.
    cells_series, strings_parallel : int
        Array topology.
    current_temp_coeff : float
        Photocurrent temperature coefficient per cell, in A/degC.
    """

    photocurrent_stc: float = 8.214
    saturation_current: float = 9.825e-8
    series_resistance: float = 0.221 / 54
    shunt_resistance: float = 415.405 / 54
    ideality_factor: float = 1.3
    thermal_voltage_stc: float = BOLTZMANN * (25.0 + KELVIN) / ELEMENTARY_CHARGE
    cells_series: int = 540
    strings_parallel: int = 82
    current_temp_coeff: float = 0.0032
    irradiance_stc: float = 1000.0
    temp_stc: float = 25.0

    def __post_init__(self):
        if not (self.series_resistance > 0 and self.shunt_resistance > 0):
            raise ValueError("PvParams: resistances must be > 0")
        if not 1.0 <= self.ideality_factor <= 2.0:
            raise ValueError(
                f"PvParams: ideality_factor must lie in [1, 2], got {self.ideality_factor}"
            )
        if self.cells_series < 1 or self.strings_parallel < 1:
            raise ValueError("PvParams: cells_series and strings_parallel must be >= 1")
        if not (self.photocurrent_stc >= 0 and self.saturation_current > 0):
            raise ValueError("PvParams: photocurrent must be >= 0, saturation current > 0")
        if not (self.thermal_voltage_stc > 0 and self.irradiance_stc > 0):
            raise ValueError("PvParams: thermal voltage and STC irradiance must be > 0")


@dataclass(frozen=True)
class EnvConditions:
    irradiance: float = 1000.0
    cell_temperature: float = 25.0

    def __post_init__(self):
        if not (math.isfinite(self.irradiance) and self.irradiance >= 0):
            raise ValueError(f"irradiance must be finite and >= 0, got {self.irradiance}")
        if not math.isfinite(self.cell_temperature):
            raise ValueError("cell_temperature must be finite")


STC = EnvConditions(1000.0, 25.0)


@dataclass(frozen=True)
class PvOperatingPoint:
    voltage: float
    current: float

    @property
    def power(self):
        return self.voltage * self.current


def _string_terms(params, env):
    """Photocurrent, diode scale, modified ideality voltage, Rs, Rsh of one string."""
    ns = params.cells_series
    iph = (
        params.photocurrent_stc + params.current_temp_coeff * (env.cell_temperature - params.temp_stc)
    ) * env.irradiance / params.irradiance_stc
    vt = params.thermal_voltage_stc * (env.cell_temperature + KELVIN) / (params.temp_stc + KELVIN)
    a = params.ideality_factor * ns * vt
    return max(iph, 0.0), params.saturation_current, a, ns * params.series_resistance, ns * params.shunt_resistance


def pv_current(params: PvParams, env: EnvConditions, terminal_voltage: float) -> float:
    """
    Array current at ``terminal_voltage``.

    Damped Newton on the implicit string equation, started from the
    photocurrent. Returns 0 when the solution would be negative (the
    terminal voltage is at or beyond open circuit).

    Raises
    ------
    PvSolverError
        If Newton has not converged after 100 iterations.
    """
    if terminal_voltage < 0:
        raise ValueError(f"terminal_voltage must be >= 0, got {terminal_voltage}")
    iph, i0, a, rs, rsh = _string_terms(params, env)
    v = terminal_voltage

    # f is strictly decreasing in I, so f(0) <= 0 means the root is <= 0
    f0 = iph - i0 * math.expm1(v / a) - v / rsh
    if f0 <= 0.0:
        return 0.0

    # absolute floor keeps the test meaningful near open circuit
    floor = 1e-3 * iph
    i = iph
    for _ in range(NEWTON_MAX_ITER):
        vd = v + i * rs
        e = math.exp(vd / a)
        f = iph - i0 * (e - 1.0) - vd / rsh - i
        df = -i0 * e * rs / a - rs / rsh - 1.0
        step = -f / df
        i_new = i + step
        if i_new < 0.0 or i_new > iph:
            # left the bracket [0, Iph]
            i_new = i + 0.5 * step
            i_new = min(max(i_new, 0.0), iph)
        if abs(i_new - i) <= NEWTON_RTOL * max(abs(i_new), floor):
            return i_new * params.strings_parallel
        i = i_new
    raise PvSolverError(
        f"diode equation did not converge at V={terminal_voltage!r} (G={env.irradiance}, "
        f"T={env.cell_temperature})",
        params,
        env,
        terminal_voltage,
    )


def pv_current_array(params: PvParams, env: EnvConditions, voltages) -> np.ndarray:
    """Vectorised :func:`pv_current` over an array of terminal voltages."""
    v = np.asarray(voltages, dtype=float)
    if np.any(v < 0):
        raise ValueError("terminal voltages must be >= 0")
    iph, i0, a, rs, rsh = _string_terms(params, env)
    out = np.zeros_like(v)
    active = iph - i0 * np.expm1(v / a) - v / rsh > 0.0
    if not np.any(active):
        return out
    va = v[active]
    i = np.full_like(va, iph)
    floor = 1e-3 * iph
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        vd = va + i * rs
        e = np.exp(vd / a)
        f = iph - i0 * (e - 1.0) - vd / rsh - i
        df = -i0 * e * rs / a - rs / rsh - 1.0
        step = -f / df
        i_new = i + step
        bad = (i_new < 0.0) | (i_new > iph)
        if np.any(bad):
            i_new = np.where(bad, np.clip(i + 0.5 * step, 0.0, iph), i_new)
        done = np.all(np.abs(i_new - i) <= NEWTON_RTOL * np.maximum(np.abs(i_new), floor))
        i = i_new
        if done:
            converged = True
            break
    if not converged:
        raise PvSolverError("diode equation did not converge on sweep", params, env)
    # one extra pass: quadratic convergence takes the error to rounding level
    vd = va + i * rs
    e = np.exp(vd / a)
    f = iph - i0 * (e - 1.0) - vd / rsh - i
    df = -i0 * e * rs / a - rs / rsh - 1.0
    i = np.clip(i - f / df, 0.0, iph)
    out[active] = i * params.strings_parallel
    return out


def pv_operating_point(params, env, terminal_voltage):
    return PvOperatingPoint(terminal_voltage, pv_current(params, env, terminal_voltage))


def pv_power_curve(params, env, v_min, v_max, n_points):
    """Uniformly sampled list of operating points on ``[v_min, v_max]``."""
    if not v_min < v_max:
        raise ValueError("v_min must be < v_max")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    v = np.linspace(v_min, v_max, n_points)
    i = pv_current_array(params, env, v)
    return [PvOperatingPoint(float(vk), float(ik)) for vk, ik in zip(v, i)]


@lru_cache(maxsize=256)
def open_circuit_voltage(params: PvParams, env: EnvConditions) -> float:
    iph, i0, a, rs, rsh = _string_terms(params, env)
    if iph <= 0.0:
        return 0.0

    def f(v):
        return iph - i0 * math.expm1(v / a) - v / rsh

    hi = a * math.log1p(iph / i0)
    while f(hi) > 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)


@lru_cache(maxsize=256)
def true_mpp(params: PvParams, env: EnvConditions) -> PvOperatingPoint:
    """
    Maximum power point by sweep and golden-section refinement.

    A coarse sweep locates the peak, a 1 mV sweep around it picks the best
    sample, and golden-section search on the bracketing samples refines the
    voltage well below 0.01 V. P(V) is unimodal on ``[0, V_oc]``, so this
    gives the same argmax as a full 1 mV sweep.
    """
    voc = open_circuit_voltage(params, env)
    if voc <= 0.0:
        return PvOperatingPoint(0.0, 0.0)

    v = np.linspace(0.0, voc, 2001)
    p = v * pv_current_array(params, env, v)
    k = int(np.argmax(p))
    lo, hi = v[max(k - 1, 0)], v[min(k + 1, len(v) - 1)]

    n_fine = max(int(math.ceil((hi - lo) / 1e-3)), 2) + 1
    vf = np.linspace(lo, hi, n_fine)
    pf = vf * pv_current_array(params, env, vf)
    j = int(np.argmax(pf))
    if j == 0 or j == n_fine - 1:
        v_best = float(vf[j])
    else:
        res = optimize.minimize_scalar(
            lambda x: -x * pv_current(params, env, x),
            bracket=(float(vf[j - 1]), float(vf[j]), float(vf[j + 1])),
            method="golden",
            tol=1e-10,
        )
        v_best = float(res.x) if -res.fun >= pf[j] else float(vf[j])
    return pv_operating_point(params, env, v_best)


def _fast_mpp_power(params, env):
    voc = open_circuit_voltage(params, env)
    res = optimize.minimize_scalar(
        lambda x: -x * pv_current(params, env, x),
        bounds=(0.0, voc),
        method="bounded",
        options={"xatol": 1e-6},
    )
    return -res.fun


@lru_cache(maxsize=32)
def calibrated_params(rated_power: float = 165e3, template: PvParams = PvParams()) -> PvParams:
    """
    Scale ``template`` so the STC maximum power equals ``rated_power`` (W).

    The string count is chosen from the template's nominal string power,
    then the photocurrent is solved by bisection.
    """
    if not rated_power > 0:
        raise ValueError("rated_power must be > 0")
    unit = replace(template, strings_parallel=1)
    p_string = _fast_mpp_power(unit, STC)
    strings = max(1, round(rated_power / p_string))
    base = replace(template, strings_parallel=strings)

    def mismatch(iph):
        return _fast_mpp_power(replace(base, photocurrent_stc=iph), STC) - rated_power

    lo, hi = 0.25 * template.photocurrent_stc, 4.0 * template.photocurrent_stc
    iph = optimize.bisect(mismatch, lo, hi, xtol=1e-12, rtol=1e-13, maxiter=200)
    return replace(base, photocurrent_stc=iph)
