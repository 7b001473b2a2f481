"""
Centralized dispatch of the PV/battery/grid power flows.

Given the available PV power, the DC load, the grid request and the battery
SOC, :func:`dispatch` chooses the PV control mode and power references so
that ``p_pv_ref + p_bat_ref = p_grid_set + p_load_served``. All powers are in
kW; ``p_bat`` is positive when discharging and ``p_grid`` positive when
exporting to the utility.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .battery import BatteryParams

__all__ = [
    "ABSORB_MAX",
    "GridRequest",
    "CaseLabel",
    "Dispatch",
    "SocLatch",
    "dispatch",
    "classify_case",
    "update_latch",
]

# grid asks for as much power as the microgrid can export
ABSORB_MAX = math.inf


@dataclass(frozen=True)
class GridRequest:
    p_request: float = 0.0
    q_request: float = 0.0
    p_import_limit: float = 500.0
    p_export_limit: float = 500.0

    def __post_init__(self):
        if not (self.p_request >= 0 or self.p_request == ABSORB_MAX):
            raise ValueError(f"grid request must be >= 0 or ABSORB_MAX, got {self.p_request}")
        if not math.isfinite(self.q_request):
            raise ValueError("q_request must be finite")
        for name in ("p_import_limit", "p_export_limit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @property
    def absorb_max(self):
        return self.p_request == ABSORB_MAX

    def effective_request(self):
        """Export request after resolving ABSORB_MAX and the export limit."""
        return min(self.p_request, self.p_export_limit)


class CaseLabel(str, enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE4 = "Case4"
    CASE5 = "Case5"
    OTHER = "Other"


@dataclass(frozen=True)
class Dispatch:
    """
    Output of the supervisor.

    ``pv_mode`` is ``"mppt"`` or ``"power_ref"``. ``shortfall`` is non-zero
    only when the demand cannot be met even at full import; the simulator
    then sheds that much load.
    """

    pv_mode: str
    p_pv_ref: float
    p_bat_ref: float
    p_grid_set: float
    q_set: float
    p_load: float
    case_label: CaseLabel
    shortfall: float = 0.0

    @property
    def feasible(self):
        return self.shortfall == 0.0

    @property
    def p_load_served(self):
        return self.p_load - self.shortfall


@dataclass(frozen=True)
class SocLatch:
    """
    Hysteresis on the SOC limits.

    ``full`` is set on reaching ``soc_max`` and cleared only below
    ``soc_max - band``; ``depleted`` mirrors it at ``soc_min``.
    """

    full: bool = False
    depleted: bool = False
    band: float = 0.01


def update_latch(latch: SocLatch, soc: float, bat: BatteryParams) -> SocLatch:
    full = latch.full
    if soc >= bat.soc_max:
        full = True
    elif soc < bat.soc_max - latch.band:
        full = False
    depleted = latch.depleted
    if soc <= bat.soc_min:
        depleted = True
    elif soc > bat.soc_min + latch.band:
        depleted = False
    if full == latch.full and depleted == latch.depleted:
        return latch
    return SocLatch(full, depleted, latch.band)


def classify_case(p_mpp_available, p_load, grid: GridRequest, soc, bat: BatteryParams) -> CaseLabel:
    """Label the operating condition with the matching case study, if any."""
    p_grid = grid.effective_request()
    demand = p_load + p_grid
    if p_mpp_available > demand:
        return CaseLabel.CASE1 if soc < bat.soc_max else CaseLabel.CASE2
    if soc <= bat.soc_min and p_mpp_available < p_load:
        return CaseLabel.CASE5
    if soc >= bat.soc_min:
        reach = p_mpp_available + bat.p_discharge_max
        # a demand the battery covers exactly still counts as Case 3
        if p_mpp_available < demand <= reach:
            return CaseLabel.CASE3
        if reach < demand:
            return CaseLabel.CASE4
    return CaseLabel.OTHER


def dispatch(
    p_mpp_available: float,
    p_load: float,
    grid: GridRequest,
    soc: float,
    bat: BatteryParams,
    latch: SocLatch | None = None,
) -> Dispatch:
    """
    Decide PV mode and power references for one supervisory period.

    Surplus goes to the battery first, then to export; only what neither
    can take is curtailed. A deficit is covered by the battery, then by
    reduced export or import. With the battery depleted the deficit is
    imported and the battery is recharged from the grid at up to
    ``p_charge_max``. ``p_grid_set`` is computed last from the balance.
    """
    if not (p_mpp_available >= 0 and p_load >= 0):
        raise ValueError("p_mpp_available and p_load must be >= 0")
    full = soc >= bat.soc_max or (latch is not None and latch.full)
    depleted = soc <= bat.soc_min or (latch is not None and latch.depleted)

    request = grid.effective_request()
    surplus = p_mpp_available - p_load - request
    label = classify_case(p_mpp_available, p_load, grid, soc, bat)
    mode = "mppt"
    p_pv = p_mpp_available
    p_bat = 0.0
    shortfall = 0.0

    if surplus > 0 and not full:
        p_bat = -min(surplus, bat.p_charge_max)
        export = request + surplus + p_bat
        if export > grid.p_export_limit:
            p_pv = p_load + grid.p_export_limit - p_bat
            mode = "power_ref"
    elif surplus > 0:
        p_pv = request + p_load
        mode = "power_ref"
    elif surplus < 0 and not depleted:
        p_bat = min(-surplus, bat.p_discharge_max)
        export = p_pv + p_bat - p_load
        if export < -grid.p_import_limit:
            shortfall = -grid.p_import_limit - export
    elif surplus < 0:
        export = p_pv - p_load
        if export < -grid.p_import_limit:
            shortfall = -grid.p_import_limit - export
        elif not full:
            p_bat = -min(bat.p_charge_max, grid.p_import_limit + export)

    p_grid = p_pv + p_bat - (p_load - shortfall)
    return Dispatch(
        pv_mode=mode,
        p_pv_ref=p_pv,
        p_bat_ref=p_bat,
        p_grid_set=p_grid,
        q_set=grid.q_request,
        p_load=p_load,
        case_label=label,
        shortfall=shortfall,
    )
