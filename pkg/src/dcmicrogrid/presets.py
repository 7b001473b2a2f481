"""
Built-in scenarios reproducing the five case studies.

Every preset runs 5 s with its event at t = 1 s. Plant defaults: 165 kW
array, 450 V DC bus, 208 V grid, 50 kW DC load (190 kW after the step in
Case 5). The 100 kWh battery capacity and the 10 kW converter rating are
desk-scale choices, not published values.
"""

from __future__ import annotations

from importlib import resources

from .ems import ABSORB_MAX
from .engine import Event, Scenario, SetDcLoad, SetGridRequest, SetIrradiance, SetTemperature

__all__ = ["CASES", "case_preset", "preset_file_text"]

CASES = (1, 2, 3, 4, 5)
DURATION = 5.0
EVENT_TIME = 1.0


def _base_events(irradiance=1000.0, load=50.0, request=0.0):
    return [
        Event(0.0, SetIrradiance(irradiance)),
        Event(0.0, SetTemperature(25.0)),
        Event(0.0, SetDcLoad(load)),
        Event(0.0, SetGridRequest(request)),
    ]


def case_preset(n: int) -> Scenario:
    """
    Scenario for case study ``n``.

    1. Irradiance rises 800 -> 1000 W/m2 with a 105 kW request; the battery
       goes from discharging to charging the 10 kW surplus.
    2. Battery full (SOC 0.95); request steps 0 -> 100 kW, PV curtailed to
       150 kW.
    3. Request steps 105 -> 125 kW; battery discharges 10 kW.
    4. Request steps 105 kW -> as much as possible; battery at its
       discharge limit.
    5. SOC 0.19, no request; load steps 50 -> 190 kW, grid supplies the
       deficit plus a 10 kW recharge.
    """
    if n == 1:
        events = _base_events(irradiance=800.0, request=105.0)
        events.append(Event(EVENT_TIME, SetIrradiance(1000.0)))
        soc = 0.60
    elif n == 2:
        events = _base_events(request=0.0)
        events.append(Event(EVENT_TIME, SetGridRequest(100.0)))
        soc = 0.95
    elif n == 3:
        events = _base_events(request=105.0)
        events.append(Event(EVENT_TIME, SetGridRequest(125.0)))
        soc = 0.60
    elif n == 4:
        events = _base_events(request=105.0)
        events.append(Event(EVENT_TIME, SetGridRequest(ABSORB_MAX)))
        soc = 0.60
    elif n == 5:
        events = _base_events(request=0.0)
        events.append(Event(EVENT_TIME, SetDcLoad(190.0)))
        soc = 0.19
    else:
        raise ValueError(f"no case {n}; choose one of {CASES}")
    return Scenario(duration=DURATION, initial_soc=soc, events=tuple(events))


def preset_file_text(n: int) -> str:
    """Text of the shipped scenario file for case ``n``."""
    if n not in CASES:
        raise ValueError(f"no case {n}; choose one of {CASES}")
    return resources.files(__package__).joinpath("scenarios").joinpath(f"case{n}.scn").read_text()
