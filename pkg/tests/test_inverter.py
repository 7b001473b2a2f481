import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcmicrogrid.inverter import (
    BusCollapseError,
    DcBusState,
    InverterError,
    InverterParams,
    abc_transform,
    active_power,
    bus_advance,
    dc_side_power,
    default_gains,
    dq_transform,
    initial_inverter_state,
    phase_peak_voltage,
    q_loop_step,
    reactive_power,
    voltage_loop_step,
)

PARAMS = InverterParams()
KP, KI = default_gains(PARAMS, 450.0)
S3 = 5.0 * math.sqrt(3.0)


def balanced(m, theta, shift=0.0):
    return tuple(m * math.cos(theta + shift - k * 2 * math.pi / 3) for k in range(3))


def test_aligned_set_maps_to_d_axis():
    for theta in (0.0, 0.7, 2.0, -1.3):
        d, q = dq_transform(balanced(10.0, theta), theta)
        assert d == pytest.approx(10.0, abs=1e-9)
        assert q == pytest.approx(0.0, abs=1e-9)


def test_zero_currents():
    assert dq_transform((0.0, 0.0, 0.0), 1.234) == (0.0, 0.0)


@pytest.mark.parametrize(
    "theta, currents",
    [
        # 10 A set leading theta by 90 degrees, evaluated by hand
        (0.0, (0.0, S3, -S3)),
        (math.pi / 2, (-10.0, 5.0, 5.0)),
        (math.pi, (0.0, -S3, S3)),
    ],
)
def test_quadrature_set_maps_to_positive_q(theta, currents):
    d, q = dq_transform(currents, theta)
    assert d == pytest.approx(0.0, abs=1e-9)
    assert q == pytest.approx(10.0, abs=1e-9)


@given(d=st.floats(-1e3, 1e3), q=st.floats(-1e3, 1e3), theta=st.floats(-10, 10))
def test_abc_dq_round_trip(d, q, theta):
    abc = abc_transform(d, q, theta)
    assert sum(abc) == pytest.approx(0.0, abs=1e-9)
    d2, q2 = dq_transform(abc, theta)
    assert d2 == pytest.approx(d, abs=1e-9)
    assert q2 == pytest.approx(q, abs=1e-9)


def test_zero_error_gives_zero_reference():
    inv = voltage_loop_step(DcBusState(450.0, 0.5), initial_inverter_state(PARAMS), 450.0, 1e-3, KP, KI)
    assert inv.i_d_ref == 0.0


def closed_loop(v_ref_schedule, p_in=100.0, q_ref=0.0, duration=2.0, dt=1e-3, feedforward=True):
    bus = DcBusState(450.0, PARAMS.capacitance)
    inv = initial_inverter_state(PARAMS)
    out = []
    for k in range(round(duration / dt)):
        t = k * dt
        inv = voltage_loop_step(bus, inv, v_ref_schedule(t), dt, KP, KI, p_in if feedforward else 0.0)
        inv = q_loop_step(inv, q_ref(t) if callable(q_ref) else q_ref, dt)
        bus = bus_advance(bus, p_in, dc_side_power(inv), dt)
        out.append((t + dt, bus.v_dc, active_power(inv), reactive_power(inv)))
    return out


@pytest.mark.parametrize("feedforward", [True, False])
def test_reference_step_settles_within_one_second(feedforward):
    trace = closed_loop(lambda t: 450.0 if t < 0.5 else 500.0, duration=2.0, feedforward=feedforward)
    after = [v for t, v, _, _ in trace if t >= 1.5]
    assert all(abs(v - 500.0) <= 0.02 * 500.0 for v in after)
    assert trace[-1][2] == pytest.approx(100.0, rel=1e-3)


def test_anti_windup_freezes_integrator():
    inv = initial_inverter_state(PARAMS)
    bus = DcBusState(600.0, 0.5)
    integrals = []
    for _ in range(50):
        inv = voltage_loop_step(bus, inv, 450.0, 1e-3, KP, KI)
        integrals.append(inv.pi_integrator)
    assert inv.d_saturated
    assert inv.i_d_ref == inv.current_limit
    assert integrals[-1] == integrals[-2]


def test_zero_q_reference():
    inv = q_loop_step(initial_inverter_state(PARAMS), 0.0, 1e-3)
    assert inv.i_q_ref == 0.0
    assert reactive_power(inv) == 0.0


def test_q_reference_reached_within_five_time_constants():
    inv = initial_inverter_state(PARAMS)
    dt = 1e-4
    for _ in range(round(5 * PARAMS.current_time_constant / dt)):
        inv = q_loop_step(inv, 10.0, dt)
    assert reactive_power(inv) == pytest.approx(10.0, rel=0.01)


def test_q_with_zero_grid_voltage_errors():
    inv = replace(initial_inverter_state(PARAMS), grid_voltage_d=0.0)
    with pytest.raises(InverterError):
        q_loop_step(inv, 5.0, 1e-3)


def test_q_clamped_to_headroom():
    inv = replace(initial_inverter_state(PARAMS), i_d_ref=initial_inverter_state(PARAMS).current_limit * 0.99)
    inv = q_loop_step(inv, 200.0, 1e-3)
    assert inv.q_limited
    assert math.hypot(inv.i_d_ref, inv.i_q_ref) == pytest.approx(inv.current_limit)


def test_bus_equilibrium():
    bus = DcBusState(450.0, 0.1)
    assert bus_advance(bus, 80.0, 80.0, 1e-3).v_dc == 450.0


def test_bus_energy_arithmetic():
    bus = bus_advance(DcBusState(450.0, 0.1), 1.0, 0.0, 0.01)
    assert bus.v_dc == pytest.approx(math.sqrt(450.0**2 + 2 * 10 / 0.1), abs=1e-9)
    assert bus.v_dc == pytest.approx(450.222, abs=1e-3)


def test_bus_collapse():
    with pytest.raises(BusCollapseError):
        bus_advance(DcBusState(60.0, 0.1), 0.0, 1000.0, 0.01)
    with pytest.raises(BusCollapseError):
        bus_advance(DcBusState(40.0, 0.1), 0.0, 0.0, 0.01)


@given(
    flows=st.lists(st.tuples(st.floats(-200, 200), st.floats(-200, 200)), min_size=1, max_size=50),
)
def test_bus_energy_conservation(flows):
    dt = 1e-3
    bus = DcBusState(450.0, 0.5)
    e0 = bus.energy
    total = 0.0
    for p_in, p_out in flows:
        bus = bus_advance(bus, p_in, p_out, dt)
        total += (p_in - p_out) * 1e3 * dt
    assert bus.energy - e0 == pytest.approx(total, rel=1e-9, abs=1e-6)


def test_active_reactive_decoupling():
    base = closed_loop(lambda t: 450.0, p_in=100.0, duration=1.0)
    with_q = closed_loop(lambda t: 450.0, p_in=100.0, q_ref=lambda t: 0.0 if t < 0.5 else 30.0, duration=1.0)
    _, v0, p0, _ = base[-1]
    _, v1, p1, q1 = with_q[-1]
    assert v1 == pytest.approx(v0, rel=1e-3)
    assert p1 == pytest.approx(p0, rel=1e-3)
    assert q1 == pytest.approx(30.0, rel=1e-3)
    # and a change in active power leaves Q alone
    other = closed_loop(lambda t: 450.0, p_in=40.0, q_ref=30.0, duration=1.0)
    assert other[-1][3] == pytest.approx(q1, rel=1e-3)


def test_power_relations_and_losses():
    lossy = replace(PARAMS, efficiency=0.97)
    inv = replace(initial_inverter_state(lossy), i_d=100.0, i_q=-20.0)
    v_d = phase_peak_voltage(208.0)
    assert active_power(inv) == pytest.approx(1.5 * v_d * 100.0 / 1e3)
    assert reactive_power(inv) == pytest.approx(1.5 * v_d * 20.0 / 1e3)
    assert dc_side_power(inv) == pytest.approx(active_power(inv) / 0.97)
    imp = replace(inv, i_d=-100.0)
    assert dc_side_power(imp) == pytest.approx(active_power(imp) * 0.97)
    # the inverter never delivers more than it draws
    assert abs(active_power(imp)) >= abs(dc_side_power(imp))
    assert abs(active_power(inv)) <= abs(dc_side_power(inv))


def test_default_gains_respect_overrides():
    assert default_gains(replace(PARAMS, kp=3.0, ki=7.0), 450.0) == (3.0, 7.0)
    kp, ki = default_gains(PARAMS, 450.0)
    assert kp > 0 and ki > 0
