import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dcmicrogrid.battery import BatteryParams
from dcmicrogrid.ems import (
    ABSORB_MAX,
    CaseLabel,
    GridRequest,
    SocLatch,
    classify_case,
    dispatch,
    update_latch,
)
from ems_checks import check_dispatch, literal_case

BAT = BatteryParams()


@pytest.mark.parametrize(
    "inputs, mode, p_bat, p_grid",
    [
        ((165, 50, 105, 0.60), "mppt", -10, 105),
        ((165, 50, 125, 0.60), "mppt", 10, 125),
        ((165, 190, 0, 0.19), "mppt", -10, -35),
        ((0, 0, 0, 0.50), "mppt", 0, 0),
    ],
)
def test_case_examples(inputs, mode, p_bat, p_grid):
    mpp, load, req, soc = inputs
    d = dispatch(mpp, load, GridRequest(req), soc, BAT)
    assert d.pv_mode == mode
    assert d.p_bat_ref == p_bat
    assert d.p_grid_set == p_grid
    assert d.feasible


def test_case2_curtails_to_150():
    d = dispatch(165, 50, GridRequest(100), 0.96, BAT)
    assert d.pv_mode == "power_ref"
    assert d.p_pv_ref == 150
    assert d.p_bat_ref == 0
    assert d.p_grid_set == 100


def test_case4_absorb_max_exports_everything():
    d = dispatch(165, 50, GridRequest(ABSORB_MAX), 0.6, BAT)
    assert d.pv_mode == "mppt"
    assert d.p_bat_ref == BAT.p_discharge_max
    assert d.p_grid_set == 165 + 10 - 50
    assert d.case_label is CaseLabel.CASE4


def test_classification_examples():
    assert classify_case(165, 50, GridRequest(105), 0.60, BAT) is CaseLabel.CASE1
    assert classify_case(165, 190, GridRequest(0), 0.19, BAT) is CaseLabel.CASE5
    assert classify_case(165, 50, GridRequest(105), 0.95, BAT) is CaseLabel.CASE2
    assert classify_case(165, 50, GridRequest(125), 0.60, BAT) is CaseLabel.CASE3


def test_surplus_beyond_battery_and_export_is_curtailed():
    grid = GridRequest(20, p_export_limit=50)
    d = dispatch(165, 50, grid, 0.6, BAT)
    assert d.pv_mode == "power_ref"
    assert d.p_bat_ref == -10
    assert d.p_grid_set == 50
    assert d.p_pv_ref == 50 + 50 + 10


def test_surplus_beyond_battery_goes_to_export():
    d = dispatch(165, 50, GridRequest(60), 0.6, BAT)
    assert d.pv_mode == "mppt"
    assert d.p_bat_ref == -10
    assert d.p_grid_set == 105


def test_deficit_beyond_battery_reduces_export():
    d = dispatch(100, 50, GridRequest(80), 0.6, BAT)
    assert d.p_bat_ref == 10
    assert d.p_grid_set == 60


def test_tie_is_mppt_with_idle_battery():
    d = dispatch(150, 50, GridRequest(100), 0.6, BAT)
    assert (d.pv_mode, d.p_bat_ref, d.p_grid_set) == ("mppt", 0.0, 100)


def test_infeasible_demand_reports_shortfall():
    grid = GridRequest(0, p_import_limit=20)
    d = dispatch(10, 100, grid, 0.5, BAT)
    assert not d.feasible
    assert d.shortfall == pytest.approx(100 - 10 - 10 - 20)
    assert d.p_grid_set == -20
    d = dispatch(10, 100, grid, 0.1, BAT)
    assert d.shortfall == pytest.approx(70)
    assert d.p_bat_ref == 0.0


def test_recovery_charge_limited_by_import_headroom():
    d = dispatch(100, 150, GridRequest(0, p_import_limit=55), 0.1, BAT)
    assert d.p_bat_ref == -5
    assert d.p_grid_set == -55


def test_q_passthrough():
    assert dispatch(0, 0, GridRequest(0, q_request=12.5), 0.5, BAT).q_set == 12.5


def test_latch_hysteresis():
    latch = update_latch(SocLatch(), 0.95, BAT)
    assert latch.full
    assert update_latch(latch, 0.945, BAT).full
    assert not update_latch(latch, 0.935, BAT).full
    # latched full: surplus is curtailed instead of charging
    d = dispatch(165, 50, GridRequest(100), 0.945, BAT, update_latch(latch, 0.945, BAT))
    assert d.pv_mode == "power_ref" and d.p_bat_ref == 0.0

    low = update_latch(SocLatch(), 0.2, BAT)
    assert low.depleted
    assert update_latch(low, 0.205, BAT).depleted
    assert not update_latch(low, 0.215, BAT).depleted


def test_grid_request_validation():
    with pytest.raises(ValueError):
        GridRequest(-1.0)
    with pytest.raises(ValueError):
        GridRequest(0.0, p_import_limit=float("inf"))
    with pytest.raises(ValueError):
        dispatch(-1.0, 0.0, GridRequest(), 0.5, BAT)


power = st.floats(0.0, 400.0, allow_nan=False)
request = st.one_of(st.just(ABSORB_MAX), st.floats(0.0, 600.0))
battery = st.builds(
    lambda lo, width, c, d: BatteryParams(soc_min=lo, soc_max=min(lo + width, 1.0), p_charge_max=c, p_discharge_max=d),
    st.floats(0.0, 0.5),
    st.floats(0.05, 0.6),
    st.floats(0.1, 50.0),
    st.floats(0.1, 50.0),
)
grid_request = st.builds(
    GridRequest,
    p_request=request,
    p_import_limit=st.floats(0.0, 600.0),
    p_export_limit=st.floats(0.0, 600.0),
)


@settings(max_examples=500, deadline=None)
@given(p_mpp=power, p_load=power, grid=grid_request, soc=st.floats(0.0, 1.0), bat=battery,
       full=st.booleans(), depleted=st.booleans())
def test_dispatch_invariants(p_mpp, p_load, grid, soc, bat, full, depleted):
    latch = SocLatch(full, depleted)
    d = dispatch(p_mpp, p_load, grid, soc, bat, latch)
    assert check_dispatch(d, p_mpp, p_load, soc, bat) == []
    if latch.full:
        assert d.p_bat_ref >= 0
    if latch.depleted:
        assert d.p_bat_ref <= 0
    expected = literal_case(
        p_mpp, p_load, grid.p_request, grid.p_export_limit, soc, bat.soc_min, bat.soc_max, bat.p_discharge_max
    )
    assert d.case_label is expected


@settings(max_examples=300, deadline=None)
@given(p_mpp=power, p_load=power, soc=st.floats(0.0, 1.0), r1=st.floats(0.0, 500.0), r2=st.floats(0.0, 500.0))
def test_grid_setpoint_monotone_in_request(p_mpp, p_load, soc, r1, r2):
    # recovery charging below soc_min intentionally breaks monotonicity
    assume(soc > BAT.soc_min)
    lo, hi = sorted((r1, r2))
    d_lo = dispatch(p_mpp, p_load, GridRequest(lo), soc, BAT)
    d_hi = dispatch(p_mpp, p_load, GridRequest(hi), soc, BAT)
    assume(d_hi.feasible and d_lo.feasible)
    assert d_hi.p_grid_set >= d_lo.p_grid_set - 1e-9
