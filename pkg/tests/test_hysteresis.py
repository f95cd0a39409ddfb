import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from phasecoupler.device import DeviceParams, paper_params, reset_study_params
from phasecoupler.hysteresis import (BranchPoint, NoStableBranch, ResetConfig, TargetNotStable,
                                     _cycle_destination, beta, branch_equation, branch_frequency_shift,
                                     branch_map, branch_point, branch_range, enumerate_branches,
                                     follow_branch, simulate_reset, stable_branch_ids)

RS = reset_study_params()
P = paper_params()
B_RS = beta(RS)


def test_beta_values():
    assert beta(RS) == pytest.approx(10.2094772520, rel=1e-9)
    assert beta(P) == pytest.approx(9.1144804314, rel=1e-9)


@pytest.mark.parametrize("i_norm", [-0.9, -0.5, -0.13, 0.0, 0.27, 0.5, 0.83])
@pytest.mark.parametrize("params", [RS, P], ids=["reset_study", "printed"])
def test_roots_match_dense_grid_oracle(i_norm, params):
    b = beta(params)
    pts = enumerate_branches(i_norm * params.i_c0, params)
    ref = oracles.branch_roots(i_norm, b)
    assert len(pts) == len(ref)
    for p, (d, stable) in zip(pts, ref):
        assert p.delta == pytest.approx(d, abs=1e-9)
        assert p.stable == stable
        assert abs(branch_equation(p.delta, b) - i_norm) < 1e-10


def test_three_stable_branches_at_zero_bias():
    pts = enumerate_branches(0.0, RS)
    stable = [p for p in pts if p.stable]
    assert [p.branch_id for p in stable] == [-1, 0, 1]
    assert stable[1].delta == 0.0


@given(st.floats(min_value=-0.95, max_value=0.95))
def test_stable_and_unstable_alternate(i_norm):
    pts = enumerate_branches(i_norm * RS.i_c0, RS)
    flags = [p.stable for p in pts]
    assert flags[0] and flags[-1]
    assert all(a != b for a, b in zip(flags, flags[1:]))
    assert all((p.branch_id is None) == (not p.stable) for p in pts)


def test_five_branches_across_window():
    ids = set()
    for pt in branch_map(RS, -0.5 * RS.i_c0, 0.5 * RS.i_c0, 201):
        if pt.stable:
            ids.add(pt.branch_id)
    assert sorted(ids) == [-2, -1, 0, 1, 2]


def test_single_branch_below_unit_beta():
    p = DeviceParams(i_c0=0.1e-6)
    assert beta(p) < 1
    for x in (-0.9, 0.0, 0.6):
        pts = enumerate_branches(x * p.i_c0, p)
        assert len(pts) == 1 and pts[0].stable and pts[0].branch_id == 0
    assert stable_branch_ids(0.0, p) == [0]


def test_branch_range_edges():
    lo, hi = branch_range(0, B_RS)
    a = math.acos(-1 / B_RS)
    assert hi == pytest.approx(math.sin(a) + a / B_RS)
    assert lo == -hi
    lo1, hi1 = branch_range(1, B_RS)
    assert lo1 == pytest.approx(lo + 2 * math.pi / B_RS)


def test_follow_branch_stays_then_switches():
    start = branch_point(1, 0.0, RS)
    assert start.branch_id == 1 and start.stable
    lo, _ = branch_range(1, B_RS)
    inside = follow_branch(start, 0.5 * lo * RS.i_c0, RS)
    assert inside.branch_id == 1 and not inside.switched
    out = follow_branch(start, (lo - 0.05) * RS.i_c0, RS)
    assert out.switched and out.stable and out.branch_id < 1


def test_follow_branch_rejects_unstable_start():
    pt = next(p for p in enumerate_branches(0.0, RS) if not p.stable)
    with pytest.raises(ValueError):
        follow_branch(pt, 0.1 * RS.i_c0, RS)


def test_branch_point_outside_range():
    _, hi = branch_range(2, B_RS)
    with pytest.raises(NoStableBranch):
        branch_point(-2, 0.9 * RS.i_c0, RS)


def test_flux_and_frequency_shift():
    pt = branch_point(1, 0.0, RS)
    assert pt.flux == pytest.approx(pt.delta / (2 * math.pi) * 2.067833848e-15)
    assert branch_frequency_shift(branch_point(0, 0.0, RS), RS) == 0.0
    assert branch_frequency_shift(pt, RS) != 0.0


RAILS = ResetConfig(-0.75 * RS.i_c0, 0.75 * RS.i_c0, n_cycles=30, per_cycle_survival_q=0.746)


def test_sweep_across_rails_lands_on_target():
    for k in (-2, -1, 1, 2):
        assert _cycle_destination(k, RAILS, RS) == 0


@pytest.mark.parametrize("n", [1, 5, 30])
def test_reset_residual_closed_form(n):
    cfg = ResetConfig(RAILS.i_cb_minus, RAILS.i_cb_plus, n_cycles=n, per_cycle_survival_q=0.746)
    res = simulate_reset({-1: 0.5, 1: 0.5}, cfg, RS)
    assert res.residual_error == pytest.approx(0.746 ** n, rel=1e-12)
    assert len(res.residual_by_cycle) == n
    assert sum(res.distribution.values()) == pytest.approx(1.0, abs=1e-14)


def test_reset_keeps_target_mass():
    res = simulate_reset({0: 1.0}, RAILS, RS)
    assert res.residual_error == 0.0 and res.distribution == {0: 1.0}


def test_reset_rails_too_wide_for_target():
    # the central branch survives up to ~1.16 i_c0 at this beta
    assert branch_range(0, B_RS)[1] > 1.0
    cfg = ResetConfig(-1.2 * RS.i_c0, 1.2 * RS.i_c0)
    with pytest.raises(TargetNotStable):
        simulate_reset({1: 1.0}, cfg, RS)


@pytest.mark.parametrize("kwargs", [dict(i_cb_minus=1e-6, i_cb_plus=-1e-6),
                                    dict(i_cb_minus=-1e-6, i_cb_plus=1e-6, n_cycles=0),
                                    dict(i_cb_minus=-1e-6, i_cb_plus=1e-6, per_cycle_survival_q=1.0)])
def test_reset_config_validation(kwargs):
    with pytest.raises(ValueError):
        ResetConfig(**kwargs)


def test_branch_point_dataclass():
    p = BranchPoint(delta=0.1, bias=0.0, stable=True, branch_id=0)
    assert not p.switched
    assert np.isclose(p.flux, 0.1 / (2 * math.pi) * 2.067833848e-15)
