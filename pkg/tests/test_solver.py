import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsgeom import fields as F, solver as S
from nsgeom.analytic import AnalyticField
from nsgeom.errors import CFLError, FieldError

from conftest import band_limited


def test_dealias_mask_counts():
    g = F.GridSpec.cube(16)
    # |m| <= 16/3 keeps m in -5..5 on full axes and 0..5 on the halved one
    assert S.dealias_mask(g).sum() == 11 * 11 * 6
    # without dealiasing only the Nyquist planes go
    assert S.dealias_mask(g, "none").sum() == 15 * 15 * 8


def test_energy_and_dissipation_match_grid_sums(grid16):
    v = band_limited(grid16, 11, kmax=4.0)
    st_ = S.SolverState.from_velocity(v, "none")
    direct_e = 0.5 * np.sum(v.components**2) * grid16.cell_volume
    direct_d = np.sum(F.gradient_tensor(v) ** 2) * grid16.cell_volume
    assert st_.energy() == pytest.approx(direct_e, rel=1e-12)
    assert st_.dissipation_rate() == pytest.approx(direct_d, rel=1e-12)


@pytest.mark.parametrize("field, rate", [(AnalyticField.abc(), 1.0),
                                         (AnalyticField.taylor_green_2d(), 2.0)])
def test_exact_decay_small_grid(grid16, field, rate):
    v0 = F.sample(field, grid16)
    res = S.simulate(v0, S.SolverConfig(dt=1e-3, t_end=0.05, snap_every=0.025))
    final = res.snapshots[-1]
    assert final.time == pytest.approx(0.05)
    err = np.max(np.abs(final.components - v0.components * math.exp(-rate * 0.05)))
    assert err <= 1e-9 * v0.max_abs()
    assert res.audit["passed"]
    assert len(res.snapshots) == 3


def test_vorticity_matches_curl(grid16):
    st_ = S.SolverState.from_velocity(band_limited(grid16, 5))
    assert np.allclose(st_.vorticity().components, F.curl(st_.velocity()).components, atol=1e-12)


def test_cfl_violation_raises(grid16):
    v = F.VectorField(grid16, 100 * band_limited(grid16, 3).components)
    with pytest.raises(CFLError, match="CFL"):
        S.simulate(v, S.SolverConfig(dt=0.1, t_end=0.1, snap_every=0.1))


def test_viscous_stability_limit():
    g = F.GridSpec.cube(64)
    st_ = S.SolverState.from_velocity(F.sample(AnalyticField.abc(), g), "none")
    with pytest.raises(CFLError, match="viscous"):
        S.check_cfl(st_, 1e-3)
    ok = S.SolverState.from_velocity(F.sample(AnalyticField.abc(), g))
    assert S.check_cfl(ok, 1e-3) < 1.0


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(t_end=-1.0), dict(dt=0.1, snap_every=0.01),
                                    dict(dealias="half"), dict(integrator="euler")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        S.SolverConfig(**kwargs)


def test_t_end_must_be_whole_steps(grid16):
    with pytest.raises(ValueError):
        S.simulate(band_limited(grid16, 0), S.SolverConfig(dt=0.003, t_end=0.01, snap_every=0.003))


def test_rejects_nonfinite_initial(grid16):
    with pytest.raises(FieldError):
        F.VectorField(grid16, np.full((3,) + grid16.shape, np.inf))


def test_snapshot_callback_and_times(grid16):
    seen = []
    res = S.simulate(band_limited(grid16, 1), S.SolverConfig(dt=0.01, t_end=0.05, snap_every=0.02),
                     on_snapshot=lambda v: seen.append(v.time))
    assert seen == pytest.approx([0.0, 0.02, 0.04, 0.05])
    assert [s.time for s in res.snapshots] == seen


def test_vorticity_equation_residual_small(grid16):
    res = S.simulate(F.sample(AnalyticField.abc(), grid16),
                     S.SolverConfig(dt=1e-3, t_end=0.002, snap_every=1e-3))
    assert S.vorticity_residual(res.snapshots) < 1e-5


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 1000), amp=st.floats(0.5, 3.0))
def test_energy_monotone_and_balanced(seed, amp):
    g = F.GridSpec.cube(16)
    v = F.VectorField(g, amp * band_limited(g, seed, kmax=4.0).components)
    res = S.simulate(v, S.SolverConfig(dt=5e-3, t_end=0.05, snap_every=0.025))
    a = res.audit
    assert a["energy_nonincreasing"]
    assert a["energy_balance_rel_error"] < 1e-3
    assert a["max_divergence_rel"] < 1e-12
    e = S.energy_series(res.snapshots)
    assert all(b <= x * (1 + 1e-13) for x, b in zip(e, e[1:]))
