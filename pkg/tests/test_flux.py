import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsgeom import fields as F, flux as X
from nsgeom.analytic import AnalyticField
from nsgeom.errors import FieldError, ProbeRegionError

# Taylor-Green vorticity omega_3 = 2 sin x sin y cos z on the disc of radius 0.5 about
# (pi/2, pi/2) at z = 0.3, integrated adaptively (scipy dblquad, tolerance 1e-14)
TG_ABS_FLUX = 1.4087828375296718
TG_F_FLUX = 1.6131252311523856
# same integrand on a disc crossing the zero set: radius 0.6 about (0.2, 1.0)
TG_ABS_FLUX_KINKED = 0.498961281656416

ABC_CENTER = (0.0, math.pi / 2)  # omega_3 = sin y + cos x >= 1.75 on discs of radius 0.5


def tg_vorticity():
    return AnalyticField.taylor_green().curl()


class TestDiscFlux:
    def test_unit_vorticity_gives_area(self, grid32):
        ones = np.zeros((3,) + grid32.shape)
        ones[2] = 1.0
        w = F.VectorField(grid32, ones)
        for r in (0.1, 0.7, 1.5):
            assert X.disc_flux(w, F.DiscSpec(r, 0.4)) == pytest.approx(math.pi * r * r, rel=1e-12)

    def test_against_adaptive_quadrature(self):
        disc = F.DiscSpec(0.5, 0.3, 0.0, (math.pi / 2, math.pi / 2))
        w = tg_vorticity()
        assert X.disc_flux(w, disc) == pytest.approx(TG_ABS_FLUX, rel=1e-12)
        assert X.disc_flux(w, disc, "f-omega3") == pytest.approx(TG_F_FLUX, rel=1e-12)
        assert X.disc_flux(w, disc, "omega3-tilde") == pytest.approx(TG_ABS_FLUX, rel=1e-12)

    def test_kinked_integrand_converges(self):
        disc = F.DiscSpec(0.6, 0.3, 0.0, (0.2, 1.0))
        got = X.disc_flux(tg_vorticity(), disc, n_r=256, n_theta=512)
        assert got == pytest.approx(TG_ABS_FLUX_KINKED, rel=1e-4)

    def test_sampled_equals_analytic(self, grid32):
        w = F.curl(F.sample(AnalyticField.taylor_green(), grid32))
        disc = F.DiscSpec(0.5, 0.3, 0.0, (math.pi / 2, math.pi / 2))
        assert X.disc_flux(w, disc) == pytest.approx(TG_ABS_FLUX, rel=1e-12)

    def test_zero_radius_and_validation(self, grid16):
        w = F.curl(F.sample(AnalyticField.abc(), grid16))
        assert X.disc_flux(w, F.DiscSpec(0.0)) == 0.0
        with pytest.raises(ProbeRegionError):
            X.disc_flux(w, F.DiscSpec(3.0))
        with pytest.raises(ValueError):
            X.disc_flux(w, F.DiscSpec(0.5), "omega3-squared")

    def test_smoothed_tilde_approaches_abs(self):
        disc = F.DiscSpec(0.6, 0.3, 0.0, (0.2, 1.0))
        w = tg_vorticity()
        exact = X.disc_flux(w, disc)
        errs = [abs(X.disc_flux(w, disc, "omega3-tilde", eta=eta) - exact) for eta in (1e-1, 1e-2, 1e-3)]
        assert errs[0] > errs[1] > errs[2]


class TestBalance:
    def test_divergence_theorem(self):
        w = AnalyticField.abc().curl() + tg_vorticity()
        bal = X.flux_balance(w, 0.8, -0.3, 0.5, center=(1.0, 2.0))
        assert bal.residual < 1e-12

    def test_sampled_field_reports_defect(self, grid32):
        w = F.curl(F.sample(AnalyticField.abc(), grid32))
        bal = X.flux_balance(w, 0.8, -0.3, 0.5, center=(1.0, 2.0))
        assert bal.residual < 1e-12
        assert bal.defect.relative < 1e-12

    def test_zero_height_rejected(self):
        with pytest.raises(ValueError):
            X.flux_balance(tg_vorticity(), 0.5, 0.2, 0.2)


class TestFlippedVorticity:
    def test_positive_component_unchanged(self, grid16):
        ones = np.zeros((3,) + grid16.shape)
        ones[2] = 2.0
        ones[0] = 0.5
        w = F.VectorField(grid16, ones)
        assert np.array_equal(X.flipped_vorticity(w).components, w.components)

    def test_divergence_free_away_from_zero_set(self, grid32):
        w = F.curl(F.sample(AnalyticField.abc(), grid32))
        mask = X.zero_set_mask(w)
        flipped = X.flipped_vorticity(w)
        assert X.divfree_defect(flipped, mask).relative < 1e-8
        # stencils that straddle the sign change see the jump
        assert X.divfree_defect(flipped, mask, margin=0.0).relative > 0.1

    def test_modified_vorticity_smooth_part(self, grid16):
        w = F.curl(F.sample(AnalyticField.abc(), grid16))
        m = X.modified_vorticity(w)
        assert m.grid == w.grid

    def test_everything_excluded(self, grid16):
        w = F.curl(F.sample(AnalyticField.abc(), grid16))
        with pytest.raises(FieldError):
            X.divfree_defect(w, np.ones(grid16.shape, dtype=bool))


class TestProfiles:
    def test_profile_nonnegative_and_monotone(self, grid32):
        v = F.sample(AnalyticField.abc(), grid32)
        prof = X.flux_profile([v], [0.0, 0.2, 0.5, 1.0], [0.0, 1.0], center=(0.3, 0.4))
        assert prof.values[0].max() == 0.0
        assert np.all(np.diff(prof.values, axis=0) >= 0)

    def test_profile_invariant_enforced(self):
        with pytest.raises(AssertionError):
            X.FluxProfile(np.array([0.1, 0.2]), np.zeros(1), np.zeros(1), np.array([[[2.0]], [[1.0]]]))

    def test_w_identity_and_inequality_on_exact_solution(self):
        wp = X.w_profile(AnalyticField.abc(), 0.5, heights=[0.0, 0.7], times=[0.1],
                         center=(0.4, 1.1), dt_fd=1e-3)
        assert np.max(wp.identity_residual) < 1e-12
        assert np.max(np.abs(wp.ineq_residual)) < 1e-5 * np.max(np.abs(wp.rhs_direct))
        rows = list(wp.rows())
        assert len(rows) == 2 and rows[1]["z"] == 0.7

    def test_w_profile_series_ends_are_nan(self, grid16):
        v = F.sample(AnalyticField.abc(), grid16)
        series = [v.with_time(t) for t in (0.0, 0.1, 0.2)]
        wp = X.w_profile(series, 0.5)
        assert np.isnan(wp.dtW[0, 0]) and np.isnan(wp.dtW[0, 2])
        assert np.isfinite(wp.dtW[0, 1])


class TestGammaAudit:
    def test_identities_on_abc(self):
        probes = X.gamma_inequality_audit(AnalyticField.abc(), [0.5], [0.2], [0.0],
                                          center=ABC_CENTER)
        p = probes[0]
        assert not p.near_zero_set
        assert p.laplace_resid < 1e-7
        assert p.transport_resid < 1e-12
        # for a smooth positive omega_3 the inequality is an equality
        assert abs(p.ineq_lhs) < 1e-5 * p.gamma

    def test_laplacian_identity_converges_at_fourth_order(self):
        res = [X.gamma_inequality_audit(AnalyticField.abc(), [0.5], [0.2], [0.0], center=ABC_CENTER,
                                        h_r=h, h_z=h)[0] for h in (0.04, 0.02)]
        a, b = (abs(p.laplace_bulk - p.laplace_fd) for p in res)
        assert 3.5 < math.log2(a / b) < 4.5

    def test_zero_set_flagged(self):
        p = X.gamma_inequality_audit(AnalyticField.abc(), [0.5], [0.0], [0.0], center=(2.0, 0.0))[0]
        assert p.near_zero_set

    def test_transport_identity(self):
        # ABC alone has v = omega, so both sides vanish; the Taylor-Green part makes them nonzero
        mixed = AnalyticField.abc() + AnalyticField.taylor_green().scaled(0.3)
        bulk, circle = X.transport_identity(mixed, 0.5, 0.2, center=ABC_CENTER)
        assert abs(circle) > 1e-2
        assert bulk == pytest.approx(circle, rel=1e-12)
        p = X.gamma_inequality_audit(mixed, [0.5], [0.2], [0.0], center=ABC_CENTER)[0]
        assert not p.near_zero_set and p.transport_resid < 1e-12

    def test_stencil_radius_guard(self):
        with pytest.raises(ValueError):
            X.gamma_inequality_audit(AnalyticField.abc(), [0.01], [0.0], h_r=0.01)


def test_decay_profile_quadratic_for_smooth_field():
    prof = X.gamma_decay_profile(AnalyticField.abc(), 0.1, levels=3, center=(0.0, math.pi / 2, 0.0))
    assert np.all(np.abs(prof.slopes() - 2.0) < 0.05)
    assert len(prof.to_rows()) == 4


@settings(max_examples=15, deadline=None)
@given(r=st.floats(0.05, 1.2), cx=st.floats(0, 6.28), cy=st.floats(0, 6.28), z=st.floats(-3, 3))
def test_flux_monotone_in_radius(r, cx, cy, z):
    w = tg_vorticity()
    small = X.disc_flux(w, F.DiscSpec(r, z, 0.0, (cx, cy)), n_r=32, n_theta=64)
    large = X.disc_flux(w, F.DiscSpec(1.1 * r, z, 0.0, (cx, cy)), n_r=32, n_theta=64)
    assert 0.0 <= small <= large * (1 + 1e-3)
