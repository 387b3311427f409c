import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsgeom import axisym as X, fields as F
from nsgeom.analytic import AnalyticField
from nsgeom.errors import CompatibilityError, ExplorationError, NotAxisymmetricError

from conftest import FunctionFrame

C1, C2 = 20.0, 20.0
EPS = 1 / (100 * C2)


class Parabola:
    """``psi = a r^2 / 2``, the stream function of ``v_z = a``."""

    def __init__(self, a=1.0):
        self.a = a

    def value(self, r, z):
        return 0.5 * self.a * r * r

    def grad(self, r, z):
        return self.a * r, 0.0


class TestCylindrical:
    def test_swirl_vortex(self):
        g = lambda r2: np.exp(-r2)
        frame = FunctionFrame(lambda x1, x2, z: (-x2 * g(x1**2 + x2**2), x1 * g(x1**2 + x2**2), 0.0 * x1))
        m = X.to_cylindrical(frame, r_max=1.5, n_r=31, heights=[0.0, 0.5])
        R = m.r[:, None]
        assert np.allclose(m.vt, R * np.exp(-R**2), atol=1e-14)
        assert np.allclose(m.vr, 0.0, atol=1e-14) and np.allclose(m.vz, 0.0)
        assert np.allclose(X.swirl(m), R**2 * np.exp(-R**2), atol=1e-14)

    def test_vertical_jet(self):
        frame = FunctionFrame(lambda x1, x2, z: (0 * x1, 0 * x1, np.cos(x1**2 + x2**2) * (1 + z)))
        m = X.to_cylindrical(frame, center=(0.0, 0.0), r_max=1.0, n_r=11, heights=[0.0, 1.0])
        assert np.allclose(m.vz, np.cos(m.r[:, None] ** 2) * (1 + m.z[None, :]), atol=1e-14)

    def test_shifted_center(self):
        c = (1.0, -2.0)
        frame = FunctionFrame(lambda x1, x2, z: (0 * x1, 0 * x1, np.exp(-((x1 - c[0])**2 + (x2 - c[1])**2))))
        m = X.to_cylindrical(frame, center=c, r_max=1.0, n_r=5, heights=[0.0])
        assert np.allclose(m.vz[:, 0], np.exp(-m.r**2), atol=1e-14)

    def test_taylor_green_rejected(self):
        with pytest.raises(NotAxisymmetricError) as err:
            X.to_cylindrical(AnalyticField.taylor_green(), center=(0.3, 0.2))
        assert err.value.deviation > 1e-2

    def test_generic_frame_needs_extent(self):
        with pytest.raises(ValueError):
            X.to_cylindrical(FunctionFrame(lambda x1, x2, z: (x1, x2, x1)))

    def test_gridded_field(self, grid16):
        # v_z = cos x1 + cos x2 is not axisymmetric about any vertical line
        x, y, _ = grid16.mesh()
        zero = np.zeros(grid16.shape)
        v = F.VectorField(grid16, np.stack([zero, zero, np.cos(x) + np.cos(y)]))
        with pytest.raises(NotAxisymmetricError):
            X.to_cylindrical(v)
        # a pure vertical constant is
        one = F.VectorField(grid16, np.stack([zero, zero, zero + 1.0]))
        m = X.to_cylindrical(one, n_r=9)
        assert np.allclose(m.vz, 1.0)


class TestStreamFunction:
    def test_uniform_vertical_flow(self):
        m = X.to_cylindrical(AnalyticField.constant((0.0, 0.0, 1.0)), r_max=1.0, n_r=21)
        sf = X.stream_function(m)
        assert np.allclose(sf.psi, 0.5 * m.r[:, None] ** 2 * np.ones_like(sf.psi), atol=1e-14)
        assert sf.value(0.5, 0.1) == pytest.approx(0.125, abs=1e-12)

    def test_zero_field(self):
        m = X.to_cylindrical(AnalyticField.zero(), r_max=1.0, n_r=9)
        sf = X.stream_function(m)
        assert np.all(sf.psi == 0.0) and sf.residual == 0.0

    def test_exact_recovery(self):
        r = np.linspace(0, 2, 41)
        z = np.linspace(-1, 1, 21)
        e = lambda rr: np.exp(-rr**2)
        m = X.MeridianField.from_functions(
            lambda rr, zz: -rr * e(rr) * np.cos(zz), lambda rr, zz: 0 * rr,
            lambda rr, zz: (2 - 2 * rr**2) * e(rr) * np.sin(zz), r, z,
            dz={2: lambda rr, zz: (2 - 2 * rr**2) * e(rr) * np.cos(zz)})
        sf = X.stream_function(m)
        R, Z = np.meshgrid(r, z, indexing="ij")
        assert np.max(np.abs(sf.psi - R**2 * e(R) * np.sin(Z))) < 1e-13
        assert sf.residual < 1e-13

    def test_sampled_fallback(self):
        r = np.linspace(0, 1, 41)
        z = np.linspace(-1, 1, 201)
        R, Z = np.meshgrid(r, z, indexing="ij")
        m = X.MeridianField(r, z, -R * np.cos(Z) / 2, 0 * R, np.sin(Z))
        sf = X.stream_function(m, tol=1e-3)
        assert np.max(np.abs(sf.psi - R**2 * np.sin(Z) / 2)) < 1e-12

    def test_incompatible_rejected(self):
        r = np.linspace(0, 1, 11)
        z = np.linspace(0, 1, 11)
        m = X.MeridianField.from_functions(lambda rr, zz: 1 + 0 * rr, lambda rr, zz: 0 * rr,
                                           lambda rr, zz: 0 * rr, r, z, dz={2: lambda rr, zz: 0 * rr})
        with pytest.raises(CompatibilityError):
            X.stream_function(m)

    def test_slope_constant(self):
        r = np.linspace(0, 1, 21)
        z = np.linspace(0, 1, 11)
        m = X.MeridianField.from_functions(lambda rr, zz: 0 * rr, lambda rr, zz: 0 * rr,
                                           lambda rr, zz: 3 + 0 * rr, r, z, dz={2: lambda rr, zz: 0 * rr})
        # d_r psi = 3 r peaks at r = 1, d_z psi = 0
        assert X.stream_function(m).slope_constant(5.0) == pytest.approx(3.0, rel=1e-10)


class TestVelocityCone:
    def _meridian(self, v):
        return X.to_cylindrical(AnalyticField.constant(v), r_max=1.0, n_r=9, heights=[0.0, 0.4])

    def test_horizontal_flow_passes(self):
        # v = (1, 0, 0) is not axisymmetric, so build the swirl explicitly
        frame = FunctionFrame(lambda x1, x2, z: (-x2, x1, 0 * x1))
        m = X.to_cylindrical(frame, r_max=1.0, n_r=9, heights=[0.0])
        res = X.velocity_cone_check(m, 1.0, 0.0)
        assert res.passed and res.worst_ratio == 0.0

    def test_vertical_flow_fails(self):
        res = X.velocity_cone_check(self._meridian((0.0, 0.0, 1.0)), 0.1, 0.5)
        assert not res.passed
        assert res.worst_ratio == pytest.approx(1.0)
        # raising M above |v| removes every node from the test
        assert X.velocity_cone_check(self._meridian((0.0, 0.0, 1.0)), 0.1, 1.5).passed

    def test_validation(self):
        m = self._meridian((0.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            X.velocity_cone_check(m, 0.0, 1.0)
        with pytest.raises(ValueError):
            X.velocity_cone_check(m, 0.5, -1.0)


@settings(max_examples=10, deadline=None)
@given(shift=st.floats(-3, 3), a=st.floats(0.1, 3), b=st.floats(-2, 2))
def test_velocity_cone_invariant_under_z_translation(shift, a, b):
    fn = lambda x1, x2, z: (-a * x2, a * x1, b * np.cos(x1**2 + x2**2) + 0 * z)
    shifted = lambda x1, x2, z: fn(x1, x2, z + shift)
    base = X.to_cylindrical(FunctionFrame(fn), r_max=1.0, n_r=9, heights=[0.0, 0.5])
    moved = X.to_cylindrical(FunctionFrame(shifted), r_max=1.0, n_r=9, heights=[0.0 - shift, 0.5 - shift])
    r1 = X.velocity_cone_check(base, 0.3, 0.2)
    r2 = X.velocity_cone_check(moved, 0.3, 0.2)
    assert r1.passed == r2.passed
    assert r1.worst_ratio == pytest.approx(r2.worst_ratio, abs=1e-14)


@settings(max_examples=10, deadline=None)
@given(angle=st.floats(0, 2 * math.pi))
def test_meridian_invariant_under_rotation_about_axis(angle):
    c, s = math.cos(angle), math.sin(angle)
    fn = lambda x1, x2, z: (-x2 + 0.3 * x1, x1 + 0.3 * x2, np.exp(-(x1**2 + x2**2)) + 0 * z)

    def rotated(x1, x2, z):
        y1, y2 = c * x1 + s * x2, -s * x1 + c * x2
        a, b, w = fn(y1, y2, z)
        return c * a - s * b, s * a + c * b, w
    m1 = X.to_cylindrical(FunctionFrame(fn), r_max=1.0, n_r=9, heights=[0.0])
    m2 = X.to_cylindrical(FunctionFrame(rotated), r_max=1.0, n_r=9, heights=[0.0])
    for comp in ("vr", "vt", "vz"):
        assert np.allclose(getattr(m1, comp), getattr(m2, comp), atol=1e-13)


class TestExploration:
    def test_pure_radial_mode(self):
        r0 = 0.5 * EPS
        tr = X.explore_level_set(Parabola(), (r0, 0.0), C1, C2)
        assert tr.passed and tr.reached_axis
        assert set(tr.modes) == {"ii"} and not tr.switches
        assert tr.final == (0.0, 0.0) or tr.final[0] == 0.0
        assert abs(tr.psi_start) == pytest.approx(0.5 * r0**2)
        assert tr.mode2_excess == 0.0

    def test_zero_stream(self):
        zero = Parabola(0.0)
        tr = X.explore_level_set(zero, (0.3 * EPS, 0.2 * EPS), C1, C2)
        assert tr.passed and tr.psi_start == 0.0 and tr.final[0] == 0.0

    def test_constant_validation(self):
        with pytest.raises(ValueError):
            X.explore_level_set(Parabola(), (1e-4, 0.0), 5.0, C2)
        with pytest.raises(ValueError):
            X.explore_level_set(Parabola(), (2 * EPS, 0.0), C1, C2)

    def test_slope_guard(self):
        # steep radial slope with no vertical gradient forces mode (i) and trips the guard
        tr_err = None
        with pytest.raises(ExplorationError) as err:
            X.explore_level_set(Parabola(1e6), (0.5 * EPS, 0.0), C1, C2)
        tr_err = err.value.trace
        assert "slope_guard_violated" in tr_err.flags and not tr_err.passed

    def test_trace_serialises(self):
        rng = np.random.default_rng(0)
        r0 = 0.5 * EPS
        psi = X.random_banded_stream(rng, C1, C2, r0, 0.0)
        d = X.explore_level_set(psi, (r0, 0.0), C1, C2).to_dict()
        assert d["polyline"][0] == [r0, 0.0] and d["final"][0] == 0.0
        assert d["psi_start_abs"] <= d["certificate_bound"]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), frac=st.floats(0.2, 0.9), zf=st.floats(-0.9, 0.9))
def test_exploration_certifies_random_admissible_streams(seed, frac, zf):
    rng = np.random.default_rng(seed)
    r0, z0 = frac * EPS, zf * EPS * math.sqrt(1 - frac**2)
    psi = X.random_banded_stream(rng, C1, C2, r0, z0)
    tr = X.explore_level_set(psi, (r0, z0), C1, C2)
    assert tr.reached_axis and tr.final[0] == 0.0
    assert tr.switches, "steep bands must force mode (i)"
    assert tr.mode2_excess <= 1e-12 * C1 * r0
    assert tr.mode1_drift <= 1e-9 * C1 * r0
    assert abs(tr.psi_start) <= 3 * C1 * r0
    assert tr.passed
