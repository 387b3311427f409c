import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from nsgeom import fields as F, geometry as G
from nsgeom.errors import FieldError


def synthetic_cone(rng, n, s):
    """Directions with ``min |xi . e| = s`` exactly around a random axis ``e``."""
    e = rng.standard_normal(3)
    e /= np.linalg.norm(e)
    u = np.cross(e, [1.0, 0.0, 0.0] if abs(e[0]) < 0.9 else [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    w = np.cross(e, u)
    cos_t = rng.uniform(s, 1.0, n)
    cos_t[:6] = s  # boundary rays fix the aperture
    phi = rng.uniform(0, 2 * np.pi, n)
    phi[:6] = np.arange(6) * np.pi / 3
    sin_t = np.sqrt(1 - cos_t**2)
    d = cos_t[:, None] * e + sin_t[:, None] * (np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * w)
    d *= rng.choice([-1.0, 1.0], n)[:, None]
    return e, d


class TestCones:
    def test_delta_relations(self):
        assert G.delta_from_s(1.0) == 1.0
        assert G.delta_from_s(0.0) == 0.0
        assert G.s_from_delta(G.delta_from_s(0.3)) == pytest.approx(0.3)
        assert G.cone_constant(1.0) == 0.0
        assert math.isinf(G.cone_constant(0.0))

    def test_two_axes_cloud(self):
        d = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)
        fit = G.cone_deficiency(d)
        assert fit.delta == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-9)
        assert abs(fit.axis[2]) < 1e-6
        assert abs(abs(fit.axis[0]) - abs(fit.axis[1])) < 1e-6

    def test_single_direction(self):
        fit = G.cone_deficiency(np.array([[0.0, 0.6, 0.8]]))
        assert fit.delta == pytest.approx(1.0)
        assert fit.C == pytest.approx(0.0, abs=1e-6)
        assert np.allclose(abs(fit.axis @ [0.0, 0.6, 0.8]), 1.0)

    def test_empty_set(self):
        fit = G.cone_deficiency(np.zeros((0, 3)))
        assert fit.empty and math.isinf(fit.C)

    @pytest.mark.parametrize("seed", range(5))
    def test_synthetic_cone_recovered(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.uniform(0.3, 0.95)
        e, d = synthetic_cone(rng, 400, s)
        fit = G.cone_deficiency(d)
        angle = math.degrees(math.acos(min(1.0, abs(fit.axis @ e))))
        assert angle < 2.0
        assert fit.delta == pytest.approx(G.delta_from_s(s), abs=1e-3)

    def test_obstruction(self):
        rng = np.random.default_rng(3)
        d = rng.standard_normal((2000, 3))
        ds = G.DirectionSet.from_directions(d)
        assert G.great_circle_obstruction(ds).obstructed
        e, d2 = synthetic_cone(rng, 300, 0.5)
        res = G.great_circle_obstruction(G.DirectionSet.from_directions(d2))
        assert not res.obstructed
        assert abs(res.pole @ e) > math.cos(math.radians(2))

    def test_direction_set_validation(self):
        with pytest.raises(ValueError):
            G.DirectionSet(np.zeros((2, 3)), np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            G.DirectionSet.from_directions(np.zeros((1, 3)))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_cone_fit_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    _, d = synthetic_cone(rng, 200, rng.uniform(0.2, 0.9))
    R = Rotation.random(random_state=seed).as_matrix()
    a = G.cone_deficiency(d)
    b = G.cone_deficiency(d @ R.T)
    assert a.s == pytest.approx(b.s, abs=1e-6)
    assert abs((R @ a.axis) @ b.axis) == pytest.approx(1.0, abs=1e-6)


class TestDirectionField:
    def test_threshold_and_units(self, grid16, abc):
        w = F.curl(F.sample(abc, grid16))
        ds = G.direction_field(w, 1.5)
        mag = w.magnitude()
        assert len(ds) == int(np.sum(mag > 1.5))
        assert np.allclose(np.linalg.norm(ds.directions, axis=1), 1.0)
        assert np.all(ds.magnitudes > 1.5)

    def test_region_restricts(self, grid16, abc):
        w = F.curl(F.sample(abc, grid16))
        region = F.CylinderRegion(1.0, (np.pi, np.pi, np.pi), 0.0, "ball")
        ds = G.direction_field(w, 0.0, region)
        assert 0 < len(ds) < grid16.size
        d = ds.positions - np.pi
        assert np.all(np.sum(d * d, axis=1) < 1.0)

    def test_negative_threshold(self, grid16, abc):
        with pytest.raises(ValueError):
            G.direction_field(F.curl(F.sample(abc, grid16)), -1.0)


class TestPairwise:
    def test_small_against_double_loop(self):
        d = np.random.default_rng(0).standard_normal((60, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        ref = max(np.linalg.norm(np.cross(a, b)) for a in d for b in d)
        assert G.pairwise_alignment(d) == ref

    def test_fast_path_is_exact(self):
        rng = np.random.default_rng(7)
        _, d = synthetic_cone(rng, 6000, 0.8)
        fast, pair = G.pairwise_alignment(d, return_pair=True)
        brute, _ = G._brute_pairwise(d)
        assert fast == brute
        assert G.cross_norm(d[pair[0]], d[pair[1]]) == fast

    def test_trivial_sets(self):
        assert G.pairwise_alignment(np.array([[0.0, 0.0, 1.0]])) == 0.0
        par = np.array([[0, 0, 1.0], [0, 0, -1.0]])
        assert G.pairwise_alignment(par) == 0.0


class TestHolder:
    def test_known_ratio(self):
        ds = G.DirectionSet.from_directions([[1, 0, 0], [0, 1, 0]], positions=[[0, 0, 0], [0.5, 0, 0]])
        assert G.holder_modulus(ds, 1.0).C == pytest.approx(2.0)
        assert G.holder_modulus(ds, 0.5).C == pytest.approx(math.sqrt(2.0))

    def test_periodic_metric(self):
        ds = G.DirectionSet.from_directions([[1, 0, 0], [0, 1, 0]],
                                            positions=[[0.1, 0, 0], [6.0, 0, 0]],
                                            box=(2 * np.pi,) * 3)
        dist = 2 * np.pi - 5.9
        assert G.holder_modulus(ds).C == pytest.approx(1 / dist)

    def test_coincident_points(self):
        ds = G.DirectionSet.from_directions([[1, 0, 0], [0, 1, 0]], positions=[[1, 1, 1], [1, 1, 1]])
        assert math.isinf(G.holder_modulus(ds).C)

    def test_bad_exponent(self):
        with pytest.raises(ValueError):
            G.holder_modulus(G.DirectionSet.from_directions([[1, 0, 0]]), 0.3)


class TestStretching:
    def test_determinant(self):
        e1, e2, e3 = np.eye(3)
        assert G.cf_determinant(e1, e2, e3) == 0.0
        assert G.cf_determinant(e1, e2, [1.0, 0.0, 1.0]) == 1.0
        assert G.cf_determinant(e1, e2, e1) == 0.0

    def test_planar_flow_vanishes(self, grid32):
        x, y, _ = grid32.mesh()
        zero = np.zeros(grid32.shape)
        w = F.VectorField(grid32, np.stack([zero, zero, np.sin(x) * np.cos(2 * y) + 0.3]))
        assert G.stretching_factor(w, (0.4, 1.0, 2.0), n_r=16, n_theta=8, n_phi=16) == 0.0

    def test_constant_direction_vanishes(self, grid32):
        x, y, z = grid32.mesh()
        f = np.sin(x - y) + np.cos(z) + 0.5
        w = F.VectorField(grid32, np.stack([f, f, np.zeros_like(f)]) / math.sqrt(2))
        assert G.stretching_factor(w, (1.0, 0.3, 0.2), n_r=16, n_theta=8, n_phi=16) == 0.0

    def test_zero_vorticity_point(self, grid32):
        x = grid32.mesh()[0]
        zero = np.zeros(grid32.shape)
        w = F.VectorField(grid32, np.stack([zero, zero, np.sin(x)]))
        with pytest.raises(FieldError):
            G.stretching_factor(w, (0.0, 0.0, 0.0))

    def test_cutoff_validation(self, grid16, abc):
        w = F.curl(F.sample(abc, grid16))
        with pytest.raises(ValueError):
            G.stretching_factor(w, (1.0, 1.0, 1.0), rho_cut=0.1)
