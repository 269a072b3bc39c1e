import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vdmforge.baking import bake
from vdmforge.mesh import build_grid_mesh
from vdmforge.vdm import SpikeParams, VdmImage, VdmScale, make_spike_vdm, make_zero_vdm


class TestBake:
    def test_undeformed_mesh_zero_vdm(self):
        m = build_grid_mesh(make_zero_vdm(16))
        r = bake(m)
        assert (r.vdm.data == 0.0).all()
        assert r.stats["max_abs_displacement"] == 0.0
        assert r.stats["fraction_negative_samples"] == 0.0

    def test_spike_round_trip(self):
        v = make_spike_vdm(32, SpikeParams(radius_uv=0.3, height=0.8))
        m = build_grid_mesh(v)
        r = bake(m)
        assert np.abs(r.vdm.data - v.data).max() <= 1e-6

    def test_center_vertex_half_side_scaling(self):
        m = build_grid_mesh(make_zero_vdm(3), VdmScale(1.0))
        m.vertices[4] = (0.0, 0.0, 0.5)
        r = bake(m)
        np.testing.assert_allclose(r.vdm.data[1, 1], [0.0, 0.0, 1.0], atol=1e-7)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        v = VdmImage(rng.random((8, 8, 3)).astype(np.float32))
        m = build_grid_mesh(v)
        scaled = m.copy()
        scaled.vertices = m.rest_positions + 2.0 * (m.vertices - m.rest_positions)
        np.testing.assert_allclose(bake(scaled, with_stats=False).vdm.data,
                                   2.0 * bake(m, with_stats=False).vdm.data,
                                   atol=1e-6)

    def test_absolute_coordinates_mode(self):
        m = build_grid_mesh(make_zero_vdm(4), VdmScale(1.0))
        r = bake(m, absolute_coordinates=True, with_stats=False)
        np.testing.assert_allclose(
            r.vdm.data.reshape(-1, 3), m.vertices, atol=1e-7)

    def test_negative_samples_allowed(self):
        m = build_grid_mesh(make_zero_vdm(4))
        m.vertices[:, 2] -= 0.25
        r = bake(m)
        assert r.stats["fraction_negative_samples"] > 0
        assert (r.vdm.data[:, :, 2] == -0.5).all()

    @settings(max_examples=20, deadline=None)
    @given(res=st.integers(2, 24), seed=st.integers(0, 2 ** 31 - 1),
           side=st.floats(0.5, 4.0))
    def test_build_bake_inverse(self, res, seed, side):
        rng = np.random.default_rng(seed)
        v = VdmImage(rng.random((res, res, 3)).astype(np.float32))
        scale = VdmScale(side)
        m = build_grid_mesh(v, scale)
        r = bake(m, scale, with_stats=False)
        assert np.abs(r.vdm.data - v.data).max() <= 1e-6
