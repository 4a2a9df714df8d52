"""Geometry tests: hand oracles for the pinhole formulas and a naive scalar-loop
reconstruction oracle that the vectorized path must match bit-for-bit."""

import math

import numpy as np
import pytest

from sceneednet.geometry import (
    CameraIntrinsics,
    ImageSpaceFlow,
    SceneFlowField,
    backproject,
    disparity_to_depth,
    reconstruct_scene_flow,
    sample_bilinear,
)
from sceneednet.validation import ShapeError

INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, baseline=1.0)


def bilinear_scalar(field, x, y):
    """Naive single-point bilinear lookup, clamped neighbors, python floats."""
    h, w = field.shape
    in_bounds = (x >= 0.0) and (x <= w - 1.0) and (y >= 0.0) and (y <= h - 1.0)
    x0 = int(min(max(float(math.floor(x)), 0.0), float(max(w - 2, 0))))
    y0 = int(min(max(float(math.floor(y)), 0.0), float(max(h - 2, 0))))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - float(x0)
    fy = y - float(y0)
    v00 = float(field[y0, x0])
    v01 = float(field[y0, x1])
    v10 = float(field[y1, x0])
    v11 = float(field[y1, x1])
    top = v00 * (1.0 - fx) + v01 * fx
    bot = v10 * (1.0 - fx) + v11 * fx
    return top * (1.0 - fy) + bot * fy, in_bounds


def scene_flow_scalar_oracle(u, v, d0r, d1r, intr):
    """Per-pixel loop through the closed-form pinhole equations."""
    h, w = u.shape
    flow = np.zeros((3, h, w))
    valid = np.zeros((h, w), dtype=bool)
    for py in range(h):
        for px in range(w):
            d0 = float(d0r[py, px])
            x1 = float(px) + float(u[py, px])
            y1 = float(py) + float(v[py, px])
            d1, inb = bilinear_scalar(d1r, x1, y1)
            if d0 <= 0 or d1 <= 0 or not inb:
                continue
            z0 = intr.fx * intr.baseline / d0
            z1 = intr.fx * intr.baseline / d1
            x0c = (float(px) - intr.cx) * z0 / intr.fx
            y0c = (float(py) - intr.cy) * z0 / intr.fy
            x1c = (x1 - intr.cx) * z1 / intr.fx
            y1c = (y1 - intr.cy) * z1 / intr.fy
            flow[0, py, px] = x1c - x0c
            flow[1, py, px] = y1c - y0c
            flow[2, py, px] = z1 - z0
            valid[py, px] = True
    return flow, valid


def random_instance(rng, h=16, w=16):
    u = rng.uniform(-4, 4, size=(h, w))
    v = rng.uniform(-4, 4, size=(h, w))
    d0 = rng.uniform(-2, 30, size=(h, w))  # includes invalid (<= 0) pixels
    d1 = rng.uniform(-2, 30, size=(h, w))
    return u, v, d0, d1


class TestDisparityToDepth:
    def test_direct_evaluation(self):
        intr = CameraIntrinsics(1050.0, 1050.0, 0.0, 0.0, 1.0)
        assert disparity_to_depth(10.5, intr) == 100.0

    def test_inverse_proportionality(self):
        d = 7.3
        assert disparity_to_depth(2 * d, INTR) == pytest.approx(
            disparity_to_depth(d, INTR) / 2
        )

    def test_hand_oracle(self):
        intr = CameraIntrinsics(100.0, 100.0, 0.0, 0.0, 0.5)
        assert disparity_to_depth(25.0, intr) == 2.0

    def test_nonpositive_marks_invalid(self):
        assert disparity_to_depth(0.0, INTR) == 0.0
        assert disparity_to_depth(-3.0, INTR) == 0.0

    def test_array_input(self):
        out = disparity_to_depth(np.array([10.0, -1.0, 50.0]), INTR)
        np.testing.assert_array_equal(out, [10.0, 0.0, 2.0])


class TestBackproject:
    def test_principal_axis_ray(self):
        x, y, z = backproject(50.0, 50.0, 7.0, INTR)
        assert (x, y, z) == (0.0, 0.0, 7.0)

    def test_hand_pinhole_oracle(self):
        assert backproject(100.0, 100.0, 10.0, INTR) == (5.0, 5.0, 10.0)

    def test_ray_scaling(self):
        x1, y1, z1 = backproject(80.0, 30.0, 4.0, INTR)
        x2, y2, z2 = backproject(80.0, 30.0, 8.0, INTR)
        assert (x2, y2, z2) == (2 * x1, 2 * y1, 2 * z1)


class TestSampleBilinear:
    def test_integer_coordinates_exact(self):
        rng = np.random.default_rng(0)
        field = rng.standard_normal((5, 7))
        for y in range(5):
            for x in range(7):
                val, inb = sample_bilinear(field, float(x), float(y))
                assert inb and val == field[y, x]

    def test_midpoint_average(self):
        field = np.array([[1.0, 2.0], [3.0, 4.0]])
        val, inb = sample_bilinear(field, 0.5, 0.5)
        assert inb and val == 2.5

    def test_out_of_bounds_flag(self):
        field = np.ones((4, 4))
        _, inb = sample_bilinear(field, -0.5, 1.0)
        assert not inb
        _, inb = sample_bilinear(field, 3.0001, 1.0)
        assert not inb

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(1)
        field = rng.uniform(-5, 5, size=(6, 8))
        xs = rng.uniform(-1, 8, size=40)
        ys = rng.uniform(-1, 6, size=40)
        vals, inb = sample_bilinear(field, xs, ys)
        for i in range(40):
            want_v, want_b = bilinear_scalar(field, float(xs[i]), float(ys[i]))
            assert vals[i] == want_v
            assert inb[i] == want_b

    def test_single_column_field(self):
        field = np.array([[2.0], [4.0]])
        val, inb = sample_bilinear(field, 0.0, 0.5)
        assert inb and val == 3.0


class TestReconstructSceneFlow:
    def test_static_scene_is_exactly_zero(self):
        rng = np.random.default_rng(2)
        d = rng.uniform(1, 20, size=(12, 10))
        zero = np.zeros((12, 10))
        out = reconstruct_scene_flow(zero, zero, d, d, INTR)
        assert out.valid.all()
        assert not out.flow.any()

    def test_hand_oracle_pixel(self):
        # pixel (100,100): d0=10 -> P0=(5,5,10); flow (5,0) lands on d1=20
        # -> P1=(2.75,2.5,5); scene flow = (-2.25,-2.5,-5)
        h, w = 101, 106
        u = np.zeros((h, w))
        v = np.zeros((h, w))
        d0 = np.zeros((h, w))
        d1 = np.zeros((h, w))
        u[100, 100] = 5.0
        d0[100, 100] = 10.0
        d1[100, 105] = 20.0
        out = reconstruct_scene_flow(u, v, d0, d1, INTR)
        assert out.valid[100, 100]
        np.testing.assert_array_equal(out.flow[:, 100, 100], [-2.25, -2.5, -5.0])
        assert out.valid.sum() == 1

    def test_displaced_past_right_edge_masked(self):
        d = np.full((4, 4), 5.0)
        u = np.zeros((4, 4))
        u[2, 3] = 1.0  # px+u = 4 >= W
        out = reconstruct_scene_flow(u, np.zeros((4, 4)), d, d, INTR)
        assert not out.valid[2, 3]
        assert not out.flow[:, 2, 3].any()
        assert out.valid.sum() == 15

    def test_matches_scalar_oracle_bitwise(self):
        for seed in range(25):
            rng = np.random.default_rng(100 + seed)
            u, v, d0, d1 = random_instance(rng)
            got = reconstruct_scene_flow(u, v, d0, d1, INTR)
            want_flow, want_valid = scene_flow_scalar_oracle(u, v, d0, d1, INTR)
            assert np.array_equal(got.valid, want_valid)
            assert np.array_equal(got.flow, want_flow)

    def test_pure_disparity_change(self):
        rng = np.random.default_rng(3)
        d0 = rng.uniform(2, 20, size=(9, 11))
        d1 = d0 / 2
        zero = np.zeros((9, 11))
        out = reconstruct_scene_flow(zero, zero, d0, d1, INTR)
        assert out.valid.all()
        want_dz = INTR.fx * INTR.baseline / d1 - INTR.fx * INTR.baseline / d0
        np.testing.assert_allclose(out.flow[2], want_dz, rtol=0, atol=1e-6)
        # dx, dy follow the ray: offset from the principal point times dz/f
        px = np.arange(11.0)[None, :]
        py = np.arange(9.0)[:, None]
        np.testing.assert_allclose(
            out.flow[0], (px - INTR.cx) * want_dz / INTR.fx, atol=1e-9
        )
        np.testing.assert_allclose(
            out.flow[1], (py - INTR.cy) * want_dz / INTR.fy, atol=1e-9
        )

    def test_disparity_change_mode(self):
        rng = np.random.default_rng(4)
        d0 = rng.uniform(2, 20, size=(6, 6))
        change = rng.uniform(-0.5, 0.5, size=(6, 6))
        zero = np.zeros((6, 6))
        got = reconstruct_scene_flow(zero, zero, d0, change, INTR, d1_is_change=True)
        want = reconstruct_scene_flow(zero, zero, d0, d0 + change, INTR)
        assert np.array_equal(got.valid, want.valid)
        np.testing.assert_allclose(got.flow, want.flow, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            reconstruct_scene_flow(
                np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 5)), np.zeros((4, 4)), INTR
            )


class TestFieldTypes:
    def test_invalid_pixels_must_be_zero(self):
        flow = np.ones((3, 2, 2))
        valid = np.zeros((2, 2), dtype=bool)
        with pytest.raises(ValueError):
            SceneFlowField(flow=flow, valid=valid)

    def test_mask_dtype_enforced(self):
        with pytest.raises(ValueError):
            SceneFlowField(flow=np.zeros((3, 2, 2)), valid=np.zeros((2, 2)))

    def test_image_space_flow_shape_check(self):
        a = np.zeros((3, 3))
        with pytest.raises(ShapeError):
            ImageSpaceFlow(u=a, v=a, d0=a, d1=np.zeros((3, 4)))

    def test_intrinsics_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=-1.0, fy=1.0, cx=0.0, cy=0.0, baseline=1.0)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0, baseline=0.0)
