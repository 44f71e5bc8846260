"""
Camera model, wind angle and ground placement of point R.
"""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from plumerise.errors import DegenerateGeometry
from plumerise.geometry import (
    CameraModel,
    DepthSide,
    GroundSolution,
    HorizontalSide,
    ImagePoint,
    ground_sample_distance,
    ground_width,
    image_to_raster,
    locate_point_R,
    pixel_size,
    plume_rise,
    project_ground_point,
    raster_to_image,
    stack_image_point,
    wind_plane_angle,
)

from conftest import SITE_FOV_DEG


def _camera(**overrides):
    fields = dict(
        width_px=2592,
        height_px=1944,
        fov_deg=SITE_FOV_DEG,
        stack_distance_m=5180.0,
        plane_azimuth_deg=252.0,
        stack_px=(1296, 1200),
    )
    fields.update(overrides)
    return CameraModel(**fields)


# ------------------------------------------------------------------ Camera model
def test_site_ground_sample_distance(site_cam):
    assert ground_sample_distance(site_cam) == pytest.approx(1.6647, abs=1e-4)


def test_site_ground_width(site_cam):
    assert ground_width(site_cam) == pytest.approx(4314.91, abs=0.05)


def test_zero_distance_gives_zero_sample_distance():
    cam = _camera(stack_distance_m=0.0)
    assert ground_sample_distance(cam) == 0.0
    assert ground_width(cam) == 0.0


def test_pixel_size_from_focal_length_and_fov():
    cam = _camera(fov_deg=55.0, focal_length_mm=8.0)
    assert pixel_size(cam) == pytest.approx(2.571, abs=1e-3)


def test_pixel_size_shrinks_with_fov():
    wide = pixel_size(_camera(fov_deg=55.0, focal_length_mm=8.0))
    narrow = pixel_size(_camera(fov_deg=1e-3, focal_length_mm=8.0))
    assert narrow < 1e-3 < wide


def test_fov_derived_from_focal_length_and_pixel_size():
    cam = _camera(fov_deg=None, focal_length_mm=8.0, pixel_size_um=2.57070)
    assert cam.fov_deg == pytest.approx(55.0, abs=1e-3)


def test_focal_length_derived_from_fov_and_pixel_size():
    cam = _camera(fov_deg=55.0, pixel_size_um=2.57070)
    assert cam.focal_length_mm == pytest.approx(8.0, abs=1e-3)


def test_pixel_size_needs_focal_length(site_cam):
    with pytest.raises(ValueError):
        pixel_size(site_cam)


def test_inconsistent_optics_rejected():
    with pytest.raises(ValidationError, match="disagree"):
        _camera(fov_deg=55.0, focal_length_mm=8.0, pixel_size_um=3.0)


def test_missing_fov_without_focal_length_rejected():
    with pytest.raises(ValidationError, match="fov_deg is required"):
        _camera(fov_deg=None, pixel_size_um=2.5)


def test_stack_outside_raster_rejected():
    with pytest.raises(ValidationError, match="outside"):
        _camera(stack_px=(2592, 10))


def test_negative_distance_rejected():
    with pytest.raises(ValidationError):
        _camera(stack_distance_m=-1.0)


# ------------------------------------------------------------------ Raster coordinates
def test_raster_to_image_centre_origin():
    p = raster_to_image(0, 0, 4, 2)
    assert (p.x_px, p.z_px) == (-1.5, 0.5)


@given(
    st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    st.integers(min_value=1, max_value=5000),
    st.integers(min_value=1, max_value=5000),
)
def test_raster_image_conversions_are_inverse(col, row, width, height):
    back = image_to_raster(raster_to_image(col, row, width, height), width, height)
    assert back[0] == pytest.approx(col, abs=1e-9)
    assert back[1] == pytest.approx(row, abs=1e-9)


def test_stack_image_point(site_cam):
    p = stack_image_point(site_cam)
    assert p.x_px == 0.5
    assert p.z_px == pytest.approx(972 - 1200 - 0.5)


# ------------------------------------------------------------------ Wind angle
def test_wind_angle_first_capture():
    angle = wind_plane_angle(12.16, 252.0)
    assert angle.theta_raw_deg == pytest.approx(-239.84, abs=0.05)
    assert angle.theta_n_deg == pytest.approx(59.84, abs=1e-9)
    assert angle.side.horizontal == HorizontalSide.RIGHT
    assert angle.side.depth == DepthSide.AWAY
    assert angle.side.depth_sign == -1


def test_wind_angle_second_capture():
    assert wind_plane_angle(3.46, 252.0).theta_raw_deg == pytest.approx(-248.54, abs=0.05)


def test_wind_in_image_plane():
    angle = wind_plane_angle(252.0, 252.0)
    assert angle.theta_raw_deg == 0.0
    assert angle.theta_n_deg == 0.0
    assert angle.side.horizontal == HorizontalSide.LEFT
    assert angle.side.depth == DepthSide.IN_PLANE
    assert angle.side.depth_sign == 1


def test_wind_from_opposite_side_drifts_right():
    angle = wind_plane_angle(72.0, 252.0)
    assert angle.theta_n_deg == 0.0
    assert angle.side.horizontal == HorizontalSide.RIGHT
    assert angle.side.depth == DepthSide.IN_PLANE


def test_wind_along_optical_axis():
    angle = wind_plane_angle(342.0, 252.0)
    assert angle.theta_n_deg == 90.0
    assert angle.side.horizontal == HorizontalSide.NONE


@given(st.floats(min_value=-720, max_value=720), st.floats(min_value=0, max_value=359.999))
def test_normalized_angle_in_range(phi, azimuth):
    angle = wind_plane_angle(phi, azimuth)
    assert 0.0 <= angle.theta_n_deg <= 90.0
    assert angle.theta_raw_deg == pytest.approx(phi - azimuth)


# ------------------------------------------------------------------ Point R on the ground
def test_locate_worked_example(site_cam):
    sol = locate_point_R(site_cam, ImagePoint(648.0, 100.0), 30.0)
    assert sol.X_m == pytest.approx(1078.7, abs=0.1)
    assert sol.gamma_deg == pytest.approx(11.77, abs=0.01)
    assert sol.X_R_m == pytest.approx(962.9, abs=0.1)
    assert sol.G_R_m_per_px == pytest.approx(1.486, abs=1e-3)


def test_in_plane_wind_keeps_stack_plane(site_cam):
    sol = locate_point_R(site_cam, ImagePoint(648.0, 100.0), 0.0)
    assert sol.X_R_m == sol.X_m
    assert sol.X_R_m == pytest.approx(site_cam.stack_distance_m * math.tan(math.radians(sol.gamma_deg)))
    assert sol.Y_R_m == 0.0
    assert sol.G_R_m_per_px == pytest.approx(ground_sample_distance(site_cam))


def test_in_plane_wind_identity_over_random_points(site_cam):
    rng = np.random.default_rng(252)
    for _ in range(10_000):
        x = rng.uniform(1.0, 1296.0) * rng.choice([-1.0, 1.0])
        p = ImagePoint(x, rng.uniform(-972.0, 972.0))
        sol = locate_point_R(site_cam, p, 0.0, int(rng.choice([-1, 1])))
        assert sol.X_R_m == pytest.approx(sol.X_m, rel=1e-9)
        assert sol.Y_R_m == 0.0


def test_locate_is_mirror_symmetric(site_cam):
    right = locate_point_R(site_cam, ImagePoint(400.0, 50.0), 40.0)
    left = locate_point_R(site_cam, ImagePoint(-400.0, 50.0), 40.0)
    assert left.X_R_m == pytest.approx(-right.X_R_m)
    assert left.Y_R_m == pytest.approx(right.Y_R_m)
    assert left.G_R_m_per_px == pytest.approx(right.G_R_m_per_px)


def test_depth_side_orders_sample_distance(site_cam):
    G = ground_sample_distance(site_cam)
    toward = locate_point_R(site_cam, ImagePoint(500.0, 0.0), 30.0, depth_sign=1)
    away = locate_point_R(site_cam, ImagePoint(500.0, 0.0), 30.0, depth_sign=-1)
    assert toward.G_R_m_per_px < G < away.G_R_m_per_px
    assert toward.Y_R_m > 0 > away.Y_R_m


def test_on_axis_point_with_in_plane_wind(site_cam):
    sol = locate_point_R(site_cam, ImagePoint(0.0, 10.0), 0.0)
    assert sol.X_R_m == 0.0
    assert sol.G_R_m_per_px == pytest.approx(ground_sample_distance(site_cam))


def test_on_axis_point_with_oblique_wind_is_degenerate(site_cam):
    with pytest.raises(DegenerateGeometry):
        locate_point_R(site_cam, ImagePoint(0.0, 10.0), 20.0)


@pytest.mark.parametrize("theta", [90.0, -1.0, 120.0])
def test_wind_angle_outside_range_is_degenerate(site_cam, theta):
    with pytest.raises(DegenerateGeometry):
        locate_point_R(site_cam, ImagePoint(100.0, 10.0), theta)


def test_zero_distance_is_degenerate():
    with pytest.raises(DegenerateGeometry):
        locate_point_R(_camera(stack_distance_m=0.0), ImagePoint(100.0, 10.0), 0.0)


def test_ray_missing_the_wind_line_is_degenerate(site_cam):
    with pytest.raises(DegenerateGeometry):
        locate_point_R(site_cam, ImagePoint(1200.0, 10.0), 80.0, depth_sign=-1)


def test_invalid_depth_sign(site_cam):
    with pytest.raises(ValueError):
        locate_point_R(site_cam, ImagePoint(100.0, 10.0), 10.0, depth_sign=0)


def test_ground_point_round_trip(site_cam):
    rng = np.random.default_rng(20191108)
    G = ground_sample_distance(site_cam)
    for _ in range(10_000):
        theta = rng.uniform(0.0, 60.0)
        sign = int(rng.choice([-1, 1]))
        X_R = rng.uniform(10.0, 2000.0) * rng.choice([-1.0, 1.0])
        Y_R = sign * abs(X_R) * math.tan(math.radians(theta))
        Z_R = rng.uniform(-500.0, 500.0)

        p = project_ground_point(site_cam, X_R, Y_R, Z_R)
        sol = locate_point_R(site_cam, p, theta, sign)

        assert sol.X_R_m == pytest.approx(X_R, rel=1e-9)
        assert sol.Y_R_m == pytest.approx(Y_R, rel=1e-9, abs=1e-9)
        assert sol.Z_R_m == pytest.approx(Z_R, rel=1e-9, abs=1e-9)
        if sign > 0:
            assert sol.G_R_m_per_px <= G * (1 + 1e-12)
        else:
            assert sol.G_R_m_per_px >= G * (1 - 1e-12)


def test_projection_behind_camera_is_degenerate(site_cam):
    with pytest.raises(DegenerateGeometry):
        project_ground_point(site_cam, 10.0, 6000.0, 0.0)


# ------------------------------------------------------------------ Plume rise
def test_plume_rise_worked_example():
    cam = _camera(stack_px=(1296, 1021.5))
    sol = GroundSolution(X_m=0.0, gamma_deg=0.0, X_R_m=300.0, Y_R_m=400.0, G_R_m_per_px=1.486, Z_R_m=0.0)
    rise = plume_rise(cam, sol, 100.0)
    assert rise.Z_R_m == pytest.approx(148.6)
    assert rise.Z_st_m == pytest.approx(-83.2, abs=0.05)
    assert rise.delta_z_m == pytest.approx(231.8, abs=0.05)
    assert rise.x_max_m == pytest.approx(500.0)
    assert not rise.negative_rise


def test_plume_rise_at_image_centre_is_zero():
    cam = _camera(stack_px=(1296, 971.5))
    sol = GroundSolution(X_m=0.0, gamma_deg=0.0, X_R_m=0.0, Y_R_m=0.0, G_R_m_per_px=1.5, Z_R_m=0.0)
    assert plume_rise(cam, sol, 0.0).delta_z_m == 0.0


def test_stack_above_image_centre_measures_height_difference():
    cam = _camera(stack_px=(1296, 900))
    G = ground_sample_distance(cam)
    sol = GroundSolution(X_m=0.0, gamma_deg=0.0, X_R_m=300.0, Y_R_m=0.0, G_R_m_per_px=G, Z_R_m=0.0)
    rise = plume_rise(cam, sol, 100.0)
    assert rise.Z_st_m == pytest.approx(71.5 * G)
    assert rise.delta_z_m == pytest.approx(28.5 * G)
    # summing magnitudes would count the stack height above the axis twice
    assert rise.delta_z_m != pytest.approx(abs(rise.Z_st_m) + rise.Z_R_m)


def test_negative_rise_is_flagged(site_cam, caplog):
    sol = locate_point_R(site_cam, ImagePoint(300.0, -400.0), 0.0)
    rise = plume_rise(site_cam, sol, -400.0)
    assert rise.negative_rise
    assert rise.delta_z_m < 0
    assert "below the stack exit" in caplog.text
