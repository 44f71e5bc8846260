"""
Shared fixtures: the study camera, a reduced-resolution copy of it, and the
tallest Syncrude stack.
"""
import math
from pathlib import Path

import pytest

from plumerise.briggs import AmbientConditions, StackSpec
from plumerise.geometry import CameraModel
from plumerise.synth_oracle import SynthScenario

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

# tan(alpha/2) back-derived from G = 1.6647 m/px at D = 5180 m
SITE_TAN_HALF = 0.520625
SITE_FOV_DEG = 2.0 * math.degrees(math.atan(SITE_TAN_HALF))
SITE_AZIMUTH = 252.0


def in_plane_right(azimuth: float = SITE_AZIMUTH) -> float:
    """Wind direction that drifts the plume straight to image right."""
    return (azimuth + 180.0) % 360.0


def drifting_right(theta_n: float, toward_camera: bool, azimuth: float = SITE_AZIMUTH) -> float:
    """Wind direction giving a rightward plume at theta_n off the image plane."""
    offset = theta_n if toward_camera else -theta_n
    return (azimuth + 180.0 + offset) % 360.0


@pytest.fixture
def site_cam():
    return CameraModel(
        width_px=2592,
        height_px=1944,
        fov_deg=SITE_FOV_DEG,
        stack_distance_m=5180.0,
        plane_azimuth_deg=SITE_AZIMUTH,
        stack_px=(1296, 1200),
    )


@pytest.fixture
def small_cam():
    return CameraModel(
        width_px=640,
        height_px=480,
        fov_deg=SITE_FOV_DEG,
        stack_distance_m=5180.0,
        plane_azimuth_deg=SITE_AZIMUTH,
        stack_px=(320, 300),
    )


@pytest.fixture
def stack_12908():
    return StackSpec(
        id="Syn. 12908",
        lat_deg=57.041,
        lon_deg=-111.616,
        height_m=183.0,
        diameter_m=7.9,
        exit_velocity_mps=12.0,
        exit_temp_K=427.9,
    )


@pytest.fixture
def november_air():
    return AmbientConditions(air_temp_K=263.15, mean_wind_mps=10.0)


@pytest.fixture
def make_scenario(small_cam, stack_12908, november_air):
    def factory(phi_deg=None, cam=None, **overrides):
        fields = dict(
            cam=cam or small_cam,
            stack=stack_12908,
            amb=november_air,
            phi_deg=in_plane_right() if phi_deg is None else phi_deg,
            spread_rate=0.05,
            seed=7,
            image_id="S1",
        )
        fields.update(overrides)
        return SynthScenario(**fields)

    return factory
