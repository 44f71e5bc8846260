"""
Single-camera, wind-constrained transformation from image coordinates to
real-world plume rise.

Image coordinates are centre-origin with x to the right and z upward. Raster
coordinates (column, row) have rows increasing downward and pixel centres at
+0.5; `raster_to_image` and `image_to_raster` are the only conversions between
the two.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from plumerise.errors import DegenerateGeometry

logger = logging.getLogger(__name__)

OPTICS_CONSISTENCY_TOL = 1e-3
_EPS = 1e-12


class CameraModel(BaseModel):
    """
    Camera optics and site geometry.

    `fov_deg` is the diagonal field of view. Either the field of view or the
    focal length may be omitted when `pixel_size_um` is given; the missing one
    is derived. `stack_px` is the (column, row) raster position of the stack exit.
    """

    model_config = ConfigDict(frozen=True)

    width_px: int = Field(gt=0)
    height_px: int = Field(gt=0)
    fov_deg: Optional[float] = Field(default=None, gt=0, lt=180)
    focal_length_mm: Optional[float] = Field(default=None, gt=0)
    pixel_size_um: Optional[float] = Field(default=None, gt=0)
    stack_distance_m: float = Field(ge=0)
    plane_azimuth_deg: float = Field(ge=0, lt=360)
    stack_px: Tuple[float, float]

    @model_validator(mode="before")
    @classmethod
    def derive_optics(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        fov = data.get("fov_deg")
        focal = data.get("focal_length_mm")
        pixel = data.get("pixel_size_um")
        diag = math.hypot(float(data["width_px"]), float(data["height_px"]))

        if fov is None:
            if focal is None or pixel is None:
                raise ValueError("fov_deg is required unless focal_length_mm and pixel_size_um are both given")
            half = math.atan(float(pixel) * 1e-3 * diag / (2.0 * float(focal)))
            data["fov_deg"] = math.degrees(2.0 * half)
        elif focal is None and pixel is not None:
            tan_half = math.tan(math.radians(float(fov)) / 2.0)
            data["focal_length_mm"] = float(pixel) * 1e-3 * diag / (2.0 * tan_half)
        elif focal is not None and pixel is not None:
            expected = _pixel_size_um(float(focal), float(fov), diag)
            if abs(expected - float(pixel)) > OPTICS_CONSISTENCY_TOL * float(pixel):
                raise ValueError(
                    f"focal_length_mm, fov_deg and pixel_size_um disagree: "
                    f"pixel size from optics is {expected:.4f} um, given {float(pixel):.4f} um"
                )
        return data

    @model_validator(mode="after")
    def _stack_inside_raster(self) -> "CameraModel":
        col, row = self.stack_px
        if not (0 <= col < self.width_px and 0 <= row < self.height_px):
            raise ValueError(f"stack_px {self.stack_px} lies outside the {self.width_px}x{self.height_px} raster")
        return self

    @property
    def diagonal_px(self) -> float:
        return math.hypot(self.width_px, self.height_px)


@dataclass(frozen=True)
class ImagePoint:
    """Centre-origin image position in pixels (x right, z up)."""

    x_px: float
    z_px: float


@dataclass(frozen=True)
class GroundSolution:
    X_m: float
    gamma_deg: float
    X_R_m: float
    Y_R_m: float
    G_R_m_per_px: float
    Z_R_m: float


@dataclass(frozen=True)
class RiseSolution:
    delta_z_m: float
    x_max_m: float
    Z_R_m: float
    Z_st_m: float
    negative_rise: bool


class HorizontalSide(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    NONE = "none"


class DepthSide(str, Enum):
    TOWARD = "toward_camera"
    AWAY = "away_from_camera"
    IN_PLANE = "in_plane"


@dataclass(frozen=True)
class BlowingSide:
    horizontal: HorizontalSide
    depth: DepthSide

    @property
    def depth_sign(self) -> int:
        """+1 when the plume drifts toward the camera (or stays in plane), -1 away."""
        return -1 if self.depth == DepthSide.AWAY else 1


@dataclass(frozen=True)
class WindAngle:
    theta_raw_deg: float
    theta_n_deg: float
    side: BlowingSide


def _pixel_size_um(focal_mm: float, fov_deg: float, diag_px: float) -> float:
    return 2.0 * focal_mm * math.tan(math.radians(fov_deg) / 2.0) / diag_px * 1e3


def pixel_size(cam: CameraModel) -> float:
    """
    Sensor pixel pitch.

    Args:
        cam: Camera with both focal length and field of view known

    Returns:
        float: Pixel size in µm/px
    """
    if cam.focal_length_mm is None or cam.fov_deg is None:
        raise ValueError("pixel_size needs both focal_length_mm and fov_deg")
    return _pixel_size_um(cam.focal_length_mm, cam.fov_deg, cam.diagonal_px)


def ground_sample_distance(cam: CameraModel) -> float:
    """Metres of ground per pixel in the plane through the stack (G)."""
    tan_half = math.tan(math.radians(cam.fov_deg) / 2.0)
    return 2.0 * cam.stack_distance_m * tan_half / cam.diagonal_px


def ground_width(cam: CameraModel) -> float:
    """Ground distance covered by the image width at the stack (T)."""
    return ground_sample_distance(cam) * cam.width_px


def raster_to_image(col: float, row: float, width_px: int, height_px: int) -> ImagePoint:
    return ImagePoint(x_px=col + 0.5 - width_px / 2.0, z_px=height_px / 2.0 - row - 0.5)


def image_to_raster(p: ImagePoint, width_px: int, height_px: int) -> Tuple[float, float]:
    return p.x_px + width_px / 2.0 - 0.5, height_px / 2.0 - p.z_px - 0.5


def stack_image_point(cam: CameraModel) -> ImagePoint:
    col, row = cam.stack_px
    return raster_to_image(col, row, cam.width_px, cam.height_px)


def wind_plane_angle(phi_deg: float, plane_azimuth_deg: float) -> WindAngle:
    """
    Wind direction relative to the image plane.

    The raw angle is the signed difference phi - azimuth, kept for record
    output. The normalized angle folds it into [0, 90] for trigonometry.
    The plane azimuth points toward image right, the camera looks along
    azimuth - 90 and the plume drifts toward phi + 180.

    Args:
        phi_deg: Wind direction in degrees from north (direction it blows from)
        plane_azimuth_deg: Azimuth of the image plane

    Returns:
        WindAngle: Raw angle, folded magnitude and blowing side
    """
    raw = phi_deg - plane_azimuth_deg
    folded = ((raw + 180.0) % 360.0) - 180.0
    if folded == -180.0:
        folded = 180.0
    magnitude = abs(folded)
    theta_n = magnitude if magnitude <= 90.0 else 180.0 - magnitude

    rad = math.radians(folded)
    drift_right = -math.cos(rad)
    drift_away = math.sin(rad)

    if drift_right > _EPS:
        horizontal = HorizontalSide.RIGHT
    elif drift_right < -_EPS:
        horizontal = HorizontalSide.LEFT
    else:
        horizontal = HorizontalSide.NONE

    if drift_away > _EPS:
        depth = DepthSide.AWAY
    elif drift_away < -_EPS:
        depth = DepthSide.TOWARD
    else:
        depth = DepthSide.IN_PLANE

    return WindAngle(theta_raw_deg=raw, theta_n_deg=theta_n, side=BlowingSide(horizontal, depth))


def locate_point_R(cam: CameraModel, p: ImagePoint, theta_n: float, depth_sign: int = 1) -> GroundSolution:
    """
    Place point R on the ground using the wind direction as the depth constraint.

    Args:
        cam: Camera/site model
        p: Point R in centre-origin image coordinates
        theta_n: Normalized wind angle to the image plane, degrees in [0, 90)
        depth_sign: +1 if the plume drifts toward the camera, -1 if away

    Returns:
        GroundSolution: In-plane offset, ray angle and ground position of R
    """
    if not 0.0 <= theta_n < 90.0:
        raise DegenerateGeometry(f"wind angle {theta_n} deg is outside [0, 90)")
    if depth_sign not in (1, -1):
        raise ValueError("depth_sign must be +1 or -1")

    G = ground_sample_distance(cam)
    D = cam.stack_distance_m
    X = ground_width(cam) * p.x_px / cam.width_px

    if p.x_px == 0.0:
        if theta_n > 0.0:
            raise DegenerateGeometry("point R on the optical axis with off-plane wind has no unique depth")
        return GroundSolution(X_m=0.0, gamma_deg=0.0, X_R_m=0.0, Y_R_m=0.0, G_R_m_per_px=G, Z_R_m=G * p.z_px)
    if D <= 0.0:
        raise DegenerateGeometry("stack distance must be positive to locate R")

    gamma = math.atan(X / D)
    if theta_n == 0.0:
        X_R = X
        Y_R = 0.0
    else:
        tan_theta = math.tan(math.radians(theta_n))
        denom = depth_sign * tan_theta + 1.0 / math.tan(abs(gamma))
        if denom <= 0.0:
            raise DegenerateGeometry("camera ray never meets the wind line behind the stack")
        X_R = math.copysign(D / denom, X)
        Y_R = depth_sign * abs(X_R) * tan_theta

    G_R = X_R / p.x_px
    return GroundSolution(
        X_m=X,
        gamma_deg=math.degrees(gamma),
        X_R_m=X_R,
        Y_R_m=Y_R,
        G_R_m_per_px=G_R,
        Z_R_m=G_R * p.z_px,
    )


def plume_rise(cam: CameraModel, sol: GroundSolution, z_R_px: float) -> RiseSolution:
    """
    Plume rise above the stack exit and the horizontal distance to R.

    Z_st is measured in the stack plane with G; Z_R with G_R. The rise is
    Z_R - Z_st, which equals |Z_st| + Z_R whenever the stack exit sits at or
    below the image centre.

    Args:
        cam: Camera/site model
        sol: Ground solution for R
        z_R_px: Vertical image offset of R from the image centre

    Returns:
        RiseSolution: Rise, distance and the intermediate heights
    """
    G = ground_sample_distance(cam)
    Z_R = sol.G_R_m_per_px * z_R_px
    Z_st = G * stack_image_point(cam).z_px
    delta_z = Z_R - Z_st
    negative = delta_z < 0.0
    if negative:
        logger.warning(f"Plume at R lies {abs(delta_z):.1f} m below the stack exit")
    return RiseSolution(
        delta_z_m=delta_z,
        x_max_m=math.hypot(sol.X_R_m, sol.Y_R_m),
        Z_R_m=Z_R,
        Z_st_m=Z_st,
        negative_rise=negative,
    )


def project_ground_points(cam: CameraModel, X, Y, Z) -> Tuple[np.ndarray, np.ndarray]:
    """
    Project ground points (stack at the origin, Y toward the camera, Z from
    the optical-axis height) into centre-origin image coordinates.

    Args:
        cam: Camera/site model
        X: In-plane offsets (m)
        Y: Offsets toward the camera (m)
        Z: Heights relative to the optical axis (m)

    Returns:
        tuple: (x_px, z_px) arrays
    """
    D = cam.stack_distance_m
    Y = np.asarray(Y, dtype=float)
    if D <= 0.0 or np.any(D - Y <= 0.0):
        raise DegenerateGeometry("point lies at or behind the camera")
    G_R = ground_sample_distance(cam) * (D - Y) / D
    return np.asarray(X, dtype=float) / G_R, np.asarray(Z, dtype=float) / G_R


def project_ground_point(cam: CameraModel, X_R: float, Y_R: float, Z_R: float) -> ImagePoint:
    """Inverse of locate_point_R followed by plume_rise for a single point."""
    x, z = project_ground_points(cam, X_R, Y_R, Z_R)
    return ImagePoint(x_px=float(x), z_px=float(z))
