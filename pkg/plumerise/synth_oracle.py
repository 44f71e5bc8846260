"""
Synthetic plume masks with known rise, for round-trip checks of the
measurement pipeline.

A Briggs trajectory is laid along the wind direction on the ground, projected
into the camera and rasterized as a band. The truth record carries the Briggs
rise at the evaluation column: the first column where the projected centerline
is flatter than slope_tol, or the frame exit when it never gets that flat.
"""
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from plumerise.briggs import ENTRAINMENT, AmbientConditions, StackSpec, buoyancy_flux, momentum_flux, rise_at_distance, trajectory
from plumerise.config import AnalysisSettings, camera_from_sections
from plumerise.errors import ConfigError, DegenerateGeometry, OutOfFrame
from plumerise.geometry import (
    CameraModel,
    HorizontalSide,
    ground_sample_distance,
    project_ground_points,
    raster_to_image,
    wind_plane_angle,
)
from plumerise.mask_analysis import CenterlineProfile, PlumeMask
from plumerise.records import MeasurementFlag, MeasurementRecord
from plumerise.rpn_loss import PlumeDirection

logger = logging.getLogger(__name__)

MAX_THETA_DEG = 85.0
# Range used when the plume recedes so fast that it never reaches the frame edge.
SATURATED_RANGE_FACTOR = 10.0

HalfWidth = Callable[[np.ndarray], np.ndarray]


class NoiseModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["none", "boundary_jitter"] = "none"
    jitter_px: int = Field(default=0, ge=0)


class SynthScenario(BaseModel):
    """One synthetic capture; everything needed to reproduce the mask."""

    model_config = ConfigDict(frozen=True)

    cam: CameraModel
    stack: StackSpec
    amb: AmbientConditions
    phi_deg: float
    spread_rate: float = Field(default=ENTRAINMENT, ge=0)
    plume_halfwidth_m: Optional[HalfWidth] = None
    noise: NoiseModel = NoiseModel()
    seed: int = 0
    image_id: str = "synth"
    timestamp: datetime = datetime(2019, 11, 8, 18, 0, 13, tzinfo=timezone.utc)
    analysis: AnalysisSettings = Field(default_factory=AnalysisSettings)
    samples: int = Field(default=4096, ge=64)

    def halfwidth_m(self, s: np.ndarray) -> np.ndarray:
        if self.plume_halfwidth_m is not None:
            return np.asarray(self.plume_halfwidth_m(s), dtype=float)
        return self.stack.radius_m + self.spread_rate * s


@dataclass(frozen=True)
class _Trace:
    """Projected centerline, one entry per downwind column."""

    stack_col: int
    stack_row: int
    sx: int
    sy: int
    theta: float
    d: np.ndarray
    center: np.ndarray
    halfwidth: np.ndarray
    s: np.ndarray
    direction: PlumeDirection


def _trace(scn: SynthScenario) -> _Trace:
    cam = scn.cam
    W, H = cam.width_px, cam.height_px
    angle = wind_plane_angle(scn.phi_deg, cam.plane_azimuth_deg)
    if angle.theta_n_deg >= MAX_THETA_DEG:
        raise DegenerateGeometry(f"wind is {angle.theta_n_deg:.1f} deg off the image plane; synthesis needs < {MAX_THETA_DEG}")

    D = cam.stack_distance_m
    if D <= 0:
        raise DegenerateGeometry("stack distance must be positive")
    G = ground_sample_distance(cam)
    stack_col, stack_row = int(math.floor(cam.stack_px[0])), int(math.floor(cam.stack_px[1]))
    stack = raster_to_image(stack_col, stack_row, W, H)

    sx = -1 if angle.side.horizontal == HorizontalSide.LEFT else 1
    sy = angle.side.depth_sign
    theta = math.radians(angle.theta_n_deg)
    edge = stack_col if sx < 0 else W - 1 - stack_col

    u_edge = edge + 1.0
    denom = D * math.cos(theta) + sy * u_edge * G * math.sin(theta)
    s_end = u_edge * G * D / denom if denom > 0 else SATURATED_RANGE_FACTOR * D
    s = np.linspace(0.0, s_end, scn.samples)

    rise = trajectory(scn.stack, scn.amb, s)
    X = G * stack.x_px + sx * s * math.cos(theta)
    Y = sy * s * math.sin(theta)
    Z = G * stack.z_px + rise
    x_px, z_px = project_ground_points(cam, X, Y, Z)
    scale = G * (D - Y) / D

    downwind = sx * (x_px - stack.x_px)
    rows = H / 2.0 - z_px - 0.5
    if np.any(np.diff(downwind) <= 0):
        raise DegenerateGeometry("projected plume does not move steadily away from the stack")
    d = np.arange(0, int(min(edge, math.floor(downwind[-1]))) + 1)
    center = np.interp(d, downwind, rows)
    halfwidth = np.interp(d, downwind, scn.halfwidth_m(s) / scale)

    outside = np.nonzero((center < 0) | (center > H - 1))[0]
    if outside.size:
        raise OutOfFrame(f"plume centerline leaves the frame vertically {int(d[outside[0]])} px downwind")
    if len(d) < scn.analysis.min_fit_columns:
        raise OutOfFrame(f"only {len(d)} downwind columns fit in the frame")
    if d[-1] < edge:
        logger.warning(f"Plume recedes before reaching the frame edge; {len(d)} columns rasterized")

    return _Trace(
        stack_col=stack_col,
        stack_row=stack_row,
        sx=sx,
        sy=sy,
        theta=theta,
        d=d,
        center=center,
        halfwidth=halfwidth,
        s=np.interp(d, downwind, s),
        direction=PlumeDirection.LEFT if sx < 0 else PlumeDirection.RIGHT,
    )


def _rasterize(scn: SynthScenario, stack_col, stack_row, sx, d, center, halfwidth) -> np.ndarray:
    H, W = scn.cam.height_px, scn.cam.width_px
    rng = np.random.default_rng(scn.seed)
    jitter = scn.noise.jitter_px if scn.noise.kind == "boundary_jitter" else 0
    pixels = np.zeros((H, W), dtype=bool)
    hw = np.maximum(halfwidth, 0.5)
    n = len(d)

    for i in range(n):
        lo = center[i] - hw[i]
        hi = center[i] + hw[i]
        if jitter:
            lo = min(lo + rng.integers(-jitter, jitter + 1), center[i])
            hi = max(hi + rng.integers(-jitter, jitter + 1), center[i])
        # reach halfway to each neighbour so consecutive columns share a row
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                mid = (center[i] + center[j]) / 2.0
                lo, hi = min(lo, mid), max(hi, mid)
        r0 = max(int(math.floor(lo + 0.5)), 0)
        r1 = min(int(math.floor(hi + 0.5)), H - 1)
        pixels[r0:r1 + 1, stack_col + sx * int(d[i])] = True

    pixels[stack_row, stack_col] = True
    return pixels


def _profile(scn: SynthScenario, tr: _Trace) -> CenterlineProfile:
    return CenterlineProfile(
        cols=tr.stack_col + tr.sx * tr.d,
        center_row=tr.center,
        upper_row=tr.center,
        lower_row=tr.center,
        stack_col=tr.stack_col,
        stack_row=tr.stack_row,
        direction=tr.direction,
        width_px=scn.cam.width_px,
        height_px=scn.cam.height_px,
    )


def _evaluation_index(tr: _Trace, slope_tol: float) -> Tuple[int, bool]:
    """First column flatter than slope_tol, else the last column (truncated)."""
    slope = np.abs(np.gradient(tr.center, tr.d))
    flat = np.nonzero(slope[1:] < slope_tol)[0]
    if flat.size:
        return int(flat[0]) + 1, False
    return len(tr.d) - 1, True


def exact_profile(scn: SynthScenario) -> CenterlineProfile:
    """Unrasterized projected centerline sampled at column centres."""
    return _profile(scn, _trace(scn))


def generate(scn: SynthScenario) -> Tuple[PlumeMask, MeasurementRecord]:
    """
    Render a synthetic mask and its truth record.

    Args:
        scn: Scenario

    Returns:
        tuple: (mask, truth record); delta_z_m and briggs_delta_z_m both hold
            the Briggs rise at the evaluation column
    """
    cam = scn.cam
    angle = wind_plane_angle(scn.phi_deg, cam.plane_azimuth_deg)
    F_m = momentum_flux(scn.stack, scn.amb)
    F_b = buoyancy_flux(scn.stack, scn.amb)

    if F_m == 0.0 and F_b == 0.0:
        logger.info(f"{scn.image_id}: stack emits nothing; mask is empty")
        pixels = np.zeros((cam.height_px, cam.width_px), dtype=bool)
        truth = MeasurementRecord(
            image_id=scn.image_id,
            timestamp=scn.timestamp,
            phi_deg=scn.phi_deg,
            theta_deg=angle.theta_raw_deg,
            delta_z_m=0.0,
            x_max_m=0.0,
            briggs_delta_z_m=0.0,
        )
        return PlumeMask(pixels=pixels, source_id=scn.image_id, timestamp=scn.timestamp), truth

    tr = _trace(scn)
    pixels = _rasterize(scn, tr.stack_col, tr.stack_row, tr.sx, tr.d, tr.center, tr.halfwidth)

    i, truncated = _evaluation_index(tr, scn.analysis.slope_tol)
    s_R = float(tr.s[i])
    rise = rise_at_distance(F_m, F_b, scn.amb.mean_wind_mps, s_R, scn.amb.entrainment)

    G = ground_sample_distance(cam)
    D = cam.stack_distance_m
    stack = raster_to_image(tr.stack_col, tr.stack_row, cam.width_px, cam.height_px)
    point = raster_to_image(tr.stack_col + tr.sx * int(tr.d[i]), float(tr.center[i]), cam.width_px, cam.height_px)
    X_R = G * stack.x_px + tr.sx * s_R * math.cos(tr.theta)
    Y_R = tr.sy * s_R * math.sin(tr.theta)

    truth = MeasurementRecord(
        image_id=scn.image_id,
        timestamp=scn.timestamp,
        phi_deg=scn.phi_deg,
        theta_deg=angle.theta_raw_deg,
        x_R_px=point.x_px,
        z_R_px=point.z_px,
        X_R_m=X_R,
        Z_R_m=G * stack.z_px + rise,
        G_R=G * (D - Y_R) / D,
        delta_z_m=rise,
        x_max_m=math.hypot(X_R, Y_R),
        briggs_delta_z_m=rise,
        flags=[MeasurementFlag.TRUNCATED] if truncated else [],
    )
    logger.debug(f"{scn.image_id}: truth rise {rise:.1f} m at {s_R:.0f} m downwind")
    return PlumeMask(pixels=pixels, source_id=scn.image_id, timestamp=scn.timestamp), truth


def parse_scenario(raw) -> SynthScenario:
    """
    Build a scenario from a parsed YAML mapping with `camera`, `site`, `stack`,
    `ambient` and `phi_deg`, plus optional `spread_rate`, `noise`, `seed`,
    `image_id`, `timestamp` and `analysis`.
    """
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping")
    try:
        fields = {k: v for k, v in raw.items() if k not in ("camera", "site", "stack", "ambient")}
        return SynthScenario(
            cam=camera_from_sections(raw["camera"], raw["site"]),
            stack=StackSpec(**raw["stack"]),
            amb=AmbientConditions(**raw["ambient"]),
            **fields,
        )
    except KeyError as e:
        raise ConfigError(f"missing scenario key: {e.args[0]}") from e
    except (ValidationError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid scenario: {str(e)}") from e


def load_scenario(scenario_path) -> SynthScenario:
    path = Path(scenario_path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read scenario {path}: {str(e)}") from e
    return parse_scenario(raw)
