"""
Configuration for the plume rise measurement toolkit.
"""
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from plumerise.briggs import AmbientConditions, StackSpec, load_stack_roster
from plumerise.errors import ConfigError
from plumerise.geometry import CameraModel

# Load environment variables from .env file if it exists
load_dotenv()

# Application configuration
APP_CONFIG = {
    "name": "plumerise",
    "version": "1.0.0",
    "log_level": os.environ.get("PLUMERISE_LOG_LEVEL", "INFO").upper(),
    "log_format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
}

# Mask analysis configuration
ANALYSIS_CONFIG = {
    "slope_tol": float(os.environ.get("PLUMERISE_SLOPE_TOL", 0.02)),  # px/px
    "centerline_mode": os.environ.get("PLUMERISE_CENTERLINE_MODE", "mean"),
    "min_fit_columns": 8,
    "pnm_threshold": 128,
    "not_leveled_factor": 10.0,
}

# Wind ingestion configuration
WIND_CONFIG = {
    "max_gap_s": float(os.environ.get("PLUMERISE_MAX_WIND_GAP_S", 3600)),
    "header": ["timestamp", "wd_deg"],
}

# Loss configuration
LOSS_CONFIG = {
    "lambda_sse": float(os.environ.get("PLUMERISE_LAMBDA_SSE", 1.0)),
    "vertical_fraction": 0.15,
    "fixture_atol": 1e-9,
}

# Batch configuration
BATCH_CONFIG = {
    "workers": int(os.environ.get("PLUMERISE_WORKERS", 1)),
    "mask_patterns": ["*.pgm", "*.pbm", "*.pnm"],
    "stack_offaxis_warn_px": 50,
}


class AnalysisSettings(BaseModel):
    """Per-site overrides for ANALYSIS_CONFIG."""

    model_config = ConfigDict(frozen=True)

    slope_tol: float = Field(default=ANALYSIS_CONFIG["slope_tol"], gt=0)
    centerline_mode: str = ANALYSIS_CONFIG["centerline_mode"]
    min_fit_columns: int = Field(default=ANALYSIS_CONFIG["min_fit_columns"], ge=3)
    pnm_threshold: int = Field(default=ANALYSIS_CONFIG["pnm_threshold"], ge=1, le=255)
    lambda_sse: float = Field(default=LOSS_CONFIG["lambda_sse"], ge=0)
    max_wind_gap_s: float = Field(default=WIND_CONFIG["max_gap_s"], gt=0)


class SiteConfig(BaseModel):
    """Everything read from a camera/site YAML file."""

    model_config = ConfigDict(frozen=True)

    camera: CameraModel
    ambient: Optional[AmbientConditions] = None
    stacks: Dict[str, StackSpec] = Field(default_factory=dict)
    analysis: AnalysisSettings = Field(default_factory=AnalysisSettings)


def camera_from_sections(camera: Dict[str, Any], site: Dict[str, Any]) -> CameraModel:
    return CameraModel(
        width_px=camera["width_px"],
        height_px=camera["height_px"],
        fov_deg=camera.get("fov_deg"),
        focal_length_mm=camera.get("focal_mm"),
        pixel_size_um=camera.get("pixel_size_um"),
        stack_distance_m=site["stack_distance_m"],
        plane_azimuth_deg=site["plane_azimuth_deg"],
        stack_px=(site["stack_col_px"], site["stack_row_px"]),
    )


def camera_to_sections(cam: CameraModel) -> Dict[str, Dict[str, Any]]:
    """Inverse of camera_from_sections, for writing site files."""
    camera = {"width_px": cam.width_px, "height_px": cam.height_px, "fov_deg": cam.fov_deg}
    if cam.focal_length_mm is not None:
        camera["focal_mm"] = cam.focal_length_mm
    if cam.pixel_size_um is not None:
        camera["pixel_size_um"] = cam.pixel_size_um
    site = {
        "stack_distance_m": cam.stack_distance_m,
        "plane_azimuth_deg": cam.plane_azimuth_deg,
        "stack_col_px": cam.stack_px[0],
        "stack_row_px": cam.stack_px[1],
    }
    return {"camera": camera, "site": site}


def parse_site_config(raw: Dict[str, Any], base_dir: Optional[Path] = None) -> SiteConfig:
    """
    Build a SiteConfig from an already-parsed YAML mapping.

    Args:
        raw: Mapping with `camera` and `site` sections, optional `ambient`,
            `stacks` (roster path) and `analysis`
        base_dir: Directory that relative roster paths are resolved against

    Returns:
        SiteConfig: Validated configuration
    """
    if not isinstance(raw, dict) or "camera" not in raw or "site" not in raw:
        raise ConfigError("configuration needs 'camera' and 'site' sections")

    try:
        camera = camera_from_sections(raw["camera"], raw["site"])
        ambient = AmbientConditions(**raw["ambient"]) if raw.get("ambient") else None
        analysis = AnalysisSettings(**(raw.get("analysis") or {}))
    except KeyError as e:
        raise ConfigError(f"missing configuration key: {e.args[0]}") from e
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {str(e)}") from e

    stacks: Dict[str, StackSpec] = {}
    roster = raw.get("stacks")
    if roster:
        roster_path = Path(roster)
        if base_dir is not None and not roster_path.is_absolute():
            roster_path = base_dir / roster_path
        stacks = load_stack_roster(roster_path)

    return SiteConfig(camera=camera, ambient=ambient, stacks=stacks, analysis=analysis)


def load_site_config(config_path) -> SiteConfig:
    """
    Load and validate a camera/site YAML file.

    Args:
        config_path: Path to the YAML file

    Returns:
        SiteConfig: Validated configuration
    """
    path = Path(config_path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read configuration {path}: {str(e)}") from e
    return parse_site_config(raw, base_dir=path.parent)
