"""
Briggs plume rise parameterization, used as a reference against measured rise.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from plumerise.errors import ConfigError, NegativeBuoyancy

logger = logging.getLogger(__name__)

GRAVITY = 9.81
ENTRAINMENT = 0.6

ROSTER_COLUMNS = ["id", "lat", "lon", "h_s", "d_s", "w_s", "T_s"]


class StackSpec(BaseModel):
    """One smokestack from the site roster."""

    model_config = ConfigDict(frozen=True)

    id: str
    lat_deg: float = 0.0
    lon_deg: float = 0.0
    height_m: float = Field(ge=0)
    diameter_m: float = Field(gt=0)
    exit_velocity_mps: float = Field(ge=0)
    exit_temp_K: float = Field(gt=0)

    @property
    def radius_m(self) -> float:
        return self.diameter_m / 2.0


class AmbientConditions(BaseModel):
    model_config = ConfigDict(frozen=True)

    air_temp_K: float = Field(gt=0)
    mean_wind_mps: float = Field(gt=0)
    density_ratio: Optional[float] = Field(default=None, gt=0, lt=2)
    gravity_mps2: float = Field(default=GRAVITY, gt=0)
    entrainment: float = Field(default=ENTRAINMENT, gt=0, le=1)


@dataclass(frozen=True)
class IterativeRise:
    delta_z_m: float
    converged: bool
    iterations: int
    wind_mps: float


def density_ratio(stack: StackSpec, amb: AmbientConditions) -> float:
    """Effluent-to-air density ratio; ideal gas at equal pressure unless overridden."""
    if amb.density_ratio is not None:
        return amb.density_ratio
    return amb.air_temp_K / stack.exit_temp_K


def momentum_flux(stack: StackSpec, amb: AmbientConditions) -> float:
    """Momentum flux parameter F_m in m^4/s^2."""
    return density_ratio(stack, amb) * stack.radius_m ** 2 * stack.exit_velocity_mps ** 2


def buoyancy_flux(stack: StackSpec, amb: AmbientConditions, squared_velocity: bool = False) -> float:
    """
    Buoyancy flux parameter F_b in m^4/s^3.

    Args:
        stack: Stack parameters
        amb: Ambient conditions
        squared_velocity: Use the exit velocity squared, a form that circulates in the literature.
            The result is then not in m^4/s^3 and the rise formula loses dimensional
            consistency; only meant for side-by-side comparison.

    Returns:
        float: F_b (negative for effluent denser than air)
    """
    power = 2 if squared_velocity else 1
    return (
        (1.0 - density_ratio(stack, amb))
        * amb.gravity_mps2
        * stack.radius_m ** 2
        * stack.exit_velocity_mps ** power
    )


def rise_at_distance(F_m: float, F_b: float, u_bar: float, x: float, entrainment: float = ENTRAINMENT) -> float:
    """
    Plume rise at horizontal distance x from the stack.

    Args:
        F_m: Momentum flux (m^4/s^2)
        F_b: Buoyancy flux (m^4/s^3), must be non-negative
        u_bar: Mean horizontal wind speed (m/s)
        x: Downwind distance (m)
        entrainment: Entrainment rate

    Returns:
        float: Rise above the stack exit in metres
    """
    if F_b < 0:
        raise NegativeBuoyancy(f"buoyancy flux {F_b:.3f} is negative; the rise formula does not apply")
    if u_bar <= 0:
        raise ValueError("wind speed must be positive")
    if x < 0:
        raise ValueError("downwind distance must be non-negative")
    if not 0 < entrainment <= 1:
        raise ValueError("entrainment must be in (0, 1]")

    beta2 = entrainment ** 2
    momentum_term = 3.0 * F_m * x / (beta2 * u_bar ** 2)
    buoyancy_term = 3.0 * F_b * x ** 2 / (2.0 * beta2 * u_bar ** 3)
    return (momentum_term + buoyancy_term) ** (1.0 / 3.0)


def trajectory(stack: StackSpec, amb: AmbientConditions, xs: np.ndarray) -> np.ndarray:
    """Rise at every distance in `xs` for the ambient mean wind."""
    F_m = momentum_flux(stack, amb)
    F_b = buoyancy_flux(stack, amb)
    if F_b < 0:
        raise NegativeBuoyancy(f"buoyancy flux {F_b:.3f} is negative; the rise formula does not apply")
    xs = np.asarray(xs, dtype=float)
    beta2 = amb.entrainment ** 2
    u = amb.mean_wind_mps
    total = 3.0 * F_m * xs / (beta2 * u ** 2) + 3.0 * F_b * xs ** 2 / (2.0 * beta2 * u ** 3)
    return np.cbrt(total)


def rise_iterative(
    stack: StackSpec,
    amb: AmbientConditions,
    wind_profile: Callable[[float], float],
    x: float,
    tol: float = 0.01,
    max_iter: int = 50,
) -> IterativeRise:
    """
    Fixed-point rise with the wind evaluated at the plume's mid height.

    The first iterate uses the wind at the stack top; each following one uses
    the wind at stack top + rise/2 from the previous iterate.

    Args:
        stack: Stack parameters
        amb: Ambient conditions (mean_wind_mps is ignored)
        wind_profile: Wind speed as a function of height above ground
        x: Downwind distance (m)
        tol: Stop when successive rises differ by less than this (m)
        max_iter: Maximum number of refinements after the first iterate

    Returns:
        IterativeRise: Last iterate, convergence flag and refinement count
    """
    F_m = momentum_flux(stack, amb)
    F_b = buoyancy_flux(stack, amb)

    def step(height: float):
        u = wind_profile(height)
        if u <= 0:
            raise ValueError(f"wind profile is not positive at {height:.1f} m")
        return rise_at_distance(F_m, F_b, u, x, amb.entrainment), u

    delta_z, u = step(stack.height_m)
    if math.isinf(tol):
        return IterativeRise(delta_z_m=delta_z, converged=True, iterations=0, wind_mps=u)

    for k in range(1, max_iter + 1):
        new_delta_z, u = step(stack.height_m + delta_z / 2.0)
        if abs(new_delta_z - delta_z) < tol:
            return IterativeRise(delta_z_m=new_delta_z, converged=True, iterations=k, wind_mps=u)
        delta_z = new_delta_z

    logger.warning(f"Iterative rise for stack {stack.id} did not converge in {max_iter} iterations")
    return IterativeRise(delta_z_m=delta_z, converged=False, iterations=max_iter, wind_mps=u)


def load_stack_roster(roster_path) -> Dict[str, StackSpec]:
    """
    Read a stack roster CSV with columns id, lat, lon, h_s, d_s, w_s, T_s.

    Args:
        roster_path: Path to the CSV file

    Returns:
        dict: StackSpec keyed by stack id
    """
    path = Path(roster_path)
    stacks: Dict[str, StackSpec] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ROSTER_COLUMNS:
                raise ConfigError(f"stack roster {path} must have header {','.join(ROSTER_COLUMNS)}")
            for row in reader:
                row = {k.strip(): v.strip() for k, v in row.items()}
                stack = StackSpec(
                    id=row["id"],
                    lat_deg=float(row["lat"]),
                    lon_deg=float(row["lon"]),
                    height_m=float(row["h_s"]),
                    diameter_m=float(row["d_s"]),
                    exit_velocity_mps=float(row["w_s"]),
                    exit_temp_K=float(row["T_s"]),
                )
                stacks[stack.id] = stack
    except OSError as e:
        raise ConfigError(f"cannot read stack roster {path}: {str(e)}") from e
    except ValueError as e:
        raise ConfigError(f"invalid stack roster {path}: {str(e)}") from e

    logger.info(f"Loaded {len(stacks)} stacks from {path}")
    return stacks
