"""
Plume mask analysis: component isolation, centerline extraction, asymptotic
fit and selection of point R.
"""
import io
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from plumerise.config import ANALYSIS_CONFIG
from plumerise.errors import EmptyPlume, FitDiverged, NotLeveled, VerticalPlume
from plumerise.geometry import raster_to_image
from plumerise.rpn_loss import Box, PlumeDirection, classify_direction

logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
CENTERLINE_MODES = ("mean", "quadratic")


@dataclass(frozen=True, eq=False)
class PlumeMask:
    """Binary raster, True where the pixel belongs to a plume (rows, columns)."""

    pixels: np.ndarray
    source_id: str = ""
    timestamp: Optional[datetime] = None

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=bool)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"mask must be a non-empty 2-D raster, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    @property
    def is_empty(self) -> bool:
        return not self.pixels.any()

    def with_pixels(self, pixels: np.ndarray) -> "PlumeMask":
        return replace(self, pixels=pixels)


@dataclass(frozen=True, eq=False)
class CenterlineProfile:
    """
    Per-column plume rows, sorted by increasing downwind distance from the
    stack column. Rows are raster rows (downward).
    """

    cols: np.ndarray
    center_row: np.ndarray
    upper_row: np.ndarray
    lower_row: np.ndarray
    stack_col: int
    stack_row: int
    direction: PlumeDirection
    width_px: int
    height_px: int

    def __post_init__(self):
        for name in ("cols", "center_row", "upper_row", "lower_row"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    def __len__(self) -> int:
        return len(self.cols)

    def downwind_px(self) -> np.ndarray:
        offset = self.cols - self.stack_col
        if self.direction == PlumeDirection.RIGHT:
            return offset
        if self.direction == PlumeDirection.LEFT:
            return -offset
        return np.abs(offset)

    def rise_px(self) -> np.ndarray:
        """Centre height above the stack exit, up-positive."""
        return self.stack_row - self.center_row


@dataclass(frozen=True)
class AsymptoteFit:
    """z(x) = a - b * exp(-c * x)."""

    a: float
    b: float
    c: float
    rmse_px: float
    converged: bool
    c_constrained: bool = True
    iterations: int = 0

    def value(self, x):
        return self.a - self.b * np.exp(-self.c * np.asarray(x, dtype=float))

    def slope(self, x):
        return self.b * self.c * np.exp(-self.c * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PointR:
    x_R_px: float
    z_R_px: float
    downwind_px: float
    rise_px: float
    truncated: bool = False


def _stack_index(stack_px: Tuple[float, float], mask: PlumeMask) -> Tuple[int, int]:
    col, row = int(math.floor(stack_px[0])), int(math.floor(stack_px[1]))
    if not (0 <= col < mask.width_px and 0 <= row < mask.height_px):
        raise ValueError(f"stack pixel {stack_px} is outside the {mask.width_px}x{mask.height_px} mask")
    return col, row


def attached_component(mask: PlumeMask, stack_px: Tuple[float, float]) -> PlumeMask:
    """
    Keep only the 8-connected component attached to the stack.

    The component containing the stack pixel wins; otherwise the one with
    the plume pixel closest to it (first in raster order on ties).
    """
    col, row = _stack_index(stack_px, mask)
    if mask.is_empty:
        return mask.with_pixels(np.zeros_like(mask.pixels))

    labels, count = ndimage.label(mask.pixels, structure=EIGHT_CONNECTED)
    target = labels[row, col]
    if target == 0:
        rows, cols = np.nonzero(labels)
        nearest = np.argmin((rows - row) ** 2 + (cols - col) ** 2)
        target = labels[rows[nearest], cols[nearest]]
    logger.debug(f"Kept component {target} of {count} in {mask.source_id or 'mask'}")
    return mask.with_pixels(labels == target)


def centerline(
    mask: PlumeMask,
    stack_px: Tuple[float, float],
    mode: str = ANALYSIS_CONFIG["centerline_mode"],
) -> CenterlineProfile:
    """
    Column-wise plume centre and boundaries.

    Args:
        mask: Single attached plume component
        stack_px: (column, row) of the stack exit
        mode: "mean" for per-column mean rows; "quadratic" to smooth the
            means with a quadratic through them

    Returns:
        CenterlineProfile: Columns ordered away from the stack
    """
    if mode not in CENTERLINE_MODES:
        raise ValueError(f"unknown centerline mode '{mode}'")
    stack_col, stack_row = _stack_index(stack_px, mask)
    rows, cols = np.nonzero(mask.pixels)
    if rows.size == 0:
        raise EmptyPlume(f"no plume pixels in {mask.source_id or 'mask'}")

    present = np.unique(cols)
    labels = cols + 1
    index = present + 1
    center = np.asarray(ndimage.mean(rows, labels=labels, index=index), dtype=float)
    upper = np.asarray(ndimage.minimum(rows, labels=labels, index=index), dtype=float)
    lower = np.asarray(ndimage.maximum(rows, labels=labels, index=index), dtype=float)

    if mode == "quadratic" and len(present) >= 3:
        smooth = np.polyval(np.polyfit(present, center, 2), present)
        center = np.clip(smooth, upper, lower)

    bbox = Box(
        x=float(present[0]),
        y=float(rows.min()),
        w=float(present[-1] - present[0] + 1),
        h=float(rows.max() - rows.min() + 1),
    )
    direction = classify_direction(bbox, (stack_col + 0.5, stack_row + 1.0))

    profile = CenterlineProfile(
        cols=present,
        center_row=center,
        upper_row=upper,
        lower_row=lower,
        stack_col=stack_col,
        stack_row=stack_row,
        direction=direction,
        width_px=mask.width_px,
        height_px=mask.height_px,
    )
    order = np.argsort(profile.downwind_px(), kind="stable")
    return replace(
        profile,
        cols=profile.cols[order],
        center_row=profile.center_row[order],
        upper_row=profile.upper_row[order],
        lower_row=profile.lower_row[order],
    )


def fit_saturation(
    x: np.ndarray,
    z: np.ndarray,
    grid_size: int = 81,
    max_iter: int = 100,
    xtol: float = 1e-12,
    armijo_c: float = 1e-4,
) -> AsymptoteFit:
    """
    Least-squares fit of z = a - b * exp(-c * x).

    A coarse log-spaced grid over c (with a, b solved linearly at each c)
    seeds a damped Gauss-Newton refinement of all three parameters with
    backtracking line search. c is kept positive.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    span = max(float(np.ptp(x)), 1.0)
    ones = np.ones_like(x)

    best = None
    for c in np.geomspace(1e-2, 1e2, grid_size) / span:
        design = np.column_stack([ones, -np.exp(-c * x)])
        coef, *_ = np.linalg.lstsq(design, z, rcond=None)
        sse = float(np.sum((design @ coef - z) ** 2))
        if best is None or sse < best[0]:
            best = (sse, coef[0], coef[1], c)

    def residual(p):
        return p[0] - p[1] * np.exp(-p[2] * x) - z

    def jacobian(p):
        e = np.exp(-p[2] * x)
        return np.column_stack([ones, -e, p[1] * x * e])

    params = np.array(best[1:], dtype=float)
    r = residual(params)
    f = float(r @ r)
    iterations = 0
    stalled = False
    for iterations in range(1, max_iter + 1):
        J = jacobian(params)
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        slope = 2.0 * float((J.T @ r) @ step)
        alpha = 1.0
        while True:
            trial = params + alpha * step
            if trial[2] > 0:
                r_trial = residual(trial)
                f_trial = float(r_trial @ r_trial)
                if f_trial <= f + armijo_c * alpha * slope:
                    break
            alpha *= 0.5
            if alpha < 1e-12:
                stalled = True
                break
        if stalled:
            break
        params, r, f = trial, r_trial, f_trial
        if np.linalg.norm(alpha * step) <= xtol * (np.linalg.norm(params) + xtol):
            break

    a, b, c = (float(v) for v in params)
    rmse = math.sqrt(f / len(x))
    finite = all(math.isfinite(v) for v in (a, b, c, rmse))
    converged = finite and c > 0 and (stalled or iterations < max_iter)
    scale = max(1.0, abs(a), float(np.ptp(z)))
    c_constrained = abs(b) > 1e-9 * scale
    if not converged:
        logger.warning(f"Asymptote fit did not converge (a={a:.3g}, b={b:.3g}, c={c:.3g})")
    return AsymptoteFit(
        a=a,
        b=b,
        c=c,
        rmse_px=rmse,
        converged=converged,
        c_constrained=c_constrained,
        iterations=iterations,
    )


def fit_asymptote(profile: CenterlineProfile, min_columns: int = ANALYSIS_CONFIG["min_fit_columns"]) -> AsymptoteFit:
    """
    Fit the saturating curve to the downwind part of a centerline.

    Args:
        profile: Centerline profile
        min_columns: Minimum number of downwind columns

    Returns:
        AsymptoteFit: Parameters in pixels, with converged=False when the fit
            is not usable
    """
    x = profile.downwind_px()
    keep = x >= 0
    if keep.sum() < min_columns:
        logger.warning(f"Only {int(keep.sum())} downwind columns; need {min_columns} to fit")
        return AsymptoteFit(a=math.nan, b=math.nan, c=math.nan, rmse_px=math.nan, converged=False)
    return fit_saturation(x[keep], profile.rise_px()[keep])


def _point(profile: CenterlineProfile, downwind: float, rise: float, truncated: bool) -> PointR:
    sign = -1.0 if profile.direction == PlumeDirection.LEFT else 1.0
    col = profile.stack_col + sign * downwind
    row = profile.stack_row - rise
    p = raster_to_image(col, row, profile.width_px, profile.height_px)
    return PointR(x_R_px=p.x_px, z_R_px=p.z_px, downwind_px=downwind, rise_px=rise, truncated=truncated)


def select_R(
    fit: AsymptoteFit,
    profile: CenterlineProfile,
    slope_tol: float = ANALYSIS_CONFIG["slope_tol"],
    not_leveled_factor: float = ANALYSIS_CONFIG["not_leveled_factor"],
) -> PointR:
    """
    First downwind distance at which the fitted curve is level.

    Args:
        fit: Converged asymptote fit
        profile: Profile the fit came from
        slope_tol: Largest |dz/dx| (px/px) counted as level
        not_leveled_factor: Give up when the slope at the end of the profile
            is still this many times the tolerance

    Returns:
        PointR: R in centre-origin image coordinates
    """
    if profile.direction == PlumeDirection.VERTICAL:
        raise VerticalPlume("vertical plume has no downwind distance")
    if not fit.converged:
        raise FitDiverged("asymptote fit did not converge")
    if slope_tol <= 0:
        raise ValueError("slope_tol must be positive")

    peak = abs(fit.b) * fit.c
    x_R = 0.0 if peak <= slope_tol else math.log(peak / slope_tol) / fit.c

    x_end = float(profile.downwind_px().max())
    truncated = False
    if x_R > x_end:
        slope_end = peak * math.exp(-fit.c * x_end)
        if slope_end > not_leveled_factor * slope_tol:
            raise NotLeveled(f"slope {slope_end:.3g} px/px at the end of the plume is far above {slope_tol}")
        logger.warning(f"Plume leaves the frame before leveling; R truncated to {x_end:.0f} px downwind")
        x_R = x_end
        truncated = True

    return _point(profile, x_R, float(fit.value(x_R)), truncated)


def vertical_point(profile: CenterlineProfile) -> PointR:
    """Highest plume point above the stack column, used when R is undefined."""
    top = float(profile.upper_row.min())
    return _point(profile, 0.0, profile.stack_row - top, False)


def profile_to_csv(profile: CenterlineProfile) -> str:
    buffer = io.StringIO()
    buffer.write("col,center,upper,lower\n")
    for row in zip(profile.cols, profile.center_row, profile.upper_row, profile.lower_row):
        buffer.write("{:.0f},{:.3f},{:.0f},{:.0f}\n".format(*row))
    return buffer.getvalue()
