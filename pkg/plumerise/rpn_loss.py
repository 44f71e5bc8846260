"""
Box regression parameterization and smokestack-end (SSE) regression loss.

Framework-agnostic scalar math; callers decide how to reduce over proposals.
"""
import csv
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from plumerise.config import LOSS_CONFIG
from plumerise.errors import ConfigError

logger = logging.getLogger(__name__)

RobustLoss = Callable[[float], Tuple[float, float]]


class PlumeDirection(str, Enum):
    VERTICAL = "vertical"
    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, top-left corner (x, y) in raster coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box width and height must be positive, got w={self.w}, h={self.h}")

    @property
    def center_x(self) -> float:
        return self.x + self.w / 2.0


@dataclass(frozen=True)
class SsePoint:
    u_x: float
    u_y: float


def smooth_l1(d: float) -> Tuple[float, float]:
    """Smooth-L1 value and derivative."""
    if abs(d) < 1.0:
        return 0.5 * d * d, d
    return abs(d) - 0.5, math.copysign(1.0, d)


def box_parameterize(box: Box, anchor: Box) -> Tuple[float, float, float, float]:
    """
    Anchor-relative regression targets.

    Args:
        box: Predicted or ground-truth box
        anchor: Reference anchor

    Returns:
        tuple: (t_x, t_y, t_w, t_h)
    """
    return (
        (box.x - anchor.x) / anchor.w,
        (box.y - anchor.y) / anchor.h,
        math.log(box.w / anchor.w),
        math.log(box.h / anchor.h),
    )


def classify_direction(
    gt_box: Box,
    stack_px: Tuple[float, float],
    vertical_fraction: float = LOSS_CONFIG["vertical_fraction"],
) -> PlumeDirection:
    """
    Decide which side of the stack the plume extends to.

    A box whose horizontal centre is within `vertical_fraction` of its width
    from the stack column is vertical; otherwise the plume is on the side the
    box centre lies.
    """
    offset = gt_box.center_x - stack_px[0]
    if abs(offset) <= vertical_fraction * gt_box.w:
        return PlumeDirection.VERTICAL
    return PlumeDirection.RIGHT if offset > 0 else PlumeDirection.LEFT


def sse_point(box: Box, anchor: Box, direction: PlumeDirection) -> SsePoint:
    """Anchor-normalized stack-end point for the given plume direction."""
    u_y = (box.y + box.h - anchor.y - anchor.h) / anchor.h
    if direction == PlumeDirection.VERTICAL:
        u_x = (2.0 * box.x + box.w - 2.0 * anchor.x - anchor.w) / (2.0 * anchor.w)
    elif direction == PlumeDirection.RIGHT:
        # stack at the bottom-left corner
        u_x = (box.x - anchor.x) / anchor.w
    else:
        # stack at the bottom-right corner
        u_x = (box.x + box.w - anchor.x - anchor.w) / anchor.w
    return SsePoint(u_x=u_x, u_y=u_y)


def sse_loss(pred: Box, gt: Box, anchor: Box, direction: PlumeDirection, robust: RobustLoss = smooth_l1) -> float:
    u = sse_point(pred, anchor, direction)
    u_gt = sse_point(gt, anchor, direction)
    return robust(u.u_x - u_gt.u_x)[0] + robust(u.u_y - u_gt.u_y)[0]


def rpn_reg_loss(pred: Box, gt: Box, anchor: Box, robust: RobustLoss = smooth_l1) -> float:
    t = box_parameterize(pred, anchor)
    t_gt = box_parameterize(gt, anchor)
    return sum(robust(a - b)[0] for a, b in zip(t, t_gt))


def combined_reg_loss(
    pred: Box,
    gt: Box,
    anchor: Box,
    direction: PlumeDirection,
    lambda_sse: float = LOSS_CONFIG["lambda_sse"],
    robust: RobustLoss = smooth_l1,
) -> float:
    """Box regression loss plus the weighted stack-end loss."""
    if lambda_sse < 0:
        raise ValueError("lambda_sse must be non-negative")
    return rpn_reg_loss(pred, gt, anchor, robust) + lambda_sse * sse_loss(pred, gt, anchor, direction, robust)


@dataclass(frozen=True)
class LossFixture:
    case: str
    kind: str
    direction: Optional[PlumeDirection]
    lambda_sse: float
    pred: Box
    gt: Box
    anchor: Box
    expected: float

    def evaluate(self) -> float:
        if self.kind == "rpn":
            return rpn_reg_loss(self.pred, self.gt, self.anchor)
        if self.kind == "sse":
            return sse_loss(self.pred, self.gt, self.anchor, self.direction)
        return combined_reg_loss(self.pred, self.gt, self.anchor, self.direction, self.lambda_sse)


@dataclass(frozen=True)
class FixtureResult:
    fixture: LossFixture
    actual: float
    passed: bool


def _box(row, prefix: str) -> Box:
    return Box(*(float(row[f"{prefix}_{k}"]) for k in ("x", "y", "w", "h")))


def load_loss_fixtures(fixtures_path) -> List[LossFixture]:
    """
    Read the conformance fixture table.

    Args:
        fixtures_path: CSV with columns case, kind, direction, lambda_sse,
            pred_*, gt_*, anchor_* (x, y, w, h) and expected

    Returns:
        list: Parsed fixtures
    """
    path = Path(fixtures_path)
    fixtures = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            for line_no, row in enumerate(csv.DictReader(f), start=2):
                kind = row["kind"].strip()
                if kind not in ("rpn", "sse", "combined"):
                    raise ConfigError(f"{path}:{line_no}: unknown fixture kind '{kind}'")
                direction = row["direction"].strip()
                if kind != "rpn" and not direction:
                    raise ConfigError(f"{path}:{line_no}: {kind} fixture needs a direction")
                fixtures.append(
                    LossFixture(
                        case=row["case"].strip(),
                        kind=kind,
                        direction=PlumeDirection(direction) if direction else None,
                        lambda_sse=float(row["lambda_sse"] or 0.0),
                        pred=_box(row, "pred"),
                        gt=_box(row, "gt"),
                        anchor=_box(row, "anchor"),
                        expected=float(row["expected"]),
                    )
                )
    except OSError as e:
        raise ConfigError(f"cannot read fixtures {path}: {str(e)}") from e
    except (KeyError, ValueError) as e:
        raise ConfigError(f"invalid fixtures {path}: {str(e)}") from e
    return fixtures


def check_fixtures(fixtures: Sequence[LossFixture], atol: float = LOSS_CONFIG["fixture_atol"]) -> List[FixtureResult]:
    results = []
    for fixture in fixtures:
        actual = fixture.evaluate()
        passed = abs(actual - fixture.expected) <= atol
        if not passed:
            logger.error(f"Fixture {fixture.case}: expected {fixture.expected:.12g}, got {actual:.12g}")
        results.append(FixtureResult(fixture=fixture, actual=actual, passed=passed))
    return results
