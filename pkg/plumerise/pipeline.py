"""
Measurement pipeline: mask -> centerline -> point R -> plume rise, for single
images and batches, plus mask-pair evaluation.
"""
import csv
import logging
import uuid
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from plumerise.config import BATCH_CONFIG, AnalysisSettings, SiteConfig
from plumerise.errors import DimensionMismatch, MissingCounterpart, PlumeRiseError
from plumerise.geometry import CameraModel, ImagePoint, locate_point_R, plume_rise, stack_image_point, wind_plane_angle
from plumerise.mask_analysis import (
    CenterlineProfile,
    PlumeMask,
    attached_component,
    centerline,
    fit_asymptote,
    profile_to_csv,
    select_R,
    vertical_point,
)
from plumerise.metrics import REPORT_COLUMNS, ConfusionMatrix, Scores, aggregate, confusion, report_rows
from plumerise.pnm import load_mask
from plumerise.records import MeasurementFlag, MeasurementRecord, RecordLog, WindTable, wind_at
from plumerise.rpn_loss import PlumeDirection
from plumerise.utils import parse_mask_filename

logger = logging.getLogger(__name__)


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


def find_masks(mask_dir, patterns: Sequence[str] = tuple(BATCH_CONFIG["mask_patterns"])) -> List[Path]:
    """Mask files directly inside `mask_dir`, sorted by name."""
    directory = Path(mask_dir)
    found = set()
    for pattern in patterns:
        found.update(p for p in directory.glob(pattern) if p.is_file())
    return sorted(found)


def measure_profile(
    profile: CenterlineProfile,
    cam: CameraModel,
    phi_deg: float,
    settings: Optional[AnalysisSettings] = None,
    image_id: str = "",
    timestamp: Optional[datetime] = None,
    run_id: Optional[str] = None,
) -> MeasurementRecord:
    """
    Point R and plume rise from a centerline profile.

    Vertical plumes have no leveling distance; the top of the plume above the
    stack stands in for R and the wind angle is taken as zero.

    Args:
        profile: Centerline of the attached plume
        cam: Camera/site model
        phi_deg: Wind direction at capture time
        settings: Analysis settings
        image_id: Identifier written to the record
        timestamp: Capture time written to the record
        run_id: Batch identifier written to the record

    Returns:
        MeasurementRecord: Successful measurement
    """
    settings = settings or AnalysisSettings()
    angle = wind_plane_angle(phi_deg, cam.plane_azimuth_deg)
    flags = []

    if profile.direction == PlumeDirection.VERTICAL:
        point = vertical_point(profile)
        theta_n, depth_sign = 0.0, 1
        flags.append(MeasurementFlag.VERTICAL_PLUME)
    else:
        if angle.side.horizontal.value not in (profile.direction.value, "none"):
            logger.warning(
                f"{image_id or 'plume'} extends {profile.direction.value} but the wind blows it {angle.side.horizontal.value}"
            )
        fit = fit_asymptote(profile, settings.min_fit_columns)
        point = select_R(fit, profile, settings.slope_tol)
        if point.truncated:
            flags.append(MeasurementFlag.TRUNCATED)
        theta_n, depth_sign = angle.theta_n_deg, angle.side.depth_sign

    sol = locate_point_R(cam, ImagePoint(point.x_R_px, point.z_R_px), theta_n, depth_sign)
    rise = plume_rise(cam, sol, point.z_R_px)
    if rise.negative_rise:
        flags.append(MeasurementFlag.NEGATIVE_RISE)

    return MeasurementRecord(
        image_id=image_id,
        timestamp=timestamp,
        phi_deg=phi_deg,
        theta_deg=angle.theta_raw_deg,
        x_R_px=point.x_R_px,
        z_R_px=point.z_R_px,
        X_R_m=sol.X_R_m,
        Z_R_m=rise.Z_R_m,
        G_R=sol.G_R_m_per_px,
        delta_z_m=rise.delta_z_m,
        x_max_m=rise.x_max_m,
        flags=flags,
        run_id=run_id,
    )


def measure_mask(
    mask: PlumeMask,
    cam: CameraModel,
    phi_deg: float,
    settings: Optional[AnalysisSettings] = None,
    run_id: Optional[str] = None,
) -> Tuple[MeasurementRecord, CenterlineProfile]:
    """Isolate the plume attached to the stack and measure it."""
    settings = settings or AnalysisSettings()
    if (mask.width_px, mask.height_px) != (cam.width_px, cam.height_px):
        raise DimensionMismatch(
            f"mask is {mask.width_px}x{mask.height_px}, camera is {cam.width_px}x{cam.height_px}"
        )
    plume = attached_component(mask, cam.stack_px)
    profile = centerline(plume, cam.stack_px, settings.centerline_mode)
    record = measure_profile(
        profile, cam, phi_deg, settings, image_id=mask.source_id, timestamp=mask.timestamp, run_id=run_id
    )
    return record, profile


def measure_one(
    mask_path,
    site: SiteConfig,
    wind: WindTable,
    run_id: Optional[str] = None,
    profile_dir=None,
) -> MeasurementRecord:
    """
    Measure one mask file. Errors become a failure record instead of propagating.

    Args:
        mask_path: Path to a netpbm mask
        site: Site configuration
        wind: Wind table covering the capture time
        run_id: Batch identifier
        profile_dir: Directory for the centerline debug CSV, if wanted

    Returns:
        MeasurementRecord: Success or failure record
    """
    path = Path(mask_path)
    image_id, timestamp = parse_mask_filename(path)
    phi = None
    try:
        mask = load_mask(path, site.analysis.pnm_threshold)
        image_id, timestamp = mask.source_id, mask.timestamp
        phi = wind_at(wind, timestamp, site.analysis.max_wind_gap_s).wd_deg
        record, profile = measure_mask(mask, site.camera, phi, site.analysis, run_id)
        if profile_dir is not None:
            out = Path(profile_dir) / f"{path.stem}.profile.csv"
            with open(out, "w", encoding="utf-8") as f:
                f.write(profile_to_csv(profile))
        return record
    except (PlumeRiseError, ValueError, OSError) as e:
        logger.error(f"Error measuring {path.name}: {str(e)}")
        return MeasurementRecord.failure(image_id, e, timestamp=timestamp, run_id=run_id, phi_deg=phi)


def measure_batch(
    mask_paths: Sequence[Path],
    site: SiteConfig,
    wind: WindTable,
    log: RecordLog,
    workers: int = BATCH_CONFIG["workers"],
    run_id: Optional[str] = None,
    profile_dir=None,
    progress: bool = True,
) -> List[MeasurementRecord]:
    """
    Measure every mask and append one record per mask to the log.

    Records are appended as they complete, so their order in the log follows
    completion, not input order.

    Returns:
        list: Records in completion order
    """
    run_id = run_id or new_run_id()
    offaxis = abs(stack_image_point(site.camera).x_px)
    if offaxis > BATCH_CONFIG["stack_offaxis_warn_px"]:
        logger.warning(f"Stack is {offaxis:.0f} px off the optical axis; ground distances assume it is on axis")

    records = []
    bar = tqdm(total=len(mask_paths), desc="Measuring", unit="mask", disable=not progress)
    if workers <= 1:
        for path in mask_paths:
            record = measure_one(path, site, wind, run_id, profile_dir)
            log.append(record)
            records.append(record)
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(measure_one, path, site, wind, run_id, profile_dir) for path in mask_paths]
            for future in as_completed(futures):
                record = future.result()
                log.append(record)
                records.append(record)
                bar.update(1)
    bar.close()

    failed = sum(1 for r in records if r.status != "ok")
    logger.info(f"Run {run_id}: {len(records) - failed} measured, {failed} failed, log {log.path}")
    return records


@dataclass
class EvaluationReport:
    per_image: List[Tuple[str, ConfusionMatrix]] = field(default_factory=list)
    failures: List[Tuple[str, Exception]] = field(default_factory=list)

    @property
    def summary(self) -> Dict[str, Scores]:
        return aggregate(self.per_image)

    def rows(self) -> List[List[str]]:
        return report_rows(self.per_image)


def evaluate(pred_dir, gt_dir, threshold: Optional[int] = None) -> EvaluationReport:
    """
    Compare predicted masks against ground truth, matched by file name.

    Args:
        pred_dir: Directory of predicted masks
        gt_dir: Directory of ground-truth masks
        threshold: Graymap plume threshold

    Returns:
        EvaluationReport: Per-image confusion counts and per-file failures
    """
    settings = AnalysisSettings() if threshold is None else AnalysisSettings(pnm_threshold=threshold)
    preds = {p.name: p for p in find_masks(pred_dir)}
    gts = {p.name: p for p in find_masks(gt_dir)}
    report = EvaluationReport()

    for name in sorted(set(preds) | set(gts)):
        if name not in gts:
            report.failures.append((name, MissingCounterpart(f"{name} has no ground truth in {gt_dir}")))
            continue
        if name not in preds:
            report.failures.append((name, MissingCounterpart(f"{name} has no prediction in {pred_dir}")))
            continue
        try:
            pred = load_mask(preds[name], settings.pnm_threshold)
            gt = load_mask(gts[name], settings.pnm_threshold)
            report.per_image.append((preds[name].stem, confusion(pred, gt)))
        except (PlumeRiseError, OSError) as e:
            logger.error(f"Error evaluating {name}: {str(e)}")
            report.failures.append((name, e))

    for name, error in report.failures:
        if isinstance(error, MissingCounterpart):
            logger.warning(str(error))
    return report


def write_report(report: EvaluationReport, output_file) -> bool:
    try:
        with open(output_file, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(REPORT_COLUMNS)
            writer.writerows(report.rows())
        logger.info(f"Saved evaluation report to {output_file}")
        return True
    except OSError as e:
        logger.error(f"Error saving evaluation report: {str(e)}")
        return False
