"""
Wind records and the append-only measurement record log.
"""
import bisect
import csv
import io
import json
import logging
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from plumerise.config import WIND_CONFIG
from plumerise.errors import NonMonotonicTimestamps, NoWindData, WindParseError
from plumerise.utils import format_timestamp, parse_timestamp

logger = logging.getLogger(__name__)


class MeasurementFlag(str, Enum):
    TRUNCATED = "truncated"
    VERTICAL_PLUME = "vertical_plume"
    NEGATIVE_RISE = "negative_rise"
    FIT_DIVERGED = "fit_diverged"


class MeasurementRecord(BaseModel):
    """
    One line of the record log. theta_deg is the raw signed angle between the
    wind direction and the image plane.
    """

    model_config = ConfigDict(frozen=True, use_enum_values=True)

    image_id: str
    timestamp: Optional[datetime] = None
    phi_deg: Optional[float] = None
    theta_deg: Optional[float] = None
    x_R_px: Optional[float] = None
    z_R_px: Optional[float] = None
    X_R_m: Optional[float] = None
    Z_R_m: Optional[float] = None
    G_R: Optional[float] = None
    delta_z_m: Optional[float] = None
    x_max_m: Optional[float] = None
    briggs_delta_z_m: Optional[float] = None
    flags: List[MeasurementFlag] = []
    status: str = "ok"
    error: Optional[str] = None
    message: Optional[str] = None
    run_id: Optional[str] = None

    @field_validator("flags")
    @classmethod
    def _sorted_flags(cls, flags):
        return sorted({MeasurementFlag(f).value for f in flags})

    @field_validator("status")
    @classmethod
    def _known_status(cls, status):
        if status not in ("ok", "failed"):
            raise ValueError(f"status must be 'ok' or 'failed', got '{status}'")
        return status

    @model_validator(mode="after")
    def _rise_matches_flags(self) -> "MeasurementRecord":
        diverged = MeasurementFlag.FIT_DIVERGED.value in self.flags
        if diverged and self.delta_z_m is not None:
            raise ValueError("a record flagged fit_diverged carries no delta_z_m")
        if self.status == "ok" and self.delta_z_m is None:
            raise ValueError("successful records must carry delta_z_m")
        return self

    @classmethod
    def failure(cls, image_id: str, error: Exception, timestamp: Optional[datetime] = None,
                run_id: Optional[str] = None, phi_deg: Optional[float] = None) -> "MeasurementRecord":
        cause = getattr(error, "cause", "error")
        flags = [MeasurementFlag.FIT_DIVERGED] if cause == "fit_diverged" else []
        return cls(
            image_id=image_id,
            timestamp=timestamp,
            phi_deg=phi_deg,
            flags=flags,
            status="failed",
            error=cause,
            message=str(error),
            run_id=run_id,
        )

    def to_json_line(self) -> str:
        payload = self.model_dump(mode="json")
        payload["timestamp"] = format_timestamp(self.timestamp)
        return json.dumps(payload, ensure_ascii=False)


class RecordLog:
    """Append-only JSON-lines log; appends from concurrent callers are serialized."""

    def __init__(self, log_path):
        self.path = Path(log_path)
        self._lock = threading.Lock()

    def append(self, record: MeasurementRecord):
        line = record.to_json_line()
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()

    def read(self) -> List[MeasurementRecord]:
        if not self.path.exists():
            return []
        with open(self.path, "r", encoding="utf-8") as f:
            return [MeasurementRecord.model_validate_json(line) for line in f if line.strip()]


@dataclass(frozen=True)
class WindRecord:
    timestamp: datetime
    wd_deg: float


@dataclass(frozen=True)
class WindTable:
    records: Tuple[WindRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    @property
    def timestamps(self) -> List[datetime]:
        return [r.timestamp for r in self.records]


def load_wind_csv(data: bytes) -> WindTable:
    """
    Parse a wind-direction file.

    Args:
        data: CSV bytes with the header "timestamp,wd_deg"

    Returns:
        WindTable: Records sorted by time, directions normalized to [0, 360)
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise WindParseError(f"not UTF-8 text: {str(e)}", line=1) from e

    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != WIND_CONFIG["header"]:
        raise WindParseError(f"header must be '{','.join(WIND_CONFIG['header'])}'", line=1)

    records = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise WindParseError(f"expected 2 fields, got {len(row)}", line=line)
        try:
            timestamp = parse_timestamp(row[0])
        except ValueError as e:
            raise WindParseError(f"bad timestamp '{row[0].strip()}'", line=line) from e
        try:
            wd = float(row[1])
        except ValueError as e:
            raise WindParseError(f"bad wind direction '{row[1].strip()}'", line=line) from e
        if not math.isfinite(wd):
            raise WindParseError(f"wind direction must be finite, got {wd}", line=line)
        records.append(WindRecord(timestamp=timestamp, wd_deg=wd % 360.0))

    records.sort(key=lambda r: r.timestamp)
    for prev, cur in zip(records, records[1:]):
        if cur.timestamp == prev.timestamp:
            raise NonMonotonicTimestamps(f"duplicate wind timestamp {format_timestamp(cur.timestamp)}")

    logger.debug(f"Parsed {len(records)} wind records")
    return WindTable(records=tuple(records))


def load_wind_file(wind_path) -> WindTable:
    with open(wind_path, "rb") as f:
        return load_wind_csv(f.read())


def wind_at(
    table: WindTable,
    t: Optional[datetime],
    max_gap: Union[float, timedelta] = WIND_CONFIG["max_gap_s"],
) -> WindRecord:
    """
    Nearest wind record in time; ties go to the earlier record.

    Args:
        table: Wind table
        t: Capture time
        max_gap: Largest accepted time difference (seconds or timedelta)

    Returns:
        WindRecord: Matching record
    """
    if t is None:
        raise NoWindData("image has no timestamp")
    if not table.records:
        raise NoWindData("wind table is empty")
    gap_limit = max_gap if isinstance(max_gap, timedelta) else timedelta(seconds=max_gap)

    times = table.timestamps
    i = bisect.bisect_left(times, t)
    candidates = [j for j in (i - 1, i) if 0 <= j < len(times)]
    best = min(candidates, key=lambda j: (abs(times[j] - t), j))
    gap = abs(times[best] - t)
    if gap > gap_limit:
        raise NoWindData(f"nearest wind record is {gap.total_seconds():.0f} s from {format_timestamp(t)}")
    return table.records[best]
