"""
Utility functions for the plume rise toolkit.
"""
import json
import logging
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Tuple

from plumerise.config import APP_CONFIG

logger = logging.getLogger(__name__)

# <id>_YYYYMMDDTHHMMSSZ.<ext>
MASK_NAME_PATTERN = re.compile(r"^(?P<id>.+)_(?P<ts>\d{8}T\d{6}Z)$")


def setup_logging(level: Optional[str] = None):
    """Configure root logging once, in the format used across the toolkit."""
    logging.basicConfig(
        level=getattr(logging, (level or APP_CONFIG["log_level"]).upper(), logging.INFO),
        format=APP_CONFIG["log_format"],
    )


def parse_timestamp(text: str) -> datetime:
    """
    Parse an ISO-8601 instant; naive values are taken as UTC.

    Args:
        text: Timestamp such as 2019-11-08T18:00:13Z

    Returns:
        datetime: Timezone-aware UTC datetime
    """
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    value = datetime.fromisoformat(text)
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def format_timestamp(value: Optional[datetime]) -> Optional[str]:
    if value is None:
        return None
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def compact_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def parse_mask_filename(path) -> Tuple[str, Optional[datetime]]:
    """
    Extract image id and timestamp from a mask filename.

    Args:
        path: Mask path (e.g., 'masks/I1_20191108T180013Z.pgm')

    Returns:
        tuple: (image_id, timestamp) with timestamp None when the name has none
    """
    stem = Path(path).stem
    match = MASK_NAME_PATTERN.match(stem)
    if not match:
        return stem, None
    ts = datetime.strptime(match.group("ts"), "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    return match.group("id"), ts


def sidecar_timestamp(mask_path) -> Optional[datetime]:
    """Timestamp from a `<mask>.json` sidecar, if one exists."""
    sidecar = Path(mask_path).with_suffix(".json")
    if not sidecar.exists():
        return None
    try:
        with open(sidecar, "r", encoding="utf-8") as f:
            meta = json.load(f)
        return parse_timestamp(meta["timestamp"])
    except (OSError, ValueError, KeyError) as e:
        logger.warning(f"Ignoring unreadable sidecar {sidecar}: {str(e)}")
        return None


def save_json(payload: Any, output_file) -> bool:
    """
    Save a JSON document.

    Args:
        payload: JSON-serializable object
        output_file: Path to write

    Returns:
        bool: Success status
    """
    try:
        with open(output_file, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2)
        logger.info(f"Saved {output_file}")
        return True
    except (OSError, TypeError) as e:
        logger.error(f"Error saving {output_file}: {str(e)}")
        return False
