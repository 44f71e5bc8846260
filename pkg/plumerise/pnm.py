"""
Netpbm bitmap/graymap codec for plume masks (P1, P2, P4, P5).
"""
import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np

from plumerise.config import ANALYSIS_CONFIG
from plumerise.errors import MalformedHeader, PnmError, TruncatedPayload, UnsupportedMaxval
from plumerise.mask_analysis import PlumeMask
from plumerise.utils import parse_mask_filename, sidecar_timestamp

logger = logging.getLogger(__name__)

SUPPORTED_MAGIC = (b"P1", b"P2", b"P4", b"P5")
MAX_MAXVAL = 65535
_WHITESPACE = frozenset(b" \t\n\r\v\f")


class _HeaderReader:
    """Reads whitespace-separated header tokens, skipping '#' comments."""

    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def _skip(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            ch = data[self.pos]
            if ch in _WHITESPACE:
                self.pos += 1
            elif ch == ord("#"):
                while self.pos < n and data[self.pos] not in (ord("\n"), ord("\r")):
                    self.pos += 1
            else:
                break

    def integer(self, name: str) -> int:
        self._skip()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos] not in _WHITESPACE and data[self.pos] != ord("#"):
            self.pos += 1
        token = data[start:self.pos]
        if not token:
            raise MalformedHeader(f"header ends before {name}")
        if not token.isdigit():
            raise MalformedHeader(f"{name} is not a decimal integer: {token[:16]!r}")
        return int(token)


def parse_pnm(
    data: bytes,
    source_id: str = "",
    timestamp: Optional[datetime] = None,
    threshold: int = ANALYSIS_CONFIG["pnm_threshold"],
) -> PlumeMask:
    """
    Decode a netpbm bitmap or graymap into a plume mask.

    Graymap samples are plume when value/maxval reaches threshold/255; bitmap
    pixels are plume when the bit is set.

    Args:
        data: File contents
        source_id: Identifier stored on the mask
        timestamp: Capture time stored on the mask
        threshold: 8-bit plume threshold for graymaps

    Returns:
        PlumeMask: Decoded mask with the header's dimensions
    """
    magic = bytes(data[:2])
    if magic not in SUPPORTED_MAGIC:
        raise MalformedHeader(f"unsupported or missing magic number {magic!r}")

    header = _HeaderReader(data, 2)
    width = header.integer("width")
    height = header.integer("height")
    if width == 0 or height == 0:
        raise MalformedHeader(f"image dimensions must be positive, got {width}x{height}")

    maxval = 1
    if magic in (b"P2", b"P5"):
        maxval = header.integer("maxval")
        if maxval > MAX_MAXVAL:
            raise UnsupportedMaxval(f"maxval {maxval} exceeds {MAX_MAXVAL}")
        if maxval == 0:
            raise MalformedHeader("maxval must be positive")

    count = width * height
    pos = header.pos

    if magic in (b"P4", b"P5"):
        if pos >= len(data):
            raise TruncatedPayload("no raster after header")
        if data[pos] not in _WHITESPACE:
            raise MalformedHeader("header must end with a single whitespace byte")
        pos += 1

    if magic == b"P5":
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        need = count * dtype.itemsize
        payload = data[pos:pos + need]
        if len(payload) < need:
            raise TruncatedPayload(f"expected {need} raster bytes, got {len(payload)}")
        values = np.frombuffer(payload, dtype=dtype).reshape(height, width)
        pixels = values.astype(np.int64) * 255 >= threshold * maxval
    elif magic == b"P4":
        row_bytes = (width + 7) // 8
        need = row_bytes * height
        payload = data[pos:pos + need]
        if len(payload) < need:
            raise TruncatedPayload(f"expected {need} raster bytes, got {len(payload)}")
        packed = np.frombuffer(payload, dtype=np.uint8).reshape(height, row_bytes)
        pixels = np.unpackbits(packed, axis=1)[:, :width].astype(bool)
    elif magic == b"P2":
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise TruncatedPayload(f"expected {count} samples, got {len(tokens)}")
        try:
            values = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError as e:
            raise PnmError(f"non-integer sample in raster: {str(e)}") from e
        if values.min() < 0 or values.max() > maxval:
            raise PnmError(f"sample outside 0..{maxval}")
        pixels = (values * 255 >= threshold * maxval).reshape(height, width)
    else:
        raw = np.frombuffer(bytes(data[pos:]), dtype=np.uint8)
        digits = (raw == ord("0")) | (raw == ord("1"))
        others = raw[~digits]
        if others.size and not np.isin(others, list(_WHITESPACE)).all():
            raise PnmError("bitmap raster may only contain 0, 1 and whitespace")
        bits = raw[digits]
        if bits.size < count:
            raise TruncatedPayload(f"expected {count} bits, got {bits.size}")
        pixels = (bits[:count] == ord("1")).reshape(height, width)

    return PlumeMask(pixels=pixels, source_id=source_id, timestamp=timestamp)


def encode_pnm(mask: PlumeMask, magic: str = "P5") -> bytes:
    """
    Encode a mask as netpbm; graymaps use 0/255.

    Args:
        mask: Mask to encode
        magic: One of "P1", "P2", "P4", "P5"

    Returns:
        bytes: File contents
    """
    h, w = mask.pixels.shape
    if magic == "P5":
        return f"P5\n{w} {h}\n255\n".encode("ascii") + (mask.pixels.astype(np.uint8) * 255).tobytes()
    if magic == "P4":
        return f"P4\n{w} {h}\n".encode("ascii") + np.packbits(mask.pixels, axis=1).tobytes()
    if magic == "P2":
        values = mask.pixels.astype(np.uint8) * 255
        body = "\n".join(" ".join(str(v) for v in row) for row in values)
        return f"P2\n{w} {h}\n255\n{body}\n".encode("ascii")
    if magic == "P1":
        body = "\n".join(" ".join("1" if v else "0" for v in row) for row in mask.pixels)
        return f"P1\n{w} {h}\n{body}\n".encode("ascii")
    raise ValueError(f"unsupported netpbm format '{magic}'")


def load_mask(mask_path, threshold: int = ANALYSIS_CONFIG["pnm_threshold"]) -> PlumeMask:
    """
    Read a mask file; id and timestamp come from `<id>_YYYYMMDDTHHMMSSZ.<ext>`
    or, when present, a `<mask>.json` sidecar with a "timestamp" key.
    """
    path = Path(mask_path)
    image_id, timestamp = parse_mask_filename(path)
    sidecar = sidecar_timestamp(path)
    if sidecar is not None:
        timestamp = sidecar
    with open(path, "rb") as f:
        data = f.read()
    return parse_pnm(data, source_id=image_id, timestamp=timestamp, threshold=threshold)
