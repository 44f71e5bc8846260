"""
Timestamp handling and mask file naming.
"""
import json
from datetime import datetime, timezone

import pytest

from plumerise.utils import (
    compact_timestamp,
    format_timestamp,
    parse_mask_filename,
    parse_timestamp,
    save_json,
    sidecar_timestamp,
)

T0 = datetime(2019, 11, 8, 18, 0, 13, tzinfo=timezone.utc)


@pytest.mark.parametrize(
    "text",
    ["2019-11-08T18:00:13Z", "2019-11-08T18:00:13", "2019-11-08T18:00:13+00:00", "2019-11-08T11:00:13-07:00", " 2019-11-08T18:00:13z "],
)
def test_parse_timestamp(text):
    assert parse_timestamp(text) == T0


def test_parse_timestamp_rejects_garbage():
    with pytest.raises(ValueError):
        parse_timestamp("8 Nov 2019")


def test_timestamp_formats():
    assert format_timestamp(T0) == "2019-11-08T18:00:13Z"
    assert format_timestamp(None) is None
    assert compact_timestamp(T0) == "20191108T180013Z"


def test_mask_filename_with_time():
    assert parse_mask_filename("masks/I1_20191108T180013Z.pgm") == ("I1", T0)


def test_mask_filename_with_underscores_in_id():
    assert parse_mask_filename("cam_a_20191108T180013Z.pbm") == ("cam_a", T0)


def test_mask_filename_without_time():
    assert parse_mask_filename("frame_12.pgm") == ("frame_12", None)


def test_unreadable_sidecar_is_ignored(tmp_path, caplog):
    (tmp_path / "f.json").write_text("{not json")
    assert sidecar_timestamp(tmp_path / "f.pgm") is None
    assert "Ignoring unreadable sidecar" in caplog.text


def test_save_json(tmp_path):
    out = tmp_path / "truth.json"
    assert save_json({"delta_z_m": 240.5}, out)
    assert json.loads(out.read_text()) == {"delta_z_m": 240.5}
    assert not save_json({"x": 1}, tmp_path / "missing" / "truth.json")
