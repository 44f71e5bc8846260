"""
Component isolation, centerline extraction, asymptote fit and point R.
"""
import math

import numpy as np
import pytest

from plumerise.errors import EmptyPlume, FitDiverged, NotLeveled, VerticalPlume
from plumerise.geometry import ImagePoint, image_to_raster
from plumerise.mask_analysis import (
    AsymptoteFit,
    CenterlineProfile,
    PlumeMask,
    attached_component,
    centerline,
    fit_asymptote,
    fit_saturation,
    profile_to_csv,
    select_R,
    vertical_point,
)
from plumerise.rpn_loss import PlumeDirection


def _mask(shape, *regions):
    pixels = np.zeros(shape, dtype=bool)
    for rows, cols in regions:
        pixels[rows, cols] = True
    return PlumeMask(pixels=pixels)


def _saturating_profile(n=400, stack_col=10, stack_row=450, a=100.0, b=100.0, c=0.02):
    x = np.arange(n, dtype=float)
    rise = a - b * np.exp(-c * x)
    return CenterlineProfile(
        cols=stack_col + x,
        center_row=stack_row - rise,
        upper_row=stack_row - rise,
        lower_row=stack_row - rise,
        stack_col=stack_col,
        stack_row=stack_row,
        direction=PlumeDirection.RIGHT,
        width_px=500,
        height_px=500,
    )


EXACT_FIT = AsymptoteFit(a=100.0, b=100.0, c=0.02, rmse_px=0.0, converged=True)


# ------------------------------------------------------------------ Plume mask
def test_mask_rejects_non_raster():
    with pytest.raises(ValueError):
        PlumeMask(pixels=np.zeros(5, dtype=bool))
    with pytest.raises(ValueError):
        PlumeMask(pixels=np.zeros((0, 3), dtype=bool))


def test_mask_pixels_are_read_only():
    mask = PlumeMask(pixels=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        mask.pixels[0, 0] = True


# ------------------------------------------------------------------ Attached component
def test_blob_touching_stack_is_kept():
    mask = _mask((20, 20), (slice(10, 15), slice(5, 9)), (slice(1, 4), slice(14, 18)))
    kept = attached_component(mask, (6, 12))
    assert kept.pixels.sum() == 20
    assert kept.pixels[12, 6]
    assert not kept.pixels[2, 15]


def test_empty_mask_stays_empty():
    kept = attached_component(PlumeMask(pixels=np.zeros((5, 5), dtype=bool)), (2, 2))
    assert kept.is_empty


def test_nearest_blob_is_kept_when_stack_is_outside():
    mask = _mask((60, 60), (slice(10, 13), slice(13, 16)), (slice(40, 43), slice(40, 43)))
    kept = attached_component(mask, (10, 10))
    # brute-force distance scan
    rows, cols = np.nonzero(mask.pixels)
    nearest = np.argmin((rows - 10) ** 2 + (cols - 10) ** 2)
    assert kept.pixels[rows[nearest], cols[nearest]]
    assert kept.pixels.sum() == 9
    assert not kept.pixels[41, 41]


def test_diagonal_neighbours_are_connected():
    mask = _mask((5, 5), ([0, 1, 2], [0, 1, 2]))
    assert attached_component(mask, (0, 0)).pixels.sum() == 3


def test_attached_component_is_idempotent():
    rng = np.random.default_rng(9)
    mask = PlumeMask(pixels=rng.random((30, 30)) < 0.3)
    once = attached_component(mask, (15, 15))
    twice = attached_component(once, (15, 15))
    assert np.array_equal(once.pixels, twice.pixels)


def test_stack_outside_mask_rejected():
    with pytest.raises(ValueError):
        attached_component(PlumeMask(pixels=np.ones((3, 3))), (5, 1))


# ------------------------------------------------------------------ Centerline
def test_rectangle_centerline():
    mask = _mask((10, 10), (slice(4, 6), slice(2, 8)))
    profile = centerline(mask, (2, 5))
    assert profile.direction == PlumeDirection.RIGHT
    assert profile.cols.tolist() == [2, 3, 4, 5, 6, 7]
    assert np.all(profile.center_row == 4.5)
    assert np.all(profile.upper_row == 4)
    assert np.all(profile.lower_row == 5)
    assert profile.downwind_px().tolist() == [0, 1, 2, 3, 4, 5]


def test_single_pixel_column():
    mask = _mask((5, 5), ([3], [1]))
    profile = centerline(mask, (1, 3))
    assert profile.center_row.tolist() == profile.upper_row.tolist() == profile.lower_row.tolist() == [3.0]


def test_centerline_matches_pixel_loop():
    rng = np.random.default_rng(17)
    pixels = rng.random((25, 40)) < 0.35
    profile = centerline(PlumeMask(pixels=pixels), (20, 24))
    expected = {}
    for col in range(pixels.shape[1]):
        rows = [row for row in range(pixels.shape[0]) if pixels[row, col]]
        if rows:
            expected[col] = (sum(rows) / len(rows), min(rows), max(rows))
    assert sorted(profile.cols.tolist()) == sorted(expected)
    for col, center, upper, lower in zip(profile.cols, profile.center_row, profile.upper_row, profile.lower_row):
        assert (center, upper, lower) == pytest.approx(expected[int(col)])


def test_left_plume_is_ordered_away_from_stack():
    mask = _mask((10, 20), (slice(2, 4), slice(3, 15)))
    profile = centerline(mask, (14, 3))
    assert profile.direction == PlumeDirection.LEFT
    assert profile.cols.tolist() == list(range(14, 2, -1))
    assert profile.downwind_px().tolist() == list(range(12))


def test_vertical_flip_mirrors_centerline():
    rng = np.random.default_rng(23)
    pixels = np.zeros((30, 40), dtype=bool)
    pixels[5:20, 10:35] = rng.random((15, 25)) < 0.6
    H = pixels.shape[0]
    profile = centerline(PlumeMask(pixels=pixels), (10, 19))
    flipped = centerline(PlumeMask(pixels=pixels[::-1]), (10, H - 1 - 19))
    assert np.array_equal(profile.cols, flipped.cols)
    np.testing.assert_allclose(flipped.center_row, H - 1 - profile.center_row)
    np.testing.assert_allclose(flipped.upper_row, H - 1 - profile.lower_row)


def test_quadratic_centerline_stays_inside_plume():
    rng = np.random.default_rng(29)
    pixels = np.zeros((40, 60), dtype=bool)
    for col in range(5, 55):
        top = 30 - int(col / 3) + rng.integers(-1, 2)
        pixels[top:top + 4, col] = True
    profile = centerline(PlumeMask(pixels=pixels), (5, 31), mode="quadratic")
    assert np.all(profile.center_row >= profile.upper_row)
    assert np.all(profile.center_row <= profile.lower_row)


def test_empty_plume():
    with pytest.raises(EmptyPlume):
        centerline(PlumeMask(pixels=np.zeros((4, 4), dtype=bool)), (1, 1))


def test_unknown_centerline_mode():
    with pytest.raises(ValueError):
        centerline(PlumeMask(pixels=np.ones((4, 4))), (1, 1), mode="median")


# ------------------------------------------------------------------ Asymptote fit
def test_fit_recovers_exact_curve():
    x = np.arange(300, dtype=float)
    fit = fit_saturation(x, 100 * (1 - np.exp(-x / 50)))
    assert fit.converged
    assert fit.a == pytest.approx(100, abs=1e-6)
    assert fit.b == pytest.approx(100, abs=1e-6)
    assert fit.c == pytest.approx(0.02, abs=1e-6)
    assert fit.rmse_px < 1e-6


def test_fit_of_constant_profile():
    x = np.arange(100, dtype=float)
    fit = fit_saturation(x, np.full_like(x, 5.0))
    assert fit.a == pytest.approx(5.0, abs=1e-9)
    assert abs(fit.b) < 1e-9
    assert not fit.c_constrained


def test_fit_under_bounded_noise():
    rng = np.random.default_rng(31)
    x = np.arange(300, dtype=float)
    z = 100 * (1 - np.exp(-x / 50)) + rng.uniform(-1, 1, x.size)
    fit = fit_saturation(x, z)
    assert fit.converged
    assert fit.rmse_px <= 1.0
    assert fit.a == pytest.approx(100, abs=1.0)


def test_fit_needs_enough_columns(caplog):
    fit = fit_asymptote(_saturating_profile(n=5), min_columns=8)
    assert not fit.converged
    assert math.isnan(fit.a)
    assert "need 8" in caplog.text


def test_fit_asymptote_uses_rise_above_stack():
    fit = fit_asymptote(_saturating_profile())
    assert fit.a == pytest.approx(100, abs=1e-6)
    assert fit.c == pytest.approx(0.02, abs=1e-6)


# ------------------------------------------------------------------ Point R
def test_select_R_worked_example():
    profile = _saturating_profile()
    point = select_R(EXACT_FIT, profile, slope_tol=0.02)
    assert not point.truncated
    assert point.downwind_px == pytest.approx(50 * math.log(100))
    assert point.downwind_px == pytest.approx(230.3, abs=0.05)
    assert point.rise_px == pytest.approx(99.0)
    col, row = image_to_raster(ImagePoint(point.x_R_px, point.z_R_px), 500, 500)
    assert col == pytest.approx(10 + point.downwind_px)
    assert row == pytest.approx(450 - 99.0)


def test_level_profile_puts_R_at_stack():
    flat = AsymptoteFit(a=0.0, b=0.0, c=0.02, rmse_px=0.0, converged=True)
    assert select_R(flat, _saturating_profile()).downwind_px == 0.0


def test_R_moves_downwind_as_tolerance_tightens():
    profile = _saturating_profile()
    distances = [select_R(EXACT_FIT, profile, tol).downwind_px for tol in (0.1, 0.05, 0.02, 0.01, 0.005)]
    assert distances == sorted(distances)


def test_R_truncated_at_end_of_profile(caplog):
    point = select_R(EXACT_FIT, _saturating_profile(), slope_tol=1e-4)
    assert point.truncated
    assert point.downwind_px == 399
    assert "truncated" in caplog.text


def test_profile_far_from_level():
    with pytest.raises(NotLeveled):
        select_R(EXACT_FIT, _saturating_profile(), slope_tol=1e-6)


def test_vertical_profile_has_no_R():
    profile = _saturating_profile()
    vertical = CenterlineProfile(
        cols=profile.cols, center_row=profile.center_row, upper_row=profile.upper_row,
        lower_row=profile.lower_row, stack_col=profile.stack_col, stack_row=profile.stack_row,
        direction=PlumeDirection.VERTICAL, width_px=500, height_px=500,
    )
    with pytest.raises(VerticalPlume):
        select_R(EXACT_FIT, vertical)


def test_unconverged_fit_is_rejected():
    bad = AsymptoteFit(a=math.nan, b=math.nan, c=math.nan, rmse_px=math.nan, converged=False)
    with pytest.raises(FitDiverged):
        select_R(bad, _saturating_profile())


def test_vertical_point_is_plume_top():
    mask = _mask((20, 10), (slice(3, 15), slice(4, 7)))
    profile = centerline(mask, (5, 14))
    assert profile.direction == PlumeDirection.VERTICAL
    point = vertical_point(profile)
    assert point.rise_px == 11
    col, row = image_to_raster(ImagePoint(point.x_R_px, point.z_R_px), 10, 20)
    assert (col, row) == pytest.approx((5, 3))


def test_profile_csv():
    mask = _mask((10, 10), (slice(4, 6), slice(2, 4)))
    text = profile_to_csv(centerline(mask, (2, 5)))
    assert text.splitlines() == ["col,center,upper,lower", "2,4.500,4,5", "3,4.500,4,5"]
