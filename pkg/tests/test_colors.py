import math

import numpy as np
import pytest

from colordesc import (
    ColorHSL,
    ColorHSV,
    canonical_hue,
    hsl_to_hsv,
    hsl_to_hsv_array,
    hsv_to_hsl,
    hsv_to_hsl_array,
)


def test_canonical_hue_wraps_into_range():
    assert canonical_hue(0.0) == 0.0
    assert canonical_hue(360.0) == 0.0
    assert canonical_hue(725.0) == pytest.approx(5.0)
    assert canonical_hue(-30.0) == pytest.approx(330.0)
    # tiny negative values must not round up to the modulus itself
    assert 0.0 <= canonical_hue(-1e-13) < 360.0


def test_canonical_hue_rejects_non_finite():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(ValueError):
            canonical_hue(bad)


def test_color_types_validate_and_canonicalize():
    c = ColorHSV(400.0, 50.0, 75.0)
    assert c.h == pytest.approx(40.0)
    with pytest.raises(ValueError):
        ColorHSV(10.0, -1.0, 50.0)
    with pytest.raises(ValueError):
        ColorHSV(10.0, 40.0, 100.5)
    with pytest.raises(ValueError):
        ColorHSL(10.0, 40.0, math.nan)


@pytest.mark.parametrize("hsl,expected_hsv", [
    ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),        # black
    ((0.0, 0.0, 100.0), (0.0, 0.0, 100.0)),    # white
    ((120.0, 100.0, 50.0), (120.0, 100.0, 100.0)),  # pure green
    ((240.0, 100.0, 25.0), (240.0, 100.0, 50.0)),
    ((0.0, 0.0, 40.0), (0.0, 0.0, 40.0)),      # gray keeps value=lightness
])
def test_hsl_to_hsv_known_points(hsl, expected_hsv):
    got = hsl_to_hsv(ColorHSL(*hsl))
    assert got.as_tuple() == pytest.approx(expected_hsv, abs=1e-9)


def test_hsl_hsv_roundtrip_dense():
    rng = np.random.default_rng(3)
    hsl = np.column_stack([
        rng.uniform(0, 360, 500),
        rng.uniform(0, 100, 500),
        rng.uniform(0, 100, 500),
    ])
    back = hsv_to_hsl_array(hsl_to_hsv_array(hsl))
    # saturation is undefined at l in {0, 1}; exclude the degenerate rows
    inner = (hsl[:, 2] > 1e-9) & (hsl[:, 2] < 100.0 - 1e-9)
    np.testing.assert_allclose(back[inner], hsl[inner], atol=1e-9)


def test_scalar_and_array_conversions_agree():
    rng = np.random.default_rng(9)
    hsl = np.column_stack([
        rng.uniform(0, 360, 50),
        rng.uniform(0, 100, 50),
        rng.uniform(0, 100, 50),
    ])
    arr = hsl_to_hsv_array(hsl)
    for i in range(len(hsl)):
        c = hsl_to_hsv(ColorHSL(*hsl[i]))
        assert c.as_tuple() == pytest.approx(tuple(arr[i]), abs=1e-12)

    hsv = arr
    arr_back = hsv_to_hsl_array(hsv)
    for i in range(len(hsv)):
        c = hsv_to_hsl(ColorHSV(*hsv[i]))
        assert c.as_tuple() == pytest.approx(tuple(arr_back[i]), abs=1e-12)


def test_hue_is_preserved_by_conversion():
    for h in (0.0, 123.4, 359.9):
        assert hsl_to_hsv(ColorHSL(h, 60.0, 70.0)).h == pytest.approx(h)
        assert hsv_to_hsl(ColorHSV(h, 60.0, 70.0)).h == pytest.approx(h)
