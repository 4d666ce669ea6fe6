import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfretina.display import (
    DisplayConfig,
    dioptres_to_metres,
    epsf_shift,
    subaperture_interval,
    subaperture_layout,
)


def test_display_config_validation():
    with pytest.raises(ValueError):
        DisplayConfig(z_cdp_D=0)
    with pytest.raises(ValueError):
        DisplayConfig(pupil_diameter_mm=-1)
    with pytest.raises(ValueError):
        DisplayConfig(density=0)
    with pytest.raises(ValueError, match="beyond infinity"):
        DisplayConfig(z_cdp_D=2.0, rendered_depths_relD=(-2.5,))
    cfg = DisplayConfig(2.0, 3, 3.0, (-2, 0, 2))
    assert cfg.z_cdp_m == 0.5
    assert cfg.rendered_abs_D(-2.0) == 0.0
    assert cfg.with_density(4).density == 4


def test_dioptres_to_metres():
    assert dioptres_to_metres(0) == math.inf
    assert dioptres_to_metres(2) == 0.5
    with pytest.raises(ValueError):
        dioptres_to_metres(-1)


def test_layout_open_pupil():
    lay = subaperture_layout(1, 3.0)
    assert lay.centers == ((0.0, 0.0),) and lay.diameter_mm == 3.0


def test_layout_3x3():
    lay = subaperture_layout(3, 3.0)
    assert lay.count == 9 and lay.diameter_mm == pytest.approx(1.0)
    got = sorted((round(p, 12), round(q, 12)) for p, q in lay.centers)
    want = sorted((p, q) for p in (-1.0, 0.0, 1.0) for q in (-1.0, 0.0, 1.0))
    assert got == want


def test_layout_2x2():
    lay = subaperture_layout(2, 3.0)
    assert lay.diameter_mm == 1.5
    assert sorted(lay.centers) == sorted((p, q) for p in (-0.75, 0.75) for q in (-0.75, 0.75))


@given(st.integers(1, 6), st.floats(1.0, 8.0))
def test_layout_symmetry_and_tangency(k, d):
    lay = subaperture_layout(k, d)
    c = lay.centers_array
    key = lambda a: sorted(map(tuple, np.round(a, 9)))
    assert key(-c) == key(c)
    assert key(c[:, ::-1]) == key(c)
    if k > 1:
        dist = np.hypot(*(c[:, None, :] - c[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(dist, np.inf)
        np.testing.assert_allclose(dist.min(axis=1), lay.diameter_mm, atol=1e-9)


def test_corner_circles_extend_past_pupil_for_k2():
    # tangent k x k packing does not fit inside the disc; the pupil clips corners
    lay = subaperture_layout(2, 3.0)
    reach = np.hypot(*lay.centers_array.T).max() + lay.diameter_mm / 2
    assert reach > 1.5


def test_subaperture_interval():
    assert subaperture_interval((0.5, 0.5), 0.5, 0.25) == pytest.approx((1.0, 1.0))
    dp, dq = subaperture_interval((0.3, 0.3), 0.4, 0.9)
    assert dp == dq
    assert subaperture_interval((1.0, 1.0), 0.5, 1e9)[0] < 1e-8
    with pytest.raises(ValueError, match="degenerate"):
        subaperture_interval((1, 1), 0.5, 0.5)


def test_epsf_shift_hand_values():
    assert epsf_shift(0.5, 0.5, 16.67e-3, (0.75, 0.75)) == (0.0, 0.0)
    dx, dy = epsf_shift(1 / 3.0, 0.5, 16.67e-3, (0.75, 0.0))
    assert dx == pytest.approx(12.5e-6, abs=1e-8) and dy == 0.0
    assert epsf_shift(0.2, 0.5, 16.67e-3, (0.0, 0.0)) == (0.0, 0.0)
    # image at infinity with CDP at 2 D
    assert epsf_shift(math.inf, 0.5, 16.67e-3, (1.0, 0.0))[0] == pytest.approx(-2 * 16.67e-3 * 1e-3)


@given(st.floats(0.1, 6), st.floats(0.2, 4), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 3))
def test_epsf_shift_linear(vr, vc, p, q, a):
    z = 16.67e-3
    sx, sy = epsf_shift(1 / vr, 1 / vc, z, (p, q))
    tx, ty = epsf_shift(1 / vr, 1 / vc, z, (a * p, a * q))
    assert tx == pytest.approx(a * sx, abs=1e-15) and ty == pytest.approx(a * sy, abs=1e-15)
    assert sx == pytest.approx(z * (vr - vc) * p * 1e-3, abs=1e-15)
