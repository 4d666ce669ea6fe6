import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfretina.zernike import (
    PupilGrid,
    ZernikeCoefficients,
    defocus_to_coeff,
    eval_polynomial,
    osa_index,
    osa_to_nm,
    rescale_pupil,
    wavefront_map,
)


def _valid_nm(max_n=8):
    return st.integers(0, max_n).flatmap(
        lambda n: st.tuples(st.just(n), st.sampled_from(list(range(-n, n + 1, 2))))
    )


@given(st.integers(0, 200))
def test_osa_index_roundtrip(j):
    assert osa_index(*osa_to_nm(j)) == j


def test_osa_ordering_first_modes():
    expected = [(0, 0), (1, -1), (1, 1), (2, -2), (2, 0), (2, 2), (3, -3), (3, -1), (3, 1), (3, 3)]
    assert [osa_to_nm(j) for j in range(10)] == expected
    assert osa_index(4, 0) == 12


@pytest.mark.parametrize(
    "n,m,rho,theta,expected",
    [
        (0, 0, 0.37, 1.1, 1.0),
        (2, 0, 0.0, 0.4, -math.sqrt(3)),
        (1, 1, 1.0, 0.0, 2.0),
        (4, 0, 1.0, 0.0, math.sqrt(5)),
        (2, -2, 1.0, math.pi / 4, math.sqrt(6)),
    ],
)
def test_eval_polynomial_hand_values(n, m, rho, theta, expected):
    assert eval_polynomial(n, m, rho, theta) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n,m", [(1, 0), (2, 1), (-1, 1), (2, 4)])
def test_eval_polynomial_rejects_invalid_indices(n, m):
    with pytest.raises(ValueError):
        eval_polynomial(n, m, 0.5, 0.0)


def test_eval_polynomial_rejects_radius_outside_disc():
    with pytest.raises(ValueError):
        eval_polynomial(2, 0, 1.01, 0.0)


def test_orthonormality_on_dense_grid():
    # midpoint rule on a 512 x 512 Cartesian grid over the unit disc
    n = 512
    c = (np.arange(n) + 0.5) / n * 2 - 1
    x, y = np.meshgrid(c, c)
    r = np.hypot(x, y)
    inside = r <= 1
    rho, theta = r[inside], np.arctan2(y, x)[inside]
    area = (2 / n) ** 2
    modes = [osa_to_nm(j) for j in range(15)]
    z = np.array([eval_polynomial(nn, mm, rho, theta) for nn, mm in modes])
    gram = z @ z.T * area / math.pi
    assert np.max(np.abs(gram - np.eye(len(modes)))) < 1e-3


def test_coefficients_reject_duplicates_and_bad_pupil():
    with pytest.raises(ValueError):
        ZernikeCoefficients(((2, 0, 0.1), (2, 0, 0.2)), 3.0)
    with pytest.raises(ValueError):
        ZernikeCoefficients(((2, 1, 0.1),), 3.0)
    with pytest.raises(ValueError):
        ZernikeCoefficients((), 0.0)


def test_coefficients_sorted_and_osa_vector():
    zc = ZernikeCoefficients(((4, 0, 0.5), (2, 0, 0.1), (1, -1, 0.2)), 6.0)
    assert [osa_index(n, m) for n, m, _ in zc.coeffs] == [1, 4, 12]
    vec = zc.to_osa(15)
    assert vec[4] == 0.1 and vec[12] == 0.5 and vec[1] == 0.2
    assert ZernikeCoefficients.from_osa(vec, 6.0).get(4, 0) == 0.5


def test_adding_coefficients_over_different_pupils_fails():
    with pytest.raises(ValueError):
        ZernikeCoefficients.zero(3.0) + ZernikeCoefficients.zero(6.0)


def test_wavefront_map_zero_and_unit_rms():
    grid = PupilGrid.covering(256, 3.0)
    assert not wavefront_map(ZernikeCoefficients.zero(3.0), grid).any()
    rho, _, inside = grid.polar()
    w = wavefront_map(ZernikeCoefficients(((2, 0, 1.0),), 3.0), grid)
    assert not w[~inside].any()
    assert math.sqrt(np.mean(w[inside] ** 2)) == pytest.approx(1.0, abs=5e-3)


def test_wavefront_map_drops_tilt():
    grid = PupilGrid.covering(64, 3.0)
    tilt = ZernikeCoefficients(((1, 1, 1.0), (0, 0, 2.0)), 3.0)
    assert not wavefront_map(tilt, grid).any()
    assert wavefront_map(tilt, grid, drop_tilt=False).any()


def test_wavefront_map_pupil_mismatch():
    with pytest.raises(ValueError, match="rescale"):
        wavefront_map(ZernikeCoefficients.zero(6.0), PupilGrid.covering(32, 3.0))


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=15, max_size=15),
    st.lists(st.floats(-1, 1), min_size=15, max_size=15),
)
def test_wavefront_map_is_linear(a, b):
    grid = PupilGrid.covering(48, 4.0)
    za, zb = ZernikeCoefficients.from_osa(a, 4.0), ZernikeCoefficients.from_osa(b, 4.0)
    np.testing.assert_allclose(
        wavefront_map(za + zb, grid), wavefront_map(za, grid) + wavefront_map(zb, grid), atol=1e-12
    )


@pytest.mark.parametrize("D,d,expected", [(0, 3, 0.0), (1, 3, 0.32476), (1, 5, 0.90211)])
def test_defocus_to_coeff_hand_values(D, d, expected):
    assert defocus_to_coeff(D, d) == pytest.approx(expected, abs=1e-5)


@given(st.floats(-10, 10), st.floats(0.5, 8))
def test_defocus_to_coeff_linear_in_D_quadratic_in_d(D, d):
    assert defocus_to_coeff(2 * D, d) == pytest.approx(2 * defocus_to_coeff(D, d), abs=1e-12)
    assert defocus_to_coeff(D, 2 * d) == pytest.approx(4 * defocus_to_coeff(D, d), abs=1e-12)


def test_rescale_identity():
    zc = ZernikeCoefficients.from_osa(np.linspace(-0.2, 0.3, 15), 6.0)
    assert rescale_pupil(zc, 6.0).coeffs == zc.coeffs


def test_rescale_pure_defocus():
    out = rescale_pupil(ZernikeCoefficients(((2, 0, 1.0),), 6.0), 3.0)
    assert out.get(2, 0) == pytest.approx(0.25, abs=1e-12)
    others = [v for n, m, v in out.coeffs if (n, m) not in ((2, 0), (0, 0))]
    assert max(abs(v) for v in others) < 1e-12


def test_rescale_pure_spherical_closed_form():
    # sqrt5(6r^4-6r^2+1) at r = s*rho re-expanded: c40' = s^4, c20' = sqrt15 (s^4 - s^2)
    s = 0.5
    out = rescale_pupil(ZernikeCoefficients(((4, 0, 1.0),), 6.0), 3.0)
    assert out.get(4, 0) == pytest.approx(s**4, abs=1e-12)
    assert out.get(2, 0) == pytest.approx(math.sqrt(15) * (s**4 - s**2), abs=1e-12)
    assert out.get(2, 0) == pytest.approx(-0.7262, abs=1e-4)


def test_rescale_refuses_enlargement():
    with pytest.raises(ValueError):
        rescale_pupil(ZernikeCoefficients.zero(3.0), 6.0)


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(-0.5, 0.5), min_size=15, max_size=15),
    st.floats(0.3, 1.0),
    st.floats(0.3, 1.0),
)
def test_rescale_composes(values, f1, f2):
    zc = ZernikeCoefficients.from_osa(values, 6.0)
    d1 = 6.0 * f1
    d2 = d1 * f2
    twice = rescale_pupil(rescale_pupil(zc, d1), d2).to_osa(15)
    direct = rescale_pupil(zc, d2).to_osa(15)
    np.testing.assert_allclose(twice, direct, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=15, max_size=15), st.floats(0.2, 1.0))
def test_rescale_preserves_wavefront_pointwise(values, f):
    zc = ZernikeCoefficients.from_osa(values, 6.0)
    small = rescale_pupil(zc, 6.0 * f)
    rng = np.random.default_rng(0)
    rho = np.sqrt(rng.random(50))
    theta = rng.random(50) * 2 * np.pi
    big = sum(v * eval_polynomial(n, m, rho * f, theta) for n, m, v in zc.coeffs)
    new = sum(v * eval_polynomial(n, m, rho, theta) for n, m, v in small.coeffs)
    np.testing.assert_allclose(new, big, atol=1e-10)


@given(_valid_nm())
def test_valid_modes_evaluate_within_norm_bound(nm):
    n, m = nm
    rho = np.linspace(0, 1, 11)
    vals = eval_polynomial(n, m, rho, 0.3 * np.ones_like(rho))
    bound = math.sqrt(2 * (n + 1))
    assert np.all(np.abs(vals) <= bound + 1e-9)
