import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfretina.eye_model import (
    AccommodationState,
    EyeInstance,
    PopulationModel,
    accommodation_defocus,
    accommodation_sa_coeff,
    average_eye,
    lca_defocus,
    load_population,
    luminosity_weight,
    sample_eyes,
    sce_apodisation,
    spectrum,
    total_wavefront,
)
from lfretina.zernike import PupilGrid, ZernikeCoefficients, defocus_to_coeff, rescale_pupil


@pytest.fixture(scope="module")
def population():
    return load_population()


def test_builtin_population_declares_pupil_and_ordering(population):
    assert population.pupil_diameter_mm == 6.0
    assert population.mode_count == 15
    np.testing.assert_allclose(population.covariance, population.covariance.T)
    assert np.linalg.eigvalsh(population.covariance).min() > -1e-12


def test_population_rejects_bad_dimensions():
    with pytest.raises(ValueError, match="dimensions"):
        PopulationModel(np.zeros(3), np.eye(4), 6.0, 3)


def test_population_rejects_asymmetric_covariance():
    cov = np.eye(3)
    cov[0, 1] = 0.5
    with pytest.raises(ValueError, match="symmetric"):
        PopulationModel(np.zeros(3), cov, 6.0, 3)


def test_population_rejects_other_ordering(tmp_path):
    doc = {"mean": [0, 0, 0], "covariance": np.eye(3).tolist(), "pupil_diameter_mm": 6, "ordering": "Noll"}
    p = tmp_path / "pop.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="OSA"):
        load_population(p)


def test_zero_covariance_gives_mean_eyes():
    mean = np.linspace(0, 0.1, 15)
    model = PopulationModel(mean, np.zeros((15, 15)), 6.0, 15)
    eyes = sample_eyes(model, 3, seed=1, pupil_diameter_mm=6.0)
    for e in eyes:
        np.testing.assert_allclose(e.aberrations.to_osa(15), mean)


def test_sampling_is_deterministic(population):
    a = sample_eyes(population, 5, seed=42)
    b = sample_eyes(population, 5, seed=42)
    assert [e.aberrations for e in a] == [e.aberrations for e in b]
    c = sample_eyes(population, 5, seed=43)
    assert a[0].aberrations != c[0].aberrations


def test_sampled_eyes_are_rescaled_to_simulation_pupil(population):
    eyes = sample_eyes(population, 2, seed=0, pupil_diameter_mm=3.0)
    assert all(e.aberrations.pupil_diameter_mm == 3.0 for e in eyes)
    assert [e.eye_id for e in eyes] == ["eye00", "eye01"]


def test_large_sample_matches_model(population):
    n = 10000
    eyes = sample_eyes(population, n, seed=7, pupil_diameter_mm=6.0)
    x = np.array([e.aberrations.to_osa(15) for e in eyes])
    sd = population.sd
    err = np.abs(x.mean(axis=0) - population.mean)
    assert np.all(err <= 4 * sd / math.sqrt(n) + 1e-15)
    var = x.var(axis=0, ddof=1)
    live = sd > 0
    np.testing.assert_allclose(var[live], sd[live] ** 2, rtol=0.10)


def test_average_eye_is_rescaled_mean(population):
    eye = average_eye(population, 3.0)
    assert eye.eye_id == "average"
    expected = rescale_pupil(ZernikeCoefficients.from_osa(population.mean, 6.0), 3.0)
    assert eye.aberrations == expected


def test_average_eye_of_zero_mean_model_is_aberration_free():
    model = PopulationModel(np.zeros(15), np.eye(15) * 0.01, 6.0, 15)
    assert not np.any(average_eye(model, 3.0).aberrations.to_osa(15))


def test_sample_mean_converges_to_average_eye(population):
    eyes = sample_eyes(population, 4000, seed=3, pupil_diameter_mm=3.0)
    mean3 = np.mean([e.aberrations.to_osa(15) for e in eyes], axis=0)
    avg = average_eye(population, 3.0).aberrations.to_osa(15)
    np.testing.assert_allclose(mean3, avg, atol=0.01)


@pytest.mark.parametrize(
    "lam,expected", [(550, 0.0), (400, 1.5212), (700, -0.5820)]
)
def test_lca_hand_values(lam, expected):
    assert lca_defocus(lam, 550) == pytest.approx(expected, abs=1e-4)


def test_lca_domain():
    with pytest.raises(ValueError):
        lca_defocus(200.0, 550.0)


@given(st.floats(220, 1000), st.floats(0.5, 50))
def test_lca_strictly_decreasing(lam, dl):
    assert lca_defocus(lam + dl) < lca_defocus(lam)


def test_accommodation_defocus_values():
    assert accommodation_defocus(0.5, 0.5) == 0.0
    assert accommodation_defocus(math.inf, 0.5) == pytest.approx(-2.0)
    assert accommodation_defocus(0.25, 0.5) == pytest.approx(2.0)


def test_accommodation_sa_values():
    assert accommodation_sa_coeff(math.inf, 5.0) == 0.0
    assert accommodation_sa_coeff(0.5, 5.0) == pytest.approx(-0.087, abs=1e-12)
    assert accommodation_sa_coeff(1.0, 5.0) == pytest.approx(-0.0435, abs=1e-12)
    assert accommodation_sa_coeff(1.0, 3.0) == pytest.approx(-0.0435 * 0.6**4, abs=1e-12)


def test_accommodation_sa_relative_reading():
    assert accommodation_sa_coeff(0.5, 5.0, "relative", z_cdp_m=0.5) == 0.0
    assert accommodation_sa_coeff(0.25, 5.0, "relative", z_cdp_m=0.5) == pytest.approx(-0.087)
    with pytest.raises(ValueError):
        accommodation_sa_coeff(0.5, 5.0, "sideways")


def test_accommodation_state_clamp():
    assert AccommodationState.from_dioptres(0.0).z_acc_m == math.inf
    with pytest.raises(ValueError):
        AccommodationState.from_dioptres(-0.2)
    with pytest.raises(ValueError):
        AccommodationState(-1.0)


def test_sce_apodisation():
    grid = PupilGrid(64, 0.05, 3.0)
    assert np.all(sce_apodisation(grid, 0.0) == 1.0)
    a = sce_apodisation(grid, 0.05)
    assert a[32, 32] == 1.0
    p, q = grid.mesh()
    r2 = p * p + q * q
    idx = np.argmin(np.abs(r2 - 2.25))
    assert a.flat[idx] == pytest.approx(10 ** (-0.05 * r2.flat[idx]))
    assert 10 ** (-0.05 * 2.25) == pytest.approx(0.7718, abs=1e-4)
    np.testing.assert_allclose(a, a.T)
    with pytest.raises(ValueError):
        sce_apodisation(grid, -1)


def test_eye_instance_validation():
    with pytest.raises(ValueError):
        EyeInstance(ZernikeCoefficients.zero(3.0), sce_rho=-0.1)
    with pytest.raises(ValueError):
        EyeInstance(ZernikeCoefficients.zero(3.0), z_eye_m=0)
    eye = EyeInstance(ZernikeCoefficients.zero(3.0), sce_rho={400: 0.06, 700: 0.04})
    assert eye.rho_at(550) == pytest.approx(0.05)


def _dl_eye():
    return EyeInstance(ZernikeCoefficients.zero(3.0))


def test_total_wavefront_zero_without_sa():
    acc = AccommodationState(0.5)
    tw = total_wavefront(_dl_eye(), 550, acc, 0.5, 3.0, include_accommodation_sa=False)
    assert not np.any(tw.to_osa(15))


def test_total_wavefront_blue_defocus():
    acc = AccommodationState(0.5)
    tw = total_wavefront(_dl_eye(), 400, acc, 0.5, 3.0, include_accommodation_sa=False)
    assert tw.get(2, 0) == pytest.approx(0.32476 * 1.5212, abs=2e-4)
    assert tw.get(2, 0) == pytest.approx(0.4941, abs=1e-4)


def test_total_wavefront_sa_term_and_induced_defocus():
    acc = AccommodationState(0.5)
    s = 3.0 / 5.0
    c5 = -0.087
    tw = total_wavefront(_dl_eye(), 550, acc, 0.5, 3.0, sa_induced_defocus=True)
    assert tw.get(4, 0) == pytest.approx(s**4 * c5, abs=1e-12)
    assert tw.get(2, 0) == pytest.approx(math.sqrt(15) * (s**4 - s**2) * c5, abs=1e-12)
    only_c40 = total_wavefront(_dl_eye(), 550, acc, 0.5, 3.0)
    assert only_c40.get(2, 0) == 0.0
    assert only_c40.get(4, 0) == pytest.approx(accommodation_sa_coeff(0.5, 3.0))


def test_total_wavefront_induced_terms_match_rescale():
    acc = AccommodationState(0.4)
    tw = total_wavefront(_dl_eye(), 550, acc, 0.4, 3.0, sa_induced_defocus=True)
    c5 = accommodation_sa_coeff(0.4, 5.0)
    ref = rescale_pupil(ZernikeCoefficients(((4, 0, c5),), 5.0), 3.0)
    assert tw.get(2, 0) == pytest.approx(ref.get(2, 0), abs=1e-12)
    assert tw.get(4, 0) == pytest.approx(ref.get(4, 0), abs=1e-12)


def test_total_wavefront_keeps_other_modes(population):
    eye = average_eye(population, 3.0)
    tw = total_wavefront(eye, 470, AccommodationState(0.3), 0.5, 3.0)
    a, b = eye.aberrations.to_osa(15), tw.to_osa(15)
    others = [j for j in range(15) if j not in (4, 12)]
    np.testing.assert_array_equal(a[others], b[others])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 6.0), st.floats(0.01, 2.0))
def test_total_wavefront_defocus_linear_in_vergence(v, dv):
    eye = _dl_eye()
    a = total_wavefront(eye, 550, AccommodationState.from_dioptres(v), 0.5, 3.0, include_accommodation_sa=False)
    b = total_wavefront(eye, 550, AccommodationState.from_dioptres(v + dv), 0.5, 3.0, include_accommodation_sa=False)
    assert b.get(2, 0) - a.get(2, 0) == pytest.approx(defocus_to_coeff(dv, 3.0), abs=1e-12)


def test_total_wavefront_pupil_mismatch():
    with pytest.raises(ValueError):
        total_wavefront(EyeInstance(ZernikeCoefficients.zero(6.0)), 550, AccommodationState(0.5), 0.5, 3.0)


def test_luminosity_table():
    peak = max(luminosity_weight(x) for x in range(400, 701, 10))
    assert luminosity_weight(555) >= 0.99 * peak
    assert luminosity_weight(400) <= 0.01
    assert luminosity_weight(560) == pytest.approx(0.9963)
    with pytest.raises(ValueError):
        luminosity_weight(390)
    with pytest.raises(ValueError):
        luminosity_weight(710)


def test_spectrum_helper():
    assert spectrum(400, 700, 10)[:3] == [400.0, 410.0, 420.0]
    assert len(spectrum(400, 700, 10)) == 31
    with pytest.raises(ValueError):
        spectrum(400, 700, 7)
