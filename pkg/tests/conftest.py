import numpy as np
import pytest

from lfretina.eye_model import EyeInstance, average_eye, load_population
from lfretina.optics import SimulationOptions
from lfretina.zernike import ZernikeCoefficients

Z_EYE = 16.67e-3
NO_SA = SimulationOptions(include_accommodation_sa=False)


@pytest.fixture(scope="session")
def population():
    return load_population()


@pytest.fixture(scope="session")
def avg_eye(population):
    return average_eye(population, 3.0)


@pytest.fixture
def dl_eye():
    return EyeInstance(ZernikeCoefficients.zero(3.0), sce_rho=0.0, eye_id="dl")


def peak_positions(img, min_frac=0.2):
    """Local maxima (row, col) above ``min_frac`` of the global peak, 3x3 neighbourhood."""
    core = img[1:-1, 1:-1]
    neigh = np.stack(
        [img[1 + dy : img.shape[0] - 1 + dy, 1 + dx : img.shape[1] - 1 + dx]
         for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    )
    mask = (core > neigh.max(axis=0)) & (core >= min_frac * img.max())
    rows, cols = np.nonzero(mask)
    return [(r + 1, c + 1) for r, c in zip(rows, cols)]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
