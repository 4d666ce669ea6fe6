"""Virtual eyes: population sampling, chromatic and accommodative aberrations.

Distances are in metres, wavelengths in nanometres, Zernike coefficients in
micrometres and vergences in dioptres.  A vergence of 0 D means infinity.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .zernike import PupilGrid, ZernikeCoefficients, defocus_to_coeff, rescale_pupil

__all__ = [
    "PopulationModel",
    "EyeInstance",
    "AccommodationState",
    "load_population",
    "sample_eyes",
    "average_eye",
    "lca_defocus",
    "accommodation_defocus",
    "accommodation_sa_coeff",
    "sce_apodisation",
    "total_wavefront",
    "luminosity_weight",
    "LCA_A",
    "LCA_C",
    "DEFAULT_SCE_RHO",
    "DEFAULT_Z_EYE_M",
]

#: Chromatic-eye constants (dioptre-nm and nm).
LCA_A = 633.26
LCA_C = 214.10
#: Change of primary spherical aberration per dioptre of accommodation, 5-mm pupil.
SA_SLOPE_UM_PER_D = -0.0435
SA_REFERENCE_PUPIL_MM = 5.0
DEFAULT_SCE_RHO = 0.05
DEFAULT_Z_EYE_M = 16.67e-3

_DATA = resources.files("lfretina") / "data"
BUILTIN_POPULATION = "population_6mm.json"


@dataclass(frozen=True)
class PopulationModel:
    mean: np.ndarray
    covariance: np.ndarray
    pupil_diameter_mm: float
    mode_count: int
    name: str = ""

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.shape != (self.mode_count,) or cov.shape != (self.mode_count, self.mode_count):
            raise ValueError(
                f"population dimensions disagree: mode_count={self.mode_count}, "
                f"mean {mean.shape}, covariance {cov.shape}"
            )
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.abs(cov).max()):
            raise ValueError("covariance is not positive semidefinite")
        if not self.pupil_diameter_mm > 0:
            raise ValueError("pupil_diameter_mm must be > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))


def load_population(path: str | Path | None = None) -> PopulationModel:
    """Load a population JSON asset; ``None`` selects the bundled one."""
    if path is None or str(path) == "builtin":
        text = (_DATA / BUILTIN_POPULATION).read_text()
        name = BUILTIN_POPULATION
    else:
        text = Path(path).read_text()
        name = str(path)
    doc = json.loads(text)
    if doc.get("ordering", "OSA") != "OSA":
        raise ValueError("only OSA/ANSI ordering is supported")
    mean = doc["mean"]
    return PopulationModel(
        mean=np.asarray(mean, dtype=float),
        covariance=np.asarray(doc["covariance"], dtype=float),
        pupil_diameter_mm=float(doc["pupil_diameter_mm"]),
        mode_count=int(doc.get("mode_count", len(mean))),
        name=doc.get("name", name),
    )


@dataclass(frozen=True)
class EyeInstance:
    """One virtual eye.

    ``sce_rho`` is either a single Stiles-Crawford peakedness (mm^-2) or a
    mapping from wavelength (nm) to peakedness, linearly interpolated.
    """

    aberrations: ZernikeCoefficients
    sce_rho: float | Mapping[float, float] = DEFAULT_SCE_RHO
    z_eye_m: float = DEFAULT_Z_EYE_M
    eye_id: str = "eye"

    def __post_init__(self):
        if not self.z_eye_m > 0:
            raise ValueError("z_eye_m must be > 0")
        vals = self.sce_rho.values() if isinstance(self.sce_rho, Mapping) else [self.sce_rho]
        if any(v < 0 for v in vals):
            raise ValueError("sce_rho must be >= 0")

    def rho_at(self, lambda_nm: float) -> float:
        if not isinstance(self.sce_rho, Mapping):
            return float(self.sce_rho)
        nm = sorted(self.sce_rho)
        return float(np.interp(lambda_nm, nm, [self.sce_rho[k] for k in nm]))


@dataclass(frozen=True)
class AccommodationState:
    """Nominal accommodation distance; ``math.inf`` means relaxed to infinity."""

    z_acc_m: float
    z_cdp_m: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.z_acc_m > 0:
            raise ValueError(
                "accommodation distance must be > 0 (the eye does not accommodate beyond infinity)"
            )

    @classmethod
    def from_dioptres(cls, vergence_D: float, z_cdp_m: float | None = None):
        if vergence_D < 0:
            raise ValueError("absolute accommodation below 0 D is hyperopic and not allowed")
        return cls(math.inf if vergence_D == 0 else 1.0 / vergence_D, z_cdp_m)

    @property
    def vergence_D(self) -> float:
        return 0.0 if math.isinf(self.z_acc_m) else 1.0 / self.z_acc_m

    @property
    def defocus_D(self) -> float:
        if self.z_cdp_m is None:
            raise ValueError("defocus needs the CDP distance")
        return accommodation_defocus(self.z_acc_m, self.z_cdp_m)


def _cholesky_like(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_eyes(
    model: PopulationModel,
    count: int,
    seed: int | np.random.Generator,
    pupil_diameter_mm: float = 3.0,
    sce_rho: float | Mapping[float, float] = DEFAULT_SCE_RHO,
    z_eye_m: float = DEFAULT_Z_EYE_M,
) -> list[EyeInstance]:
    """Draw ``count`` eyes from N(mean, covariance) and shrink them to the simulation pupil."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    factor = _cholesky_like(model.covariance)
    z = rng.standard_normal((count, model.mode_count))
    draws = model.mean + z @ factor.T
    eyes = []
    for i, row in enumerate(draws):
        zc = ZernikeCoefficients.from_osa(row, model.pupil_diameter_mm)
        eyes.append(
            EyeInstance(
                rescale_pupil(zc, pupil_diameter_mm), sce_rho, z_eye_m, eye_id=f"eye{i:02d}"
            )
        )
    return eyes


def average_eye(
    model: PopulationModel,
    pupil_diameter_mm: float = 3.0,
    sce_rho: float | Mapping[float, float] = DEFAULT_SCE_RHO,
    z_eye_m: float = DEFAULT_Z_EYE_M,
) -> EyeInstance:
    zc = ZernikeCoefficients.from_osa(model.mean, model.pupil_diameter_mm)
    return EyeInstance(rescale_pupil(zc, pupil_diameter_mm), sce_rho, z_eye_m, eye_id="average")


def lca_defocus(lambda_nm: float, lambda_ref_nm: float = 550.0) -> float:
    """Chromatic defocus (D) of ``lambda_nm`` relative to the in-focus reference wavelength."""
    if lambda_nm <= LCA_C or lambda_ref_nm <= LCA_C:
        raise ValueError(f"wavelength must exceed {LCA_C} nm")
    return LCA_A * (1.0 / (lambda_nm - LCA_C) - 1.0 / (lambda_ref_nm - LCA_C))


def _vergence(z_m: float) -> float:
    if not z_m > 0:
        raise ValueError("distances must be > 0")
    return 0.0 if math.isinf(z_m) else 1.0 / z_m


def accommodation_defocus(z_acc_m: float, z_cdp_m: float) -> float:
    return _vergence(z_acc_m) - _vergence(z_cdp_m)


def accommodation_sa_coeff(
    z_acc_m: float,
    pupil_diameter_mm: float = SA_REFERENCE_PUPIL_MM,
    reading: str = "absolute",
    z_cdp_m: float | None = None,
) -> float:
    """Primary spherical aberration (um) added by accommodating to ``z_acc_m``.

    ``reading="absolute"`` scales with 1/z_acc; ``"relative"`` scales with the
    accommodation change from the CDP instead.  The 5-mm slope is converted
    to other pupils with the c40 shrink factor (d / 5)^4.
    """
    if reading == "absolute":
        acc = _vergence(z_acc_m)
    elif reading == "relative":
        if z_cdp_m is None:
            raise ValueError("the relative reading needs z_cdp_m")
        acc = accommodation_defocus(z_acc_m, z_cdp_m)
    else:
        raise ValueError(f"unknown spherical-aberration reading {reading!r}")
    scale = (pupil_diameter_mm / SA_REFERENCE_PUPIL_MM) ** 4
    return SA_SLOPE_UM_PER_D * acc * scale


def sce_apodisation(grid: PupilGrid, rho: float) -> np.ndarray:
    """Stiles-Crawford amplitude 10^(-rho r^2) over the whole grid (r in mm)."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    p, q = grid.mesh()
    return 10.0 ** (-rho * (p * p + q * q))


def total_wavefront(
    eye: EyeInstance,
    lambda_nm: float,
    acc: AccommodationState,
    z_cdp_m: float,
    pupil_diameter_mm: float,
    lambda_ref_nm: float = 550.0,
    include_accommodation_sa: bool = True,
    sa_reading: str = "absolute",
    sa_induced_defocus: bool = False,
) -> ZernikeCoefficients:
    """Static eye aberrations plus accommodation, chromatic and SA terms.

    The SA increment is scaled to the simulation pupil as c40 (d/5)^4 and
    leaves every other mode alone.  ``sa_induced_defocus=True`` instead
    re-expands it exactly as :func:`rescale_pupil` would, adding the defocus
    a smaller pupil sees.
    """
    if not math.isclose(eye.aberrations.pupil_diameter_mm, pupil_diameter_mm, rel_tol=1e-9):
        raise ValueError("eye coefficients are not defined over the simulation pupil")
    defocus = accommodation_defocus(acc.z_acc_m, z_cdp_m) + lca_defocus(lambda_nm, lambda_ref_nm)
    out = eye.aberrations.with_added(2, 0, defocus_to_coeff(defocus, pupil_diameter_mm))
    if include_accommodation_sa:
        if sa_induced_defocus:
            c5 = accommodation_sa_coeff(acc.z_acc_m, SA_REFERENCE_PUPIL_MM, sa_reading, z_cdp_m)
            s = pupil_diameter_mm / SA_REFERENCE_PUPIL_MM
            # exact re-expansion of c5 Z40(s rho); valid for any s, piston dropped
            out = out.with_added(2, 0, math.sqrt(15.0) * (s**4 - s**2) * c5).with_added(4, 0, s**4 * c5)
        else:
            c40 = accommodation_sa_coeff(acc.z_acc_m, pupil_diameter_mm, sa_reading, z_cdp_m)
            out = out.with_added(4, 0, c40)
    return out


@lru_cache(maxsize=None)
def _luminosity_table() -> tuple[np.ndarray, np.ndarray]:
    with (_DATA / "cie2008_v2deg.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    nm = np.array([float(r["wavelength_nm"]) for r in rows])
    v = np.array([float(r["V"]) for r in rows])
    return nm, v


def luminosity_weight(lambda_nm: float) -> float:
    """Photopic 2-degree luminosity V(lambda), linear between the 10-nm samples."""
    nm, v = _luminosity_table()
    if not nm[0] <= lambda_nm <= nm[-1]:
        raise ValueError(f"wavelength {lambda_nm} nm outside {nm[0]:.0f}-{nm[-1]:.0f} nm")
    return float(np.interp(lambda_nm, nm, v))


def spectrum(min_nm: float, max_nm: float, step_nm: float) -> list[float]:
    n = int(round((max_nm - min_nm) / step_nm))
    if n < 0 or not math.isclose(min_nm + n * step_nm, max_nm, abs_tol=1e-9):
        raise ValueError("spectrum step must divide the wavelength range")
    return [float(min_nm + i * step_nm) for i in range(n + 1)]


def eyes_to_rows(eyes: Sequence[EyeInstance], count: int = 15) -> list[dict]:
    """Flatten eye coefficients for CSV output (one row per eye and mode)."""
    from .zernike import osa_to_nm

    rows = []
    for eye in eyes:
        vec = eye.aberrations.to_osa(count)
        for j, v in enumerate(vec):
            n, m = osa_to_nm(j)
            rows.append({"eye_id": eye.eye_id, "j": j, "n": n, "m": m, "value_um": v})
    return rows
