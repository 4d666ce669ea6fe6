"""Image-quality metrics: neural CSF, VSOTF, Strehl ratio, radial MTF and cut-off."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .optics import RetinalPSF, SampledField

__all__ = [
    "NcsfParams",
    "load_ncsf_params",
    "ncsf",
    "ncsf_grid",
    "vsotf",
    "strehl",
    "RadialMTF",
    "radial_mtf",
    "cutoff_frequency",
    "analytic_dl_mtf",
]


@dataclass(frozen=True)
class NcsfParams:
    """Neural contrast sensitivity: difference of hyperbolic secants with an oblique-effect filter.

    ``gain * (sech((f / peak_frequency_cpd) ** rolloff_exponent)
    - low_frequency_attenuation * sech(f / low_frequency_cpd))``, attenuated
    off the cardinal axes above ``oblique_corner_cpd``.
    """

    gain: float = 373.08
    peak_frequency_cpd: float = 4.3469
    low_frequency_cpd: float = 1.4476
    low_frequency_attenuation: float = 0.8514
    rolloff_exponent: float = 0.7929
    oblique_corner_cpd: float = 3.48
    oblique_slope_cpd: float = 13.57

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value >= 0:
                raise ValueError(f"NCSF parameter {name} must be >= 0")
        if not 0 <= self.low_frequency_attenuation < 1:
            raise ValueError("low_frequency_attenuation must lie in [0, 1)")
        if self.peak_frequency_cpd == 0 or self.low_frequency_cpd == 0 or self.oblique_slope_cpd == 0:
            raise ValueError("NCSF frequency scales must be > 0")


def load_ncsf_params(path: str | Path | None = None) -> NcsfParams:
    if path is None or str(path) == "builtin":
        text = (resources.files("lfretina") / "data" / "ncsf_watson_ahumada.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    fields = NcsfParams.__dataclass_fields__
    unknown = set(doc) - set(fields) - {"model", "source"}
    if unknown:
        raise ValueError(f"unknown NCSF parameter(s): {', '.join(sorted(unknown))}")
    return NcsfParams(**{k: float(v) for k, v in doc.items() if k in fields})


def _sech(x):
    return 1.0 / np.cosh(np.minimum(x, 700.0))


def ncsf(fx_cpd, fy_cpd, params: NcsfParams = NcsfParams()):
    """Neural CSF gain at horizontal/vertical frequencies (cpd); vectorized."""
    fx = np.asarray(fx_cpd, dtype=float)
    fy = np.asarray(fy_cpd, dtype=float)
    f = np.hypot(fx, fy)
    radial = params.gain * (
        _sech((f / params.peak_frequency_cpd) ** params.rolloff_exponent)
        - params.low_frequency_attenuation * _sech(f / params.low_frequency_cpd)
    )
    theta = np.arctan2(fy, fx)
    oblique = np.where(
        f > params.oblique_corner_cpd,
        1.0
        - (1.0 - np.exp(-(f - params.oblique_corner_cpd) / params.oblique_slope_cpd))
        * np.sin(2 * theta) ** 2,
        1.0,
    )
    out = np.clip(radial * oblique, 0.0, None)
    return float(out) if out.ndim == 0 else out


def ncsf_grid(size: int, pitch_cpd: float, params: NcsfParams = NcsfParams()) -> np.ndarray:
    """NCSF sampled on a centred ``size`` x ``size`` frequency grid."""
    f = (np.arange(size) - size // 2) * pitch_cpd
    return ncsf(f[None, :], f[:, None], params)


def vsotf(
    otf: SampledField,
    otf_dl: SampledField,
    params: NcsfParams = NcsfParams(),
    weights: np.ndarray | None = None,
) -> float:
    """NCSF-weighted integral of Re(OTF) relative to the diffraction-limited one.

    ``weights`` may pass a precomputed :func:`ncsf_grid` for speed.
    """
    if not otf.same_grid(otf_dl) or otf.plane != "frequency":
        raise ValueError("OTFs must share one frequency grid")
    if weights is None:
        weights = ncsf_grid(otf.size, otf.pitch, params)
    num = float(np.sum(weights * np.real(otf.values)))
    den = float(np.sum(weights * np.real(otf_dl.values)))
    return num / den


def strehl(psf: RetinalPSF, psf_dl: RetinalPSF) -> float:
    if not psf.field.same_grid(psf_dl.field):
        raise ValueError("PSFs must share one retinal grid")
    return float(psf.values.max() / psf_dl.values.max())


@dataclass(frozen=True)
class RadialMTF:
    frequency_cpd: np.ndarray
    gain: np.ndarray


def radial_mtf(otf: SampledField) -> RadialMTF:
    """Orientation-averaged |OTF| in annuli one frequency pixel wide.

    Bins are centred on integer multiples of the grid pitch and stop at the
    largest circle inscribed in the grid.
    """
    n = otf.size
    k = np.arange(n) - n // 2
    r = np.hypot(k[None, :], k[:, None])
    index = np.ascontiguousarray(np.rint(r).astype(np.int64))
    nbins = n // 2
    sums, counts = kernels.radial_bin(
        np.ascontiguousarray(np.abs(otf.values), dtype=float), index, nbins
    )
    gain = sums / counts
    return RadialMTF(np.arange(nbins) * otf.pitch, gain)


def cutoff_frequency(curve: RadialMTF, threshold: float = 0.05) -> tuple[float, bool]:
    """Lowest frequency where the gain drops below ``threshold`` for good.

    A crossing counts once the gain stays below the threshold for the two
    following bins.  Returns ``(frequency_cpd, reached)``; when the curve
    never crosses, the last (Nyquist) frequency is returned with
    ``reached=False``.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    f, g = curve.frequency_cpd, curve.gain
    if g[0] <= threshold:
        return float(f[0]), True
    below = g < threshold
    for i in range(1, len(g)):
        if below[i] and below[i + 1 : i + 3].all():
            t = (g[i - 1] - threshold) / (g[i - 1] - g[i])
            return float(f[i - 1] + t * (f[i] - f[i - 1])), True
    return float(f[-1]), False


def analytic_dl_mtf(nu):
    """Diffraction-limited MTF of a circular pupil at normalised frequency nu = f / f_cutoff."""
    nu = np.clip(np.asarray(nu, dtype=float), 0.0, None)
    c = np.clip(nu, 0.0, 1.0)
    out = (2 / np.pi) * (np.arccos(c) - c * np.sqrt(1 - c * c))
    out = np.where(nu >= 1.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def dl_cutoff_cpd(pupil_diameter_mm: float, lambda_nm: float, z_eye_m: float) -> float:
    """Incoherent cut-off d / (lambda z_eye), expressed in cycles/degree."""
    per_um = pupil_diameter_mm * 1e-3 / (lambda_nm * 1e-9 * z_eye_m) * 1e-6
    return per_um * z_eye_m * 1e6 * math.tan(math.radians(1.0))
