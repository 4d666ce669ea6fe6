"""Fourier-optics retinal image formation.

Pupil functions are Fourier transformed onto one fixed retinal grid for every
wavelength: the pupil-plane pitch is chosen per wavelength as
``lambda * z_eye / (N * dx)`` so that every monochromatic PSF lands on the
same ``N x N`` retinal samples of pitch ``dx``.  The pupil is evaluated
analytically on each wavelength's grid.

Retinal coordinates are centred: the optical axis is at index ``N // 2``.
The transform uses the ``exp(+i 2 pi p x / (lambda z))`` kernel, i.e. the
retinal image is inverted with respect to the pupil, which is what makes the
defocus of a subaperture beam and the display's angular offset cancel when
the eye focuses at the rendered depth.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import kernels
from .display import DisplayConfig, SubapertureLayout, dioptres_to_metres, epsf_shift, subaperture_layout
from .eye_model import (
    SA_REFERENCE_PUPIL_MM,
    AccommodationState,
    EyeInstance,
    accommodation_defocus,
    accommodation_sa_coeff,
    lca_defocus,
    luminosity_weight,
    sce_apodisation,
)
from .zernike import (
    TILT_MODES,
    PupilGrid,
    ZernikeCoefficients,
    defocus_to_coeff,
    eval_polynomial,
    osa_index,
)

__all__ = [
    "RetinalGrid",
    "SampledField",
    "RetinalPSF",
    "SimulationOptions",
    "RetinaSimulator",
    "pupil_grid_for",
    "pupil_function",
    "aperture_amplitude",
    "elemental_psf_mono",
    "elemental_psf_poly",
    "retinal_psf",
    "dl_reference_psf",
    "otf",
    "simulate_retinal_image",
    "degree_on_retina_um",
]

PLANES = ("pupil", "retina", "frequency")


def degree_on_retina_um(z_eye_m: float) -> float:
    """Retinal extent (um) of one degree of visual angle."""
    return z_eye_m * 1e6 * math.tan(math.radians(1.0))


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RetinalGrid:
    """Retinal sampling shared by all wavelengths: ``size`` x ``size`` at ``pitch_um``."""

    size: int = 256
    pitch_um: float = 1.0

    def __post_init__(self):
        if not _is_pow2(self.size):
            raise ValueError("retinal grid size must be a power of two")
        if not self.pitch_um > 0:
            raise ValueError("retinal pitch must be > 0")

    @property
    def coords_um(self) -> np.ndarray:
        return (np.arange(self.size) - self.size // 2) * self.pitch_um

    @property
    def freqs_cycles_per_um(self) -> np.ndarray:
        return (np.arange(self.size) - self.size // 2) / (self.size * self.pitch_um)

    def freq_pitch_cpd(self, z_eye_m: float) -> float:
        return degree_on_retina_um(z_eye_m) / (self.size * self.pitch_um)

    def field_of_view_deg(self, z_eye_m: float) -> float:
        return self.size * self.pitch_um / degree_on_retina_um(z_eye_m)


@dataclass(frozen=True)
class SampledField:
    """Square sampled plane.  ``pitch`` is mm (pupil), um (retina) or cpd (frequency)."""

    values: np.ndarray
    pitch: float
    plane: str
    wavelength_nm: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or not _is_pow2(v.shape[0]):
            raise ValueError("sampled fields must be square with a power-of-two side")
        if not self.pitch > 0:
            raise ValueError("pitch must be > 0")
        if self.plane not in PLANES:
            raise ValueError(f"plane must be one of {PLANES}")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def same_grid(self, other: "SampledField") -> bool:
        return (
            self.values.shape == other.values.shape
            and self.plane == other.plane
            and math.isclose(self.pitch, other.pitch, rel_tol=1e-9)
        )


@dataclass(frozen=True)
class RetinalPSF:
    """Unit-energy retinal PSF: ``values.sum() * pitch**2 == 1``."""

    field: SampledField
    accommodation: AccommodationState | None
    z_eye_m: float
    normalization: str = "unit-energy"

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def pitch_um(self) -> float:
        return self.field.pitch


@dataclass(frozen=True)
class SimulationOptions:
    """Wavefront composition switches shared by every PSF of a run."""

    lambda_ref_nm: float = 550.0
    include_accommodation_sa: bool = True
    sa_reading: str = "absolute"
    sa_induced_defocus: bool = False
    workers: int | None = None


def pupil_grid_for(
    grid: RetinalGrid, lambda_nm: float, z_eye_m: float, pupil_diameter_mm: float
) -> PupilGrid:
    """Pupil sampling whose transform lands exactly on ``grid`` at ``lambda_nm``."""
    pitch_mm = lambda_nm * 1e-6 * z_eye_m * 1e3 / (grid.size * grid.pitch_um * 1e-3)
    if grid.size * pitch_mm < 2 * pupil_diameter_mm * (1 - 1e-12):
        raise ValueError(
            f"retinal pitch {grid.pitch_um} um is too coarse for {lambda_nm} nm: the PSF would "
            "alias; use a finer pitch or larger grid"
        )
    if pupil_diameter_mm / pitch_mm < 16:
        raise ValueError(
            f"only {pupil_diameter_mm / pitch_mm:.1f} pupil samples at {lambda_nm} nm; "
            "use a larger retinal grid"
        )
    return PupilGrid(grid.size, pitch_mm, pupil_diameter_mm)


def pupil_function(amplitude: SampledField, wavefront_um: SampledField, lambda_nm: float) -> SampledField:
    """Generalized pupil function A * exp(i 2 pi W / lambda)."""
    if not amplitude.same_grid(wavefront_um) or amplitude.plane != "pupil":
        raise ValueError("amplitude and wavefront must share one pupil grid")
    if np.any(amplitude.values < 0):
        raise ValueError("amplitude must be >= 0")
    k = 2 * np.pi / (lambda_nm * 1e-3)
    values = amplitude.values * np.exp(1j * k * wavefront_um.values)
    return SampledField(values, amplitude.pitch, "pupil", lambda_nm)


def _disc(p: np.ndarray, q: np.ndarray, cp: float, cq: float, diameter: float) -> np.ndarray:
    return np.hypot(p - cp, q - cq) <= diameter / 2 * (1 + 1e-12)


def aperture_amplitude(
    layout: SubapertureLayout, index: int, pupil_diameter_mm: float, sce: SampledField
) -> SampledField:
    """Amplitude of subaperture ``index``: pupil disc x Stiles-Crawford x subaperture disc."""
    if not 0 <= index < layout.count:
        raise IndexError(f"subaperture {index} out of range (count {layout.count})")
    n = sce.size
    c = (np.arange(n) - n // 2) * sce.pitch
    p, q = np.meshgrid(c, c)
    a_pupil = _disc(p, q, 0.0, 0.0, pupil_diameter_mm)
    cp, cq = layout.centers[index]
    a_elem = _disc(p, q, cp, cq, layout.diameter_mm) if layout.count > 1 else a_pupil
    return SampledField(a_pupil * a_elem * sce.values, sce.pitch, "pupil", sce.wavelength_nm)


def _checker(n: int) -> np.ndarray:
    idx = np.arange(n)
    return 1.0 - 2.0 * ((idx[:, None] + idx[None, :]) % 2)


def elemental_psf_mono(
    pupil: SampledField,
    lambda_nm: float,
    z_eye_m: float,
    retinal_grid: RetinalGrid,
    normalize: bool = True,
) -> SampledField:
    """|F[P]|^2 on the retinal grid.

    The pupil is zero-padded (centred) to the retinal grid size.  Its pitch
    must be the one :func:`pupil_grid_for` gives for this wavelength.  With
    ``normalize=False`` the PSF carries physical scaling: its integral over
    the retina equals the integral of |P|^2 over the pupil.
    """
    n = retinal_grid.size
    want = lambda_nm * 1e-6 * z_eye_m * 1e3 / (n * retinal_grid.pitch_um * 1e-3)
    if not math.isclose(pupil.pitch, want, rel_tol=1e-9):
        raise ValueError(
            f"pupil pitch {pupil.pitch:.6g} mm does not map to a {retinal_grid.pitch_um} um "
            f"retinal pitch at {lambda_nm} nm (needs {want:.6g} mm)"
        )
    m = pupil.size
    if m > n:
        raise ValueError("requested retinal pitch is unreachable: pupil grid exceeds the padded size")
    buf = np.zeros((n, n), dtype=complex)
    o = n // 2 - m // 2
    buf[o : o + m, o : o + m] = pupil.values
    u = sfft.ifft2(buf * _checker(n))
    intensity = u.real**2 + u.imag**2
    if normalize:
        values = intensity / (intensity.sum() * retinal_grid.pitch_um**2)
    else:
        # sum|ifft2|^2 = sum|P|^2 / N^2; rescale so the retinal integral equals the pupil one
        values = intensity * (n * n) * pupil.pitch**2 / retinal_grid.pitch_um**2
    return SampledField(values, retinal_grid.pitch_um, "retina", lambda_nm)


def _centered_fft(a: np.ndarray, workers=None) -> np.ndarray:
    return sfft.fftshift(sfft.fft2(sfft.ifftshift(a), workers=workers))


def _centered_ifft(a: np.ndarray, workers=None) -> np.ndarray:
    return sfft.fftshift(sfft.ifft2(sfft.ifftshift(a), workers=workers))


def _zernike_sum(coeffs: ZernikeCoefficients, rho, theta, inside, drop_tilt=True) -> np.ndarray:
    out = np.zeros(rho.shape)
    r, t = rho[inside], theta[inside]
    acc = np.zeros(r.shape)
    for n, m, v in coeffs.coeffs:
        if v == 0.0 or (drop_tilt and osa_index(n, m) in TILT_MODES):
            continue
        acc += v * eval_polynomial(n, m, r, t)
    out[inside] = acc
    return out


@dataclass
class _Band:
    """Per-wavelength pupil block covering the pupil disc on the padded grid."""

    lambda_nm: float
    weight: float  # luminosity weight
    pitch_mm: float
    start: int  # first grid index of the block (rows and columns)
    p: np.ndarray
    q: np.ndarray
    inside: np.ndarray
    sce: np.ndarray
    sign: np.ndarray
    z20: np.ndarray
    z40: np.ndarray
    w_static: np.ndarray


@dataclass
class _Sub:
    rows: slice
    cols: slice
    amp: np.ndarray
    w_static: np.ndarray
    z20: np.ndarray
    z40: np.ndarray
    throughput: float  # pupil energy relative to an open unapodised pupil


class RetinaSimulator:
    """Computes elemental and retinal PSFs/OTFs for one eye on one retinal grid.

    Elemental OTFs depend only on (density, accommodation), not on the
    rendered depth, so they are cached and reused by every depth.
    """

    def __init__(
        self,
        eye: EyeInstance,
        z_cdp_m: float,
        pupil_diameter_mm: float,
        spectrum_nm: Sequence[float],
        grid: RetinalGrid = RetinalGrid(),
        options: SimulationOptions = SimulationOptions(),
        cache_size: int = 4,
    ):
        if not len(spectrum_nm):
            raise ValueError("spectrum must not be empty")
        if not math.isclose(eye.aberrations.pupil_diameter_mm, pupil_diameter_mm, rel_tol=1e-9):
            raise ValueError("eye coefficients are not defined over the simulation pupil")
        self.eye = eye
        self.z_cdp_m = z_cdp_m
        self.pupil_diameter_mm = pupil_diameter_mm
        self.grid = grid
        self.options = options
        self.spectrum_nm = [float(x) for x in spectrum_nm]
        weights = [luminosity_weight(x) for x in self.spectrum_nm]
        if sum(weights) <= 0:
            raise ValueError("spectrum has zero luminous weight")
        self._weight_sum = float(sum(weights))
        self._bands = [self._make_band(lam, w) for lam, w in zip(self.spectrum_nm, weights)]
        self._subs: dict[int, list[list[_Sub]]] = {}
        self._layouts: dict[int, SubapertureLayout] = {}
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        n = grid.size
        f = grid.freqs_cycles_per_um
        self._fx = f
        self._coords = grid.coords_um
        self.freq_pitch_cpd = grid.freq_pitch_cpd(eye.z_eye_m)

    # -- setup -------------------------------------------------------------
    def _make_band(self, lam: float, weight: float) -> _Band:
        pg = pupil_grid_for(self.grid, lam, self.eye.z_eye_m, self.pupil_diameter_mm)
        n = self.grid.size
        radius = self.pupil_diameter_mm / 2
        half = int(math.ceil(radius / pg.pitch_mm)) + 1
        start = max(n // 2 - half, 0)
        stop = min(n // 2 + half + 1, n)
        idx = np.arange(start, stop)
        c = (idx - n // 2) * pg.pitch_mm
        p, q = np.meshgrid(c, c)
        rho = np.hypot(p, q) / radius
        theta = np.arctan2(q, p)
        inside = rho <= 1.0 + 1e-12
        rho_in = np.where(inside, rho, 0.0)
        sce = np.where(inside, 10.0 ** (-self.eye.rho_at(lam) * (p * p + q * q)), 0.0)
        sign = 1.0 - 2.0 * ((idx[:, None] + idx[None, :]) % 2)
        z20 = np.where(inside, eval_polynomial(2, 0, rho_in, theta), 0.0)
        z40 = np.where(inside, eval_polynomial(4, 0, rho_in, theta), 0.0)
        w_static = _zernike_sum(self.eye.aberrations, rho_in, theta, inside)
        return _Band(lam, weight, pg.pitch_mm, start, p, q, inside, sce, sign, z20, z40, w_static)

    def layout(self, density: int) -> SubapertureLayout:
        if density not in self._layouts:
            self._layouts[density] = subaperture_layout(density, self.pupil_diameter_mm)
        return self._layouts[density]

    def use_layout(self, layout: SubapertureLayout) -> int:
        """Register a custom layout; returns the density key it is stored under."""
        k = int(round(math.sqrt(layout.count)))
        self._layouts[k] = layout
        self._subs.pop(k, None)
        return k

    def _subapertures(self, density: int) -> list[list[_Sub]]:
        """Per subaperture, per band: the cropped block it occupies."""
        if density in self._subs:
            return self._subs[density]
        layout = self.layout(density)
        open_area = math.pi * (self.pupil_diameter_mm / 2) ** 2
        out = []
        for cp, cq in layout.centers:
            per_band = []
            for b in self._bands:
                mask = b.inside.copy()
                if layout.count > 1:
                    mask &= _disc(b.p, b.q, cp, cq, layout.diameter_mm)
                rows = np.flatnonzero(mask.any(axis=1))
                cols = np.flatnonzero(mask.any(axis=0))
                if rows.size == 0:
                    raise ValueError("subaperture lies outside the pupil")
                rs = slice(rows[0], rows[-1] + 1)
                cs = slice(cols[0], cols[-1] + 1)
                amp_phys = np.where(mask, b.sce, 0.0)[rs, cs]
                throughput = float(np.sum(amp_phys**2) * b.pitch_mm**2 / open_area)
                amp = np.ascontiguousarray(amp_phys * b.sign[rs, cs])
                per_band.append(
                    _Sub(
                        slice(rs.start + b.start, rs.stop + b.start),
                        slice(cs.start + b.start, cs.stop + b.start),
                        amp,
                        np.ascontiguousarray(b.w_static[rs, cs]),
                        np.ascontiguousarray(b.z20[rs, cs]),
                        np.ascontiguousarray(b.z40[rs, cs]),
                        throughput,
                    )
                )
            out.append(per_band)
        self._subs[density] = out
        return out

    # -- wavefront terms ----------------------------------------------------
    def accommodation_terms(self, acc_D: float, lambda_nm: float) -> tuple[float, float]:
        """(c20, c40) in um added to the static eye at this accommodation and wavelength."""
        opts = self.options
        acc = AccommodationState.from_dioptres(acc_D)
        d = self.pupil_diameter_mm
        defocus = accommodation_defocus(acc.z_acc_m, self.z_cdp_m) + lca_defocus(
            lambda_nm, opts.lambda_ref_nm
        )
        c20 = defocus_to_coeff(defocus, d)
        c40 = 0.0
        if opts.include_accommodation_sa:
            if opts.sa_induced_defocus:
                # c40 Z40(s rho) = s^4 c40 Z40(rho) + sqrt15 (s^4 - s^2) c40 Z20(rho) + piston
                c5 = accommodation_sa_coeff(acc.z_acc_m, SA_REFERENCE_PUPIL_MM, opts.sa_reading, self.z_cdp_m)
                s = d / SA_REFERENCE_PUPIL_MM
                c20 += math.sqrt(15.0) * (s**4 - s**2) * c5
                c40 = s**4 * c5
            else:
                c40 = accommodation_sa_coeff(acc.z_acc_m, d, opts.sa_reading, self.z_cdp_m)
        return c20, c40

    # -- PSFs -----------------------------------------------------------------
    def elemental_psfs(self, density: int, acc_D: float) -> tuple[list[np.ndarray], list[float]]:
        """Unit-sum polychromatic elemental PSFs and their pupil throughputs."""
        n = self.grid.size
        subs = self._subapertures(density)
        workers = self.options.workers
        psfs, throughputs = [], []
        for per_band in subs:
            acc = np.zeros((n, n))
            energy = 0.0
            for b, s in zip(self._bands, per_band):
                if b.weight == 0.0 or s.throughput == 0.0:
                    continue
                c20, c40 = self.accommodation_terms(acc_D, b.lambda_nm)
                block = np.empty(s.amp.shape, dtype=complex)
                kernels.pupil_block(
                    s.amp, s.w_static, s.z20, s.z40, c20, c40, 2 * np.pi / (b.lambda_nm * 1e-3), block
                )
                # transform only the rows that carry light, then the columns
                rowbuf = np.zeros((block.shape[0], n), dtype=complex)
                rowbuf[:, s.cols] = block
                full = np.zeros((n, n), dtype=complex)
                full[s.rows] = sfft.ifft(rowbuf, axis=1, workers=workers)
                u = sfft.ifft(full, axis=0, overwrite_x=True, workers=workers)
                # unit energy per wavelength, weighted by luminosity and throughput
                total = float(np.sum(s.amp**2)) / (n * n)
                w = b.weight * s.throughput / total
                kernels.accumulate_intensity(acc, np.ascontiguousarray(u), w)
                energy += b.weight * s.throughput
            throughputs.append(energy / self._weight_sum)
            psfs.append(acc / acc.sum())
        return psfs, throughputs

    def elemental_otfs(self, density: int, acc_D: float):
        """(list of throughput-weighted elemental OTFs, centers, total throughput)."""
        key = (density, round(acc_D, 9))
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        psfs, thr = self.elemental_psfs(density, acc_D)
        otfs = [t * _centered_fft(p, self.options.workers) for p, t in zip(psfs, thr)]
        entry = (otfs, self.layout(density).centers_array, float(sum(thr)))
        self._cache[key] = entry
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return entry

    def shifts_um(self, density: int, rendered_D: float) -> np.ndarray:
        centers = self.layout(density).centers_array
        z_r = dioptres_to_metres(rendered_D)
        out = np.array(
            [epsf_shift(z_r, self.z_cdp_m, self.eye.z_eye_m, c) for c in centers]
        ).reshape(-1, 2)
        return out * 1e6

    def retinal_otf(self, density: int, rendered_D: float, acc_D: float) -> np.ndarray:
        """DC-normalized OTF of the superposed, shifted elemental PSFs (centred layout)."""
        otfs, _, total = self.elemental_otfs(density, acc_D)
        shifts = self.shifts_um(density, rendered_D)
        half = self.grid.size * self.grid.pitch_um / 2
        if np.any(np.abs(shifts) >= half):
            raise ValueError("elemental PSF shift exceeds the retinal field of view")
        out = np.zeros_like(otfs[0])
        f = self._fx
        for o, (sx, sy) in zip(otfs, shifts):
            if sx == 0.0 and sy == 0.0:
                out += o
                continue
            rx = np.exp(-2j * np.pi * f * sx)
            ry = np.exp(-2j * np.pi * f * sy)
            kernels.shifted_sum(out, o, ry, rx)
        out /= total
        return out

    def psf_from_otf(self, otf_values: np.ndarray) -> np.ndarray:
        """Unit-energy density (1/um^2) from a centred OTF."""
        psf = _centered_ifft(otf_values, self.options.workers).real
        np.clip(psf, 0.0, None, out=psf)
        return psf / (psf.sum() * self.grid.pitch_um**2)

    def retinal_psf(self, density: int, rendered_D: float, acc_D: float) -> RetinalPSF:
        vals = self.psf_from_otf(self.retinal_otf(density, rendered_D, acc_D))
        return RetinalPSF(
            SampledField(vals, self.grid.pitch_um, "retina"),
            AccommodationState.from_dioptres(acc_D, self.z_cdp_m),
            self.eye.z_eye_m,
        )

    def centroid_um(self, psf: np.ndarray) -> tuple[float, float]:
        c = self._coords
        s = psf.sum()
        return float((psf.sum(axis=0) * c).sum() / s), float((psf.sum(axis=1) * c).sum() / s)

    def centre_otf(self, otf_values: np.ndarray, psf: np.ndarray) -> np.ndarray:
        """Remove the PSF's centroid displacement from its OTF."""
        cx, cy = self.centroid_um(psf)
        f = self._fx
        return otf_values * np.exp(2j * np.pi * f * cy)[:, None] * np.exp(2j * np.pi * f * cx)[None, :]

    def otf_field(self, otf_values: np.ndarray) -> SampledField:
        return SampledField(otf_values, self.freq_pitch_cpd, "frequency")


def _simulator_for(eye, display: DisplayConfig, spectrum, grid, options) -> RetinaSimulator:
    return RetinaSimulator(eye, display.z_cdp_m, display.pupil_diameter_mm, spectrum, grid, options)


def elemental_psf_poly(
    eye: EyeInstance,
    layout: SubapertureLayout,
    index: int,
    acc: AccommodationState,
    spectrum: Sequence[float],
    display: DisplayConfig,
    grid: RetinalGrid = RetinalGrid(),
    options: SimulationOptions = SimulationOptions(),
) -> SampledField:
    """Luminosity-weighted sum of monochromatic elemental PSFs, unit energy."""
    if not 0 <= index < layout.count:
        raise IndexError(f"subaperture {index} out of range (count {layout.count})")
    sim = _simulator_for(eye, display, spectrum, grid, options)
    k = sim.use_layout(layout)
    psfs, _ = sim.elemental_psfs(k, acc.vergence_D)
    return SampledField(psfs[index] / grid.pitch_um**2, grid.pitch_um, "retina")


def retinal_psf(
    eye: EyeInstance,
    display: DisplayConfig,
    z_r_m: float,
    acc: AccommodationState,
    spectrum: Sequence[float] = tuple(range(400, 701, 10)),
    grid: RetinalGrid = RetinalGrid(),
    options: SimulationOptions = SimulationOptions(),
) -> RetinalPSF:
    """Retinal PSF of a point rendered at ``z_r_m`` for an eye accommodated at ``acc``."""
    sim = _simulator_for(eye, display, spectrum, grid, options)
    rendered_D = 0.0 if math.isinf(z_r_m) else 1.0 / z_r_m
    return sim.retinal_psf(display.density, rendered_D, acc.vergence_D)


def dl_reference_psf(
    display: DisplayConfig,
    spectrum: Sequence[float] = tuple(range(400, 701, 10)),
    grid: RetinalGrid = RetinalGrid(),
    options: SimulationOptions = SimulationOptions(),
    sce_rho=None,
    z_eye_m: float | None = None,
) -> RetinalPSF:
    """Open-pupil PSF of an aberration-free eye focused on the CDP.

    Chromatic defocus and the accommodation-dependent spherical aberration
    are kept so the reference matches how aberrated PSFs are computed.
    """
    kw = {}
    if sce_rho is not None:
        kw["sce_rho"] = sce_rho
    if z_eye_m is not None:
        kw["z_eye_m"] = z_eye_m
    eye = EyeInstance(ZernikeCoefficients.zero(display.pupil_diameter_mm), eye_id="dl", **kw)
    sim = RetinaSimulator(eye, display.z_cdp_m, display.pupil_diameter_mm, spectrum, grid, options)
    return sim.retinal_psf(1, display.z_cdp_D, display.z_cdp_D)


def otf(psf: RetinalPSF) -> SampledField:
    """DC-normalized complex OTF on a cycles/degree grid (centred layout)."""
    values = _centered_fft(psf.values)
    values = values / values[psf.field.size // 2, psf.field.size // 2]
    n = psf.field.size
    pitch_cpd = degree_on_retina_um(psf.z_eye_m) / (n * psf.pitch_um)
    return SampledField(values, pitch_cpd, "frequency")


def simulate_retinal_image(
    scene: np.ndarray, scene_pitch_deg: float, psf: RetinalPSF
) -> np.ndarray:
    """Blur a periodic grayscale scene with ``psf`` (circular convolution, energy preserving).

    The scene's angular pitch must equal the PSF's retinal pitch.
    """
    scene = np.asarray(scene, dtype=float)
    if scene.ndim != 2:
        raise ValueError("scene must be a 2-D grayscale image")
    scene_um = scene_pitch_deg * degree_on_retina_um(psf.z_eye_m)
    if not math.isclose(scene_um, psf.pitch_um, rel_tol=1e-6):
        raise ValueError(
            f"scene pitch {scene_um:.6g} um does not match the PSF pitch {psf.pitch_um:.6g} um"
        )
    kernel = psf.values * psf.pitch_um**2
    n = kernel.shape[0]
    h, w = scene.shape
    # fold the kernel (origin at n//2) onto the scene's periodic grid, origin at [0, 0]
    folded = np.zeros((h, w))
    iy = (np.arange(n) - n // 2) % h
    ix = (np.arange(n) - n // 2) % w
    np.add.at(folded, (iy[:, None], ix[None, :]), kernel)
    return sfft.irfft2(sfft.rfft2(scene) * sfft.rfft2(folded), s=(h, w))
