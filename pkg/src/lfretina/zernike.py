"""Zernike polynomials in OSA/ANSI ordering and normalization.

Coefficients are in micrometres.  Each mode has unit RMS over the unit disc,
so a coefficient is directly the RMS wavefront error contributed by its mode.

Index conventions
- OSA/ANSI single index j = (n(n+2) + m) / 2, zero-based (j=0 is piston)
- m < 0 selects sin(|m| theta), m >= 0 selects cos(m theta)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "ZernikeCoefficients",
    "PupilGrid",
    "osa_index",
    "osa_to_nm",
    "eval_polynomial",
    "wavefront_map",
    "defocus_to_coeff",
    "rescale_pupil",
]

#: OSA indices that only translate the PSF (piston, tip, tilt).
TILT_MODES = (0, 1, 2)


def _check_nm(n: int, m: int) -> None:
    if n < 0 or abs(m) > n or (n - abs(m)) % 2:
        raise ValueError(f"invalid Zernike indices (n={n}, m={m})")


def osa_index(n: int, m: int) -> int:
    """Return the zero-based OSA/ANSI index of mode (n, m)."""
    _check_nm(n, m)
    return (n * (n + 2) + m) // 2


def osa_to_nm(j: int) -> tuple[int, int]:
    """Return (n, m) for a zero-based OSA/ANSI index."""
    if j < 0:
        raise ValueError("OSA index must be >= 0")
    n = int(math.ceil((-3 + math.sqrt(9 + 8 * j)) / 2))
    m = 2 * j - n * (n + 2)
    return n, m


@lru_cache(maxsize=None)
def _radial_terms(n: int, m: int) -> tuple[tuple[int, float], ...]:
    m = abs(m)
    terms = []
    for s in range((n - m) // 2 + 1):
        c = (-1) ** s * math.factorial(n - s) / (
            math.factorial(s)
            * math.factorial((n + m) // 2 - s)
            * math.factorial((n - m) // 2 - s)
        )
        terms.append((n - 2 * s, float(c)))
    return tuple(terms)


def _radial(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho, dtype=float)
    for power, c in _radial_terms(n, m):
        out += c * rho**power
    return out


def eval_polynomial(n: int, m: int, rho, theta):
    """Evaluate the unit-RMS Zernike mode Z_n^m at polar points of the unit disc.

    Raises ``ValueError`` for an invalid (n, m) pair or a radius outside [0, 1].
    """
    _check_nm(n, m)
    rho_a = np.asarray(rho, dtype=float)
    theta_a = np.asarray(theta, dtype=float)
    if np.any(rho_a < 0) or np.any(rho_a > 1 + 1e-12):
        raise ValueError("rho must lie in [0, 1]")
    norm = math.sqrt(n + 1) if m == 0 else math.sqrt(2 * (n + 1))
    radial = _radial(n, m, rho_a)
    if m > 0:
        ang = np.cos(m * theta_a)
    elif m < 0:
        ang = np.sin(-m * theta_a)
    else:
        ang = 1.0
    value = norm * radial * ang
    if np.ndim(value) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class ZernikeCoefficients:
    """A wavefront as OSA-indexed Zernike coefficients over a pupil diameter.

    ``coeffs`` holds ``(n, m, value_um)`` triples, kept sorted by OSA index.
    """

    coeffs: tuple[tuple[int, int, float], ...]
    pupil_diameter_mm: float

    def __post_init__(self):
        if not self.pupil_diameter_mm > 0:
            raise ValueError("pupil_diameter_mm must be > 0")
        seen = set()
        clean = []
        for n, m, v in self.coeffs:
            j = osa_index(int(n), int(m))
            if j in seen:
                raise ValueError(f"duplicate Zernike mode (n={n}, m={m})")
            seen.add(j)
            clean.append((int(n), int(m), float(v)))
        clean.sort(key=lambda t: osa_index(t[0], t[1]))
        object.__setattr__(self, "coeffs", tuple(clean))

    @classmethod
    def from_osa(cls, values: Iterable[float], pupil_diameter_mm: float) -> "ZernikeCoefficients":
        return cls(
            tuple((*osa_to_nm(j), float(v)) for j, v in enumerate(values)),
            pupil_diameter_mm,
        )

    @classmethod
    def from_mapping(cls, values: Mapping[tuple[int, int], float], pupil_diameter_mm: float):
        return cls(tuple((n, m, v) for (n, m), v in values.items()), pupil_diameter_mm)

    @classmethod
    def zero(cls, pupil_diameter_mm: float) -> "ZernikeCoefficients":
        return cls((), pupil_diameter_mm)

    @property
    def max_order(self) -> int:
        return max((n for n, _, _ in self.coeffs), default=0)

    def get(self, n: int, m: int) -> float:
        for nn, mm, v in self.coeffs:
            if nn == n and mm == m:
                return v
        _check_nm(n, m)
        return 0.0

    def to_osa(self, count: int | None = None) -> np.ndarray:
        if count is None:
            count = max((osa_index(n, m) for n, m, _ in self.coeffs), default=-1) + 1
        out = np.zeros(count)
        for n, m, v in self.coeffs:
            j = osa_index(n, m)
            if j >= count:
                if v != 0.0:
                    raise ValueError(f"mode j={j} does not fit in {count} entries")
                continue
            out[j] = v
        return out

    def with_added(self, n: int, m: int, delta_um: float) -> "ZernikeCoefficients":
        """Return a copy with ``delta_um`` added to mode (n, m)."""
        d = {(nn, mm): v for nn, mm, v in self.coeffs}
        d[(n, m)] = d.get((n, m), 0.0) + float(delta_um)
        return ZernikeCoefficients.from_mapping(d, self.pupil_diameter_mm)

    def __add__(self, other: "ZernikeCoefficients") -> "ZernikeCoefficients":
        if not isinstance(other, ZernikeCoefficients):
            return NotImplemented
        if not math.isclose(self.pupil_diameter_mm, other.pupil_diameter_mm, rel_tol=1e-12):
            raise ValueError("cannot add coefficients defined over different pupils")
        d = {(n, m): v for n, m, v in self.coeffs}
        for n, m, v in other.coeffs:
            d[(n, m)] = d.get((n, m), 0.0) + v
        return ZernikeCoefficients.from_mapping(d, self.pupil_diameter_mm)


@dataclass(frozen=True)
class PupilGrid:
    """Square pupil-plane sampling: ``size`` samples of ``pitch_mm`` each.

    The optical axis sits at index ``size // 2`` along both axes.
    """

    size: int
    pitch_mm: float
    pupil_diameter_mm: float

    def __post_init__(self):
        if self.size < 2 or self.pitch_mm <= 0 or self.pupil_diameter_mm <= 0:
            raise ValueError("invalid pupil grid")
        if self.size * self.pitch_mm < self.pupil_diameter_mm:
            raise ValueError("pupil grid does not cover the pupil diameter")

    @classmethod
    def covering(cls, samples_across: int, pupil_diameter_mm: float) -> "PupilGrid":
        """Grid with ``samples_across`` samples spanning exactly the pupil."""
        return cls(samples_across, pupil_diameter_mm / samples_across, pupil_diameter_mm)

    @property
    def coords_mm(self) -> np.ndarray:
        return (np.arange(self.size) - self.size // 2) * self.pitch_mm

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (p, q) coordinate meshes in mm; p varies along axis 1."""
        c = self.coords_mm
        return np.meshgrid(c, c)

    def polar(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (rho, theta, inside) with rho normalised to the pupil radius."""
        p, q = self.mesh()
        rho = np.hypot(p, q) / (self.pupil_diameter_mm / 2)
        return rho, np.arctan2(q, p), rho <= 1.0 + 1e-12


def wavefront_map(
    coeffs: ZernikeCoefficients, grid: PupilGrid, drop_tilt: bool = True
) -> np.ndarray:
    """Synthesize the wavefront (micrometres) on ``grid``; zero outside the pupil.

    Piston, tip and tilt are skipped by default because they only displace
    the PSF.
    """
    if not math.isclose(coeffs.pupil_diameter_mm, grid.pupil_diameter_mm, rel_tol=1e-9):
        raise ValueError(
            f"coefficients defined over {coeffs.pupil_diameter_mm} mm but grid pupil is "
            f"{grid.pupil_diameter_mm} mm; rescale_pupil first"
        )
    rho, theta, inside = grid.polar()
    r_in, t_in = rho[inside], theta[inside]
    w = np.zeros(int(inside.sum()))
    for n, m, v in coeffs.coeffs:
        if v == 0.0 or (drop_tilt and osa_index(n, m) in TILT_MODES):
            continue
        w += v * eval_polynomial(n, m, r_in, t_in)
    out = np.zeros(rho.shape)
    out[inside] = w
    return out


def defocus_to_coeff(defocus_D: float, pupil_diameter_mm: float) -> float:
    """Zernike defocus coefficient (um) equivalent to a dioptric defocus."""
    if not pupil_diameter_mm > 0:
        raise ValueError("pupil_diameter_mm must be > 0")
    return pupil_diameter_mm**2 / (16.0 * math.sqrt(3.0)) * defocus_D


@lru_cache(maxsize=16)
def _disc_quadrature(order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Exact for polynomial integrands up to degree 2*order over the unit disc.
    n_r = order + 2
    n_t = 2 * order + 3
    x, w = np.polynomial.legendre.leggauss(n_r)
    rho = np.sqrt((x + 1) / 2)  # Gauss-Legendre in rho^2 absorbs the rho dA factor
    w_r = w / 4
    theta = 2 * np.pi * np.arange(n_t) / n_t
    R, T = np.meshgrid(rho, theta, indexing="ij")
    W = np.repeat(w_r[:, None], n_t, axis=1) * (2 * np.pi / n_t)
    return R.ravel(), T.ravel(), W.ravel() / np.pi


def rescale_pupil(coeffs: ZernikeCoefficients, new_diameter_mm: float) -> ZernikeCoefficients:
    """Re-expand a wavefront over a smaller concentric pupil.

    The wavefront is restricted to the new pupil and projected back onto
    Zernike modes of the same maximum order with disc quadrature.  Shrinking
    a radial polynomial never raises its degree, so the projection is exact.
    """
    old = coeffs.pupil_diameter_mm
    if not 0 < new_diameter_mm <= old * (1 + 1e-12):
        raise ValueError(
            f"can only shrink the pupil: {old} mm -> {new_diameter_mm} mm is not allowed"
        )
    if math.isclose(new_diameter_mm, old, rel_tol=1e-12):
        return ZernikeCoefficients(coeffs.coeffs, new_diameter_mm)
    order = coeffs.max_order
    rho, theta, weight = _disc_quadrature(order)
    scale = new_diameter_mm / old
    values = np.zeros_like(rho)
    for n, m, v in coeffs.coeffs:
        values += v * eval_polynomial(n, m, rho * scale, theta)
    out = []
    for n in range(order + 1):
        for m in range(-n, n + 1, 2):
            c = float(np.sum(weight * values * eval_polynomial(n, m, rho, theta)))
            out.append((n, m, c))
    return ZernikeCoefficients(tuple(out), new_diameter_mm)
